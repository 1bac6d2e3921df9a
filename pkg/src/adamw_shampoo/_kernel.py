"""Compiled core of one optimizer iteration.

Python-level overhead dominates for the small matrices this package targets
(a 2x2 toy problem run for a million steps), so the arithmetic of a step is
fused into one numba function. ``matfun.precondition`` computes the same
direction with plain numpy and serves as the reference in the test suite.
"""

from __future__ import annotations

import numba
import numpy as np

from .matfun import PSD_TOL

OK = 0
LEFT_NOT_PSD = 1
RIGHT_NOT_PSD = 2
LEFT_SINGULAR = 3
RIGHT_SINGULAR = 4
NONFINITE_GRAD = 5


@numba.njit(cache=True)
def _inverse_root(a, eps, inv_exp):
    # (a + eps I)^(-inv_exp/2), shifting the clamped spectrum of a so that an
    # eps below a's rounding error still gives an invertible factor.
    # Status 1 = not PSD, 2 = singular.
    w, v = np.linalg.eigh(a)
    scale = max(abs(w[0]), abs(w[-1]))
    if w[0] < -PSD_TOL * scale:
        return np.empty_like(a), 1
    w = np.maximum(w, 0.0) + eps
    if w[0] <= 0.0:
        return np.empty_like(a), 2
    return (v * w ** (-0.5 * inv_exp)) @ v.T, 0


@numba.njit(cache=True)
def _op_norm(a):
    gram = a.T @ a if a.shape[1] <= a.shape[0] else a @ a.T
    return np.sqrt(max(np.linalg.eigvalsh(gram)[-1], 0.0))


@numba.njit(cache=True)
def _advance(x, m, l, r, g, theta, beta, lam, eta, eps, inv_p, inv_q, refresh, l_root, r_root):
    rows, cols = x.shape
    if not np.all(np.isfinite(g)):
        return x, m, l, r, x, l_root, r_root, NONFINITE_GRAD
    m_new = theta * m + (1.0 - theta) * g
    l_new = beta * l + (1.0 - beta) * (g @ g.T)
    r_new = beta * r + (1.0 - beta) * (g.T @ g)
    l_new = 0.5 * (l_new + l_new.T)
    r_new = 0.5 * (r_new + r_new.T)

    if refresh:
        if inv_p == 0.0:
            l_root = np.eye(rows)
        else:
            l_root, s = _inverse_root(l_new, eps, inv_p)
            if s != 0:
                return x, m_new, l_new, r_new, x, l_root, r_root, LEFT_NOT_PSD if s == 1 else LEFT_SINGULAR
        if inv_q == 0.0:
            r_root = np.eye(cols)
        else:
            r_root, s = _inverse_root(r_new, eps, inv_q)
            if s != 0:
                return x, m_new, l_new, r_new, x, l_root, r_root, RIGHT_NOT_PSD if s == 1 else RIGHT_SINGULAR

    if inv_p == 0.0:
        update = m_new @ r_root
    elif inv_q == 0.0:
        update = l_root @ m_new
    else:
        update = l_root @ m_new @ r_root
    x_new = (1.0 - lam * eta) * x - eta * update
    return x_new, m_new, l_new, r_new, update, l_root, r_root, OK


@numba.njit(cache=True)
def fused_step(x, m, l, r, g, theta, beta, lam, eta, eps, inv_p, inv_q, want_norms):
    """One iteration with fresh roots; returns op norms of the update and new iterate."""
    rows, cols = x.shape
    x_new, m_new, l_new, r_new, update, _, _, status = _advance(
        x, m, l, r, g, theta, beta, lam, eta, eps, inv_p, inv_q,
        True, np.empty((rows, rows)), np.empty((cols, cols)),
    )
    upd_norm = x_norm = np.nan
    if want_norms and status == OK:
        upd_norm = _op_norm(update)
        x_norm = _op_norm(x_new)
    return x_new, m_new, l_new, r_new, upd_norm, x_norm, status


@numba.njit(cache=True)
def fused_step_cached(x, m, l, r, g, theta, beta, lam, eta, eps, inv_p, inv_q, refresh, l_root, r_root):
    """Like ``fused_step`` but reuses ``l_root``/``r_root`` unless ``refresh``."""
    x_new, m_new, l_new, r_new, update, l_root, r_root, status = _advance(
        x, m, l, r, g, theta, beta, lam, eta, eps, inv_p, inv_q, refresh, l_root, r_root,
    )
    upd_norm = x_norm = np.nan
    if status == OK:
        upd_norm = _op_norm(update)
        x_norm = _op_norm(x_new)
    return x_new, m_new, l_new, r_new, l_root, r_root, upd_norm, x_norm, status
