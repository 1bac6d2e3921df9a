"""Randomized checks of the matrix inequalities behind the convergence proof.

Each ``verify_*`` function draws random instances, evaluates both sides of
one inequality and returns a :class:`PropertyReport`. A trial is a violation
when ``rhs - lhs < -tol * scale``, with ``scale = |rhs|`` (or 1 when the
right side is zero). Trial ``i`` of a suite always draws from
``make_rng(seed, suite_id, i)``, so results do not depend on how trials are
split across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .matfun import (
    ExponentPair,
    SymPsd,
    fro_norm,
    nuclear_norm,
    psd_power,
    schatten_norm,
    spectral_norm,
)
from .oracles import gaussian_grad
from .optimizer import Hyperparams, init, step
from .rng import make_rng
from .schedule import check_regime

EXACT_TOL = 1e-9
DIMS = (1, 2, 3, 6, 8)
PAIRS = (
    ExponentPair(2.0, 2.0),
    ExponentPair(4.0, 4.0 / 3.0),
    ExponentPair(1.0, math.inf),
    ExponentPair(math.inf, 1.0),
)


@dataclass
class PropertyReport:
    name: str
    trials: int
    violations: int = 0
    worst_slack: float = math.inf
    tolerance: float = EXACT_TOL
    seed: int = 0
    not_applicable: int = 0
    config: dict = field(default_factory=dict)

    def observe(self, lhs: float, rhs: float, scale: float | None = None) -> None:
        """Record one ``lhs <= rhs`` instance."""
        if scale is None:
            scale = abs(rhs) if rhs != 0 else 1.0
        slack = (rhs - lhs) / scale
        self.worst_slack = min(self.worst_slack, slack)
        if slack < -self.tolerance:
            self.violations += 1

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        out = asdict(self)
        if math.isinf(out["worst_slack"]):
            out["worst_slack"] = None
        return out


# Random instances ---------------------------------------------------------

MATRIX_KINDS = ("well", "ill", "rankdef")


def random_dim(rng: np.random.Generator, max_dim: int) -> int:
    return int(rng.choice([d for d in DIMS if d <= max_dim]))


def random_matrix(rng: np.random.Generator, m: int, n: int, kind: str = "well") -> np.ndarray:
    """Random ``m x n`` matrix with a controlled spectrum.

    ``ill`` spreads the singular values over six decades; ``rankdef`` zeroes
    about half of them (at least one when ``min(m, n) > 1``).
    """
    r = min(m, n)
    u, _ = np.linalg.qr(rng.standard_normal((m, m)))
    v, _ = np.linalg.qr(rng.standard_normal((n, n)))
    if kind == "well":
        s = rng.uniform(0.5, 2.0, r)
    elif kind == "ill":
        s = np.geomspace(1.0, 1e-6, r) if r > 1 else np.ones(1)
    elif kind == "rankdef":
        s = rng.uniform(0.5, 2.0, r)
        s[max(1, r // 2):] = 0.0
        if r == 1:
            s[:] = rng.uniform(0.5, 2.0)
    else:
        raise ValueError(f"unknown matrix kind {kind!r}")
    scale = 10.0 ** rng.uniform(-3, 3)
    return scale * (u[:, :r] * s) @ v[:, :r].T


def random_pd(rng: np.random.Generator, d: int, kind: str = "well") -> np.ndarray:
    """Random symmetric matrix, PD unless ``kind == "rankdef"``."""
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    if kind == "well":
        w = rng.uniform(0.5, 2.0, d)
    elif kind == "ill":
        w = np.geomspace(1.0, 1e-6, d) if d > 1 else np.ones(1)
        rng.shuffle(w)
    elif kind == "rankdef":
        w = rng.uniform(0.5, 2.0, d)
        w[max(1, d // 2):] = 0.0
    else:
        raise ValueError(f"unknown matrix kind {kind!r}")
    a = (q * (w * 10.0 ** rng.uniform(-3, 3))) @ q.T
    return 0.5 * (a + a.T)


def _kind(i: int, allow_rankdef: bool = True) -> str:
    kinds = MATRIX_KINDS if allow_rankdef else MATRIX_KINDS[:2]
    return kinds[i % len(kinds)]


# Suites -------------------------------------------------------------------

def verify_schatten_holder(trials: int = 500, max_dim: int = 8, seed: int = 0) -> PropertyReport:
    """``||A_1 ... A_t||_S1 <= prod ||A_i||_Sp_i`` for conjugate ``p_i``."""
    rep = PropertyReport("schatten_holder", trials, seed=seed, config={"max_dim": max_dim})
    for i in range(trials):
        rng = make_rng(seed, 1, i)
        d = random_dim(rng, max_dim)
        t = int(rng.integers(2, 4))
        weights = rng.dirichlet(np.ones(t))
        if i % 5 == 0:
            # One factor measured in the spectral norm.
            weights[int(rng.integers(t))] = 0.0
            weights /= weights.sum()
        exps = [math.inf if w == 0 else 1.0 / w for w in weights]
        mats = [random_matrix(rng, d, d, _kind(i + j)) for j in range(t)]
        prod = mats[0]
        for a in mats[1:]:
            prod = prod @ a
        rhs = math.prod(schatten_norm(a, p) for a, p in zip(mats, exps))
        rep.observe(nuclear_norm(prod), rhs)
    return rep


def verify_matrix_cauchy_schwarz(trials: int = 500, max_dim: int = 8, seed: int = 0) -> PropertyReport:
    """``||L^a M R^(1-a)||_op <= ||L M||_op^a ||M R||_op^(1-a)`` for PSD ``L``, ``R``."""
    rep = PropertyReport("matrix_cauchy_schwarz", trials, seed=seed, config={"max_dim": max_dim})
    for i in range(trials):
        rng = make_rng(seed, 2, i)
        m, n = random_dim(rng, max_dim), random_dim(rng, max_dim)
        alpha = (0.0, 1.0, float(rng.uniform()))[i % 3] if i < 30 else float(rng.uniform())
        l = SymPsd(random_pd(rng, m, _kind(i, False)))
        r = SymPsd(random_pd(rng, n, _kind(i + 1, False)))
        mm = random_matrix(rng, m, n, _kind(i))
        lhs = spectral_norm(psd_power(l, alpha).matrix @ mm @ psd_power(r, 1.0 - alpha).matrix)
        rhs = spectral_norm(l.matrix @ mm) ** alpha * spectral_norm(mm @ r.matrix) ** (1.0 - alpha)
        rep.observe(lhs, rhs)
    return rep


def verify_trace_root_subadd(trials: int = 500, max_dim: int = 8, seed: int = 0) -> PropertyReport:
    """``tr((X + Y)^(1/2)) <= tr(X^(1/2)) + tr(Y^(1/2))``."""
    rep = PropertyReport("trace_root_subadd", trials, seed=seed, config={"max_dim": max_dim})
    for i in range(trials):
        rng = make_rng(seed, 3, i)
        d = random_dim(rng, max_dim)
        x = random_pd(rng, d, _kind(i))
        y = random_pd(rng, d, _kind(i + 1))
        lhs = np.trace(psd_power(SymPsd(x + y), 0.5).matrix)
        rhs = np.trace(psd_power(SymPsd(x), 0.5).matrix) + np.trace(psd_power(SymPsd(y), 0.5).matrix)
        rep.observe(float(lhs), float(rhs))
    return rep


def verify_operator_monotone(trials: int = 500, max_dim: int = 8, seed: int = 0) -> PropertyReport:
    """``X <= Y`` implies ``X^t <= Y^t`` for ``t`` in [0, 1]."""
    rep = PropertyReport("operator_monotone", trials, seed=seed, config={"max_dim": max_dim})
    for i in range(trials):
        rng = make_rng(seed, 4, i)
        d = random_dim(rng, max_dim)
        t = (0.0, 1.0)[i] if i < 2 else float(rng.uniform())
        x = random_pd(rng, d, _kind(i, False))
        y = x + random_pd(rng, d, _kind(i + 1))
        yt = psd_power(SymPsd(y), t).matrix
        diff = yt - psd_power(SymPsd(x), t).matrix
        lam_min = float(np.linalg.eigvalsh(0.5 * (diff + diff.T))[0])
        rep.observe(0.0, lam_min, scale=spectral_norm(yt))
    return rep


def verify_operator_concave(trials: int = 500, max_dim: int = 8, seed: int = 0) -> PropertyReport:
    """``E[X^t] <= (E[X])^t`` for a random finite mixture of PD matrices."""
    rep = PropertyReport("operator_concave", trials, seed=seed, config={"max_dim": max_dim})
    for i in range(trials):
        rng = make_rng(seed, 5, i)
        d = random_dim(rng, max_dim)
        t = float(rng.uniform())
        k = int(rng.integers(2, 6))
        w = rng.dirichlet(np.ones(k))
        mats = [random_pd(rng, d, _kind(i + j, False)) for j in range(k)]
        mean_pow = sum(wi * psd_power(SymPsd(a), t).matrix for wi, a in zip(w, mats))
        pow_mean = psd_power(SymPsd(sum(wi * a for wi, a in zip(w, mats))), t).matrix
        diff = pow_mean - mean_pow
        lam_min = float(np.linalg.eigvalsh(0.5 * (diff + diff.T))[0])
        rep.observe(0.0, lam_min, scale=spectral_norm(pow_mean))
    return rep


def verify_agmg(trials: int = 1000, seed: int = 0) -> PropertyReport:
    """Weighted AM-GM: ``x^a y^b <= a x + b y`` with ``a + b = 1``."""
    rep = PropertyReport("weighted_am_gm", trials, seed=seed)
    for i in range(trials):
        rng = make_rng(seed, 6, i)
        x, y = 10.0 ** rng.uniform(-6, 6, 2)
        if i % 10 == 0:
            x = 0.0
        a = float(rng.uniform())
        rep.observe(x**a * y ** (1.0 - a), a * x + (1.0 - a) * y)
    return rep


def verify_norm_chain(trials: int = 500, seed: int = 0) -> PropertyReport:
    """``||A||_F <= ||A||_* <= sqrt(r) ||A||_F`` and ``||A||_* <= r ||A||_op``."""
    rep = PropertyReport("norm_chain", 3 * trials, tolerance=1e-10, seed=seed)
    for i in range(trials):
        rng = make_rng(seed, 7, i)
        m, n = random_dim(rng, 8), random_dim(rng, 8)
        a = random_matrix(rng, m, n, _kind(i))
        r = min(m, n)
        fro, nuc, op = fro_norm(a), nuclear_norm(a), spectral_norm(a)
        rep.observe(fro, nuc)
        rep.observe(nuc, math.sqrt(r) * fro)
        rep.observe(nuc, r * op)
    return rep


def verify_psd_nuclear_trace(trials: int = 500, seed: int = 0) -> PropertyReport:
    """Nuclear norm equals trace on PSD matrices (checked both ways)."""
    rep = PropertyReport("psd_nuclear_trace", 2 * trials, tolerance=1e-10, seed=seed)
    for i in range(trials):
        rng = make_rng(seed, 8, i)
        s = random_pd(rng, random_dim(rng, 8), _kind(i))
        nuc, tr = nuclear_norm(s), float(np.trace(s))
        rep.observe(nuc, tr, scale=abs(tr) or 1.0)
        rep.observe(tr, nuc, scale=abs(tr) or 1.0)
    return rep


# Optimizer-level suites ---------------------------------------------------

STREAM_KINDS = ("gaussian", "heavy_tailed", "constant", "bursts", "rank_one", "zeros")


def gradient_stream(rng: np.random.Generator, m: int, n: int, kind: str, steps: int):
    """Yield ``steps`` gradients of the requested character."""
    if kind == "constant":
        g = random_matrix(rng, m, n, "well")
        for _ in range(steps):
            yield g
    elif kind == "zeros":
        for _ in range(steps):
            yield np.zeros((m, n))
    elif kind == "gaussian":
        for _ in range(steps):
            yield rng.standard_normal((m, n))
    elif kind == "heavy_tailed":
        for _ in range(steps):
            yield rng.standard_t(1.5, (m, n))
    elif kind == "bursts":
        # Rare huge gradients between long quiet stretches. The spread is kept
        # to six decades: past ~8 the quiet directions of G^T G fall below the
        # rounding error of its burst directions, and the computed inverse root
        # no longer reflects the exact-arithmetic preconditioner.
        for _ in range(steps):
            scale = 10.0 ** rng.uniform(2, 3) if rng.uniform() < 0.05 else 10.0 ** rng.uniform(-3, 0)
            yield scale * rng.standard_normal((m, n))
    elif kind == "rank_one":
        u, v = rng.standard_normal(m), rng.standard_normal(n)
        for _ in range(steps):
            yield float(rng.standard_normal()) * np.outer(u, v)
    else:
        raise ValueError(f"unknown stream kind {kind!r}")


def _regime_moments(rng: np.random.Generator) -> tuple[float, float]:
    theta = float(rng.uniform(0.0, 1.0))
    beta = float(rng.uniform(theta, math.sqrt(theta)))
    return theta, beta


def verify_update_bound(
    trials: int = 100, max_dim: int = 8, steps: int = 200, seed: int = 0
) -> PropertyReport:
    """Every preconditioned step has spectral norm at most 2 when ``theta <= beta <= sqrt(theta)``."""
    rep = PropertyReport(
        "update_bound", 0, tolerance=1e-8, seed=seed,
        config={"trajectories": trials, "max_dim": max_dim, "steps": steps},
    )
    for i in range(trials):
        rng = make_rng(seed, 9, i)
        m, n = random_dim(rng, max_dim), random_dim(rng, max_dim)
        theta, beta = _regime_moments(rng)
        pq = PAIRS[i % len(PAIRS)]
        hyper = Hyperparams(
            eta=1e-2, theta=theta, beta=beta, lam=0.0,
            eps=10.0 ** rng.uniform(-12, -2), pq=pq,
        )
        kind = STREAM_KINDS[i % len(STREAM_KINDS)]
        state = init(rng.standard_normal((m, n)), hyper)
        for g in gradient_stream(rng, m, n, kind, steps):
            state, diag = step(state, g, hyper)
            rep.trials += 1
            rep.observe(diag.update_op_norm, 2.0, scale=1.0)
    return rep


@dataclass(frozen=True)
class ConfinementCase:
    hyper: Hyperparams
    steps: int
    nu: float
    x1: np.ndarray
    stream: str

    @property
    def bound(self) -> float:
        """``3 sqrt(nu) / K^(1/4)``, the confinement level for ``lam ||X_k||_op``."""
        return 3.0 * math.sqrt(self.nu) / self.steps**0.25


def sample_confinement_case(rng: np.random.Generator, max_dim: int = 6) -> ConfinementCase:
    """Draw parameters satisfying the confinement hypotheses with random slack.

    ``sqrt(nu) / K^(1/4)`` is log-uniform on [1e-2, 1]; the low end covers the
    values the convergence theorem's own settings produce (at most 1/sqrt(1152)).
    """
    K = int(rng.integers(50, 401))
    c = 10.0 ** rng.uniform(-2.0, 0.0)
    nu = c**2 * math.sqrt(K)
    lam = 10.0 ** rng.uniform(-3, 1)
    eta = float(rng.uniform(0.2, 1.0)) * math.sqrt(nu) / (2.0 * K**1.25 * lam)
    theta, beta = _regime_moments(rng)
    m, n = random_dim(rng, max_dim), random_dim(rng, max_dim)
    x1 = rng.standard_normal((m, n))
    x1 *= float(rng.uniform(0.0, 1.0)) * c / lam / max(spectral_norm(x1), 1e-300)
    pq = PAIRS[int(rng.integers(len(PAIRS)))]
    hyper = Hyperparams(eta=eta, theta=theta, beta=beta, lam=lam, eps=10.0 ** rng.uniform(-12, -2), pq=pq)
    stream = ("outward",) + STREAM_KINDS
    return ConfinementCase(hyper, K, nu, x1, stream[int(rng.integers(len(stream)))])


def confinement_trajectory(case: ConfinementCase, rng: np.random.Generator) -> np.ndarray | None:
    """``lam ||X_k||_op`` for ``k = 1..K``, or ``None`` when the hypotheses fail.

    The ``outward`` stream feeds ``-X_k`` scaled to unit norm, pushing the
    iterate away from the origin as hard as the update allows.
    """
    if not check_regime(case.hyper, case.steps, case.nu, case.x1).all_passed:
        return None
    lam = case.hyper.lam
    state = init(case.x1, case.hyper)
    m, n = case.x1.shape
    out = [lam * spectral_norm(state.x)]
    stream = None if case.stream == "outward" else gradient_stream(rng, m, n, case.stream, case.steps)
    for _ in range(case.steps - 1):
        if stream is None:
            norm = fro_norm(state.x)
            g = -state.x / norm if norm > 0 else rng.standard_normal((m, n))
        else:
            g = next(stream)
        state, diag = step(state, g, case.hyper)
        out.append(lam * diag.x_op_norm)
    return np.asarray(out)


def verify_weight_confinement(trials: int = 50, seed: int = 0) -> PropertyReport:
    """``lam ||X_k||_op <= 3 sqrt(nu) / K^(1/4)`` along runs meeting the hypotheses.

    Where that level is below 1 it implies ``||X_k||_op < 1/lam``, which is
    checked as well (one extra observation per step).
    """
    rep = PropertyReport("weight_confinement", 0, tolerance=1e-8, seed=seed, config={"configurations": trials})
    implied = 0
    for i in range(trials):
        rng = make_rng(seed, 10, i)
        case = sample_confinement_case(rng)
        scaled = confinement_trajectory(case, rng)
        if scaled is None:
            rep.not_applicable += 1
            continue
        check_inverse = case.bound < 1.0
        implied += check_inverse
        for v in scaled:
            rep.trials += 1
            rep.observe(float(v), case.bound, scale=1.0)
            if check_inverse:
                rep.trials += 1
                rep.observe(float(v), 1.0, scale=1.0)
                if not v < 1.0:
                    rep.violations += 1
    rep.config["inverse_lambda_checked"] = implied
    return rep


# Monte Carlo suite --------------------------------------------------------

def verify_gaussian_covariance(
    m: int, n: int, mu: float, xi: float, samples: int = 100_000, seed: int = 0, n_se: float = 5.0
) -> PropertyReport:
    """Second moments of i.i.d. Gaussian matrices against the closed form.

    Checks ``lam_min(E[G G^T]) >= xi^2 E||G||_F^2 / (m (xi^2 + mu^2))``, the same
    for ``G^T G``, and ``E[G G^T] = n mu^2 11^T + n xi^2 I`` entry-wise. Slack is
    measured in standard errors. The standard error of ``lam_min`` is bounded
    through Weyl's inequality by the Frobenius norm of the entry-wise standard
    errors, since ``|lam_min(C_hat) - lam_min(C)| <= ||C_hat - C||_F``.
    """
    rep = PropertyReport(
        "gaussian_covariance", 0, tolerance=n_se, seed=seed,
        config={"m": m, "n": n, "mu": mu, "xi": xi, "samples": samples, "units": "standard errors"},
    )
    rng = make_rng(seed, 11, m, n)
    g = gaussian_grad(m, n, mu, xi, rng, size=samples)
    fro_sq = np.sum(g * g, axis=(1, 2))
    fro_mean = float(fro_sq.mean())
    fro_se = float(fro_sq.std(ddof=1)) / math.sqrt(samples)

    for side, prods, dim, other in (
        ("left", np.einsum("kij,klj->kil", g, g), m, n),
        ("right", np.einsum("kji,kjl->kil", g, g), n, m),
    ):
        mean = prods.mean(axis=0)
        se = prods.std(axis=0, ddof=1) / math.sqrt(samples)
        closed = other * mu**2 * np.ones((dim, dim)) + other * xi**2 * np.eye(dim)
        z = (mean - closed) / se
        # Margins are in standard errors, so a violation is |z| > n_se.
        for zij in np.abs(z).ravel():
            rep.trials += 1
            rep.observe(float(zij), 0.0, scale=1.0)

        c = xi**2 / (dim * (xi**2 + mu**2))
        lam_min = float(np.linalg.eigvalsh(0.5 * (mean + mean.T))[0])
        margin = lam_min - c * fro_mean
        margin_se = math.sqrt(float(np.sum(se * se)) + (c * fro_se) ** 2)
        rep.trials += 1
        rep.observe(-margin / margin_se, 0.0, scale=1.0)
        rep.config[f"{side}_lam_min"] = lam_min
        rep.config[f"{side}_bound"] = c * fro_mean
        rep.config[f"{side}_margin_se"] = margin / margin_se
    return rep


# Rate diagnostics ---------------------------------------------------------

class UndefinedSlope(ValueError):
    pass


def fit_rate_slope(trace) -> tuple[float, float]:
    """Least-squares slope of log running-average nuclear gradient norm vs log k.

    Uses the latter half of the records; returns ``(slope, r_squared)``.
    """
    records = list(trace)
    if len(records) < 10:
        raise UndefinedSlope(f"need at least 10 records, got {len(records)}")
    tail = records[len(records) // 2:]
    k = np.log(np.array([r.k for r in tail], dtype=float))
    y = np.array([r.run_avg_grad_nuclear for r in tail], dtype=float)
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        raise UndefinedSlope("running averages must be positive and finite")
    y = np.log(y)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0 or np.ptp(k) == 0.0:
        raise UndefinedSlope("trace is constant; slope is undefined")
    slope, intercept = np.polyfit(k, y, 1)
    resid = y - (slope * k + intercept)
    return float(slope), 1.0 - float(np.sum(resid**2)) / ss_tot


# Orchestration ------------------------------------------------------------

def _suite_table(trials: int, seed: int) -> dict:
    return {
        "schatten_holder": (verify_schatten_holder, dict(trials=trials, max_dim=8, seed=seed)),
        "matrix_cauchy_schwarz": (verify_matrix_cauchy_schwarz, dict(trials=trials, max_dim=8, seed=seed)),
        "trace_root_subadd": (verify_trace_root_subadd, dict(trials=trials, max_dim=8, seed=seed)),
        "operator_monotone": (verify_operator_monotone, dict(trials=trials, max_dim=8, seed=seed)),
        "operator_concave": (verify_operator_concave, dict(trials=trials, max_dim=8, seed=seed)),
        "weighted_am_gm": (verify_agmg, dict(trials=2 * trials, seed=seed)),
        "norm_chain": (verify_norm_chain, dict(trials=trials, seed=seed)),
        "psd_nuclear_trace": (verify_psd_nuclear_trace, dict(trials=trials, seed=seed)),
        "update_bound": (verify_update_bound, dict(trials=max(1, trials // 5), max_dim=8, steps=200, seed=seed)),
        "weight_confinement": (verify_weight_confinement, dict(trials=max(1, trials // 10), seed=seed)),
        **{
            f"gaussian_covariance_m{d}_mu{mu:g}_xi{xi:g}": (
                verify_gaussian_covariance,
                dict(m=d, n=d, mu=mu, xi=xi, samples=100_000, seed=seed),
            )
            for d in (2, 4, 8)
            for mu, xi in ((0.0, 1.0), (1.0, 1.0), (2.0, 0.5))
        },
    }


def _run_suite(item):
    fn, kwargs = item
    return fn(**kwargs)


def verify_all(trials: int = 500, seed: int = 0, workers: int = 1) -> list[PropertyReport]:
    """Run every suite; ``trials`` scales the per-suite trial counts."""
    table = _suite_table(trials, seed)
    items = list(table.values())
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_suite, items))
    return [_run_suite(item) for item in items]
