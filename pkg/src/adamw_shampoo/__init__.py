"""AdamW-style Shampoo with one- and two-sided preconditioning."""

from .matfun import ExponentPair, SymPsd
from .optimizer import Hyperparams, OptimizerState, StepDiagnostics, init, run, step
from .oracles import ToyProblem, quadratic_oracle

__version__ = "0.1.0"
