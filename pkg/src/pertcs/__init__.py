"""Basis Pursuit recovery under a perturbed measurement matrix and noisy observations.

Submodules: ``model`` (problem data, head/tail split, measured budgets),
``spectral`` (restricted isometry constants), ``bounds`` (stability
constants and conditions), ``solvers`` (BP, reference solver, oracle least
squares), ``ensembles`` (random matrices and signals), ``experiments``
(recovery sweeps) and ``cli``.
"""

from ._backend import BACKEND
from .errors import BudgetError, ConditionViolation, PreconditionError, RankDeficientError
from .model import HeadTailSplit, PerturbationBudget, PerturbedProblem, head_tail_split, measure_budget

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BudgetError",
    "ConditionViolation",
    "HeadTailSplit",
    "PerturbationBudget",
    "PerturbedProblem",
    "PreconditionError",
    "RankDeficientError",
    "head_tail_split",
    "measure_budget",
]
