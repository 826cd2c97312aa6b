"""Perturbed observation model and signal head/tail geometry.

The completely perturbed model observes ``b_hat = A x + e`` and decodes with
``A_hat = A + E``. Everything here is real-valued float64 and immutable once
constructed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Optional

import numpy as np

from .errors import BudgetError

MEASURED = "measured"
ESTIMATED = "estimated"
ASSUMED = "assumed"


def _frozen(a, ndim, name):
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class HeadTailSplit:
    """Best K-term approximation of a signal and its tail ratios.

    ``support`` always holds the K selected indices (0-based, sorted); when the
    signal has fewer than K nonzeros some of them carry zeros. ``r_K`` and
    ``s_K`` are the l2 and l1 tail norms relative to the l2 head norm.
    """

    head: np.ndarray
    tail: np.ndarray
    support: tuple
    r_K: float
    s_K: float
    degenerate: bool = False

    @property
    def K(self):
        return len(self.support)

    @property
    def head_norm(self):
        return float(np.linalg.norm(self.head))

    @property
    def tail_l1(self):
        return float(np.abs(self.tail).sum())

    @property
    def tail_l2(self):
        return float(np.linalg.norm(self.tail))

    @property
    def effective_support(self):
        return tuple(i for i in self.support if self.head[i] != 0.0)

    @property
    def is_sparse(self):
        return not np.any(self.tail)


def head_tail_split(x, K):
    """Split ``x`` into its K largest-magnitude entries and the remainder.

    Magnitude ties go to the lowest index.

    >>> s = head_tail_split([3.0, 1.0, 0.0, 0.0], 1)
    >>> s.support, s.r_K, s.s_K
    ((0,), 0.3333333333333333, 0.3333333333333333)
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("x must be a vector")
    n = x.size
    if not 1 <= K <= n:
        raise ValueError(f"K={K} outside [1, {n}]")
    if not np.all(np.isfinite(x)):
        raise ValueError("x has non-finite entries")

    order = np.argsort(-np.abs(x), kind="stable")
    T = np.sort(order[:K])
    head = np.zeros_like(x)
    head[T] = x[T]
    tail = x - head
    head.setflags(write=False)
    tail.setflags(write=False)

    hn = np.linalg.norm(head)
    if hn == 0.0:
        return HeadTailSplit(head, tail, tuple(int(i) for i in T), 0.0, 0.0, degenerate=True)
    r = float(np.linalg.norm(tail) / hn)
    s = float(np.abs(tail).sum() / hn)
    return HeadTailSplit(head, tail, tuple(int(i) for i in T), r, s)


@dataclass(frozen=True)
class PerturbationBudget:
    """Relative perturbation bounds, each required to lie in [0, 1).

    ``provenance`` maps each field name to ``measured``, ``estimated`` or
    ``assumed``. When ``eps_A_K`` could only be bracketed, ``eps_A_K_interval``
    holds ``(lower, upper)`` and ``eps_A_K`` is the upper end.
    """

    eps_A: float
    eps_A_K: float
    eps_A_2K: float
    eps_b: float
    K: Optional[int] = None
    provenance: dict = field(default_factory=dict)
    eps_A_K_interval: Optional[tuple] = None
    eps_A_2K_interval: Optional[tuple] = None

    def __post_init__(self):
        for name in ("eps_A", "eps_A_K", "eps_A_2K", "eps_b"):
            v = getattr(self, name)
            if not (np.isfinite(v) and 0.0 <= v < 1.0):
                raise BudgetError(
                    f"{name}={v!r} outside [0, 1)",
                    condition=f"relative perturbation {name} must lie in [0, 1)",
                )
        if not self.provenance:
            object.__setattr__(
                self, "provenance",
                {k: ASSUMED for k in ("eps_A", "eps_A_K", "eps_A_2K", "eps_b")},
            )

    @classmethod
    def assumed(cls, eps_A=0.0, eps_A_K=None, eps_A_2K=None, eps_b=0.0, K=None):
        """User-supplied bounds; missing restricted values default to ``eps_A``.

        The full-norm ratio always dominates the restricted ones, so falling
        back to it is the safe choice.
        """
        return cls(
            eps_A=eps_A,
            eps_A_K=eps_A if eps_A_K is None else eps_A_K,
            eps_A_2K=eps_A if eps_A_2K is None else eps_A_2K,
            eps_b=eps_b,
            K=K,
        )

    def as_dict(self):
        return {
            "eps_A": self.eps_A,
            "eps_A_K": self.eps_A_K,
            "eps_A_2K": self.eps_A_2K,
            "eps_b": self.eps_b,
            "K": self.K,
            "provenance": dict(self.provenance),
            "eps_A_K_interval": self.eps_A_K_interval,
            "eps_A_2K_interval": self.eps_A_2K_interval,
        }


@dataclass(frozen=True)
class PerturbedProblem:
    """The tuple (A, E, e, x) with derived b = A x and b_hat = A x + e."""

    A: np.ndarray
    E: Optional[np.ndarray] = None
    e: Optional[np.ndarray] = None
    x: Optional[np.ndarray] = None

    def __post_init__(self):
        A = _frozen(self.A, 2, "A")
        object.__setattr__(self, "A", A)
        m, n = A.shape
        if self.E is not None:
            E = _frozen(self.E, 2, "E")
            if E.shape != A.shape:
                raise ValueError(f"E shape {E.shape} does not match A shape {A.shape}")
            object.__setattr__(self, "E", E)
        if self.e is not None:
            e = _frozen(self.e, 1, "e")
            if e.size != m:
                raise ValueError(f"e has length {e.size}, expected {m}")
            object.__setattr__(self, "e", e)
        if self.x is not None:
            x = _frozen(self.x, 1, "x")
            if x.size != n:
                raise ValueError(f"x has length {x.size}, expected {n}")
            object.__setattr__(self, "x", x)

    @property
    def shape(self):
        return self.A.shape

    @property
    def A_hat(self):
        return self.A if self.E is None else self.A + self.E

    @property
    def b(self):
        if self.x is None:
            raise ValueError("ground-truth x is required for b = A x")
        return self.A @ self.x

    @property
    def b_hat(self):
        b = self.b
        return b if self.e is None else b + self.e

    def multiplicative_noise(self):
        """``||E x||_2 + ||e||_2``, the true total perturbation."""
        total = 0.0
        if self.E is not None:
            total += float(np.linalg.norm(self.E @ self.x))
        if self.e is not None:
            total += float(np.linalg.norm(self.e))
        return total


def _restricted_norm_ratio(E, A, K, budget):
    """Exact or bracketed ``||E||^(K) / ||A||^(K)``.

    Returns ``(value_used, interval_or_None, provenance)``.
    """
    from .spectral import extremal_singular_k

    n = A.shape[1]
    K = min(K, n)
    if comb(n, K) <= budget:
        num = extremal_singular_k(E, K, budget=budget).sigma_max_K
        den = extremal_singular_k(A, K, budget=budget).sigma_max_K
        if den == 0.0:
            raise BudgetError(
                f"||A||^({K}) is zero", condition="restricted norm of A must be nonzero"
            )
        return num / den, None, MEASURED
    # sampled sigma_max is a lower bound on the true restricted norm
    e_lo = extremal_singular_k(E, K, budget=budget).sigma_max_K
    a_lo = extremal_singular_k(A, K, budget=budget).sigma_max_K
    norm_E = float(np.linalg.norm(E, 2))
    norm_A = float(np.linalg.norm(A, 2))
    if a_lo == 0.0:
        raise BudgetError(
            f"sampled ||A||^({K}) is zero", condition="restricted norm of A must be nonzero"
        )
    lower, upper = e_lo / norm_A, norm_E / a_lo
    return upper, (lower, upper), ESTIMATED


def measure_budget(problem, K, *, budget=2_000_000):
    """Measure the relative perturbations of ``problem`` at sparsity K.

    Restricted ratios are exact when all K-column submatrices can be
    enumerated within ``budget``; otherwise the safe upper end of a sampled
    bracket is used and flagged ``estimated``. The 2K ratio uses
    ``min(2K, n)`` columns.
    """
    A = problem.A
    m, n = A.shape
    if not 1 <= K <= n:
        raise ValueError(f"K={K} outside [1, {n}]")
    norm_A = float(np.linalg.norm(A, 2))
    if norm_A == 0.0:
        raise BudgetError("||A||_2 is zero", condition="||A||_2 must be nonzero")

    prov = {}
    intervals = {}
    if problem.E is None or not np.any(problem.E):
        eps_A = eps_A_K = eps_A_2K = 0.0
        prov.update(eps_A=MEASURED, eps_A_K=MEASURED, eps_A_2K=MEASURED)
    else:
        E = problem.E
        eps_A = float(np.linalg.norm(E, 2)) / norm_A
        prov["eps_A"] = MEASURED
        eps_A_K, intervals["eps_A_K"], prov["eps_A_K"] = _restricted_norm_ratio(E, A, K, budget)
        eps_A_2K, intervals["eps_A_2K"], prov["eps_A_2K"] = _restricted_norm_ratio(
            E, A, 2 * K, budget
        )

    if problem.e is None or not np.any(problem.e):
        eps_b = 0.0
    else:
        if problem.x is None:
            raise BudgetError(
                "x is required to measure eps_b", condition="||b||_2 must be known"
            )
        norm_b = float(np.linalg.norm(problem.b))
        if norm_b == 0.0:
            raise BudgetError("||b||_2 is zero", condition="||b||_2 must be nonzero")
        eps_b = float(np.linalg.norm(problem.e)) / norm_b
    prov["eps_b"] = MEASURED

    for name, v in (("eps_A", eps_A), ("eps_A_K", eps_A_K), ("eps_A_2K", eps_A_2K), ("eps_b", eps_b)):
        if v >= 1.0:
            raise BudgetError(
                f"measured {name}={v:.6g} is not below 1",
                condition=f"relative perturbation {name} must be below 1",
            )
    return PerturbationBudget(
        eps_A=eps_A,
        eps_A_K=eps_A_K,
        eps_A_2K=eps_A_2K,
        eps_b=eps_b,
        K=K,
        provenance=prov,
        eps_A_K_interval=intervals.get("eps_A_K"),
        eps_A_2K_interval=intervals.get("eps_A_2K"),
    )
