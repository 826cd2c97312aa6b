"""Closed-form recovery bounds for Basis Pursuit and oracle least squares under
matrix perturbation E and additive noise e.

All inputs are relative budgets (``eps_*``), restricted isometry constants
(``delta_*``) and the head/tail ratios of the signal. Functions raise
:class:`~pertcs.errors.ConditionViolation` when a hypothesis that makes the
bound finite or valid is false.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from math import sqrt

import numpy as np

from .errors import BudgetError, ConditionViolation, PreconditionError
from .spectral import DEFAULT_BUDGET, ric, spectral_norm

SQRT2 = sqrt(2.0)
FOURTH_ROOT_2 = 2.0 ** 0.25

COND1 = "RIC condition delta_2K < sqrt(2)/(1 + eps_A^(2K))^2 - 1"
COND2 = "signal tail condition r_K + s_K/sqrt(K) < 1/kappa_K"


def _unit_interval(name, v):
    if not (np.isfinite(v) and 0.0 <= v < 1.0):
        raise BudgetError(f"{name}={v!r} outside [0, 1)", condition=f"{name} must lie in [0, 1)")


def perturbed_ric_bound(delta_K, eps_A_K):
    """Worst-case RIC of ``A + E``: ``(1 + delta_K)(1 + eps_A_K)^2 - 1``."""
    _unit_interval("delta_K", delta_K)
    _unit_interval("eps_A_K", eps_A_K)
    return (1.0 + delta_K) * (1.0 + eps_A_K) ** 2 - 1.0


@dataclass(frozen=True)
class Verdict:
    """Outcome of a strict inequality ``lhs < threshold``."""

    ok: bool
    lhs: float
    threshold: float

    @property
    def margin(self):
        return self.threshold - self.lhs

    def __bool__(self):
        return self.ok


def condition1_threshold(eps_A_2K):
    return SQRT2 / (1.0 + eps_A_2K) ** 2 - 1.0


def condition1(delta_2K, eps_A_2K):
    """RIC hypothesis of the stability theorem.

    When it holds the perturbed worst-case RIC stays below ``sqrt(2) - 1``;
    for ``eps_A_2K >= 2**0.25 - 1`` it fails for every ``delta_2K >= 0``.
    """
    if delta_2K < 0 or eps_A_2K < 0:
        raise ValueError("delta_2K and eps_A_2K must be nonnegative")
    t = condition1_threshold(eps_A_2K)
    return Verdict(bool(delta_2K < t), float(delta_2K), float(t))


def condition2(r_K, s_K, K, kappa_K):
    """Tail hypothesis ``r_K + s_K/sqrt(K) < 1/kappa_K`` (always true if sparse)."""
    if kappa_K < 1.0:
        raise ValueError(f"kappa_K={kappa_K} < 1")
    lhs = r_K + s_K / sqrt(K)
    t = 1.0 / kappa_K
    return Verdict(bool(lhs < t), float(lhs), float(t))


@dataclass(frozen=True)
class MatrixConditioning:
    """RIC-derived constants of the unperturbed matrix A.

    ``exact`` is False when the deltas came from sampled (lower-bound) RIC
    estimates; theorem evaluation only accepts that with an explicit opt-in
    at construction.
    """

    delta_K: float
    delta_2K: float
    spectral_norm_A: float
    exact: bool = True

    def __post_init__(self):
        if not 0.0 <= self.delta_K < 1.0:
            raise ConditionViolation(
                f"delta_K={self.delta_K:.6g} must lie in [0, 1) for a finite condition number",
                condition="delta_K < 1 (K-column submatrices of A must have full rank)",
            )
        if self.delta_2K < 0 or self.spectral_norm_A < 0:
            raise ValueError("negative conditioning input")

    @property
    def kappa_K(self):
        return sqrt(1.0 + self.delta_K) / sqrt(1.0 - self.delta_K)

    @property
    def alpha(self):
        return self.spectral_norm_A / sqrt(1.0 - self.delta_K)

    @classmethod
    def from_matrix(cls, A, K, budget=DEFAULT_BUDGET, *, allow_sampled=False):
        n = np.shape(A)[1]
        rK = ric(A, K, budget)
        r2K = ric(A, min(2 * K, n), budget)
        exact = rK.exact and r2K.exact
        if not exact and not allow_sampled:
            raise PreconditionError(
                "only sampled RIC estimates are available; they are lower bounds and would "
                "make the recovery conditions optimistic (pass allow_sampled=True to override)",
                condition="exact restricted isometry constants required",
            )
        return cls(rK.delta_K, r2K.delta_K, spectral_norm(A), exact)

    def as_dict(self):
        d = asdict(self)
        d.update(kappa_K=self.kappa_K, alpha=self.alpha)
        return d


def _tail_denominator(cond, split):
    K = split.K
    v = condition2(split.r_K, split.s_K, K, cond.kappa_K)
    if not v.ok:
        raise ConditionViolation(
            f"r_K + s_K/sqrt(K) = {v.lhs:.6g} is not below 1/kappa_K = {v.threshold:.6g}",
            condition=COND2,
        )
    return 1.0 - cond.kappa_K * v.lhs


def relative_total_noise(budget, cond, split):
    """``eps'/||b||``: the bracket of the total noise parameter.

    With an unperturbed matrix this is just ``eps_b`` and the tail condition
    is not needed.
    """
    if budget.eps_A == 0.0 and budget.eps_A_K == 0.0:
        return budget.eps_b
    den = _tail_denominator(cond, split)
    num = budget.eps_A_K * cond.kappa_K + budget.eps_A * cond.alpha * split.r_K
    return num / den + budget.eps_b


def total_noise(budget, cond, split, norm_b=None, *, norm_b_hat=None):
    """Radius ``eps'`` that provably covers ``||E x||_2 + ||e||_2``.

    Pass ``norm_b`` (clean observation) or ``norm_b_hat``; in the latter case
    ``||b||_2`` is replaced by its upper bound ``||b_hat||_2 / (1 - eps_b)``.
    """
    if (norm_b is None) == (norm_b_hat is None):
        raise ValueError("give exactly one of norm_b and norm_b_hat")
    if norm_b is None:
        norm_b = norm_b_hat / (1.0 - budget.eps_b)
    if not norm_b > 0:
        raise PreconditionError("||b||_2 must be positive", condition="||b||_2 != 0")
    return relative_total_noise(budget, cond, split) * norm_b


@dataclass(frozen=True)
class BpConstants:
    delta_hat_max_2K: float
    C0: float
    C1: float
    alpha_hat: float
    rho_hat: float


def stability_constants(delta_2K, eps_A_2K):
    """``C0``, ``C1`` of the BP error bound, with the proof's alpha/rho constants.

    The closed forms are cross-checked against ``2(1 + rho)/(1 - rho)`` and
    ``2 alpha/(1 - rho)`` evaluated at the worst-case perturbed RIC.
    """
    v = condition1(delta_2K, eps_A_2K)
    if not v.ok:
        raise ConditionViolation(
            f"delta_2K = {delta_2K:.6g} is not below {v.threshold:.6g}", condition=COND1
        )
    d = perturbed_ric_bound(delta_2K, eps_A_2K)
    den = 1.0 - (SQRT2 + 1.0) * d
    C0 = 2.0 * (1.0 + (SQRT2 - 1.0) * d) / den
    C1 = 4.0 * sqrt(1.0 + delta_2K) * (1.0 + eps_A_2K) / den
    alpha_hat = 2.0 * sqrt(1.0 + d) / (1.0 - d)
    rho_hat = SQRT2 * d / (1.0 - d)
    C0_alt = 2.0 * (1.0 + rho_hat) / (1.0 - rho_hat)
    C1_alt = 2.0 * alpha_hat / (1.0 - rho_hat)
    if not (np.isclose(C0, C0_alt, rtol=1e-12) and np.isclose(C1, C1_alt, rtol=1e-12)):
        raise ArithmeticError(f"constant identities disagree: {C0} vs {C0_alt}, {C1} vs {C1_alt}")
    return BpConstants(d, C0, C1, alpha_hat, rho_hat)


def bp_error_bound(consts, split):
    """``C0 ||x - x_K||_1 / sqrt(K) + C1 eps'`` for a :class:`StabilityConstants`."""
    if not (consts.cond1_ok and consts.cond2_ok):
        failed = COND1 if not consts.cond1_ok else COND2
        raise ConditionViolation("recovery bound undefined", condition=failed)
    if consts.eps_prime is None:
        raise ValueError("eps_prime missing")
    return consts.C0 * split.tail_l1 / sqrt(split.K) + consts.C1 * consts.eps_prime


def image_upper_bound(cond, x, K):
    """``sqrt(1 + delta_K) (||x||_2 + ||x||_1/sqrt(K))`` bounds ``||A x||_2``."""
    x = np.asarray(x, dtype=np.float64)
    return sqrt(1.0 + cond.delta_K) * (np.linalg.norm(x) + np.abs(x).sum() / sqrt(K))


@dataclass(frozen=True)
class LowerBound:
    value: float
    guaranteed: bool


def image_lower_bound(cond, split):
    """Lower bound on ``||A x||_2`` from the head and tail of x.

    ``guaranteed`` is False when the tail condition fails; the value is then
    still returned but may be nonpositive and carries no guarantee.
    """
    if split.head_norm == 0.0:
        raise PreconditionError("head of x is zero", condition="||x_K||_2 > 0")
    K = split.K
    kappa = cond.kappa_K
    value = sqrt(1.0 - cond.delta_K) * (
        split.head_norm - kappa * (split.tail_l2 + split.tail_l1 / sqrt(K))
    )
    ok = condition2(split.r_K, split.s_K, K, kappa).ok
    return LowerBound(float(value), ok)


@dataclass(frozen=True)
class LsConstants:
    C2: float
    zeta_prime: float
    ls_assumption_ok: bool
    assumption_source: str


def ls_assumption_sufficient(budget, delta_2K):
    """Budget-only sufficient check for the least-squares perturbation assumption.

    Given the RIC condition, the E part holds whenever
    ``eps_A_2K < 2**0.25 - 1``, and ``eps_b <= (sqrt(2)(1 + eps_A_2K)^2 - 1)^(1/2)``
    forces ``eps_b < sqrt(1 - delta_2K)/sqrt(1 + delta_2K)``, which covers the
    e part.
    """
    eps = budget.eps_A_2K
    if not condition1(delta_2K, eps).ok or eps >= FOURTH_ROOT_2 - 1.0:
        return False
    return budget.eps_b <= sqrt(SQRT2 * (1.0 + eps) ** 2 - 1.0)


def ls_assumption_direct(A_T, E_T, eps_b):
    """``max(||E_T||/||A_T||, eps_b) < sigma_min(A_T)/sigma_max(A_T)``."""
    s = np.linalg.svd(np.asarray(A_T, dtype=np.float64), compute_uv=False)
    if s[0] == 0.0:
        return False
    ratio = spectral_norm(E_T) / s[0]
    return max(ratio, eps_b) < s[-1] / s[0]


def ls_constants(cond, budget, split, norm_b, *, A_T=None, E_T=None):
    """``C2 = 1/sqrt(1 - delta_K)`` and the oracle least-squares noise level.

    ``zeta' = (kappa eps_A^(K) / (1 - kappa (r_K + s_K/sqrt(K))) + eps_b) ||b||``;
    the additive term keeps it consistent with the sparse-case bound
    ``C2 (kappa eps_A^(K) + eps_b) ||b||``.
    """
    den = _tail_denominator(cond, split)
    C2 = 1.0 / sqrt(1.0 - cond.delta_K)
    zeta = (cond.kappa_K * budget.eps_A_K / den + budget.eps_b) * norm_b
    if A_T is not None and E_T is not None:
        ok, src = ls_assumption_direct(A_T, E_T, budget.eps_b), "direct"
    else:
        ok, src = ls_assumption_sufficient(budget, cond.delta_2K), "sufficient"
    return LsConstants(C2, zeta, bool(ok), src)


def ls_error_bound(C2, zeta_prime, split):
    """``||x - x_K||_2 + C2 zeta'``."""
    return split.tail_l2 + C2 * zeta_prime


def noise_level(budget, cond, norm_b):
    """``(kappa eps_A^(K) + eps_b) ||b||``, shared by the sparse BP and LS bounds."""
    return (cond.kappa_K * budget.eps_A_K + budget.eps_b) * norm_b


def scaled_random_eps(beta, delta_R_K, delta_K):
    """``eps_A^(K)`` for ``E = beta R``: ``beta sqrt(1 + delta_R_K)/sqrt(1 - delta_K)``."""
    if not 0.0 < beta < 1.0:
        raise BudgetError(f"beta={beta} outside (0, 1)", condition="0 < beta < 1")
    _unit_interval("delta_R_K", delta_R_K)
    _unit_interval("delta_K", delta_K)
    return beta * sqrt(1.0 + delta_R_K) / sqrt(1.0 - delta_K)


@dataclass(frozen=True)
class StabilityConstants:
    """Every constant and verdict of the perturbed recovery analysis.

    Fields that need inputs which were not supplied are ``None``.
    """

    delta_hat_max_K: float | None
    delta_hat_max_2K: float | None
    alpha_hat: float | None
    rho_hat: float | None
    C0: float | None
    C1: float | None
    eps_prime: float | None
    C2: float | None
    zeta_prime: float | None
    cond1_ok: bool
    cond1_margin: float
    cond2_ok: bool | None
    cond2_margin: float | None
    ls_assumption_ok: bool | None
    kappa_K: float | None = None
    alpha_A: float | None = None
    noise_level: float | None = None
    bp_bound: float | None = None
    ls_bound: float | None = None

    def as_dict(self):
        return asdict(self)


def evaluate(budget, *, delta_2K, cond=None, split=None, norm_b=None, A_T=None, E_T=None):
    """Assemble :class:`StabilityConstants` from whatever inputs are available.

    Condition failures are reported in the verdict fields rather than raised;
    the dependent constants are then left ``None``.
    """
    v1 = condition1(delta_2K, budget.eps_A_2K)
    out = dict(
        delta_hat_max_K=None, delta_hat_max_2K=None, alpha_hat=None, rho_hat=None,
        C0=None, C1=None, eps_prime=None, C2=None, zeta_prime=None,
        cond1_ok=v1.ok, cond1_margin=v1.margin, cond2_ok=None, cond2_margin=None,
        ls_assumption_ok=None,
    )
    if delta_2K < 1.0:
        out["delta_hat_max_2K"] = perturbed_ric_bound(delta_2K, budget.eps_A_2K)
    if v1.ok:
        bc = stability_constants(delta_2K, budget.eps_A_2K)
        out.update(C0=bc.C0, C1=bc.C1, alpha_hat=bc.alpha_hat, rho_hat=bc.rho_hat)
    if cond is not None:
        out["delta_hat_max_K"] = perturbed_ric_bound(cond.delta_K, budget.eps_A_K)
        out.update(kappa_K=cond.kappa_K, alpha_A=cond.alpha)
        if split is not None:
            v2 = condition2(split.r_K, split.s_K, split.K, cond.kappa_K)
            out.update(cond2_ok=v2.ok, cond2_margin=v2.margin)
            if v2.ok:
                C2 = 1.0 / sqrt(1.0 - cond.delta_K)
                out["C2"] = C2
                if norm_b is not None:
                    out["eps_prime"] = total_noise(budget, cond, split, norm_b)
                    ls = ls_constants(cond, budget, split, norm_b, A_T=A_T, E_T=E_T)
                    out.update(zeta_prime=ls.zeta_prime, ls_assumption_ok=ls.ls_assumption_ok)
                    out["ls_bound"] = ls_error_bound(C2, ls.zeta_prime, split)
        if norm_b is not None:
            out["noise_level"] = noise_level(budget, cond, norm_b)
    sc = StabilityConstants(**out)
    if sc.cond1_ok and sc.cond2_ok and sc.eps_prime is not None:
        sc = StabilityConstants(**{**out, "bp_bound": bp_error_bound(sc, split)})
    return sc
