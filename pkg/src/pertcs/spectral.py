"""Spectral norms, K-column extremal singular values and restricted isometry constants.

Exhaustive enumeration works on the Gram matrix ``M.T @ M``: the eigenvalues
of each principal K x K block are the squared singular values of the matching
K-column submatrix. The winning supports are then re-evaluated with a dense
SVD so the reported singular values do not inherit the squaring error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from . import _backend

DEFAULT_BUDGET = 2_000_000
RANK_RTOL = 1e-12
# Gram eigenvalues carry ~K*eps*max|G| absolute error, so "nonzero" is judged
# at a coarser singular-value tolerance than RANK_RTOL.
GRAM_NONZERO_RTOL = 1e-7

EXACT = "exact"
SAMPLED = "sampled"


@dataclass(frozen=True)
class RicReport:
    """Extremal K-column singular values and the resulting RIC.

    In ``sampled`` mode ``sigma_max_K`` is a lower bound, ``sigma_min_K`` an
    upper bound, and therefore ``delta_K`` a lower bound on the true values.
    ``sigma_min_nonzero_K`` is the smallest *nonzero* singular value over all
    K-column submatrices (``None`` if every one vanishes); ``sigma_min_K`` is
    the true minimum and is what enters ``delta_K``.
    """

    K: int
    delta_K: float
    sigma_max_K: float
    sigma_min_K: float
    sigma_min_nonzero_K: float | None
    mode: str
    submatrices_examined: int
    argmax_support: tuple
    argmin_support: tuple
    argmin_nonzero_support: tuple | None = None

    @property
    def exact(self):
        return self.mode == EXACT

    def as_dict(self):
        return {
            "K": self.K,
            "delta_K": self.delta_K,
            "sigma_max_K": self.sigma_max_K,
            "sigma_min_K": self.sigma_min_K,
            "sigma_min_nonzero_K": self.sigma_min_nonzero_K,
            "mode": self.mode,
            "submatrices_examined": self.submatrices_examined,
            "argmax_support": list(self.argmax_support),
            "argmin_support": list(self.argmin_support),
        }


def spectral_norm(M):
    """Largest singular value of ``M`` (0 for the zero matrix)."""
    M = np.asarray(M, dtype=np.float64)
    if M.size == 0:
        return 0.0
    return float(np.linalg.svd(M, compute_uv=False)[0])


def _svals(M, S):
    return np.linalg.svd(M[:, list(S)], compute_uv=False)


def _sigma_min_of(M, S):
    if len(S) > M.shape[0]:
        return 0.0
    return float(_svals(M, S)[-1])


def _sigma_nonzero_of(M, S, tol):
    s = _svals(M, S)
    s = s[s > tol]
    return float(s[-1]) if s.size else None


def _delta(smax, smin):
    return max(smax * smax - 1.0, 1.0 - smin * smin, 0.0)


def _gram_scale(G, K):
    return float(np.max(np.diag(G))) * K


def _exact(M, K, G):
    scale = _gram_scale(G, K)
    zero_tol = (GRAM_NONZERO_RTOL ** 2) * scale
    lam_max, amax, lam_min, amin, lam_nz, anz, count = _backend.gram_extremes(
        np.ascontiguousarray(G), K, zero_tol
    )
    smax = float(_svals(M, amax)[0])
    smin = _sigma_min_of(M, amin)
    snz = None
    if anz is not None:
        snz = _sigma_nonzero_of(M, anz, GRAM_NONZERO_RTOL * np.sqrt(scale))
    return RicReport(
        K=K,
        delta_K=_delta(smax, smin),
        sigma_max_K=smax,
        sigma_min_K=smin,
        sigma_min_nonzero_K=snz,
        mode=EXACT,
        submatrices_examined=int(count),
        argmax_support=tuple(amax),
        argmin_support=tuple(amin),
        argmin_nonzero_support=None if anz is None else tuple(anz),
    )


def _block_eigs(G, supports):
    S = np.asarray(supports, dtype=np.intp)
    return np.linalg.eigvalsh(G[S[:, :, None], S[:, None, :]])


def _greedy_pass(G, start, n, pick_max):
    # one sweep over positions; at each, take the best single swap if it improves
    S = list(start)
    w = _block_eigs(G, [S])[0]
    best = w[-1] if pick_max else w[0]
    examined = 1
    for pos in range(len(S)):
        outside = [j for j in range(n) if j not in S]
        if not outside:
            break
        cands = []
        for j in outside:
            c = S.copy()
            c[pos] = j
            cands.append(sorted(c))
        w = _block_eigs(G, cands)
        examined += len(cands)
        vals = w[:, -1] if pick_max else w[:, 0]
        i = int(np.argmax(vals) if pick_max else np.argmin(vals))
        if (vals[i] > best) if pick_max else (vals[i] < best):
            best = vals[i]
            S = cands[i]
    return tuple(S), examined


def _sampled(M, K, G, rng):
    n = M.shape[1]
    n_samples = 10 * n
    supports = np.array([np.sort(rng.choice(n, size=K, replace=False)) for _ in range(n_samples)])
    w = _block_eigs(G, supports)
    i_max = int(np.argmax(w[:, -1]))
    i_min = int(np.argmin(w[:, 0]))
    amax, ex1 = _greedy_pass(G, supports[i_max], n, pick_max=True)
    amin, ex2 = _greedy_pass(G, supports[i_min], n, pick_max=False)

    scale = _gram_scale(G, K)
    nz = np.where(w > (GRAM_NONZERO_RTOL ** 2) * scale, w, np.inf).min(axis=1)
    i_nz = int(np.argmin(nz))
    smax = float(_svals(M, amax)[0])
    smin = _sigma_min_of(M, amin)
    snz = None
    anz = None
    if np.isfinite(nz[i_nz]):
        anz = tuple(int(v) for v in supports[i_nz])
        snz = _sigma_nonzero_of(M, anz, GRAM_NONZERO_RTOL * np.sqrt(scale))
    return RicReport(
        K=K,
        delta_K=_delta(smax, smin),
        sigma_max_K=smax,
        sigma_min_K=smin,
        sigma_min_nonzero_K=snz,
        mode=SAMPLED,
        submatrices_examined=n_samples + ex1 + ex2,
        argmax_support=tuple(int(v) for v in amax),
        argmin_support=tuple(int(v) for v in amin),
        argmin_nonzero_support=anz,
    )


def extremal_singular_k(M, K, budget=DEFAULT_BUDGET, *, seed=0):
    """Largest and smallest singular values over all K-column submatrices.

    Exhaustive when ``C(n, K) <= budget``; otherwise ``10 n`` random supports
    followed by one greedy swap pass from the best ones, reported with
    ``mode="sampled"``.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("M must be a matrix")
    n = M.shape[1]
    if not 1 <= K <= n:
        raise ValueError(f"K={K} outside [1, {n}]")
    G = M.T @ M
    if comb(n, K) <= budget:
        return _exact(M, K, G)
    from .ensembles import make_rng

    return _sampled(M, K, G, make_rng(seed, "ric-sampling", K))


def ric(M, K, budget=DEFAULT_BUDGET, *, seed=0):
    """Restricted isometry constant ``delta_K = max(smax^2 - 1, 1 - smin^2)``."""
    return extremal_singular_k(M, K, budget, seed=seed)


def restricted_rank(M, k):
    """Maximum rank over k-column submatrices, i.e. ``min(k, rank(M))``."""
    M = np.asarray(M, dtype=np.float64)
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return min(k, int(np.sum(s > RANK_RTOL * s[0])))


def rank_preserving_limit(delta_2K):
    """Sufficient bound on ``||E||^(2K)`` implied by the 2K RIC condition.

    Any perturbation whose 2K-column norm stays below ``2**0.25 - sqrt(1 +
    delta_2K)`` is strictly smaller than ``sqrt(1 - delta_2K)``.
    """
    return 2.0 ** 0.25 - np.sqrt(1.0 + delta_2K)


@dataclass(frozen=True)
class RankCheckRow:
    k: int
    sigma_max_E: float
    sigma_min_A: float
    mode: str
    separated: bool | None
    rank_A: int
    rank_A_hat: int

    @property
    def ranks_equal(self):
        return self.rank_A == self.rank_A_hat


@dataclass(frozen=True)
class RankPreservation:
    verdict: str
    rows: list = field(default_factory=list)

    @property
    def ranks_equal(self):
        return all(r.ranks_equal for r in self.rows)

    def as_dict(self):
        return {
            "verdict": self.verdict,
            "ranks_equal": self.ranks_equal,
            "rows": [
                {
                    "k": r.k,
                    "sigma_max_E": r.sigma_max_E,
                    "sigma_min_A": r.sigma_min_A,
                    "mode": r.mode,
                    "separated": r.separated,
                    "rank_A": r.rank_A,
                    "rank_A_hat": r.rank_A_hat,
                }
                for r in self.rows
            ],
        }


def rank_preservation_check(A, E, K, budget=DEFAULT_BUDGET):
    """Check ``sigma_max^(k)(E) < sigma_min^(k)(A)`` for every ``k <= 2K``.

    The verdict is ``holds`` when every k separates with exact spectra,
    ``fails`` when some k provably does not, and ``undecided`` when only
    sampled brackets are available and they overlap.
    """
    A = np.asarray(A, dtype=np.float64)
    E = np.asarray(E, dtype=np.float64)
    if A.shape != E.shape:
        raise ValueError(f"shape mismatch: A {A.shape}, E {E.shape}")
    A_hat = A + E
    rows = []
    for k in range(1, min(2 * K, A.shape[1]) + 1):
        rE = extremal_singular_k(E, k, budget)
        rA = extremal_singular_k(A, k, budget)
        if rE.exact and rA.exact:
            mode = EXACT
            separated = rE.sigma_max_K < rA.sigma_min_K
        else:
            mode = SAMPLED
            # sampled: sigma_max(E) is a lower bound, sigma_min(A) an upper bound
            separated = False if rE.sigma_max_K >= rA.sigma_min_K else None
        rows.append(
            RankCheckRow(
                k=k,
                sigma_max_E=rE.sigma_max_K,
                sigma_min_A=rA.sigma_min_K,
                mode=mode,
                separated=separated,
                rank_A=restricted_rank(A, k),
                rank_A_hat=restricted_rank(A_hat, k),
            )
        )
    if any(r.separated is False for r in rows):
        verdict = "fails"
    elif all(r.separated for r in rows):
        verdict = "holds"
    else:
        verdict = "undecided"
    return RankPreservation(verdict, rows)
