"""Basis Pursuit with a perturbed decoding matrix, and oracle least squares.

``solve_bp`` solves

    minimize ||z||_1  subject to  ||A_hat z - b_hat||_2 <= eps

by ADMM on the splitting ``u = z`` (l1 shrinkage), ``w = A_hat z`` (projection
onto the l2 ball around ``b_hat``). Periodically the current support and signs
are "polished": on a fixed support the problem has a closed-form KKT point,
and a dual vector built from it gives a duality-gap certificate. A solution
is reported ``converged`` only when that certificate meets the tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .errors import PreconditionError, RankDeficientError
from .model import head_tail_split
from .spectral import spectral_norm

LS_RANK_RTOL = 1e-10
# residuals below this (relative to 1 + ||b||) are roundoff of an exact fit
FIT_RTOL = 1e-12


@dataclass(frozen=True)
class BpOptions:
    feas_rtol: float = 1e-9
    obj_rtol: float = 1e-7
    max_iter: int = 50_000
    # penalty relative to max|A^T b| / ||A||^2; fixed, since residual balancing
    # made the iteration oscillate on small-entry supports
    rho: float = 10.0
    relax: float = 1.6
    polish_every: int = 20


@dataclass(frozen=True)
class BpSolution:
    z_star: np.ndarray
    objective: float
    residual: float
    iterations: int
    converged: bool
    kkt_residuals: tuple  # (primal infeasibility, dual infeasibility, duality gap)
    dual: np.ndarray | None = field(default=None, repr=False)
    method: str = "admm"

    def as_dict(self):
        return {
            "z": self.z_star.tolist(),
            "objective": self.objective,
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "kkt_residuals": list(self.kkt_residuals),
            "method": self.method,
        }


@dataclass(frozen=True)
class LsSolution:
    z_sharp: np.ndarray
    support: tuple
    residual: float
    normal_residual: float
    bp: BpSolution | None = field(default=None, repr=False)

    def as_dict(self):
        d = {
            "z": self.z_sharp.tolist(),
            "support": list(self.support),
            "residual": self.residual,
            "normal_residual": self.normal_residual,
        }
        if self.bp is not None:
            d["bp"] = {k: v for k, v in self.bp.as_dict().items() if k != "z"}
        return d


def _check_inputs(A_hat, b_hat, eps_prime):
    A = np.asarray(A_hat, dtype=np.float64)
    b = np.asarray(b_hat, dtype=np.float64)
    if A.ndim != 2 or b.ndim != 1 or A.shape[0] != b.size:
        raise ValueError(f"dimension mismatch: A_hat {A.shape}, b_hat {b.shape}")
    if not np.all(np.isfinite(A)) or not np.all(np.isfinite(b)):
        raise ValueError("non-finite input")
    if not (np.isfinite(eps_prime) and eps_prime >= 0):
        raise PreconditionError(f"eps_prime={eps_prime} must be >= 0", condition="eps' >= 0")
    return A, b, float(eps_prime)


def _soft(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _certificate(A, b, eps, z, y):
    """KKT residuals for primal z and (unscaled) dual y; y is rescaled if needed."""
    residual = float(np.linalg.norm(A @ z - b))
    p_inf = max(0.0, residual - eps)
    if y is None:
        return residual, (p_inf, np.inf, np.inf), None
    dn = float(np.max(np.abs(A.T @ y))) if y.size else 0.0
    d_inf = max(0.0, dn - 1.0)
    if dn > 1.0:
        y = y / dn
    dual_obj = float(b @ y - eps * np.linalg.norm(y))
    gap = float(np.abs(z).sum() - dual_obj)
    return residual, (p_inf, d_inf, gap), y


def _polish(A, b, eps, S, signs, y_hint):
    """Closed-form KKT point on support S with sign pattern ``signs``.

    With the ball constraint active the multiplier solves a scalar equation
    and the dual is ``Q w + res0 / t`` (``w = R^-T signs``), which avoids
    dividing an eps-sized residual by t. When b lies in the range of A_S up
    to roundoff the fit residual is taken as exactly zero; for eps = 0, or
    when the ball point is not dual feasible, the primal is the exact fit and
    the dual is the minimum-norm solution of ``A_S^T y = signs`` (or the hint
    corrected onto that affine set). Entries may come out zero but never with
    the opposite sign. Whatever is returned is only trusted after
    ``_certificate``.
    """
    m, n = A.shape
    k = S.size
    if k == 0 or k > m:
        return None
    AS = A[:, S]
    Q, R = np.linalg.qr(AS)
    d = np.abs(np.diag(R))
    if d.min() <= LS_RANK_RTOL * d.max():
        return None
    Qtb = Q.T @ b
    res0 = b - Q @ Qtb
    rr = float(np.linalg.norm(res0))
    exact_fit = rr <= FIT_RTOL * (1.0 + np.linalg.norm(b))
    if exact_fit:
        res0 = np.zeros_like(res0)
        rr = 0.0
    w = solve_triangular(R, signs, trans="T")  # R^-T s
    y_min = Q @ w
    if eps > 0.0:
        if rr >= eps:
            return None
        t = np.sqrt(eps * eps - rr * rr) / np.linalg.norm(w)
        if t > 0.0:  # eps**2 can underflow
            zS = solve_triangular(R, Qtb - t * w)
            y = y_min + res0 / t
            if np.all(zS * signs >= 0) and (
                not exact_fit or np.max(np.abs(A.T @ y)) <= 1.0 + 1e-12
            ):
                z = np.zeros(n)
                z[S] = zS
                return z, y
        if not exact_fit:
            return None
    elif not exact_fit:
        return None
    zS = solve_triangular(R, Qtb)
    if np.any(zS * signs < 0):
        return None
    z = np.zeros(n)
    z[S] = zS
    y = y_min
    if y_hint is not None and np.max(np.abs(A.T @ y)) > 1.0:
        y = y_hint + Q @ solve_triangular(R, signs - AS.T @ y_hint, trans="T")
    return z, y


def _zero_solution(n, b, eps):
    return BpSolution(
        z_star=np.zeros(n), objective=0.0, residual=float(np.linalg.norm(b)), iterations=0,
        converged=True, kkt_residuals=(0.0, 0.0, 0.0), dual=np.zeros(b.size), method="trivial",
    )


def solve_bp(A_hat, b_hat, eps_prime, opts=None):
    """Minimize ``||z||_1`` subject to ``||A_hat z - b_hat||_2 <= eps_prime``.

    Returns the first certified point: primal infeasibility at most
    ``feas_rtol (1 + ||b_hat||)`` and duality gap at most
    ``obj_rtol (1 + ||z||_1)``. If that is not reached within ``max_iter``
    iterations the best iterate is returned with ``converged=False``.
    """
    opts = opts or BpOptions()
    A, b, eps = _check_inputs(A_hat, b_hat, eps_prime)
    m, n = A.shape
    nb = float(np.linalg.norm(b))
    if eps >= nb:
        return _zero_solution(n, b, eps)
    a = spectral_norm(A)
    if a == 0.0:
        raise PreconditionError(
            "A_hat is zero and b_hat lies outside the constraint ball",
            condition="feasible set must be nonempty",
        )
    feas_tol = opts.feas_rtol * (1.0 + nb)

    As = A / a
    bs = b / a
    es = eps / a
    chol = cho_factor(np.eye(m) + As @ As.T)

    def solve_z(r):
        return r - As.T @ cho_solve(chol, As @ r)

    def project(v):
        d = v - bs
        dn = np.linalg.norm(d)
        return v if dn <= es else bs + d * (es / dn)

    # the soft threshold 1/rho tracks the scale of the solution
    scale = float(np.max(np.abs(As.T @ bs)))
    rho = opts.rho / scale if scale > 0.0 else opts.rho
    z = np.zeros(n)
    u = np.zeros(n)
    w = project(np.zeros(m))
    lam = np.zeros(n)
    nu = np.zeros(m)

    best = None  # (score, z, residual, kkt, y)

    def consider(zc, y):
        nonlocal best
        residual, kkt, y = _certificate(A, b, eps, zc, y)
        obj = float(np.abs(zc).sum())
        score = (kkt[0] > feas_tol, max(kkt[2], 0.0) / (1.0 + obj))
        if best is None or score < best[0]:
            best = (score, zc, residual, kkt, y)
        return kkt[0] <= feas_tol and kkt[2] <= opts.obj_rtol * (1.0 + obj)

    it = 0
    for it in range(1, opts.max_iter + 1):
        z = solve_z(u - lam + As.T @ (w - nu))
        Az = As @ z
        zr = opts.relax * z + (1.0 - opts.relax) * u
        Azr = opts.relax * Az + (1.0 - opts.relax) * w
        u = _soft(zr + lam, 1.0 / rho)
        w = project(Azr + nu)
        lam = lam + zr - u
        nu = nu + Azr - w

        if it % opts.polish_every == 0:
            y_hint = -rho * nu / a
            corr = A.T @ y_hint
            S_dual = np.flatnonzero(np.abs(corr) >= 1.0 - 1e-3)
            candidates = [
                (np.flatnonzero(u), np.sign(u[np.flatnonzero(u)])),
                (S_dual, np.sign(corr[S_dual])),
            ]
            done = False
            for S, signs in candidates:
                pol = _polish(A, b, eps, S, signs, y_hint)
                if pol is not None and consider(*pol):
                    done = True
                    break
            if done:
                break
    else:
        consider(u.copy(), -rho * nu / a)

    _, zc, residual, kkt, y = best
    obj = float(np.abs(zc).sum())
    converged = kkt[0] <= feas_tol and kkt[2] <= opts.obj_rtol * (1.0 + obj)
    return BpSolution(
        z_star=zc, objective=obj, residual=residual, iterations=it,
        converged=bool(converged), kkt_residuals=kkt, dual=y,
    )


def solve_bp_reference(A_hat, b_hat, eps_prime, *, max_size=10_000):
    """Independent solve of the same program for cross-checking small instances.

    eps = 0 is the linear program ``min sum(t)`` s.t. ``-t <= z <= t``,
    ``A z = b`` (HiGHS dual simplex); eps > 0 is a second-order cone program
    (cvxopt interior point).
    """
    A, b, eps = _check_inputs(A_hat, b_hat, eps_prime)
    m, n = A.shape
    if m * n > max_size:
        raise PreconditionError(
            f"reference solver limited to m*n <= {max_size}, got {m * n}",
            condition="small instance required for the reference solver",
        )
    nb = float(np.linalg.norm(b))
    if eps >= nb:
        return _zero_solution(n, b, eps)

    I = np.eye(n)
    G_abs = np.block([[I, -I], [-I, -I]])
    c = np.concatenate([np.zeros(n), np.ones(n)])
    if eps == 0.0:
        from scipy.optimize import linprog

        res = linprog(
            c, A_ub=G_abs, b_ub=np.zeros(2 * n), A_eq=np.hstack([A, np.zeros((m, n))]), b_eq=b,
            bounds=[(None, None)] * n + [(0, None)] * n, method="highs-ds",
            options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
        )
        z = res.x[:n] if res.x is not None else np.zeros(n)
        ok = res.status == 0
        y = np.asarray(res.eqlin.marginals) if ok else None
        method, iters = "lp-highs", int(res.nit)
    else:
        from cvxopt import matrix, solvers

        G = np.vstack([G_abs, np.zeros((1, 2 * n)), np.hstack([A, np.zeros((m, n))])])
        h = np.concatenate([np.zeros(2 * n), [eps], b])
        sol = None
        # tight tolerances occasionally break cvxopt's scaling update; back off
        for tol in (1e-10, 1e-9, 1e-8):
            try:
                sol = solvers.conelp(
                    matrix(c), matrix(G), matrix(h), dims={"l": 2 * n, "q": [m + 1], "s": []},
                    options={"show_progress": False, "abstol": tol, "reltol": tol,
                             "feastol": tol, "maxiters": 200},
                )
                break
            except ValueError:
                continue
        if sol is None:
            raise ArithmeticError("interior-point reference solver failed at every tolerance")
        z = np.array(sol["x"]).ravel()[:n]
        ok = sol["status"] in ("optimal", "unknown") and sol["x"] is not None
        zq = np.array(sol["z"]).ravel()[2 * n:] if sol["z"] is not None else None
        y = -zq[1:] if zq is not None else None
        method, iters = "socp-cvxopt", int(sol["iterations"])
    residual, kkt, y = _certificate(A, b, eps, z, y)
    if y is None:
        kkt = (kkt[0], np.nan, np.nan)
    return BpSolution(
        z_star=z, objective=float(np.abs(z).sum()), residual=residual, iterations=iters,
        converged=bool(ok), kkt_residuals=kkt, dual=y, method=method,
    )


def solve_oracle_ls(A_hat, b_hat, T):
    """Least squares on the known support T, zero-padded to length n."""
    A = np.asarray(A_hat, dtype=np.float64)
    b = np.asarray(b_hat, dtype=np.float64)
    if A.ndim != 2 or b.ndim != 1 or A.shape[0] != b.size:
        raise ValueError(f"dimension mismatch: A_hat {A.shape}, b_hat {b.shape}")
    m, n = A.shape
    T = np.unique(np.asarray(T, dtype=np.intp))
    if T.size == 0 or T[0] < 0 or T[-1] >= n:
        raise ValueError("support must be a nonempty subset of range(n)")
    if T.size > m:
        raise RankDeficientError(
            f"|T|={T.size} exceeds m={m}", condition="A_T must have full column rank"
        )
    AT = A[:, T]
    s = np.linalg.svd(AT, compute_uv=False)
    if s[0] == 0.0 or s[-1] <= LS_RANK_RTOL * s[0]:
        raise RankDeficientError(
            f"A_T is rank deficient (sigma_min/sigma_max = {s[-1] / s[0] if s[0] else 0:.3g})",
            condition="A_T must have full column rank",
        )
    Q, R = np.linalg.qr(AT)
    zT = solve_triangular(R, Q.T @ b)
    z = np.zeros(n)
    z[T] = zT
    r = b - AT @ zT
    return LsSolution(
        z_sharp=z,
        support=tuple(int(i) for i in T),
        residual=float(np.linalg.norm(r)),
        normal_residual=float(np.linalg.norm(AT.T @ r)),
    )


def solve_bp_then_refit(A_hat, b_hat, eps_prime, K, opts=None):
    """Use BP only to pick the K-term support, then refit by least squares."""
    bp = solve_bp(A_hat, b_hat, eps_prime, opts)
    T = head_tail_split(bp.z_star, K).support
    ls = solve_oracle_ls(A_hat, b_hat, T)
    return LsSolution(ls.z_sharp, ls.support, ls.residual, ls.normal_residual, bp=bp)
