import numpy as np
import pytest

from oracles import l1_lp_objective
from pertcs.errors import PreconditionError, RankDeficientError
from pertcs.solvers import (
    BpOptions, solve_bp, solve_bp_reference, solve_bp_then_refit, solve_oracle_ls,
)


def _instance(rng, m=8, n=16, K=2, noise=0.01):
    A = rng.normal(size=(m, n)) / np.sqrt(m)
    x = np.zeros(n)
    x[rng.choice(n, K, replace=False)] = rng.normal(size=K)
    return A, x, A @ x + noise * rng.normal(size=m)


def test_identity_system_returns_observation():
    b = np.array([1.0, -2.0, 0.0, 0.5])
    for solver in (solve_bp, solve_bp_reference):
        sol = solver(np.eye(4), b, 0.0)
        np.testing.assert_allclose(sol.z_star, b, atol=1e-8)
        assert sol.converged


def test_large_radius_gives_zero():
    b = np.array([3.0, 4.0])
    sol = solve_bp(np.eye(2), b, 5.0)
    assert sol.iterations == 0 and sol.converged and not np.any(sol.z_star)
    assert solve_bp_reference(np.eye(2), b, 6.0).objective == 0.0


def test_negative_radius_rejected():
    with pytest.raises(PreconditionError):
        solve_bp(np.eye(2), np.ones(2), -1e-3)
    with pytest.raises(PreconditionError):
        solve_bp_reference(np.eye(2), np.ones(2), -1e-3)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        solve_bp(np.eye(3), np.ones(2), 0.0)


def test_reference_size_guard(rng):
    with pytest.raises(PreconditionError):
        solve_bp_reference(rng.normal(size=(101, 100)), rng.normal(size=101), 0.1)


def test_equality_case_matches_independent_lp(rng):
    for _ in range(10):
        A, _, b = _instance(rng)
        sol = solve_bp(A, b, 0.0)
        assert sol.converged
        assert sol.objective == pytest.approx(l1_lp_objective(A, b), rel=1e-6)


@pytest.mark.parametrize("eps", [0.0, 0.01, 0.1])
def test_admm_agrees_with_reference(rng, eps):
    for _ in range(8):
        A, _, b = _instance(rng)
        ours, ref = solve_bp(A, b, eps), solve_bp_reference(A, b, eps)
        assert ours.converged and ref.converged
        assert abs(ours.objective - ref.objective) <= 1e-6 * max(ref.objective, 1e-12)
        assert ours.residual <= eps + 1e-9 * (1 + np.linalg.norm(b))


def test_solution_no_worse_than_truth(rng):
    for _ in range(10):
        A, x, b = _instance(rng, m=20, n=50, K=4)
        eps = float(np.linalg.norm(b - A @ x))
        sol = solve_bp(A, b, eps)
        assert sol.converged
        assert sol.objective <= np.abs(x).sum() + 1e-7 * (1 + sol.objective)


def test_scale_equivariance(rng):
    A, _, b = _instance(rng, m=12, n=30, K=3)
    base = solve_bp(A, b, 0.02)
    for c in (1e-3, 7.5, 1e3):
        scaled = solve_bp(A, c * b, c * 0.02)
        assert scaled.converged
        np.testing.assert_allclose(scaled.z_star, c * base.z_star, rtol=1e-5, atol=1e-6 * c)


def test_iteration_cap_reports_nonconvergence(rng):
    A, _, b = _instance(rng, m=20, n=60, K=6)
    sol = solve_bp(A, b, 0.0, BpOptions(max_iter=3, polish_every=100))
    assert not sol.converged and sol.iterations == 3


def test_kkt_certificate_fields(rng):
    A, _, b = _instance(rng)
    sol = solve_bp(A, b, 0.05)
    primal, dual, gap = sol.kkt_residuals
    assert primal <= 1e-9 * (1 + np.linalg.norm(b))
    assert gap <= 1e-7 * (1 + sol.objective)
    assert np.max(np.abs(A.T @ sol.dual)) <= 1 + 1e-9


def test_oracle_ls_recovers_sparse_signal(rng):
    A, x, _ = _instance(rng, m=20, n=40, K=5, noise=0.0)
    T = np.flatnonzero(x)
    ls = solve_oracle_ls(A, A @ x, T)
    np.testing.assert_allclose(ls.z_sharp, x, atol=1e-12)
    assert ls.support == tuple(int(t) for t in T)


def test_oracle_ls_ignores_noise_orthogonal_to_support(rng):
    A, x, _ = _instance(rng, m=20, n=40, K=5, noise=0.0)
    T = np.flatnonzero(x)
    Q, _ = np.linalg.qr(A[:, T], mode="complete")
    e = Q[:, 5:] @ rng.normal(size=15)
    ls = solve_oracle_ls(A, A @ x + e, T)
    np.testing.assert_allclose(ls.z_sharp, x, atol=1e-12)
    assert ls.normal_residual <= 1e-9 * np.linalg.norm(A @ x + e)


def test_oracle_ls_rank_checks(rng):
    A = rng.normal(size=(6, 8))
    A[:, 3] = A[:, 1]
    with pytest.raises(RankDeficientError):
        solve_oracle_ls(A, rng.normal(size=6), [1, 3])
    with pytest.raises(RankDeficientError):
        solve_oracle_ls(A, rng.normal(size=6), range(7))
    with pytest.raises(ValueError):
        solve_oracle_ls(A, rng.normal(size=6), [9])


def test_refit_in_exact_recovery_regime(rng):
    A, x, _ = _instance(rng, m=30, n=60, K=4, noise=0.0)
    ls = solve_bp_then_refit(A, A @ x, 0.0, 4)
    assert ls.support == tuple(int(t) for t in np.flatnonzero(x))
    np.testing.assert_allclose(ls.z_sharp, x, atol=1e-10)
    assert ls.bp is not None and ls.bp.converged


def test_refit_tie_takes_lowest_index():
    A = np.eye(4)
    b = np.array([1.0, 2.0, 2.0, 2.0])
    ls = solve_bp_then_refit(A, b, 0.0, 2)
    assert ls.support == (1, 2)


@pytest.mark.parametrize("eps", [1e-313, 1e-17, 1e-14, 1e-10, 1e-6])
def test_tiny_radius_converges_like_equality(rng, eps):
    A, _, b = _instance(rng)
    ref = solve_bp(A, b, 0.0)
    sol = solve_bp(A, b, eps)
    assert sol.converged and sol.iterations < 5_000
    assert sol.residual <= eps + 1e-9 * (1 + np.linalg.norm(b))
    # weak duality with the certified eps = 0 dual: f(0) - eps ||y0|| <= f(eps) <= f(0)
    slack = 1e-7 * (1 + ref.objective)
    assert sol.objective <= ref.objective + slack
    assert sol.objective >= ref.objective - eps * np.linalg.norm(ref.dual) - slack
