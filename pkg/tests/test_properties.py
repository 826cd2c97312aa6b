"""Property-based checks of the invariants that hold for every input."""

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pertcs import bounds
from pertcs.model import PerturbationBudget, PerturbedProblem, head_tail_split, measure_budget
from pertcs.solvers import solve_bp
from pertcs.spectral import extremal_singular_k, ric

# magnitudes kept well away from the range where squaring underflows
finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False).map(
    lambda v: 0.0 if abs(v) < 1e-100 else v
)
signals = st.integers(1, 12).flatmap(lambda n: arrays(np.float64, n, elements=finite))
settings.register_profile("pertcs", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("pertcs")


@given(signals, st.data())
def test_split_invariants(x, data):
    K = data.draw(st.integers(1, x.size))
    s = head_tail_split(x, K)
    np.testing.assert_array_equal(s.head + s.tail, x)
    assert np.count_nonzero(s.head) <= K
    head_nz = np.abs(s.head[s.head != 0])
    tail_nz = np.abs(s.tail[s.tail != 0])
    if head_nz.size and tail_nz.size:
        assert head_nz.min() >= tail_nz.max()
    assert s.s_K >= s.r_K - 1e-12 * max(1.0, s.r_K)
    if np.count_nonzero(s.tail) <= 1:
        assert s.s_K == pytest.approx(s.r_K, rel=1e-12, abs=0)


@given(signals, st.data(), st.floats(1e-3, 1e3) | st.floats(-1e3, -1e-3))
def test_split_ratios_scale_invariant(x, data, c):
    K = data.draw(st.integers(1, x.size))
    a, b = head_tail_split(x, K), head_tail_split(c * x, K)
    assert a.support == b.support
    assert b.r_K == pytest.approx(a.r_K, rel=1e-9, abs=1e-300)
    assert b.s_K == pytest.approx(a.s_K, rel=1e-9, abs=1e-300)


small_matrices = st.tuples(st.integers(3, 7), st.integers(4, 9), st.integers(0, 2**32 - 1))


@settings(max_examples=30)
@given(small_matrices, st.floats(0.1, 10.0))
def test_restricted_norm_scales(shape, c):
    m, n, seed = shape
    A = np.random.default_rng(seed).normal(size=(m, n))
    for K in (1, 2):
        assert extremal_singular_k(c * A, K).sigma_max_K == pytest.approx(
            c * extremal_singular_k(A, K).sigma_max_K, rel=1e-12
        )


@settings(max_examples=30)
@given(small_matrices)
def test_exact_ric_invariants(shape):
    m, n, seed = shape
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(m, n)) / np.sqrt(m)
    norm = np.linalg.norm(A, 2)
    prev = 0.0
    for K in range(1, min(n, 4) + 1):
        r = ric(A, K)
        assert r.sigma_max_K <= norm * (1 + 1e-12)
        assert r.delta_K >= prev - 1e-12  # monotone in K
        prev = r.delta_K
        assert r.delta_K <= max(norm**2 - 1, 1) + 1e-12
        hi_ok = r.sigma_max_K <= np.sqrt(1 + r.delta_K) * (1 + 1e-12)
        lo_ok = r.sigma_min_K >= np.sqrt(max(1 - r.delta_K, 0.0)) * (1 - 1e-12) - 1e-12
        assert hi_ok and lo_ok
        tight_hi = np.isclose(r.sigma_max_K**2, 1 + r.delta_K, rtol=1e-12)
        tight_lo = np.isclose(r.sigma_min_K**2, 1 - r.delta_K, rtol=1e-12, atol=1e-12)
        assert tight_hi or tight_lo
    P = np.eye(n)[:, rng.permutation(n)]
    for K in (1, 2):
        assert ric(A @ P, K).delta_K == pytest.approx(ric(A, K).delta_K, rel=1e-12, abs=1e-14)
    assert ric(A, 2, budget=5).delta_K <= ric(A, 2).delta_K + 1e-12


@settings(max_examples=30)
@given(small_matrices, st.floats(0.01, 0.95))
def test_scaled_copy_budget_is_exact(shape, beta):
    m, n, seed = shape
    A = np.random.default_rng(seed).normal(size=(m, n))
    b = measure_budget(PerturbedProblem(A, beta * A, None, np.ones(n)), 2)
    assert b.eps_A == pytest.approx(beta, rel=1e-12)
    assert b.eps_A_K == pytest.approx(beta, rel=1e-12)


@given(st.floats(0, 0.41), st.floats(0, 0.189))
def test_condition1_implies_contraction(delta, eps):
    assume(bounds.condition1(delta, eps).ok)
    c = bounds.stability_constants(delta, eps)
    assert c.delta_hat_max_2K < np.sqrt(2) - 1
    assert c.rho_hat < 1 and c.C0 > 0 and c.C1 > 0


@given(st.floats(0, 0.3), st.floats(0, 0.05), st.floats(1e-4, 0.05), st.floats(1e-4, 0.05))
def test_constants_increase(delta, eps, dd, de):
    assume(bounds.condition1(delta + dd, eps + de).ok)
    a = bounds.stability_constants(delta, eps)
    assert bounds.stability_constants(delta + dd, eps).C0 > a.C0
    assert bounds.stability_constants(delta, eps + de).C1 > a.C1


@given(st.floats(0, 0.4), st.floats(0, 0.99))
def test_unperturbed_reduction(delta, eps_b):
    assert bounds.perturbed_ric_bound(delta, 0.0) == pytest.approx(delta, abs=1e-15)
    cond = bounds.MatrixConditioning(delta, delta, 1.0)
    budget = PerturbationBudget.assumed(eps_b=eps_b)
    split = head_tail_split(np.array([1.0, 0.5, 0.25]), 1)
    assert bounds.total_noise(budget, cond, split, 2.0) == eps_b * 2.0


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.3), st.floats(1e-2, 1e2))
def test_bp_feasible_and_scale_equivariant(seed, eps_frac, c):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(8, 16)) / np.sqrt(8)
    x = np.zeros(16)
    x[rng.choice(16, 2, replace=False)] = rng.normal(size=2)
    b = A @ x + 0.01 * rng.normal(size=8)
    eps = eps_frac * np.linalg.norm(b)
    s1 = solve_bp(A, b, eps)
    s2 = solve_bp(A, c * b, c * eps)
    assert s1.converged and s2.converged
    assert s1.residual <= eps + 1e-9 * (1 + np.linalg.norm(b))
    assert s2.objective == pytest.approx(c * s1.objective, rel=1e-6)
