import numpy as np
import pytest

from oracles import restricted_norm
from pertcs.ensembles import (
    COMPRESSIBLE, EXACT_SPARSE, EnsembleSpec, SignalSpec, gen_matrix, gen_perturbation, gen_signal,
    make_rng, stream_seed,
)
from pertcs.errors import BudgetError
from pertcs.model import head_tail_split


def test_gaussian_columns_have_unit_expected_norm():
    A = gen_matrix(EnsembleSpec("gaussian", 128, 512, seed=1))
    assert 0.95 <= np.linalg.norm(A, axis=0).mean() <= 1.05


def test_bernoulli_entries():
    A = gen_matrix(EnsembleSpec("bernoulli", 16, 40, seed=2))
    np.testing.assert_allclose(np.abs(A), 0.25)
    assert 0.4 < np.mean(A > 0) < 0.6


def test_partial_circulant_rows_are_shifts():
    A = gen_matrix(EnsembleSpec("partial_circulant", 6, 20, seed=3))
    assert len({tuple(r) for r in A}) == 6
    ref = A[0]
    for row in A[1:]:
        assert any(np.array_equal(np.roll(ref, s), row) for s in range(20))


def test_partial_circulant_needs_wide_shape():
    with pytest.raises(ValueError):
        gen_matrix(EnsembleSpec("partial_circulant", 8, 4))


@pytest.mark.parametrize("kind", ["gaussian", "bernoulli", "partial_circulant"])
def test_same_seed_same_matrix(kind):
    spec = EnsembleSpec(kind, 8, 16, seed=11)
    np.testing.assert_array_equal(gen_matrix(spec), gen_matrix(spec))
    other = EnsembleSpec(kind, 8, 16, seed=12)
    assert not np.array_equal(gen_matrix(spec), gen_matrix(other))


def test_spec_validation():
    with pytest.raises(ValueError):
        EnsembleSpec("fourier", 4, 8)
    with pytest.raises(ValueError):
        EnsembleSpec("gaussian", 4, 8, scale=0.0)
    assert EnsembleSpec("gaussian", 4, 8).variance == 0.25


def test_streams_are_independent_and_stable():
    a = make_rng(5, "trial", 1, "K", 10).normal(size=4)
    b = make_rng(5, "trial", 1, "K", 10).normal(size=4)
    c = make_rng(5, "trial", 2, "K", 10).normal(size=4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert stream_seed(5, "x") == stream_seed(5, "x") != stream_seed(6, "x")
    with pytest.raises(ValueError):
        make_rng(5, -1)


@pytest.mark.parametrize("kind", ["gaussian", "bernoulli", "partial_circulant"])
def test_perturbation_hits_target_ratio(kind):
    spec = EnsembleSpec(kind, 12, 24, seed=4)
    A = gen_matrix(EnsembleSpec("gaussian", 12, 24, seed=5))
    E = gen_perturbation(spec, A, 0.05)
    assert np.linalg.norm(E, 2) / np.linalg.norm(A, 2) == pytest.approx(0.05, abs=1e-10)


def test_perturbation_edge_targets():
    spec = EnsembleSpec("gaussian", 4, 8)
    A = gen_matrix(spec)
    assert not np.any(gen_perturbation(spec, A, 0.0))
    with pytest.raises(BudgetError):
        gen_perturbation(spec, A, 1.0)
    with pytest.raises(ValueError):
        gen_perturbation(EnsembleSpec("gaussian", 4, 9), A, 0.1)


def test_gaussian_restricted_ratio_close_to_full_ratio():
    A = gen_matrix(EnsembleSpec("gaussian", 16, 32, seed=6))
    E = gen_perturbation(EnsembleSpec("gaussian", 16, 32, seed=7), A, 0.05)
    for K in (1, 2):
        ratio = restricted_norm(E, K) / restricted_norm(A, K)
        assert 0.5 * 0.05 < ratio < 2.0 * 0.05


def test_sparse_signal():
    x = gen_signal(SignalSpec(EXACT_SPARSE, 50, 1, seed=1))
    assert np.count_nonzero(x) == 1
    x = gen_signal(SignalSpec(EXACT_SPARSE, 50, 7, seed=1))
    s = head_tail_split(x, 7)
    assert np.count_nonzero(x) == 7 and s.r_K == 0.0 and s.s_K == 0.0


def test_compressible_signal_magnitudes():
    x = gen_signal(SignalSpec(COMPRESSIBLE, 8, 2, p=2.0, C_p=1.0, seed=3))
    np.testing.assert_allclose(np.sort(np.abs(x))[::-1], 1.0 / np.arange(1, 9) ** 2)


def test_signal_spec_validation():
    with pytest.raises(ValueError):
        SignalSpec(EXACT_SPARSE, 5, 6)
    with pytest.raises(ValueError):
        SignalSpec(COMPRESSIBLE, 5, 2, p=0.5)
