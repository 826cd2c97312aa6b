"""Seedable generators for measurement matrices, perturbations and signals.

Every random draw comes from a Philox (counter-based) bit generator keyed by
``SeedSequence(master_seed, spawn_key=stream)``. String components of a
stream are mapped to integers with CRC-32, so a stream such as
``(seed, "trial", 3, "K", 10)`` names the same bits on every machine and in
every worker process.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .errors import BudgetError
from .spectral import spectral_norm

GAUSSIAN = "gaussian"
BERNOULLI = "bernoulli"
PARTIAL_CIRCULANT = "partial_circulant"
KINDS = (GAUSSIAN, BERNOULLI, PARTIAL_CIRCULANT)

EXACT_SPARSE = "exact_sparse"
COMPRESSIBLE = "compressible"


def _key(part):
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    part = int(part)
    if part < 0:
        raise ValueError("stream components must be non-negative")
    return part


def seed_sequence(seed, *stream):
    return np.random.SeedSequence(int(seed), spawn_key=tuple(_key(p) for p in stream))


def make_rng(seed, *stream):
    """Independent generator for ``(seed, *stream)``."""
    return np.random.Generator(np.random.Philox(seed_sequence(seed, *stream)))


def stream_seed(seed, *stream):
    """A 64-bit integer that identifies the stream (for result records)."""
    return int(seed_sequence(seed, *stream).generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class EnsembleSpec:
    """Random matrix family. ``scale`` is the entry variance (default 1/m)."""

    kind: str
    m: int
    n: int
    scale: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown ensemble {self.kind!r}; expected one of {KINDS}")
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be positive")
        if self.scale is not None and not self.scale > 0:
            raise ValueError("variance must be positive")

    @property
    def variance(self):
        return 1.0 / self.m if self.scale is None else float(self.scale)

    @property
    def is_measurement_shape(self):
        return self.m <= self.n


def gen_matrix(spec, rng=None):
    """Draw an ``m x n`` matrix from ``spec``.

    gaussian: i.i.d. N(0, var). bernoulli: +-sqrt(var) with equal
    probability. partial_circulant: m distinct rows (kept in increasing
    order) of the n x n circulant whose first row is i.i.d. N(0, var); row i
    of the circulant is the first row shifted right by i.
    """
    if rng is None:
        rng = make_rng(spec.seed, spec.kind)
    m, n, var = spec.m, spec.n, spec.variance
    if spec.kind == GAUSSIAN:
        return rng.normal(0.0, np.sqrt(var), size=(m, n))
    if spec.kind == BERNOULLI:
        signs = rng.integers(0, 2, size=(m, n)) * 2 - 1
        return signs * np.sqrt(var)
    if m > n:
        raise ValueError("partial circulant needs m <= n")
    c = rng.normal(0.0, np.sqrt(var), size=n)
    rows = np.sort(rng.choice(n, size=m, replace=False))
    return circulant_rows(c, rows)


def circulant_rows(first_row, rows):
    n = first_row.size
    idx = (np.arange(n)[None, :] - np.asarray(rows)[:, None]) % n
    return first_row[idx]


def gen_perturbation(spec, A, target_eps_A, rng=None):
    """Draw E from ``spec`` and rescale it so ``||E||_2 = target * ||A||_2``."""
    A = np.asarray(A, dtype=np.float64)
    if (spec.m, spec.n) != A.shape:
        raise ValueError(f"spec shape {(spec.m, spec.n)} does not match A {A.shape}")
    if not 0.0 <= target_eps_A < 1.0:
        raise BudgetError(
            f"target eps_A={target_eps_A} outside [0, 1)",
            condition="relative perturbation eps_A must lie in [0, 1)",
        )
    if target_eps_A == 0.0:
        return np.zeros_like(A)
    R = gen_matrix(spec, rng)
    return R * (target_eps_A * spectral_norm(A) / spectral_norm(R))


@dataclass(frozen=True)
class SignalSpec:
    """Test signal family; ``p`` and ``C_p`` only matter for compressible."""

    kind: str
    n: int
    K: int
    p: float = 1.0
    C_p: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (EXACT_SPARSE, COMPRESSIBLE):
            raise ValueError(f"unknown signal kind {self.kind!r}")
        if not 1 <= self.K <= self.n:
            raise ValueError(f"K={self.K} outside [1, {self.n}]")
        if self.p < 1:
            raise ValueError("decay power p must be >= 1")


def gen_signal(spec, rng=None):
    """exact_sparse: uniform random support, N(0, 1) values.

    compressible: sorted magnitudes ``C_p * k**-p`` (the power-law bound met
    with equality), random signs, random placement.
    """
    if rng is None:
        rng = make_rng(spec.seed, spec.kind)
    x = np.zeros(spec.n)
    if spec.kind == EXACT_SPARSE:
        T = rng.choice(spec.n, size=spec.K, replace=False)
        x[T] = rng.normal(size=spec.K)
        return x
    k = np.arange(1, spec.n + 1, dtype=np.float64)
    mags = spec.C_p * k ** (-spec.p)
    signs = rng.integers(0, 2, size=spec.n) * 2 - 1
    x[rng.permutation(spec.n)] = signs * mags
    return x
