"""Monte-Carlo sweeps of Basis Pursuit recovery under matrix perturbation.

Each cell ``(K, eps_A, trial)`` is an independent job. Random draws are keyed
by the cell, so results do not depend on the order in which cells run or on
how many worker processes share them:

* A and x come from streams ``(seed, "matrix"|"signal", trial, K)`` and are
  shared by every eps_A of the same trial (a paired design);
* E comes from ``(seed, "perturbation", trial, K, eps_index)``;
* e comes from ``(seed, "noise", trial, K, eps_index)``.
"""

from __future__ import annotations

import csv
import io
import json
import os
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from math import comb

import numpy as np
from threadpoolctl import threadpool_limits

from . import bounds
from .ensembles import (
    EXACT_SPARSE, EnsembleSpec, SignalSpec, gen_matrix, gen_perturbation, gen_signal, make_rng,
    stream_seed,
)
from .errors import PreconditionError
from .model import PerturbedProblem, head_tail_split, measure_budget
from .solvers import BpOptions, solve_bp
from .spectral import DEFAULT_BUDGET

ORACLE = "oracle"
THEOREM = "theorem"
FIXED = "fixed"
RADIUS_POLICIES = (ORACLE, THEOREM, FIXED)

BOUND_ATOL = 1e-8

RESULT_COLUMNS = (
    "ensemble", "m", "n", "K", "eps_A", "eps_b", "trial", "seed",
    "rel_error", "residual", "iterations", "converged",
)
AGGREGATE_COLUMNS = (
    "ensemble", "m", "n", "K", "eps_A", "eps_b", "trials", "converged",
    "mean_rel_error", "median_rel_error", "std_rel_error",
)


@dataclass(frozen=True)
class SweepConfig:
    m: int
    n: int
    K_list: tuple
    eps_A_list: tuple
    eps_b: float = 0.0
    trials: int = 1
    radius_policy: str = ORACLE
    radius_value: float | None = None
    master_seed: int = 0
    ensemble: str = "gaussian"
    feas_rtol: float = 1e-9
    obj_rtol: float = 1e-7
    max_iter: int = 50_000
    # the theorem radius needs RICs; at sweep scale only sampled ones exist
    theorem_allow_sampled: bool = False

    def __post_init__(self):
        object.__setattr__(self, "K_list", tuple(int(k) for k in self.K_list))
        object.__setattr__(self, "eps_A_list", tuple(float(e) for e in self.eps_A_list))
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be positive")
        if not self.K_list or min(self.K_list) < 1 or max(self.K_list) > self.n:
            raise ValueError(f"K_list must be nonempty with 1 <= K <= n={self.n}")
        if not self.eps_A_list or not all(0.0 <= e < 1.0 for e in self.eps_A_list):
            raise ValueError("eps_A_list must be nonempty with values in [0, 1)")
        if not 0.0 <= self.eps_b < 1.0:
            raise ValueError("eps_b must lie in [0, 1)")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.radius_policy not in RADIUS_POLICIES:
            raise ValueError(f"radius_policy must be one of {RADIUS_POLICIES}")
        if self.radius_policy == FIXED and (self.radius_value is None or self.radius_value < 0):
            raise ValueError("fixed radius policy needs a nonnegative radius_value")
        if self.master_seed < 0:
            raise ValueError("master_seed must be nonnegative")

    @property
    def bp_options(self):
        return BpOptions(feas_rtol=self.feas_rtol, obj_rtol=self.obj_rtol, max_iter=self.max_iter)

    def cells(self):
        """Every (K, eps_index, trial) in canonical order."""
        return [
            (K, j, t)
            for K in self.K_list
            for j in range(len(self.eps_A_list))
            for t in range(self.trials)
        ]

    def as_dict(self):
        d = asdict(self)
        d["K_list"] = list(self.K_list)
        d["eps_A_list"] = list(self.eps_A_list)
        return d

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class TrialRow:
    K: int
    eps_A: float
    trial: int
    seed: int
    rel_error: float
    residual: float
    iterations: int
    converged: bool
    eps_b: float = 0.0
    radius: float = 0.0


@dataclass(frozen=True)
class CellAggregate:
    K: int
    eps_A: float
    trials: int
    converged: int
    mean: float
    median: float
    std: float


@dataclass(frozen=True)
class SweepResult:
    config: SweepConfig
    rows: list = field(default_factory=list)
    aggregates: list = field(default_factory=list)

    def aggregate(self, K, eps_A):
        for a in self.aggregates:
            if a.K == K and a.eps_A == eps_A:
                return a
        raise KeyError((K, eps_A))

    @property
    def converged_count(self):
        return sum(r.converged for r in self.rows)


@dataclass(frozen=True)
class TrialInstance:
    problem: PerturbedProblem
    b_hat: np.ndarray
    seed: int


def build_instance(config, K, eps_index, trial):
    """Regenerate the (A, E, e, x) of one cell from its streams."""
    s = config.master_seed
    eps_A = config.eps_A_list[eps_index]
    spec = EnsembleSpec(config.ensemble, config.m, config.n, seed=s)
    A = gen_matrix(spec, make_rng(s, "matrix", trial, K))
    x = gen_signal(SignalSpec(EXACT_SPARSE, config.n, K, seed=s), make_rng(s, "signal", trial, K))
    E = gen_perturbation(spec, A, eps_A, make_rng(s, "perturbation", trial, K, eps_index))
    e = np.zeros(config.m)
    if config.eps_b > 0.0:
        d = make_rng(s, "noise", trial, K, eps_index).normal(size=config.m)
        e = d * (config.eps_b * np.linalg.norm(A @ x) / np.linalg.norm(d))
    problem = PerturbedProblem(A=A, E=E, e=e, x=x)
    return TrialInstance(problem, problem.b_hat, stream_seed(s, "trial", trial, K, eps_index))


def _theorem_radius(config, problem, K):
    budget = measure_budget(problem, K, budget=DEFAULT_BUDGET)
    cond = bounds.MatrixConditioning.from_matrix(
        problem.A, K, allow_sampled=config.theorem_allow_sampled
    )
    split = head_tail_split(problem.x, K)
    return bounds.total_noise(budget, cond, split, float(np.linalg.norm(problem.b)))


def radius_for(config, inst, K):
    p = inst.problem
    if config.radius_policy == ORACLE:
        return float(np.linalg.norm(inst.b_hat - p.A_hat @ p.x))
    if config.radius_policy == FIXED:
        return float(config.radius_value)
    return _theorem_radius(config, p, K)


def run_trial(config, K, eps_A, trial_index):
    """Solve one cell. Non-convergence is recorded in the row, not raised."""
    try:
        j = config.eps_A_list.index(float(eps_A))
    except ValueError:
        raise ValueError(f"eps_A={eps_A} is not in the config's eps_A_list") from None
    return _run_cell(config, (K, j, trial_index))


def _run_cell(config, cell):
    K, j, t = cell
    inst = build_instance(config, K, j, t)
    x = inst.problem.x
    radius = radius_for(config, inst, K)
    sol = solve_bp(inst.problem.A_hat, inst.b_hat, radius, config.bp_options)
    return TrialRow(
        K=K,
        eps_A=config.eps_A_list[j],
        trial=t,
        seed=inst.seed,
        rel_error=float(np.linalg.norm(sol.z_star - x) / np.linalg.norm(x)),
        residual=sol.residual,
        iterations=sol.iterations,
        converged=sol.converged,
        eps_b=config.eps_b,
        radius=radius,
    )


def _run_chunk(config, cells):
    with threadpool_limits(limits=1):
        return [_run_cell(config, c) for c in cells]


def aggregate_rows(rows):
    groups = defaultdict(list)
    for r in rows:
        groups[(r.K, r.eps_A)].append(r)
    out = []
    for (K, eps_A), rs in sorted(groups.items()):
        err = np.array([r.rel_error for r in rs])
        out.append(
            CellAggregate(
                K=K, eps_A=eps_A, trials=len(rs), converged=sum(r.converged for r in rs),
                mean=float(err.mean()), median=float(np.median(err)), std=float(err.std()),
            )
        )
    return out


def default_workers():
    env = os.environ.get("CS_TOOLKIT_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("CS_TOOLKIT_THREADS must be a positive integer")
        return n
    return os.cpu_count() or 1


def run_sweep(config, workers=1):
    """Run every cell and aggregate per (K, eps_A).

    BLAS is pinned to one thread inside every job, so the rows are
    bit-identical for any ``workers``.
    """
    cells = config.cells()
    workers = max(1, min(int(workers), len(cells)))
    if workers == 1:
        rows = _run_chunk(config, cells)
    else:
        chunks = [cells[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_run_chunk, [config] * workers, chunks)
            rows = [r for part in parts for r in part]
    order = {(K, config.eps_A_list[j], t): i for i, (K, j, t) in enumerate(cells)}
    rows.sort(key=lambda r: order[(r.K, r.eps_A, r.trial)])
    return SweepResult(config, rows, aggregate_rows(rows))


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def results_csv(result):
    c = result.config
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for r in result.rows:
        w.writerow([_fmt(v) for v in (
            c.ensemble, c.m, c.n, r.K, r.eps_A, r.eps_b, r.trial, r.seed,
            r.rel_error, r.residual, r.iterations, r.converged,
        )])
    return buf.getvalue()


def aggregates_csv(result):
    c = result.config
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATE_COLUMNS)
    for a in result.aggregates:
        w.writerow([_fmt(v) for v in (
            c.ensemble, c.m, c.n, a.K, a.eps_A, c.eps_b, a.trials, a.converged,
            a.mean, a.median, a.std,
        )])
    return buf.getvalue()


def read_aggregates(text):
    """Parse an aggregates CSV back into :class:`CellAggregate` records."""
    reader = csv.DictReader(io.StringIO(text))
    missing = set(AGGREGATE_COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"aggregates CSV lacks columns {sorted(missing)}")
    return [
        CellAggregate(
            K=int(r["K"]), eps_A=float(r["eps_A"]), trials=int(r["trials"]),
            converged=int(r["converged"]), mean=float(r["mean_rel_error"]),
            median=float(r["median_rel_error"]), std=float(r["std_rel_error"]),
        )
        for r in reader
    ]


def plot_data(aggregates, stat="mean"):
    """Table with x = K and one column of ``stat`` per eps_A (CSV, ``#`` header)."""
    eps = sorted({a.eps_A for a in aggregates})
    Ks = sorted({a.K for a in aggregates})
    table = {(a.K, a.eps_A): getattr(a, stat) for a in aggregates}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    buf.write("# " + ",".join(["K"] + [f"eps_A={_fmt(e)}" for e in eps]) + "\n")
    for K in Ks:
        w.writerow([K] + [_fmt(table[(K, e)]) if (K, e) in table else "nan" for e in eps])
    return buf.getvalue()


def error_ratios(result, base_eps):
    """``mean_err(eps) / mean_err(base_eps)`` for every K and eps."""
    out = {}
    for K in result.config.K_list:
        base = result.aggregate(K, base_eps).mean
        out[K] = {e: result.aggregate(K, e).mean / base for e in result.config.eps_A_list}
    return out


@dataclass(frozen=True)
class BoundRow:
    K: int
    eps_A: float
    trial: int
    error: float
    bound: float | None
    status: str  # ok | cond1_false | cond2_false | unavailable
    holds: bool | None

    @property
    def ratio(self):
        if self.bound is None or self.bound == 0.0:
            return None
        return self.error / self.bound


@dataclass(frozen=True)
class BoundReport:
    rows: list

    @property
    def checked(self):
        return [r for r in self.rows if r.status == "ok"]

    @property
    def all_hold(self):
        return all(r.holds for r in self.checked)

    def cells(self):
        groups = defaultdict(list)
        for r in self.rows:
            groups[(r.K, r.eps_A)].append(r)
        out = []
        for (K, eps_A), rs in sorted(groups.items()):
            ok = [r for r in rs if r.status == "ok"]
            ratios = [r.ratio for r in ok if r.ratio is not None]
            out.append({
                "K": K,
                "eps_A": eps_A,
                "mean_error": float(np.mean([r.error for r in rs])),
                "mean_bound": float(np.mean([r.bound for r in ok])) if ok else None,
                "mean_ratio": float(np.mean(ratios)) if ratios else None,
                "checked": len(ok),
                "violations": sum(1 for r in ok if not r.holds),
            })
        return out

    def as_dict(self):
        return {
            "all_hold": self.all_hold,
            "cells": self.cells(),
            "rows": [
                {**asdict(r), "ratio": r.ratio} for r in self.rows
            ],
        }


def _exact_feasible(n, K, budget):
    return comb(n, min(2 * K, n)) <= budget


def bound_comparison_report(result, *, conditioning=None, budget=DEFAULT_BUDGET):
    """Set each trial's error ``||z* - x||_2`` beside the stability bound.

    The trial instance is regenerated from its streams. Exact conditioning
    is computed when every 2K-column submatrix can be enumerated within
    ``budget``; otherwise ``conditioning`` may map K to user-supplied
    ``(MatrixConditioning, PerturbationBudget)`` values. Cells without either
    are marked ``unavailable``, and cells whose hypotheses fail carry no
    bound. ``holds`` is judged only where the hypotheses verifiably hold.
    """
    config = result.config
    conditioning = conditioning or {}
    rows = []
    for r in result.rows:
        j = config.eps_A_list.index(r.eps_A)
        inst = build_instance(config, r.K, j, r.trial)
        p = inst.problem
        error = r.rel_error * float(np.linalg.norm(p.x))
        split = head_tail_split(p.x, r.K)
        if r.K in conditioning:
            cond, pb = conditioning[r.K]
        elif _exact_feasible(config.n, r.K, budget):
            try:
                cond = bounds.MatrixConditioning.from_matrix(p.A, r.K, budget)
                pb = measure_budget(p, r.K, budget=budget)
            except PreconditionError:
                rows.append(BoundRow(r.K, r.eps_A, r.trial, error, None, "cond1_false", None))
                continue
        else:
            rows.append(BoundRow(r.K, r.eps_A, r.trial, error, None, "unavailable", None))
            continue
        sc = bounds.evaluate(
            pb, delta_2K=cond.delta_2K, cond=cond, split=split,
            norm_b=float(np.linalg.norm(p.b)),
        )
        if not sc.cond1_ok:
            rows.append(BoundRow(r.K, r.eps_A, r.trial, error, None, "cond1_false", None))
        elif not sc.cond2_ok:
            rows.append(BoundRow(r.K, r.eps_A, r.trial, error, None, "cond2_false", None))
        else:
            b = float(sc.bp_bound)
            # solver accuracy allowance: the bound is zero in the exact-recovery regime
            slack = BOUND_ATOL * max(1.0, float(np.linalg.norm(p.x)))
            rows.append(BoundRow(r.K, r.eps_A, r.trial, error, b, "ok", error <= b + slack))
    return BoundReport(rows)


def load_config(path):
    with open(path) as fh:
        return SweepConfig.from_dict(json.load(fh))
