"""Placebo-treatment and subsample refutation tests for an adjusted effect.

Every iteration draws from its own RNG stream derived from the master seed
and the iteration index, so results do not depend on execution order or
on the number of worker processes.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from cbnkit.bayesnet import DEFAULT_ALPHA
from cbnkit.causal import AdjustmentEstimand, estimand_variables, fit_observed, treatment_effect
from cbnkit.data import Dataset
from cbnkit.errors import CbnError, ConfigError, EmptySampleError, RefutationError, SubsampleTooSmallError
from cbnkit.graph import CausalDag

log = logging.getLogger(__name__)

PLACEBO, SUBSAMPLE = "placebo", "subsample"


@dataclass(frozen=True)
class RefutationConfig:
    estimand: AdjustmentEstimand
    outcome_state: str
    control: str
    treated: str
    iterations: int = 1000
    master_seed: int = 0
    subsample_fraction: float = 0.8
    alpha: float = DEFAULT_ALPHA
    n_jobs: int = 1

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if not 0 < self.subsample_fraction <= 1:
            raise ConfigError(f"subsample fraction must lie in (0, 1], got {self.subsample_fraction}")


@dataclass
class RefutationReport:
    kind: str
    baseline: float  # pp
    null_samples: np.ndarray = field(repr=False)
    mean: float
    median: float
    p01: float
    p99: float
    p_value: float
    iterations: int
    master_seed: int

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "baseline_pp": self.baseline, "mean_pp": self.mean, "median_pp": self.median,
            "p01_pp": self.p01, "p99_pp": self.p99, "p_value": self.p_value, "iterations": self.iterations,
            "master_seed": self.master_seed, "null_samples_pp": [float(v) for v in self.null_samples],
        }


def summarize(null_samples, delta: float | None = None) -> dict:
    """Mean, median and 1st/99th percentiles (linear interpolation)."""
    s = np.asarray(null_samples, dtype=float)
    if s.size == 0:
        raise EmptySampleError("no null samples to summarize")
    p01, med, p99 = np.percentile(s, [1, 50, 99])
    return {"mean": float(s.mean()), "median": float(med), "p01": float(p01), "p99": float(p99)}


def placebo_p_value(null_samples, delta: float) -> float:
    """(1 + #{|d_i| >= |d|}) / (1 + n)."""
    s = np.asarray(null_samples, dtype=float)
    if s.size == 0:
        raise EmptySampleError("no null samples")
    return (1 + int(np.sum(np.abs(s) >= abs(delta)))) / (1 + s.size)


def subsample_p_value(null_samples, delta: float) -> float:
    """(1 + #{|d_i - d*| >= |d - d*|}) / (1 + n), d* the null-sample mean."""
    s = np.asarray(null_samples, dtype=float)
    if s.size == 0:
        raise EmptySampleError("no null samples")
    centre = s.mean()
    return (1 + int(np.sum(np.abs(s - centre) >= abs(delta - centre)))) / (1 + s.size)


def iteration_rng(master_seed: int, iteration: int, attempt: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(iteration, attempt)))


def estimate_delta(data: Dataset, dag: CausalDag, cfg: RefutationConfig) -> float:
    """Adjusted effect of treated vs control on the target outcome state, in pp."""
    bn = fit_observed(dag, data, cfg.alpha, estimand_variables(cfg.estimand))
    return treatment_effect(bn, cfg.estimand, cfg.control, cfg.treated).contrast(cfg.outcome_state)


def _placebo_draw(data: Dataset, dag: CausalDag, cfg: RefutationConfig, i: int) -> float:
    rng = iteration_rng(cfg.master_seed, i)
    x = cfg.estimand.treatment
    permuted = data.with_column(x, rng.permutation(data.column(x)))
    return estimate_delta(permuted, dag, cfg)


def _subsample_rows(data: Dataset, cfg: RefutationConfig, i: int) -> Dataset:
    x = cfg.estimand.treatment
    states = data.schema[x].states
    need = {states.index(cfg.control) if isinstance(cfg.control, str) else int(cfg.control),
            states.index(cfg.treated) if isinstance(cfg.treated, str) else int(cfg.treated)}
    size = math.floor(cfg.subsample_fraction * data.n_rows)
    for attempt in range(2):
        rng = iteration_rng(cfg.master_seed, i, attempt)
        rows = np.sort(rng.choice(data.n_rows, size=size, replace=False))
        sub = data.take(rows)
        present = set(np.unique(sub.column(x)).tolist())
        if need <= present:
            return sub
        log.warning("subsample %d (attempt %d) lacks treatment levels %s; redrawing", i, attempt, need - present)
    raise SubsampleTooSmallError(f"subsample {i}: treatment levels {sorted(need - present)} absent after redraw")


def _subsample_draw(data: Dataset, dag: CausalDag, cfg: RefutationConfig, i: int) -> float:
    return estimate_delta(_subsample_rows(data, cfg, i), dag, cfg)


def _guarded(fn: Callable, data, dag, cfg, i) -> float:
    try:
        return fn(data, dag, cfg, i)
    except CbnError as exc:
        raise RefutationError(f"iteration {i}: {exc}", i) from exc


def _chunk(args):
    fn, data, dag, cfg, lo, hi = args
    return [_guarded(fn, data, dag, cfg, i) for i in range(lo, hi)]


def _run(fn: Callable, data: Dataset, dag: CausalDag, cfg: RefutationConfig) -> np.ndarray:
    n = cfg.iterations
    if cfg.n_jobs <= 1:
        return np.array([_guarded(fn, data, dag, cfg, i) for i in range(n)])
    step = max(1, -(-n // (4 * cfg.n_jobs)))
    tasks = [(fn, data, dag, cfg, lo, min(n, lo + step)) for lo in range(0, n, step)]
    with ProcessPoolExecutor(max_workers=cfg.n_jobs) as pool:
        parts = list(pool.map(_chunk, tasks))
    return np.array([v for part in parts for v in part])


def _report(kind, baseline, samples, p, cfg) -> RefutationReport:
    st = summarize(samples)
    return RefutationReport(kind, baseline, samples, st["mean"], st["median"], st["p01"], st["p99"], p,
                            cfg.iterations, cfg.master_seed)


def placebo_test(data: Dataset, dag: CausalDag, cfg: RefutationConfig, baseline: float | None = None) -> RefutationReport:
    """Permute the treatment column, refit on the fixed DAG, re-estimate; repeat."""
    if baseline is None:
        baseline = estimate_delta(data, dag, cfg)
    samples = _run(_placebo_draw, data, dag, cfg)
    return _report(PLACEBO, baseline, samples, placebo_p_value(samples, baseline), cfg)


def subsample_test(data: Dataset, dag: CausalDag, cfg: RefutationConfig, baseline: float | None = None) -> RefutationReport:
    """Refit on random subsets of floor(fraction * N) distinct rows; repeat."""
    if baseline is None:
        baseline = estimate_delta(data, dag, cfg)
    samples = _run(_subsample_draw, data, dag, cfg)
    return _report(SUBSAMPLE, baseline, samples, subsample_p_value(samples, baseline), cfg)
