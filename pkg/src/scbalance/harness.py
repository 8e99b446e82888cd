"""Experiment orchestration: replication scheduling, workers, summaries.

Replications are grouped into fixed-size blocks; blocks are the unit of
parallel work and of checkpointing. Per-block results depend only on the
spec and the block index, and blocks are always reduced in index order, so
results are bit-identical for any worker count and an interrupted run can
resume from its persisted blocks.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .dgp import DgpMode, RngSeed, simulate_panel
from .estimator import WeightSource, estimate_effect, naive_difference
from .model import FactorModelParams, McSummary
from .solver import SolverConfig, fit_weights

BLOCK_SIZE = 256

# Above this, per-replication effect tables are dropped by default and
# summaries come from streaming (count, mean, M2) accumulation.
KEEP_EFFECTS_MAX_REPS = 100_000

WORKERS_ENV_VAR = "SC_BALANCE_WORKERS"


class Estimator(Enum):
    ORACLE_SC = "oracle_sc"
    FITTED_SC = "fitted_sc"
    NAIVE = "naive"


class ReplicationError(RuntimeError):
    """A replication failed; the message carries the replication index."""


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything a Monte Carlo run needs; immutable and picklable."""

    params: FactorModelParams
    mode: DgpMode
    estimators: tuple[Estimator, ...]
    reps: int
    master_seed: int = 0
    workers: int | str = 1
    solver: SolverConfig = field(default_factory=SolverConfig)
    keep_effects: bool | None = None

    def __post_init__(self):
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if self.reps < 1:
            raise ValueError(f"reps must be >= 1, got {self.reps}")
        if not self.estimators:
            raise ValueError("estimator set must be nonempty")
        if self.workers != "auto" and int(self.workers) < 1:
            raise ValueError(f"workers must be >= 1 or 'auto', got {self.workers!r}")


@dataclass(frozen=True)
class ExperimentResult:
    """Spec echo, per-estimator summaries, and (optionally) raw effects."""

    spec: ExperimentSpec
    summaries: dict[Estimator, McSummary]
    wall_time_s: float
    effects: dict[Estimator, np.ndarray] | None = None


def summarize(effects, truth) -> McSummary:
    """Per-period mean bias, its standard error, and RMSE of an effect table.

    ``effects`` is (replications, periods); ``truth`` the planted effect
    path. SE is NaN with a single replication.
    """
    table = np.asarray(effects, dtype=float)
    if table.ndim != 2 or table.shape[0] < 1:
        raise ValueError("effects must be a nonempty 2-d table")
    truth = np.asarray(truth, dtype=float)
    errors = table - truth[np.newaxis, :]
    reps = table.shape[0]
    mean_bias = errors.mean(axis=0)
    if reps >= 2:
        se = errors.std(axis=0, ddof=1) / np.sqrt(reps)
    else:
        se = np.full(table.shape[1], np.nan)
    rmse = np.sqrt((errors**2).mean(axis=0))
    return McSummary(
        replications=reps,
        mean_bias_per_period=mean_bias,
        se_per_period=se,
        rmse_per_period=rmse,
    )


def _merge_moments(acc, block_errors):
    """Merge a block of errors into streaming (count, mean, M2, mean_sq)."""
    b = np.asarray(block_errors, dtype=float)
    nb = b.shape[0]
    mean_b = b.mean(axis=0)
    m2_b = ((b - mean_b) ** 2).sum(axis=0)
    sq_b = (b**2).mean(axis=0)
    if acc is None:
        return [nb, mean_b, m2_b, sq_b]
    na, mean_a, m2_a, sq_a = acc
    n = na + nb
    delta = mean_b - mean_a
    mean = mean_a + delta * (nb / n)
    m2 = m2_a + m2_b + delta**2 * (na * nb / n)
    sq = sq_a + (sq_b - sq_a) * (nb / n)
    return [n, mean, m2, sq]


def _moments_summary(acc) -> McSummary:
    n, mean, m2, sq = acc
    if n >= 2:
        se = np.sqrt(m2 / (n - 1)) / np.sqrt(n)
    else:
        se = np.full(mean.shape, np.nan)
    return McSummary(
        replications=int(n),
        mean_bias_per_period=mean,
        se_per_period=se,
        rmse_per_period=np.sqrt(np.maximum(sq, 0.0)),
    )


def _replication_effects(spec: ExperimentSpec, rep: int) -> dict[Estimator, np.ndarray]:
    seed = RngSeed(spec.master_seed, rep)
    panel, oracle_beta, _ = simulate_panel(spec.params, spec.mode, seed)
    out = {}
    for est in spec.estimators:
        if est is Estimator.ORACLE_SC:
            series = estimate_effect(panel, oracle_beta, WeightSource.ORACLE)
        elif est is Estimator.FITTED_SC:
            fit = fit_weights(panel, spec.solver)
            series = estimate_effect(panel, fit.weights, WeightSource.FITTED)
        else:
            series = naive_difference(panel)
        out[est] = series.effects
    return out


def _run_block(spec: ExperimentSpec, block: int) -> dict[str, np.ndarray]:
    start = block * BLOCK_SIZE
    stop = min(start + BLOCK_SIZE, spec.reps)
    n_post = spec.params.n_post
    tables = {est: np.empty((stop - start, n_post)) for est in spec.estimators}
    for rep in range(start, stop):
        try:
            effects = _replication_effects(spec, rep)
        except Exception as exc:
            raise ReplicationError(f"replication {rep}: {exc}") from exc
        for est, values in effects.items():
            tables[est][rep - start] = values
    return {est.value: table for est, table in tables.items()}


def _block_worker(args):
    spec, block = args
    return block, _run_block(spec, block)


def resolve_workers(requested) -> int:
    """Worker count from the request, the environment override, or the CPU count."""
    env = os.environ.get(WORKERS_ENV_VAR)
    if env:
        return max(1, int(env))
    if requested == "auto":
        return max(1, os.cpu_count() or 1)
    return max(1, int(requested))


def _spec_fingerprint(spec: ExperimentSpec) -> str:
    p = spec.params
    doc = {
        "params": {
            "n": int(p.n),
            "t0": int(p.t0),
            "t_max": int(p.t_max),
            "trend": p.trend.tolist(),
            "loading": p.loading.tolist(),
            "unit_factor": p.unit_factor.tolist(),
            "noise_scale": p.noise_scale.tolist(),
            "effect": p.effect.tolist(),
            "sharpness": float(p.sharpness),
        },
        "mode": spec.mode.value,
        "estimators": [e.value for e in spec.estimators],
        "reps": int(spec.reps),
        "master_seed": int(spec.master_seed),
        "solver": {
            "max_iterations": spec.solver.max_iterations,
            "objective_tolerance": spec.solver.objective_tolerance,
            "step_rule": spec.solver.step_rule.value,
        },
    }
    return json.dumps(doc, sort_keys=True)


def run_experiment(spec: ExperimentSpec, checkpoint_dir=None) -> ExperimentResult:
    """Run every replication and summarize each requested estimator.

    Results are independent of the worker count. With ``checkpoint_dir``,
    completed blocks persist there and a restarted run recomputes only the
    missing ones, reproducing the uninterrupted result exactly.
    """
    t_start = time.perf_counter()
    n_blocks = (spec.reps + BLOCK_SIZE - 1) // BLOCK_SIZE
    done: dict[int, dict[str, np.ndarray]] = {}

    if checkpoint_dir is not None:
        os.makedirs(checkpoint_dir, exist_ok=True)
        fp_path = os.path.join(checkpoint_dir, "spec.json")
        fingerprint = _spec_fingerprint(spec)
        if os.path.exists(fp_path):
            with open(fp_path, encoding="utf-8") as fh:
                if fh.read() != fingerprint:
                    raise ValueError(
                        "checkpoint directory belongs to a different experiment spec"
                    )
        else:
            with open(fp_path, "w", encoding="utf-8") as fh:
                fh.write(fingerprint)
        for block in range(n_blocks):
            path = os.path.join(checkpoint_dir, f"block_{block:06d}.npz")
            if os.path.exists(path):
                with np.load(path) as data:
                    done[block] = {key: data[key] for key in data.files}

    def _store(block, tables):
        done[block] = tables
        if checkpoint_dir is not None:
            path = os.path.join(checkpoint_dir, f"block_{block:06d}.npz")
            tmp = path + ".tmp.npz"
            np.savez(tmp, **tables)
            os.replace(tmp, path)

    pending = [b for b in range(n_blocks) if b not in done]
    workers = resolve_workers(spec.workers)
    if workers == 1 or len(pending) <= 1:
        for block in pending:
            _store(block, _run_block(spec, block))
    else:
        import multiprocessing as mp

        ctx = mp.get_context()
        with ctx.Pool(min(workers, len(pending))) as pool:
            for block, tables in pool.imap_unordered(
                _block_worker, [(spec, b) for b in pending]
            ):
                _store(block, tables)

    keep = spec.keep_effects
    if keep is None:
        keep = spec.reps <= KEEP_EFFECTS_MAX_REPS

    truth = spec.params.effect
    summaries: dict[Estimator, McSummary] = {}
    effects_out: dict[Estimator, np.ndarray] | None = {} if keep else None
    for est in spec.estimators:
        if keep:
            table = np.concatenate([done[b][est.value] for b in range(n_blocks)])
            summaries[est] = summarize(table, truth)
            effects_out[est] = table
        else:
            acc = None
            for b in range(n_blocks):
                acc = _merge_moments(acc, done[b][est.value] - truth[np.newaxis, :])
            summaries[est] = _moments_summary(acc)

    return ExperimentResult(
        spec=spec,
        summaries=summaries,
        wall_time_s=time.perf_counter() - t_start,
        effects=effects_out,
    )
