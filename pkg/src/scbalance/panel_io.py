"""File formats: panel CSV, weights/result JSON, and TOML configs.

Panel CSV is long format with header ``unit,time,outcome,treated`` (UTF-8,
LF, ``.`` decimal). Floats are written with 17 significant digits so a
write/read round trip is bit-exact. Configs are TOML with a default for
every key; unknown keys are an error rather than silently ignored.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .dgp import DgpMode
from .harness import Estimator, ExperimentResult, ExperimentSpec
from .model import FactorModelParams, Panel, SimplexWeights
from .solver import FitResult, SolverConfig, StepRule

CSV_HEADER = ["unit", "time", "outcome", "treated"]


class PanelFormatError(ValueError):
    """Malformed panel CSV: duplicates, gaps, bad cells, or treated-flag issues."""


class ConfigError(ValueError):
    """Malformed config document: unknown keys or invalid values."""


@dataclass(frozen=True)
class ParsedPanel:
    """A panel plus the label and time metadata needed to report results.

    ``unit_labels`` follows panel row order (treated unit first), ``times``
    the shared time grid in ascending order.
    """

    panel: Panel
    unit_labels: list[str]
    times: list[int]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_panel_csv(path, panel: Panel, unit_labels=None, times=None) -> None:
    """Write a panel in long format; rows grouped by unit, times ascending."""
    n = panel.n
    labels = list(unit_labels) if unit_labels is not None else [f"unit_{i:02d}" for i in range(n)]
    grid = list(times) if times is not None else list(range(panel.t_max + 1))
    if len(labels) != n:
        raise ValueError(f"need {n} unit labels, got {len(labels)}")
    if len(grid) != panel.t_max + 1:
        raise ValueError(f"need {panel.t_max + 1} times, got {len(grid)}")
    outcomes = np.hstack([panel.x, panel.y])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for i in range(n):
            for k, t in enumerate(grid):
                flag = 1 if (panel.z[i] == 1 and k > panel.t0) else 0
                writer.writerow([labels[i], t, _fmt(outcomes[i, k]), flag])


def parse_panel_csv(path, t0: int | None = None) -> ParsedPanel:
    """Parse a long-format panel CSV into a Panel with the treated unit first.

    The treated unit is the one carrying any ``treated=1`` flag; the last
    pre-treatment index is inferred from its first flagged time unless
    ``t0`` (a grid index) is supplied. Donors keep first-appearance order.

    Raises PanelFormatError on duplicate (unit, time) rows, ragged time
    grids, zero or multiple treated units, or non-numeric cells.
    """
    cells: dict[str, dict[int, float]] = {}
    flagged: dict[str, set[int]] = {}
    order: list[str] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise PanelFormatError(
                f"expected header {','.join(CSV_HEADER)!r}, got {header!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise PanelFormatError(f"line {lineno}: expected 4 fields, got {len(row)}")
            unit, time_s, outcome_s, treated_s = row
            try:
                t = int(time_s)
            except ValueError:
                raise PanelFormatError(f"line {lineno}: non-integer time {time_s!r}") from None
            try:
                value = float(outcome_s)
            except ValueError:
                raise PanelFormatError(
                    f"line {lineno}: non-numeric outcome {outcome_s!r}"
                ) from None
            if treated_s not in ("0", "1"):
                raise PanelFormatError(
                    f"line {lineno}: treated flag must be 0 or 1, got {treated_s!r}"
                )
            if unit not in cells:
                cells[unit] = {}
                flagged[unit] = set()
                order.append(unit)
            if t in cells[unit]:
                raise PanelFormatError(f"duplicate row for unit {unit!r} at time {t}")
            cells[unit][t] = value
            if treated_s == "1":
                flagged[unit].add(t)

    if not order:
        raise PanelFormatError("no data rows")
    grid = sorted({t for times in cells.values() for t in times})
    for unit in order:
        missing = [t for t in grid if t not in cells[unit]]
        if missing:
            raise PanelFormatError(
                f"ragged time grid: unit {unit!r} is missing time {missing[0]}"
            )

    treated_units = [u for u in order if flagged[u]]
    if len(treated_units) == 0:
        raise PanelFormatError("no treated unit: every treated flag is 0")
    if len(treated_units) > 1:
        raise PanelFormatError(
            "multiple treated units: " + ", ".join(repr(u) for u in treated_units)
        )
    treated = treated_units[0]

    first_flag = min(flagged[treated])
    if t0 is None:
        t0_index = grid.index(first_flag) - 1
        if flagged[treated] != set(grid[t0_index + 1 :]):
            raise PanelFormatError(
                f"treated flags for unit {treated!r} must cover exactly the times "
                f"from {first_flag} onward"
            )
    else:
        t0_index = int(t0)
    if not 0 <= t0_index < len(grid) - 1:
        raise PanelFormatError(
            f"last pre-treatment index {t0_index} must be in [0, {len(grid) - 2}]"
        )

    labels = [treated] + [u for u in order if u != treated]
    outcomes = np.array([[cells[u][t] for t in grid] for u in labels])
    z = np.zeros(len(labels), dtype=int)
    z[0] = 1
    panel = Panel(
        x=outcomes[:, : t0_index + 1],
        y=outcomes[:, t0_index + 1 :],
        z=z,
    )
    return ParsedPanel(panel=panel, unit_labels=labels, times=grid)


def _jsonable(value):
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, np.ndarray):
        return [_jsonable(float(v)) for v in value.tolist()]
    return value


def write_weights_json(path, treated_label: str, donor_labels, fit: FitResult,
                       feasibility=None) -> None:
    """Persist fitted weights keyed by donor label, with fit metadata.

    ``feasibility`` optionally attaches a pre-treatment residual report.
    """
    w = fit.weights.values
    if len(donor_labels) != w.shape[0]:
        raise ValueError(f"need {w.shape[0]} donor labels, got {len(donor_labels)}")
    doc = {
        "treated_unit": treated_label,
        "weights": {label: float(v) for label, v in zip(donor_labels, w)},
        "objective": float(fit.objective),
        "converged": bool(fit.converged),
    }
    if feasibility is not None:
        doc["feasibility"] = {
            "residuals": feasibility.residuals.tolist(),
            "mean_residual": feasibility.mean_residual,
            "max_abs_residual": feasibility.max_abs_residual,
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def read_weights_json(path, donor_labels=None):
    """Load a weights document; returns (SimplexWeights, full document).

    With ``donor_labels`` given, weights are reordered to match and every
    label must be present; otherwise the file's own order is kept.
    """
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    mapping = doc["weights"]
    if donor_labels is None:
        values = [float(v) for v in mapping.values()]
    else:
        missing = [label for label in donor_labels if label not in mapping]
        if missing:
            raise ValueError(f"weights file lacks donors: {missing}")
        values = [float(mapping[label]) for label in donor_labels]
    return SimplexWeights(np.asarray(values)), doc


def result_to_dict(result: ExperimentResult) -> dict:
    """JSON-ready echo of an experiment: spec, per-estimator summaries, timing."""
    spec = result.spec
    p = spec.params
    return {
        # The echo identifies the experiment, not its execution: the worker
        # count is omitted so results from any parallelism compare equal.
        "spec": {
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
        },
        "estimators": {
            est.value: {
                "mean_bias": _jsonable(s.mean_bias_per_period),
                "se": _jsonable(s.se_per_period),
                "rmse": _jsonable(s.rmse_per_period),
            }
            for est, s in result.summaries.items()
        },
        "master_seed": int(spec.master_seed),
        "reps": int(spec.reps),
        "wall_time_s": float(result.wall_time_s),
    }


def write_result_json(path, result: ExperimentResult) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(result_to_dict(result), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Config documents

_PARAM_DEFAULTS = {
    "n": 10,
    "t0": 10,
    "t_max": 15,
    "trend": 0.0,
    "loading": 1.0,
    "unit_factor": None,  # treated at 0.0, donors spread over [-1, 1]
    "noise_scale": 0.2,
    "effect": 1.0,
    "sharpness": 1.0,
}

_EXPERIMENT_DEFAULTS = {
    "mode": "confounded",
    "estimators": ["oracle_sc", "fitted_sc", "naive"],
    "reps": 1000,
    "master_seed": 0,
    "workers": "auto",
}

_SOLVER_DEFAULTS = {
    "max_iterations": 10_000,
    "objective_tolerance": 1e-12,
    "step_rule": "fixed_lipschitz",
}


def _check_keys(section: str, doc: dict, allowed) -> None:
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        raise ConfigError(
            f"unknown key(s) in [{section}]: {', '.join(unknown)}; "
            f"allowed: {', '.join(sorted(allowed))}"
        )


def _series(value, length: int, name: str) -> np.ndarray:
    if np.ndim(value) == 0:
        return np.full(length, float(value))
    arr = np.asarray(value, dtype=float)
    if arr.shape != (length,):
        raise ConfigError(f"{name} must be a scalar or a list of length {length}")
    return arr


def _noise_matrix(value, n: int, periods: int) -> np.ndarray:
    if np.ndim(value) == 0:
        return np.full((n, periods), float(value))
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 1:
        if arr.shape != (n,):
            raise ConfigError(f"per-unit noise_scale must have length {n}")
        return np.tile(arr[:, np.newaxis], (1, periods))
    if arr.shape != (n, periods):
        raise ConfigError(f"noise_scale matrix must have shape ({n}, {periods})")
    return arr


def parse_config(doc: dict) -> ExperimentSpec:
    """Build a fully specified ExperimentSpec from a (possibly empty) document.

    Every omitted key takes its default; unknown keys raise ConfigError.
    """
    _check_keys("top level", doc, {"params", "experiment", "solver"})
    raw_params = dict(doc.get("params", {}))
    raw_exp = dict(doc.get("experiment", {}))
    raw_solver = dict(doc.get("solver", {}))
    _check_keys("params", raw_params, _PARAM_DEFAULTS)
    _check_keys("experiment", raw_exp, _EXPERIMENT_DEFAULTS)
    _check_keys("solver", raw_solver, _SOLVER_DEFAULTS)

    cfg = {**_PARAM_DEFAULTS, **raw_params}
    n = int(cfg["n"])
    t0 = int(cfg["t0"])
    t_max = int(cfg["t_max"])
    periods = t_max + 1
    if cfg["unit_factor"] is None:
        factor = np.concatenate([[0.0], np.linspace(-1.0, 1.0, n - 1)])
    else:
        factor = np.asarray(cfg["unit_factor"], dtype=float)
        if factor.shape != (n,):
            raise ConfigError(f"unit_factor must have length {n}")
    params = FactorModelParams(
        n=n,
        t0=t0,
        t_max=t_max,
        trend=_series(cfg["trend"], periods, "trend"),
        loading=_series(cfg["loading"], periods, "loading"),
        unit_factor=factor,
        noise_scale=_noise_matrix(cfg["noise_scale"], n, periods),
        effect=_series(cfg["effect"], t_max - t0, "effect"),
        sharpness=float(cfg["sharpness"]),
    )

    exp = {**_EXPERIMENT_DEFAULTS, **raw_exp}
    try:
        mode = DgpMode(exp["mode"])
    except ValueError:
        raise ConfigError(
            f"mode must be one of {[m.value for m in DgpMode]}, got {exp['mode']!r}"
        ) from None
    try:
        estimators = tuple(Estimator(e) for e in exp["estimators"])
    except ValueError:
        raise ConfigError(
            f"estimators must be among {[e.value for e in Estimator]}, "
            f"got {exp['estimators']!r}"
        ) from None
    workers = exp["workers"]
    if workers != "auto":
        workers = int(workers)

    sol = {**_SOLVER_DEFAULTS, **raw_solver}
    try:
        step_rule = StepRule(sol["step_rule"])
    except ValueError:
        raise ConfigError(
            f"step_rule must be one of {[r.value for r in StepRule]}, "
            f"got {sol['step_rule']!r}"
        ) from None
    solver = SolverConfig(
        max_iterations=int(sol["max_iterations"]),
        objective_tolerance=float(sol["objective_tolerance"]),
        step_rule=step_rule,
    )

    return ExperimentSpec(
        params=params,
        mode=mode,
        estimators=estimators,
        reps=int(exp["reps"]),
        master_seed=int(exp["master_seed"]),
        workers=workers,
        solver=solver,
    )


def load_config(path) -> ExperimentSpec:
    """Read a TOML config file into a fully defaulted ExperimentSpec."""
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from None
    return parse_config(doc)
