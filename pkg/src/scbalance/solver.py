"""Simplex-constrained least squares on pre-treatment outcomes.

Fits donor weights minimizing the squared pre-treatment mismatch of the
treated unit, with weights bounded in [0, 1] and summing to one. Projected
gradient descent with an exact Euclidean simplex projection; the step comes
from the largest Gram eigenvalue (power iteration) or from backtracking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import Panel, SimplexWeights


def _max_simplex_violation(w: np.ndarray) -> float:
    total = math.fsum(w.tolist())
    return max(0.0, float(-w.min()), float(w.max() - 1.0), abs(total - 1.0))


class StepRule(Enum):
    FIXED_LIPSCHITZ = "fixed_lipschitz"
    BACKTRACKING = "backtracking"


@dataclass(frozen=True)
class SolverConfig:
    """Projected-gradient settings.

    ``objective_tolerance`` is the relative per-iteration decrease below
    which the fit counts as converged. ``record_trace`` additionally stores
    (objective, max simplex violation) per iteration for instrumented runs.
    """

    max_iterations: int = 10_000
    objective_tolerance: float = 1e-12
    step_rule: StepRule = StepRule.FIXED_LIPSCHITZ
    record_trace: bool = False

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.objective_tolerance <= 0:
            raise ValueError(
                f"objective_tolerance must be > 0, got {self.objective_tolerance}"
            )


@dataclass(frozen=True)
class FitResult:
    """Outcome of a weight fit.

    ``objective`` is the final sum of squared pre-treatment residuals.
    ``degenerate`` flags a rank-deficient or all-zero donor block (the
    minimizer is then not unique). ``trace`` is (iterations, 2) with columns
    objective and max simplex violation when recording was requested.
    """

    weights: SimplexWeights
    objective: float
    iterations: int
    converged: bool
    degenerate: bool = False
    trace: np.ndarray | None = None


def _project_values(v: np.ndarray) -> np.ndarray:
    """Raw sort-and-threshold simplex projection (no wrapping, no snapping)."""
    u = np.sort(v)[::-1]
    prefix = np.cumsum(u) - 1.0
    j = np.arange(1, v.size + 1)
    rho = int(np.nonzero(u - prefix / j > 0)[0][-1])
    return np.maximum(v - prefix[rho] / (rho + 1), 0.0)


def project_to_simplex(v) -> SimplexWeights:
    """Euclidean projection onto the probability simplex.

    Sort-and-threshold rule: with v sorted descending as u, find the largest
    j such that u_j - (sum of the top j minus 1)/j > 0, set theta to that
    average, and clip v - theta at zero. The exactly-rounded sum of the
    output is snapped to 1, which makes re-projection a bit-exact no-op.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("input must be a nonempty 1-d vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("input must be finite")
    if v.min() >= 0.0 and math.fsum(v.tolist()) == 1.0:
        return SimplexWeights(v + 0.0)

    u = np.sort(v)[::-1]
    prefix = np.cumsum(u) - 1.0
    j = np.arange(1, v.size + 1)
    rho = int(np.nonzero(u - prefix / j > 0)[0][-1])
    theta = (math.fsum(u[: rho + 1].tolist()) - 1.0) / (rho + 1)
    w = np.maximum(v - theta, 0.0)

    # Snap the correctly-rounded sum to exactly 1 (one pass almost always
    # suffices; the loop guards the half-ulp carry case).
    for _ in range(4):
        defect = math.fsum(w.tolist()) - 1.0
        if defect == 0.0:
            break
        w[int(np.argmax(w))] -= defect
    return SimplexWeights(w + 0.0)


def power_iteration_largest(mat: np.ndarray, iterations: int = 50, rel_tol: float = 1e-10) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration.

    Deterministic seeded start; stops early once the Rayleigh quotient's
    relative change drops below ``rel_tol``.
    """
    d = mat.shape[0]
    rng = np.random.default_rng(0)
    vec = rng.standard_normal(d)
    vec /= np.linalg.norm(vec)
    value = 0.0
    for _ in range(iterations):
        nxt = mat @ vec
        norm = np.linalg.norm(nxt)
        if norm == 0.0:
            return 0.0
        vec = nxt / norm
        new_value = float(vec @ (mat @ vec))
        if abs(new_value - value) <= rel_tol * max(1.0, abs(new_value)):
            return new_value
        value = new_value
    return value


def fit_weights(panel: Panel, config: SolverConfig = SolverConfig()) -> FitResult:
    """Fit simplex-constrained donor weights to the pre-treatment outcomes.

    Minimizes sum_t (x_(treated,t) - sum_j w_j x_(j,t))^2 over the simplex by
    projected gradient descent from the uniform start. Terminates on a
    relative objective decrease below ``config.objective_tolerance`` or on
    ``config.max_iterations``.

    An all-zero donor block returns uniform weights with converged=False and
    the degenerate flag set; a rank-deficient donor Gram (smallest eigenvalue
    below 1e-10 times the largest) only sets the flag.
    """
    target = panel.x[0]
    donors = panel.x[1:]
    d = donors.shape[0]

    gram = donors @ donors.T

    def objective_at(w):
        # Residual form: accurate arbitrarily close to a zero objective
        # (the Gram form loses everything below ~eps * scale to cancellation).
        r = target - w @ donors
        return float(r @ r), r

    lipschitz = power_iteration_largest(gram)
    uniform = np.full(d, 1.0 / d)
    if lipschitz <= 0.0:
        w = project_to_simplex(uniform)
        trace = np.zeros((0, 2)) if config.record_trace else None
        return FitResult(w, objective_at(w.values)[0], 0, False, degenerate=True,
                         trace=trace)
    degenerate = bool(np.linalg.eigvalsh(gram)[0] < 1e-10 * lipschitz)

    w = _project_values(uniform)
    f, res = objective_at(w)
    step = 1.0 / lipschitz
    trace = [] if config.record_trace else None
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iterations + 1):
        grad = -(donors @ res)
        if config.step_rule is StepRule.FIXED_LIPSCHITZ:
            w_new = _project_values(w - step * grad)
            f_new, res_new = objective_at(w_new)
        else:
            s = step
            while True:
                w_new = _project_values(w - s * grad)
                f_new, res_new = objective_at(w_new)
                if f_new <= f + 1e-14 * max(1.0, abs(f)) or s < 1e-18 / lipschitz:
                    break
                s *= 0.5
            step = min(s * 1.2, 1e6 / lipschitz)
        if trace is not None:
            trace.append((f_new, _max_simplex_violation(w_new)))
        drop = f - f_new
        w, f, res = w_new, f_new, res_new
        if drop <= config.objective_tolerance * max(f + drop, 1e-300):
            converged = True
            break

    weights = project_to_simplex(w)
    return FitResult(
        weights=weights,
        objective=objective_at(weights.values)[0],
        iterations=iterations,
        converged=converged,
        degenerate=degenerate,
        trace=np.asarray(trace) if trace is not None else None,
    )
