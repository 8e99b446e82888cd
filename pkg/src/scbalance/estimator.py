"""Exact matching weights from known unit factors, and effect estimation.

Given the unit factors, the minimum-norm simplex weights reproducing the
treated unit's factor are computed by bisection on the scalar dual of an
equality-constrained projection. Effects are per-post-period differences
between the treated outcome and the weighted donor outcome.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import FeasibilityError, Panel, SimplexWeights
from .solver import _project_values, project_to_simplex


class WeightSource(Enum):
    ORACLE = "oracle"
    FITTED = "fitted"


@dataclass(frozen=True)
class EffectSeries:
    """Estimated per-period effects for t = t0+1 .. t_max."""

    effects: np.ndarray
    weights_used: SimplexWeights
    source: WeightSource

    def __post_init__(self):
        arr = np.array(self.effects, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "effects", arr)


@dataclass(frozen=True)
class FeasibilityReport:
    """Pre-treatment residuals of a weighted donor match, with summaries."""

    residuals: np.ndarray
    mean_residual: float
    max_abs_residual: float


def oracle_weights(unit_factor, treated_index: int, tol: float = 1e-12) -> SimplexWeights:
    """Minimum-norm simplex weights that reproduce the treated unit's factor.

    Solves min ||w||^2 over the simplex subject to w . donor_factors equal to
    the treated factor, by bisection on the dual scale: the candidate for a
    given scale is the simplex projection of scale * donor_factors, and its
    constraint value is monotone in the scale.

    Raises FeasibilityError when the treated factor lies outside the donors'
    [min, max] hull. The returned weights index donors in original order
    with the treated unit removed.
    """
    mu = np.asarray(unit_factor, dtype=float)
    target = float(mu[treated_index])
    donors = np.delete(mu, treated_index)
    lo_mu, hi_mu = float(donors.min()), float(donors.max())
    scale = 1.0 + abs(target)
    if not (lo_mu - tol * scale <= target <= hi_mu + tol * scale):
        raise FeasibilityError(
            f"treated unit factor {target} lies outside the donor hull "
            f"[{lo_mu}, {hi_mu}]; no exact matching weights exist"
        )

    def mismatch(nu: float):
        w = _project_values(nu * donors)
        return float(w @ donors) - target, w

    if lo_mu == hi_mu:
        # Degenerate pool: any simplex point matches; uniform is min-norm.
        return project_to_simplex(np.zeros_like(donors))

    span = 1.0 / (hi_mu - lo_mu)
    lo, hi = -span, span
    for _ in range(200):
        if mismatch(lo)[0] <= 0.0:
            break
        lo *= 2.0
    for _ in range(200):
        if mismatch(hi)[0] >= 0.0:
            break
        hi *= 2.0

    # Bisect on the (monotone, piecewise linear) dual; within each linear
    # piece -- a fixed projection support -- the root is solved exactly,
    # which finishes in a few steps once the support stabilizes.
    nu = 0.5 * (lo + hi)
    for _ in range(120):
        val, w = mismatch(nu)
        if abs(val) <= tol * scale:
            break
        if val < 0.0:
            lo = nu
        else:
            hi = nu
        support = donors[w > 0.0]
        slope = float(support @ support) - support.sum() ** 2 / support.size
        jumped = False
        if slope > 0.0:
            candidate = nu + (0.0 - val) / slope
            if lo < candidate < hi:
                nu = candidate
                jumped = True
        if not jumped:
            nu = 0.5 * (lo + hi)
        if hi - lo <= 4e-16 * max(1.0, abs(lo), abs(hi)):
            break
    return project_to_simplex(nu * donors)


def check_feasibility(panel: Panel, weights: SimplexWeights) -> FeasibilityReport:
    """Per-period pre-treatment residuals of the weighted donor match.

    Residual at time t is x_(0,t) - sum_j w_j x_(j+1,t). The mean should be
    near zero for exact matching weights; the max flags single-period
    mismatches the mean can hide.
    """
    w = weights.values
    if w.shape[0] != panel.n - 1:
        raise ValueError(f"expected {panel.n - 1} weights, got {w.shape[0]}")
    residuals = panel.x[0] - w @ panel.x[1:]
    return FeasibilityReport(
        residuals=residuals,
        mean_residual=float(residuals.mean()),
        max_abs_residual=float(np.abs(residuals).max()),
    )


def estimate_effect(
    panel: Panel,
    weights: SimplexWeights,
    source: WeightSource = WeightSource.FITTED,
) -> EffectSeries:
    """Per-period effect estimates: treated outcome minus weighted donors.

    With weights summing to one, any common trend cancels, so the estimate
    isolates the treated unit's deviation in each post period.
    """
    w = weights.values
    if w.shape[0] != panel.n - 1:
        raise ValueError(f"expected {panel.n - 1} weights, got {w.shape[0]}")
    effects = panel.y[0] - w @ panel.y[1:]
    return EffectSeries(effects=effects, weights_used=weights, source=source)


def naive_difference(panel: Panel) -> EffectSeries:
    """Treated-minus-donor-average effects (uniform weights).

    Baseline that ignores the unit factors entirely; biased whenever
    assignment depends on them and the loadings are nonzero.
    """
    uniform = SimplexWeights(np.full(panel.n - 1, 1.0 / (panel.n - 1)))
    return estimate_effect(panel, uniform, WeightSource.FITTED)
