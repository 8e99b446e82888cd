"""Core data containers shared across the package, and their validation.

Pure data plus report-style checks; the simulation, solver, and diagnostic
logic lives in the sibling modules. All containers are frozen dataclasses
holding read-only numpy arrays, so instances can be shared freely across
parallel workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

# Default absolute tolerance for weight invariants. The solver terminates
# well below this; loose enough to absorb rounding.
SIMPLEX_TOL = 1e-9


class SimplexViolation(ValueError):
    """Raised when a weight vector fails the simplex constraints.

    Carries the full violation list in ``violations``.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class InvalidParamsError(ValueError):
    """Raised when FactorModelParams fail validation; carries the report."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class FeasibilityError(ValueError):
    """Raised when the treated unit's factor lies outside the donor hull."""


def _readonly(values, dtype=float):
    out = np.array(values, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FactorModelParams:
    """Primitives of the outcome model: common trend + loading * unit factor + noise.

    Time runs 0..t_max with ``t0`` the last pre-treatment index. The treated
    unit occupies index 0 of ``unit_factor`` by convention (the simulator
    relabels whichever unit is treated to row 0 of the panel it returns).

    Parameters
    ----------
    n : int
        Number of units (>= 3).
    t0 : int
        Last pre-treatment time index (>= 1).
    t_max : int
        Last time index (> t0).
    trend : array, length t_max + 1
        Common time trend added to every unit.
    loading : array, length t_max + 1
        Time-varying loading multiplying the unit factors.
    unit_factor : array, length n
        Per-unit factor; drives both outcomes and (optionally) assignment.
    noise_scale : array, shape (n, t_max + 1)
        Per-cell standard deviation of the Gaussian noise; all >= 0.
    effect : array, length t_max - t0
        Treatment effect path applied to the treated unit in post periods.
    sharpness : float
        Assignment sharpness >= 0; 0 means assignment ignores the factors.
    """

    n: int
    t0: int
    t_max: int
    trend: np.ndarray
    loading: np.ndarray
    unit_factor: np.ndarray
    noise_scale: np.ndarray
    effect: np.ndarray
    sharpness: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "trend", _readonly(self.trend))
        object.__setattr__(self, "loading", _readonly(self.loading))
        object.__setattr__(self, "unit_factor", _readonly(self.unit_factor))
        object.__setattr__(self, "noise_scale", _readonly(self.noise_scale))
        object.__setattr__(self, "effect", _readonly(self.effect))

    @property
    def n_periods(self) -> int:
        return self.t_max + 1

    @property
    def n_post(self) -> int:
        return self.t_max - self.t0


def validate_params(params: FactorModelParams) -> list[str]:
    """Check every FactorModelParams invariant; return the violations.

    Report-style: an empty list means the parameters are valid.
    """
    v = []
    p = params
    if not (isinstance(p.n, (int, np.integer)) and p.n >= 3):
        v.append(f"n must be an integer >= 3, got {p.n!r}")
    if not (isinstance(p.t0, (int, np.integer)) and p.t0 >= 1):
        v.append(f"t0 must be an integer >= 1, got {p.t0!r}")
    if not (isinstance(p.t_max, (int, np.integer)) and p.t_max > p.t0):
        v.append(f"t_max must be an integer > t0={p.t0}, got {p.t_max!r}")
    n_periods = p.t_max + 1
    if p.trend.shape != (n_periods,):
        v.append(f"trend must have length {n_periods}, got shape {p.trend.shape}")
    if p.loading.shape != (n_periods,):
        v.append(f"loading must have length {n_periods}, got shape {p.loading.shape}")
    if p.unit_factor.shape != (p.n,):
        v.append(f"unit_factor must have length {p.n}, got shape {p.unit_factor.shape}")
    if p.noise_scale.shape != (p.n, n_periods):
        v.append(
            f"noise_scale must have shape ({p.n}, {n_periods}), "
            f"got {p.noise_scale.shape}"
        )
    elif np.any(p.noise_scale < 0):
        i, t = np.argwhere(p.noise_scale < 0)[0]
        v.append(f"noise_scale must be nonnegative; entry ({i}, {t}) is {p.noise_scale[i, t]}")
    n_post = p.t_max - p.t0
    if p.effect.shape != (n_post,):
        v.append(f"effect must have length {n_post}, got shape {p.effect.shape}")
    if not (np.isscalar(p.sharpness) or np.ndim(p.sharpness) == 0) or p.sharpness < 0:
        v.append(f"sharpness must be a scalar >= 0, got {p.sharpness!r}")
    for name in ("trend", "loading", "unit_factor", "noise_scale", "effect"):
        arr = getattr(p, name)
        if arr.size and not np.all(np.isfinite(arr)):
            v.append(f"{name} contains non-finite values")
    return v


@dataclass(frozen=True)
class Panel:
    """Observed data: pre matrix ``x``, post matrix ``y``, treatment vector ``z``.

    Rows are units with the treated unit at index 0; ``x`` covers times
    0..t0 and ``y`` covers t0+1..t_max. Exactly one entry of ``z`` is 1.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _readonly(self.x))
        object.__setattr__(self, "y", _readonly(self.y))
        object.__setattr__(self, "z", _readonly(self.z, dtype=int))
        if self.x.ndim != 2 or self.y.ndim != 2 or self.z.ndim != 1:
            raise ValueError("x and y must be 2-d, z 1-d")
        n = self.x.shape[0]
        if self.y.shape[0] != n or self.z.shape[0] != n:
            raise ValueError(
                f"inconsistent unit counts: x has {n}, y has {self.y.shape[0]}, "
                f"z has {self.z.shape[0]}"
            )
        if self.x.shape[1] < 1 or self.y.shape[1] < 1:
            raise ValueError("need at least one pre and one post period")
        if not np.all((self.z == 0) | (self.z == 1)):
            raise ValueError("z must be binary")
        if int(self.z.sum()) != 1:
            raise ValueError(f"exactly one unit must be treated, got {int(self.z.sum())}")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def t0(self) -> int:
        return self.x.shape[1] - 1

    @property
    def t_max(self) -> int:
        return self.t0 + self.y.shape[1]

    @property
    def n_post(self) -> int:
        return self.y.shape[1]

    @property
    def treated_index(self) -> int:
        return int(np.argmax(self.z))


def simplex_violations(values, tol: float = SIMPLEX_TOL) -> list[str]:
    """List every simplex-constraint failure of ``values`` with its magnitude.

    Empty list means the vector lies on the probability simplex within
    ``tol`` (absolute): every entry in [0, 1] and the sum equal to 1.
    """
    w = np.asarray(values, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a nonempty 1-d sequence")
    out = []
    for i in np.nonzero(w < -tol)[0]:
        out.append(f"weight {i} = {w[i]} below 0 by {-w[i]}")
    for i in np.nonzero(w > 1 + tol)[0]:
        out.append(f"weight {i} = {w[i]} above 1 by {w[i] - 1.0}")
    total = math.fsum(w.tolist())
    if abs(total - 1.0) > tol:
        out.append(f"weight sum {total} deviates from 1 by {abs(total - 1.0)}")
    return out


@dataclass(frozen=True)
class SimplexWeights:
    """Donor weights constrained to the probability simplex.

    ``values[j]`` weights donor j, i.e. panel row j + 1 (the treated unit
    occupies row 0 and carries no weight). Construction re-checks the
    constraints at ``tolerance``.
    """

    values: np.ndarray
    tolerance: float = SIMPLEX_TOL

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values))
        violations = simplex_violations(self.values, self.tolerance)
        if violations:
            raise SimplexViolation(violations)

    def __len__(self) -> int:
        return self.values.shape[0]


def check_simplex(values, tol: float = SIMPLEX_TOL) -> SimplexWeights:
    """Accept ``values`` as SimplexWeights, or raise SimplexViolation.

    The raised error lists each failed constraint with its magnitude.
    """
    return SimplexWeights(np.asarray(values, dtype=float), tol)


class BVariant(Enum):
    """Diagonal rule for the balance matrix built from donor weights.

    VERBATIM keeps a zero diagonal on every row. CORRECTED sets donor-row
    diagonals to 1 - w_i, the minimal change under which any factor vector
    matched by the weights is an exact eigenvector with eigenvalue 1.
    """

    VERBATIM = "verbatim"
    CORRECTED = "corrected"


@dataclass(frozen=True)
class BalanceMatrix:
    """The n x n matrix mapping unit factors through the donor weights."""

    b: np.ndarray
    variant: BVariant

    def __post_init__(self):
        object.__setattr__(self, "b", _readonly(self.b))
        if self.b.ndim != 2 or self.b.shape[0] != self.b.shape[1]:
            raise ValueError(f"b must be square, got shape {self.b.shape}")

    @property
    def n(self) -> int:
        return self.b.shape[0]


@dataclass(frozen=True)
class McSummary:
    """Replication-level statistics of an estimator's error, per post period.

    ``se`` is the standard error of the mean bias; NaN when it is undefined
    (fewer than two replications).
    """

    replications: int
    mean_bias_per_period: np.ndarray
    se_per_period: np.ndarray
    rmse_per_period: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean_bias_per_period", _readonly(self.mean_bias_per_period))
        object.__setattr__(self, "se_per_period", _readonly(self.se_per_period))
        object.__setattr__(self, "rmse_per_period", _readonly(self.rmse_per_period))
        k = self.mean_bias_per_period.shape[0]
        if self.se_per_period.shape != (k,) or self.rmse_per_period.shape != (k,):
            raise ValueError("summary arrays must share one length")
