"""Panel simulation from the factor model, with factor-driven assignment.

Outcomes follow trend + loading * unit_factor + Gaussian noise; in post
periods the treated unit additionally receives the effect path. Treatment
is assigned either to a designated unit or by a softmax over the unit
factors restricted to hull-interior units, which keeps exact matching
weights available for whichever unit ends up treated.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .estimator import oracle_weights
from .model import (
    FactorModelParams,
    InvalidParamsError,
    Panel,
    SimplexWeights,
    validate_params,
)

_MASK64 = (1 << 64) - 1

# Substream labels: one independent stream per purpose so that e.g. the
# noise field does not change when only the assignment sharpness does.
_STREAM_ASSIGNMENT = 0
_STREAM_NOISE = 1


def mix64(value: int) -> int:
    """64-bit avalanche hash (splitmix64 finalizer)."""
    z = (value + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_stream_seed(master_seed: int, *indices: int) -> int:
    """Mix a master seed with substream indices into an independent seed."""
    s = mix64(master_seed & _MASK64)
    for ix in indices:
        s = mix64(s ^ mix64(ix & _MASK64))
    return s


@dataclass(frozen=True)
class RngSeed:
    """Addressable RNG stream: a master seed plus a replication index.

    Streams for distinct replication indices are derived through an
    avalanche hash, so parallel replications need no stream coordination.
    """

    master_seed: int
    replication_index: int = 0

    def substream(self, index: int) -> np.random.Generator:
        return np.random.default_rng(
            derive_stream_seed(self.master_seed, self.replication_index, index)
        )

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(
            derive_stream_seed(self.master_seed, self.replication_index)
        )


def _as_seed(seed) -> RngSeed:
    if isinstance(seed, RngSeed):
        return seed
    return RngSeed(int(seed), 0)


class DgpMode(Enum):
    """How the treated unit is chosen."""

    DESIGNATED_TREATED = "designated"
    CONFOUNDED_ASSIGNMENT = "confounded"


@dataclass(frozen=True)
class PlantedOracle:
    """Unit factors with an exactly matchable treated unit.

    ``degenerate`` flags an all-equal donor pool, where the planted weights
    are not unique.
    """

    unit_factor: np.ndarray
    weights: SimplexWeights
    degenerate: bool


def plant_oracle(
    n: int,
    donor_factor,
    concentration: float = 1.0,
    seed=0,
    weights=None,
) -> PlantedOracle:
    """Build unit factors whose treated entry is an exact donor mixture.

    Draws mixture weights from a symmetric Dirichlet (or uses ``weights``
    when given) and sets the treated unit's factor to the weighted donor
    average, so a perfectly matching weight vector exists by construction.

    Parameters
    ----------
    n : int
        Total number of units (>= 3); the treated unit comes first.
    donor_factor : array, length n - 1
        Donor unit factors.
    concentration : float
        Symmetric Dirichlet concentration (> 0).
    seed : int or RngSeed
        Source of the Dirichlet draw.
    weights : array, optional
        Plant these exact weights instead of drawing them.
    """
    donors = np.asarray(donor_factor, dtype=float)
    if n < 3:
        raise ValueError(f"need n >= 3 units, got {n}")
    if donors.shape != (n - 1,):
        raise ValueError(f"donor_factor must have length {n - 1}, got {donors.shape}")
    if weights is None:
        if concentration <= 0:
            raise ValueError(f"concentration must be > 0, got {concentration}")
        rng = _as_seed(seed).generator()
        drawn = rng.dirichlet(np.full(n - 1, float(concentration)))
    else:
        drawn = np.asarray(weights, dtype=float)
    planted = SimplexWeights(drawn)
    treated = float(planted.values @ donors)
    factor = np.concatenate([[treated], donors])
    degenerate = bool(np.all(donors == donors[0]))
    return PlantedOracle(factor, planted, degenerate)


def eligible_units(unit_factor) -> np.ndarray:
    """Indices eligible for confounded assignment: all but the extremes.

    Excludes the first-occurring minimizer and first-occurring maximizer of
    the unit factor, so the treated unit's factor always lies inside the
    donors' hull. Ties break deterministically by index.
    """
    mu = np.asarray(unit_factor, dtype=float)
    lo = int(np.argmin(mu))
    hi = int(np.argmax(mu))
    return np.array([i for i in range(mu.shape[0]) if i not in (lo, hi)], dtype=int)


def assignment_probabilities(unit_factor, sharpness: float) -> np.ndarray:
    """Treatment probabilities: softmax of sharpness * factor over eligible units.

    Excluded (extreme) units get probability 0. Length-n vector summing to 1.
    """
    mu = np.asarray(unit_factor, dtype=float)
    if mu.shape[0] < 3:
        raise ValueError(
            f"confounded assignment needs at least 3 units, got {mu.shape[0]}"
        )
    idx = eligible_units(mu)
    if idx.size == 0:
        raise ValueError("eligible set is empty")
    logits = float(sharpness) * mu[idx]
    logits = logits - logits.max()
    expw = np.exp(logits)
    probs = np.zeros(mu.shape[0])
    probs[idx] = expw / expw.sum()
    return probs


def sample_assignment(
    unit_factor,
    sharpness: float,
    mode: DgpMode,
    seed=0,
    treated_index: int = 0,
) -> np.ndarray:
    """Draw the binary treatment vector; exactly one unit is treated.

    DESIGNATED_TREATED treats ``treated_index`` with probability 1 and
    consumes no randomness. CONFOUNDED_ASSIGNMENT samples the treated unit
    from ``assignment_probabilities``.
    """
    mu = np.asarray(unit_factor, dtype=float)
    if mu.size == 0:
        raise ValueError("unit_factor must be nonempty")
    z = np.zeros(mu.shape[0], dtype=int)
    if mode is DgpMode.DESIGNATED_TREATED:
        z[treated_index] = 1
        return z
    probs = assignment_probabilities(mu, sharpness)
    rng = _as_seed(seed).substream(_STREAM_ASSIGNMENT)
    z[rng.choice(mu.shape[0], p=probs)] = 1
    return z


def simulate_panel(
    params: FactorModelParams,
    mode: DgpMode = DgpMode.DESIGNATED_TREATED,
    seed=0,
) -> tuple[Panel, SimplexWeights, int]:
    """Simulate one panel; returns (panel, matching weights, treated index).

    The treated unit is relabeled to row 0 of the returned panel; the
    returned index is its position in ``params.unit_factor``. The weights
    are the minimum-norm exact matching weights for the realized treated
    unit (recomputed per draw, not taken from any planting step).

    Deterministic: identical (params, mode, seed) give a bit-identical
    panel. The noise field depends only on the seed, not on the mode or
    sharpness.
    """
    violations = validate_params(params)
    if violations:
        raise InvalidParamsError(violations)
    root = _as_seed(seed)

    z = sample_assignment(params.unit_factor, params.sharpness, mode, root)
    treated = int(np.argmax(z))

    noise = params.noise_scale * root.substream(_STREAM_NOISE).standard_normal(
        (params.n, params.n_periods)
    )
    base = params.trend[np.newaxis, :] + np.outer(params.unit_factor, params.loading)
    outcomes = base + noise

    order = np.concatenate([[treated], np.delete(np.arange(params.n), treated)])
    outcomes = outcomes[order]
    x = outcomes[:, : params.t0 + 1]
    y = outcomes[:, params.t0 + 1 :].copy()
    y[0] += params.effect

    beta = oracle_weights(params.unit_factor[order], 0)
    panel = Panel(x=x, y=y, z=np.eye(params.n, dtype=int)[0])
    return panel, beta, treated
