"""Shared test builders."""

import numpy as np

from scbalance import FactorModelParams


def make_params(
    n=3,
    t0=2,
    t_max=4,
    trend=0.0,
    loading=1.0,
    unit_factor=(0.5, 0.0, 1.0),
    noise=0.0,
    effect=2.0,
    sharpness=0.0,
):
    """Valid params by default; scalars broadcast to the full shapes."""
    periods = t_max + 1

    def series(value, length):
        if np.ndim(value) == 0:
            return np.full(length, float(value))
        return np.asarray(value, dtype=float)

    if np.ndim(noise) == 0:
        noise_scale = np.full((n, periods), float(noise))
    else:
        noise_scale = np.asarray(noise, dtype=float)
    return FactorModelParams(
        n=n,
        t0=t0,
        t_max=t_max,
        trend=series(trend, periods),
        loading=series(loading, periods),
        unit_factor=np.asarray(unit_factor, dtype=float),
        noise_scale=noise_scale,
        effect=series(effect, t_max - t0),
        sharpness=sharpness,
    )
