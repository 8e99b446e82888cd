"""Why exact matching weights matter under factor-driven assignment.

When treatment probability depends on the unit factors, units that get
treated differ systematically from the donor pool, and a plain donor
average is biased. Conditioning on exact matching weights restores the
randomized-trial behavior: the weighted estimator stays unbiased at any
confounding strength. Paired replications (same panels for both
estimators) make the contrast exact.
"""

import numpy as np

from scbalance import FactorModelParams, conditional_bias_experiment


def study_params(sharpness):
    n, t0, t_max = 12, 20, 24
    return FactorModelParams(
        n=n,
        t0=t0,
        t_max=t_max,
        trend=np.zeros(t_max + 1),
        loading=np.ones(t_max + 1),
        unit_factor=np.linspace(-1.0, 1.0, n),
        noise_scale=np.full((n, t_max + 1), 0.2),
        effect=np.ones(t_max - t0),
        sharpness=sharpness,
    )


print(f"{'sharpness':>9} | {'weighted bias':>13} {'(/SE)':>6} | "
      f"{'uniform bias':>12} {'(/SE)':>6}")
print("-" * 60)
for sharpness in (0.0, 0.5, 1.0, 2.0, 4.0):
    diag = conditional_bias_experiment(study_params(sharpness), reps=3000, seed=0)
    sc, naive = diag.sc_summary, diag.naive_summary
    sc_bias = sc.mean_bias_per_period.mean()
    sc_z = np.abs(sc.mean_bias_per_period / sc.se_per_period).max()
    nv_bias = naive.mean_bias_per_period.mean()
    nv_z = np.abs(naive.mean_bias_per_period / naive.se_per_period).min()
    print(f"{sharpness:9.1f} | {sc_bias:+13.4f} {sc_z:6.1f} | "
          f"{nv_bias:+12.4f} {nv_z:6.1f}")

print()
print("The weighted estimator's bias stays within sampling noise (|z| < 3)")
print("at every sharpness; the uniform average drifts with the confounding")
print("strength and its bias is many standard errors wide once assignment")
print("prefers high-factor units.")
