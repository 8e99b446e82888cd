"""Synthetic-control weights as balance diagnostics.

Simulates panels from a trend + loading * unit-factor outcome model with
optionally factor-driven treatment assignment, fits simplex-constrained
donor weights on pre-treatment outcomes, estimates per-period treatment
effects, and audits the balance-matrix eigen-relation plus the Monte Carlo
bias behavior that exact matching weights buy.
"""

from .balance import (
    BalanceDiagnostic,
    EigenAudit,
    PlaceboResult,
    build_b_matrix,
    conditional_bias_experiment,
    eigen_audit,
    placebo_test,
)
from .dgp import (
    DgpMode,
    PlantedOracle,
    RngSeed,
    assignment_probabilities,
    eligible_units,
    plant_oracle,
    sample_assignment,
    simulate_panel,
)
from .estimator import (
    EffectSeries,
    FeasibilityReport,
    WeightSource,
    check_feasibility,
    estimate_effect,
    naive_difference,
    oracle_weights,
)
from .harness import (
    Estimator,
    ExperimentResult,
    ExperimentSpec,
    ReplicationError,
    run_experiment,
    summarize,
)
from .model import (
    SIMPLEX_TOL,
    BalanceMatrix,
    BVariant,
    FactorModelParams,
    FeasibilityError,
    InvalidParamsError,
    McSummary,
    Panel,
    SimplexViolation,
    SimplexWeights,
    check_simplex,
    simplex_violations,
    validate_params,
)
from .panel_io import (
    ConfigError,
    PanelFormatError,
    ParsedPanel,
    load_config,
    parse_config,
    parse_panel_csv,
    write_panel_csv,
)
from .solver import (
    FitResult,
    SolverConfig,
    StepRule,
    fit_weights,
    power_iteration_largest,
    project_to_simplex,
)

__version__ = "0.1.0"
