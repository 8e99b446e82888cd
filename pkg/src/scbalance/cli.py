"""Command-line interface.

Subcommands: ``simulate`` (config -> panel CSV + truth JSON), ``fit``
(panel CSV -> weights JSON), ``effect`` (panel + weights -> effect CSV),
``balance-check`` (weights + factors or config -> audit JSON),
``montecarlo`` (config -> result JSON + tidy bias CSV), ``placebo``
(panel CSV -> placebo residual CSV).

Exit codes: 0 success, 1 validation/usage error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys

import numpy as np

from . import panel_io
from .balance import build_b_matrix, eigen_audit, placebo_test
from .dgp import DgpMode, RngSeed, simulate_panel
from .estimator import check_feasibility, estimate_effect, oracle_weights
from .harness import run_experiment
from .model import BVariant
from .solver import fit_weights

_CONFIG_HELP = """\
Config file (TOML). Every key is optional; defaults:

  [params]     n=10, t0=10, t_max=15, trend=0.0, loading=1.0,
               unit_factor = [0.0, spread(-1..1)], noise_scale=0.2,
               effect=1.0, sharpness=1.0
               (trend/loading/effect take a scalar or a full-length list;
               noise_scale takes a scalar, a per-unit list, or a matrix)
  [experiment] mode="confounded" ("designated"), estimators=["oracle_sc",
               "fitted_sc","naive"], reps=1000, master_seed=0, workers="auto"
  [solver]     max_iterations=10000, objective_tolerance=1e-12,
               step_rule="fixed_lipschitz" ("backtracking")

The SC_BALANCE_WORKERS environment variable overrides the worker count.
"""


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="scbalance",
        description="Factor-model panel simulation, synthetic-control weight "
        "fitting, effect estimation, and balance diagnostics.",
        epilog=_CONFIG_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a panel to CSV (+ truth JSON)",
                       epilog=_CONFIG_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", help="TOML config; defaults apply when omitted")
    p.add_argument("--seed", type=int, help="override the config master seed")
    p.add_argument("--mode", choices=[m.value for m in DgpMode],
                   help="override the config assignment mode")
    p.add_argument("--out", required=True, help="output panel CSV path")
    p.add_argument("--truth", help="optional JSON path for the simulation truth")

    p = sub.add_parser("fit", help="fit simplex weights from a panel CSV")
    p.add_argument("--panel", required=True)
    p.add_argument("--t0", type=int, help="last pre-treatment grid index "
                   "(default: inferred from the treated flags)")
    p.add_argument("--out", required=True, help="output weights JSON path")

    p = sub.add_parser("effect", help="per-period effect estimates from weights")
    p.add_argument("--panel", required=True)
    p.add_argument("--weights", required=True, help="weights JSON from 'fit'")
    p.add_argument("--out", required=True, help="output effect CSV path")

    p = sub.add_parser("balance-check",
                       help="eigen-relation audit of both balance-matrix variants")
    p.add_argument("--weights", help="weights JSON from 'fit'")
    p.add_argument("--factors", "--mu", dest="factors",
                   help="JSON list of unit factors, treated unit first")
    p.add_argument("--config", help="derive factors and exact weights from a config")
    p.add_argument("--out", required=True, help="output audit JSON path")

    p = sub.add_parser("montecarlo", help="replicated experiment with summaries",
                       epilog=_CONFIG_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", help="TOML config; defaults apply when omitted")
    p.add_argument("--seed", type=int, help="override the config master seed")
    p.add_argument("--out", required=True, help="output result JSON path")
    p.add_argument("--bias-csv", help="optional tidy CSV of period,estimator,bias,se")

    p = sub.add_parser("placebo", help="in-time placebo residuals from a panel CSV")
    p.add_argument("--panel", required=True)
    p.add_argument("--split", type=int,
                   help="fit on pre periods 0..split (default: midpoint)")
    p.add_argument("--out", required=True, help="output residual CSV path")

    return parser


def _load_spec(args):
    if args.config is not None:
        spec = panel_io.load_config(args.config)
    else:
        spec = panel_io.parse_config({})
    return spec


def _cmd_simulate(args) -> int:
    spec = _load_spec(args)
    seed = args.seed if args.seed is not None else spec.master_seed
    mode = DgpMode(args.mode) if args.mode else spec.mode
    panel, weights, treated = simulate_panel(spec.params, mode, RngSeed(seed, 0))
    original = [f"unit_{i:02d}" for i in range(spec.params.n)]
    labels = [original[treated]] + [lab for i, lab in enumerate(original) if i != treated]
    panel_io.write_panel_csv(args.out, panel, unit_labels=labels)
    if args.truth:
        order = [treated] + [i for i in range(spec.params.n) if i != treated]
        doc = {
            "master_seed": int(seed),
            "mode": mode.value,
            "t0": int(spec.params.t0),
            "treated_unit": original[treated],
            "treated_original_index": int(treated),
            "unit_order": labels,
            "effect": spec.params.effect.tolist(),
            "oracle_weights": {
                lab: float(w) for lab, w in zip(labels[1:], weights.values)
            },
            "unit_factor": {
                lab: float(spec.params.unit_factor[i]) for lab, i in zip(labels, order)
            },
        }
        with open(args.truth, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    return 0


def _cmd_fit(args) -> int:
    parsed = panel_io.parse_panel_csv(args.panel, t0=args.t0)
    fit = fit_weights(parsed.panel)
    report = check_feasibility(parsed.panel, fit.weights)
    panel_io.write_weights_json(
        args.out,
        treated_label=parsed.unit_labels[0],
        donor_labels=parsed.unit_labels[1:],
        fit=fit,
        feasibility=report,
    )
    return 0


def _cmd_effect(args) -> int:
    parsed = panel_io.parse_panel_csv(args.panel)
    weights, _ = panel_io.read_weights_json(args.weights, parsed.unit_labels[1:])
    series = estimate_effect(parsed.panel, weights)
    post_times = parsed.times[parsed.panel.t0 + 1 :]
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["period", "effect"])
        for t, value in zip(post_times, series.effects):
            writer.writerow([t, format(value, ".17g")])
    return 0


def _cmd_balance_check(args) -> int:
    if args.config is not None:
        spec = _load_spec(args)
        factor = spec.params.unit_factor
        weights = oracle_weights(factor, 0)
    else:
        if args.weights is None or args.factors is None:
            raise _UsageError(
                "balance-check needs either --config or both --weights and --factors"
            )
        weights, _ = panel_io.read_weights_json(args.weights)
        with open(args.factors, encoding="utf-8") as fh:
            factor = np.asarray(json.load(fh), dtype=float)
    doc = {}
    for variant in BVariant:
        audit = eigen_audit(build_b_matrix(weights, variant), factor)
        doc[variant.value] = {
            "residual_inf_norm": audit.residual_inf_norm,
            "row1_residual": audit.row1_residual,
            "per_row_factor": [
                None if np.isnan(v) else float(v) for v in audit.per_row_factor
            ],
        }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return 0


def _cmd_montecarlo(args) -> int:
    spec = _load_spec(args)
    if args.seed is not None:
        spec = dataclasses.replace(spec, master_seed=args.seed)
    result = run_experiment(spec)
    panel_io.write_result_json(args.out, result)
    if args.bias_csv:
        with open(args.bias_csv, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["period", "estimator", "bias", "se"])
            for est in spec.estimators:
                summary = result.summaries[est]
                for k in range(spec.params.n_post):
                    writer.writerow([
                        spec.params.t0 + 1 + k,
                        est.value,
                        format(summary.mean_bias_per_period[k], ".17g"),
                        format(summary.se_per_period[k], ".17g"),
                    ])
    return 0


def _cmd_placebo(args) -> int:
    parsed = panel_io.parse_panel_csv(args.panel)
    result = placebo_test(parsed.panel, split=args.split)
    held_out_times = parsed.times[result.split + 1 : parsed.panel.t0 + 1]
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["period", "residual"])
        for t, value in zip(held_out_times, result.residuals):
            writer.writerow([t, format(value, ".17g")])
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "effect": _cmd_effect,
    "balance-check": _cmd_balance_check,
    "montecarlo": _cmd_montecarlo,
    "placebo": _cmd_placebo,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
