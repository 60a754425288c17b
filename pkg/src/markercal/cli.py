"""Command-line interface: ``simulate``, ``identify``, ``compare``.

Exit codes: 0 success (and, for identify, convergence), 2 usage error,
3 file parse/validation error, 4 identifiability failure,
5 non-convergence.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

import numpy as np

from . import io as mio
from . import report
from .compliance import ComplianceError
from .experiments import run_comparison, scenario_with, simulate_measurements
from .identify import (
    IdentifiabilityError,
    IdentifyOptions,
    identify_fullpose,
    identify_iterative,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_IDENTIFIABILITY = 4
EXIT_NONCONVERGENCE = 5


def _write_output(text: str, path: Optional[str]) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)


def _resolve_input(path: str) -> str:
    """Let bare names of bundled model/scenario files work from any directory.

    An existing path always wins; only a non-existing, separator-free
    name is looked up among the bundled data files.
    """
    import os

    if not os.path.exists(path) and os.sep not in path and "/" not in path:
        candidate = mio.fixture_path(path)
        if os.path.exists(candidate):
            return candidate
    return path


def _scenario_overrides(args) -> dict:
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    if getattr(args, "noise", None) is not None:
        changes["noise_std"] = args.noise
    return changes


def _cmd_simulate(args, parser: argparse.ArgumentParser) -> int:
    scenario = mio.load_scenario(_resolve_input(args.scenario))
    changes = _scenario_overrides(args)
    if changes:
        scenario = scenario_with(scenario, **changes)
    measurements = simulate_measurements(scenario, trial=args.trial)
    text = mio.serialize_measurements(measurements, scenario.model.marker_ids)
    _write_output(text, args.output)
    if args.output and args.output != "-":
        print(
            f"wrote {len(measurements)} observations "
            f"({scenario.model.markers.shape[0]} markers each) to {args.output}",
            file=sys.stderr,
        )
    return EXIT_OK


def _parse_free_params(raw: Optional[str], model) -> Optional[Sequence[str]]:
    if raw is None or raw == "all":
        return None
    if raw == "none":
        return ()
    names = tuple(name.strip() for name in raw.split(",") if name.strip())
    for name in names:
        try:
            model.param_index(name)
        except KeyError:
            raise mio.ParseError(
                f"--free-params: unknown parameter {name!r} "
                f"(model declares {', '.join(model.param_names)})"
            )
    return names


def _cmd_identify(args, parser: argparse.ArgumentParser) -> int:
    model = mio.load_model(_resolve_input(args.model))
    measurements = mio.align_markers(
        mio.load_measurements(args.measurements), model.marker_ids
    )
    if args.approach == "fullpose" and (args.fit_compliance or args.differential):
        parser.error("--fit-compliance/--differential require --approach partial")
    options = IdentifyOptions(
        max_iter=args.max_iter,
        tol=args.tol,
        estimate_base_tool=args.estimate_base_tool,
        free_params=_parse_free_params(args.free_params, model),
        fit_compliance=args.fit_compliance,
        differential=args.differential,
        orientation_weight=args.weight,
    )
    if args.approach == "fullpose":
        result = identify_fullpose(model, measurements, options)
    else:
        result = identify_iterative(model, measurements, options)
    if args.machine_readable:
        text = report.identify_csv(model, result)
    else:
        text = report.identify_report(model, result)
    _write_output(text, args.output)
    return EXIT_OK if result.converged else EXIT_NONCONVERGENCE


def _cmd_compare(args, parser: argparse.ArgumentParser) -> int:
    scenario = mio.load_scenario(_resolve_input(args.scenario))
    if scenario.kind != "comparison":
        raise mio.ParseError(
            f"{args.scenario}: compare needs a scenario of kind 'comparison', "
            f"got {scenario.kind!r}"
        )
    changes = _scenario_overrides(args)
    if changes:
        scenario = scenario_with(scenario, **changes)
    result = run_comparison(scenario)
    if args.machine_readable:
        text = report.comparison_csv(result, scenario.model)
    else:
        text = report.comparison_report(result, scenario.model)
    _write_output(text, args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="markercal",
        description=(
            "Serial-robot geometric and elastostatic calibration from "
            "tool-marker position measurements."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser(
        "simulate",
        help="generate a synthetic measurement file from a scenario",
    )
    simulate.add_argument(
        "--scenario", required=True,
        help="scenario YAML file (bare names resolve to bundled files)",
    )
    simulate.add_argument("--output", required=True, help="measurement CSV to write")
    simulate.add_argument("--seed", type=int, default=None, help="override scenario seed")
    simulate.add_argument(
        "--trials", type=int, default=None, help="override scenario trial count"
    )
    simulate.add_argument(
        "--trial", type=int, default=1, help="trial index for the noise draw (default 1)"
    )
    simulate.add_argument(
        "--noise", type=float, default=None, help="override noise std [mm]"
    )

    identify = sub.add_parser(
        "identify",
        help="estimate model parameters from a measurement file",
    )
    identify.add_argument(
        "--model", required=True,
        help="robot model YAML file (bare names resolve to bundled files)",
    )
    identify.add_argument("--measurements", required=True, help="measurement CSV file")
    identify.add_argument(
        "--approach",
        choices=("fullpose", "partial"),
        default="partial",
        help="estimator: full-pose registration or partial-pose (default)",
    )
    identify.add_argument(
        "--weight",
        type=float,
        default=None,
        help="full-pose orientation weight [mm per rad] (default: marker spread)",
    )
    identify.add_argument("--max-iter", type=int, default=20, help="iteration cap")
    identify.add_argument(
        "--tol", type=float, default=1e-9, help="convergence tolerance on updates"
    )
    identify.add_argument(
        "--free-params",
        default="all",
        help="'all', 'none', or a comma-separated list of parameter names",
    )
    identify.add_argument(
        "--estimate-base-tool",
        action="store_true",
        help="estimate the base transform and tool marker positions as well",
    )
    identify.add_argument(
        "--fit-compliance",
        action="store_true",
        help="estimate joint compliances from loaded observations (partial only)",
    )
    identify.add_argument(
        "--differential",
        action="store_true",
        help="difference loaded against unloaded observations (partial only)",
    )
    identify.add_argument("--output", default=None, help="report file (default stdout)")
    identify.add_argument(
        "--machine-readable",
        action="store_true",
        help="emit CSV (internal units: mm, rad) instead of the text report",
    )

    compare = sub.add_parser(
        "compare",
        help="run the Monte-Carlo accuracy comparison of both estimators",
    )
    compare.add_argument(
        "--scenario", required=True,
        help="scenario YAML file (bare names resolve to bundled files)",
    )
    compare.add_argument("--seed", type=int, default=None, help="override scenario seed")
    compare.add_argument(
        "--trials", type=int, default=None, help="override scenario trial count"
    )
    compare.add_argument("--output", default=None, help="report file (default stdout)")
    compare.add_argument(
        "--machine-readable",
        action="store_true",
        help="emit CSV (internal units: mm, rad) instead of the text report",
    )

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "simulate": _cmd_simulate,
        "identify": _cmd_identify,
        "compare": _cmd_compare,
    }
    try:
        return handlers[args.command](args, parser)
    except mio.ParseError as exc:
        print(f"markercal: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except IdentifiabilityError as exc:
        print(f"markercal: identifiability failure: {exc}", file=sys.stderr)
        return EXIT_IDENTIFIABILITY
    except ComplianceError as exc:
        print(f"markercal: {exc}", file=sys.stderr)
        if "converge" in str(exc).lower():
            return EXIT_NONCONVERGENCE
        return EXIT_PARSE
    except OSError as exc:
        print(f"markercal: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ValueError, RuntimeError) as exc:
        print(f"markercal: {exc}", file=sys.stderr)
        if "converge" in str(exc).lower() or "failure budget" in str(exc).lower():
            return EXIT_NONCONVERGENCE
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
