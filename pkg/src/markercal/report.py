"""Report rendering: aligned text tables and machine-readable CSV.

Human-readable reports use boundary units (mm, deg, mdeg, the
compliance display unit) and state the unit in every column header.
Machine-readable CSV carries internal units (mm, rad, rad/(N mm)) with
17-significant-digit floats, so identical inputs produce byte-identical
files.
"""

from __future__ import annotations

import csv
import io as _io
from typing import List, Optional, Sequence

import numpy as np

from .chain import SerialManipulator
from .experiments import ComparisonResult, TrialStatistics
from .identify import IdentificationResult

_FLOAT_FMT = "%.17g"
_NA = "n/a"


def _g(value: Optional[float]) -> str:
    if value is None or not np.isfinite(value):
        return _NA
    return _FLOAT_FMT % value


def _table(header: Sequence[str], rows: Sequence[Sequence[str]], indent: str = "  ") -> str:
    columns = len(header)
    widths = [len(header[c]) for c in range(columns)]
    for row in rows:
        for c, cell in enumerate(row):
            widths[c] = max(widths[c], len(cell))
    lines = []
    for row in [list(header)] + [list(r) for r in rows]:
        cells = [row[0].ljust(widths[0])]
        cells += [row[c].rjust(widths[c]) for c in range(1, columns)]
        lines.append((indent + "  ".join(cells)).rstrip())
    lines.insert(1, indent + "-" * (sum(widths) + 2 * (columns - 1)))
    return "\n".join(lines)


def _boundary(value: float, unit: str) -> float:
    """Convert an internal mm/rad value to its mm/deg boundary form."""
    return float(np.rad2deg(value)) if unit == "rad" else float(value)


def _boundary_unit(unit: str) -> str:
    return "deg" if unit == "rad" else unit


def identify_report(model: SerialManipulator, result: IdentificationResult) -> str:
    """Human-readable summary of one identification run."""
    lines = [
        f"Identification report - {model.name} ({result.approach} approach)",
        "=" * 72,
        (
            f"equations: {result.n_equations}   unknowns: {result.n_unknowns}   "
            f"iterations: {result.iterations}   "
            f"converged: {'yes' if result.converged else 'NO'}"
        ),
        (
            f"residual RMS [mm]: {result.residual_rms:.6g}   "
            f"condition number: {result.condition:.6g}"
        ),
        "",
    ]

    std = result.std()
    free_set = set(result.free_indices)
    std_of = {}
    if std is not None:
        for label, value in zip(result.labels, std):
            std_of[label] = value

    rows = []
    for i, (label, unit) in enumerate(zip(result.param_labels, model.param_units)):
        bunit = _boundary_unit(unit)
        nominal = _boundary(model.param_nominal[i], unit)
        estimate = _boundary(result.params[i], unit)
        delta = _boundary(result.delta_params[i], unit)
        if i not in free_set:
            rows.append([label, bunit, f"{nominal:.6f}", f"{estimate:.6f}", "fixed", ""])
            continue
        sigma = std_of.get(label)
        sigma_text = (
            f"{_boundary(sigma, unit):.3g}" if sigma is not None and np.isfinite(sigma) else _NA
        )
        rows.append(
            [label, bunit, f"{nominal:.6f}", f"{estimate:.6f}", f"{delta:+.6f}", sigma_text]
        )
    lines.append("Geometric parameters:")
    lines.append(_table(["parameter", "unit", "nominal", "estimate", "delta", "std"], rows))

    if len(result.chi_labels):
        comp = model.compliance
        scale = comp.display_scale if comp is not None else 1.0
        unit = comp.display_unit if comp is not None else "rad/(N mm)"
        rows = []
        for label, value in zip(result.chi_labels, result.chi):
            sigma = std_of.get(label)
            sigma_text = (
                f"{sigma / scale:.4f}" if sigma is not None and np.isfinite(sigma) else _NA
            )
            rows.append([label, f"{value / scale:.4f}", sigma_text])
        lines.append("")
        lines.append(f"Joint compliances [{unit}]:")
        lines.append(_table(["coefficient", "value", "std"], rows))

    if result.base_tool is not None:
        base = result.base_tool.base
        translation = base.translation
        rotation = base.rotation_vector() * 1e3
        lines.append("")
        lines.append("Base transform estimate:")
        lines.append(
            "  translation [mm]:   "
            + "  ".join(f"{v:10.4f}" for v in translation)
        )
        lines.append(
            "  rotation   [mrad]:  "
            + "  ".join(f"{v:10.4f}" for v in rotation)
        )
        lines.append("")
        lines.append("Tool marker estimates [mm]:")
        for mid, point in zip(model.marker_ids, result.base_tool.tool_markers):
            lines.append(f"  {mid}:  " + "  ".join(f"{v:10.4f}" for v in point))

    lines.append("")
    excluded = ", ".join(result.excluded) if result.excluded else "none"
    lines.append(f"Excluded (unidentifiable) columns: {excluded}")
    return "\n".join(lines) + "\n"


def identify_csv(model: SerialManipulator, result: IdentificationResult) -> str:
    """Machine-readable identification output (internal units: mm, rad)."""
    buffer = _io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["section", "name", "unit", "nominal", "estimate", "delta", "std"])
    std = result.std()
    std_of = {}
    if std is not None:
        for label, value in zip(result.labels, std):
            std_of[label] = value
    free_set = set(result.free_indices)

    def sigma_cell(label: str) -> str:
        value = std_of.get(label)
        return _g(value) if value is not None else ""

    for i, (label, unit) in enumerate(zip(result.param_labels, model.param_units)):
        writer.writerow(
            [
                "param",
                label,
                unit,
                _g(model.param_nominal[i]),
                _g(result.params[i]),
                _g(result.delta_params[i]) if i in free_set else "",
                sigma_cell(label) if i in free_set else "",
            ]
        )
    for label, value in zip(result.chi_labels, result.chi):
        writer.writerow(
            ["chi", label, "rad/(N mm)", _g(0.0), _g(value), _g(value), sigma_cell(label)]
        )
    if result.base_tool is not None:
        base = result.base_tool.base
        rotation = base.rotation_vector()
        for axis, value in zip("xyz", base.translation):
            writer.writerow(["base", f"p{axis}", "mm", "", _g(value), "", ""])
        for axis, value in zip("xyz", rotation):
            writer.writerow(["base", f"r{axis}", "rad", "", _g(value), "", ""])
        for mid, point in zip(model.marker_ids, result.base_tool.tool_markers):
            for axis, value in zip("xyz", point):
                writer.writerow(["tool", f"{mid}_{axis}", "mm", "", _g(value), "", ""])
    writer.writerow(["summary", "approach", "", "", result.approach, "", ""])
    writer.writerow(["summary", "converged", "bool", "", str(int(result.converged)), "", ""])
    writer.writerow(["summary", "iterations", "count", "", str(result.iterations), "", ""])
    writer.writerow(["summary", "residual_rms", "mm", "", _g(result.residual_rms), "", ""])
    writer.writerow(["summary", "condition", "1", "", _g(result.condition), "", ""])
    writer.writerow(["summary", "n_equations", "count", "", str(result.n_equations), "", ""])
    writer.writerow(["summary", "n_unknowns", "count", "", str(result.n_unknowns), "", ""])
    writer.writerow(
        ["summary", "excluded", "", "", ";".join(result.excluded), "", ""]
    )
    return buffer.getvalue()


def _comparison_rows(result: ComparisonResult, model: SerialManipulator):
    """Yield (label, boundary_unit, fullpose_std, partial_std, factor) rows.

    Lengths stay in mm; angles are reported in millidegrees.
    """
    unit_of = dict(zip(model.param_names, model.param_units))
    for k, label in enumerate(result.labels):
        unit = unit_of.get(label, "mm")
        if unit == "rad":
            bunit = "mdeg"
            scale = np.rad2deg(1.0) * 1e3
        else:
            bunit = "mm"
            scale = 1.0
        fullpose = result.fullpose.std[k] * scale if result.fullpose.std is not None else None
        partial = result.partial.std[k] * scale if result.partial.std is not None else None
        factor = result.improvement[k]
        yield label, bunit, fullpose, partial, factor


def comparison_report(result: ComparisonResult, model: SerialManipulator) -> str:
    """Accuracy-comparison table: per-parameter std for both approaches."""
    lines = [
        f"Accuracy comparison - {result.name}",
        "=" * 72,
        (
            f"trials: {result.trials}   configurations: {result.configurations.shape[0]}   "
            f"noise std [mm]: {result.noise_std:g}   seed: {result.seed}"
        ),
        (
            f"failed trials: full-pose {result.fullpose.n_failures}, "
            f"partial-pose {result.partial.n_failures}"
        ),
        "",
    ]
    rows = []
    for label, bunit, fullpose, partial, factor in _comparison_rows(result, model):
        rows.append(
            [
                label,
                bunit,
                f"{fullpose:.4f}" if fullpose is not None else _NA,
                f"{partial:.4f}" if partial is not None else _NA,
                f"{factor:.2f}" if np.isfinite(factor) else _NA,
            ]
        )
    lines.append(
        _table(
            ["parameter", "unit", "full-pose std", "partial-pose std", "improvement"],
            rows,
        )
    )
    lines.append("")
    lines.append(
        "improvement = std(full-pose) / std(partial-pose); larger is better "
        "for the partial-pose approach"
    )
    return "\n".join(lines) + "\n"


def comparison_csv(result: ComparisonResult, model: SerialManipulator) -> str:
    """Machine-readable comparison output (internal units: mm, rad)."""
    unit_of = dict(zip(model.param_names, model.param_units))
    buffer = _io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(
        [
            "parameter",
            "unit",
            "truth",
            "fullpose_mean",
            "fullpose_std",
            "partial_mean",
            "partial_std",
            "improvement_factor",
        ]
    )

    def stat(stats: TrialStatistics, k: int, which: str) -> str:
        values = stats.mean if which == "mean" else stats.std
        if values is None:
            return _NA
        return _g(values[k])

    for k, label in enumerate(result.labels):
        writer.writerow(
            [
                label,
                unit_of.get(label, "mm"),
                _g(result.fullpose.truth[k]),
                stat(result.fullpose, k, "mean"),
                stat(result.fullpose, k, "std"),
                stat(result.partial, k, "mean"),
                stat(result.partial, k, "std"),
                _g(result.improvement[k]),
            ]
        )
    writer.writerow(
        ["_meta", "trials", str(result.trials), "seed", str(result.seed),
         "noise_std_mm", _g(result.noise_std), ""]
    )
    writer.writerow(
        ["_meta", "failures_fullpose", str(result.fullpose.n_failures),
         "failures_partial", str(result.partial.n_failures), "", "", ""]
    )
    return buffer.getvalue()


def statistics_report(stats: TrialStatistics, unit: str = "", scale: float = 1.0) -> str:
    """Mean/std table for one estimator across Monte-Carlo trials."""
    header = ["label", f"truth [{unit}]" if unit else "truth", "mean", "std"]
    rows = []
    for k, label in enumerate(stats.labels):
        rows.append(
            [
                label,
                f"{stats.truth[k] / scale:.4f}",
                f"{stats.mean[k] / scale:.4f}",
                f"{stats.std[k] / scale:.4f}" if stats.std is not None else _NA,
            ]
        )
    lines = [
        f"{stats.approach} statistics over {stats.n_trials} trials "
        f"({stats.n_failures} failures)",
        _table(header, rows),
    ]
    return "\n".join(lines) + "\n"
