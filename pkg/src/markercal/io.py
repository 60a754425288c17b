"""File formats: YAML model and scenario files, CSV measurement files.

Units at file boundaries are human-facing — millimeters, degrees,
newtons, newton-millimeters — and converted to the internal mm/rad
convention on load.  Model serialization is canonical: loading a saved
model and saving it again reproduces the file byte for byte.  Unknown
keys are rejected with the full key path.
"""

from __future__ import annotations

import csv
import io as _io
from typing import Dict, List, Optional, Sequence

import numpy as np
import yaml

from .chain import ChainOp, SerialManipulator
from .compliance import ComplianceCoefficient, ComplianceModel
from .experiments import ExperimentScenario, LoadCase
from .measurements import MeasurementSet, Observation
from .transforms import RigidTransform

_FLOAT_FMT = "%.17g"


class ParseError(ValueError):
    """A file failed to parse or validate; the message carries a location."""


def _fmt(value: float) -> float:
    """Round-trip a float through its shortest exact decimal form."""
    return float(_FLOAT_FMT % float(value))


def _require_keys(mapping: dict, allowed: Sequence[str], required: Sequence[str], where: str):
    if not isinstance(mapping, dict):
        raise ParseError(f"{where}: expected a mapping, got {type(mapping).__name__}")
    for key in mapping:
        if key not in allowed:
            raise ParseError(f"{where}.{key}: unknown key (allowed: {sorted(allowed)})")
    for key in required:
        if key not in mapping:
            raise ParseError(f"{where}.{key}: required key is missing")


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{where}: expected a number, got {value!r}")
    value = float(value)
    if not np.isfinite(value):
        raise ParseError(f"{where}: value is not finite")
    return value


def _vector(value, length: int, where: str) -> np.ndarray:
    if not isinstance(value, (list, tuple)) or len(value) != length:
        raise ParseError(f"{where}: expected a list of {length} numbers")
    return np.array([_number(v, f"{where}[{i}]") for i, v in enumerate(value)])


# -- model files -----------------------------------------------------------

_OP_KEYS = ("op", "joint", "joint_sign", "param", "param_sign", "compliant", "const_mm", "const_deg")


def load_model(path: str) -> SerialManipulator:
    """Read a manipulator description from a YAML model file."""
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    return parse_model(text, source=str(path))


def parse_model(text: str, source: str = "<string>") -> SerialManipulator:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"{source}: invalid YAML: {exc}") from exc
    where = "model"
    _require_keys(
        doc,
        ["name", "dof", "parameters", "chain", "markers", "joint_limits_deg", "compliance"],
        ["name", "dof", "parameters", "chain", "markers"],
        where,
    )
    name = str(doc["name"])
    dof = doc["dof"]
    if not isinstance(dof, int) or dof < 1:
        raise ParseError(f"{where}.dof: expected a positive integer")

    param_names: List[str] = []
    param_nominal: List[float] = []
    param_units: List[str] = []
    for i, entry in enumerate(doc["parameters"]):
        loc = f"{where}.parameters[{i}]"
        _require_keys(entry, ["name", "nominal", "unit"], ["name", "nominal", "unit"], loc)
        unit = entry["unit"]
        if unit not in ("mm", "deg"):
            raise ParseError(f"{loc}.unit: expected 'mm' or 'deg', got {unit!r}")
        param_names.append(str(entry["name"]))
        value = _number(entry["nominal"], f"{loc}.nominal")
        if unit == "deg":
            param_nominal.append(np.deg2rad(value))
            param_units.append("rad")
        else:
            param_nominal.append(value)
            param_units.append("mm")
    if len(set(param_names)) != len(param_names):
        raise ParseError(f"{where}.parameters: duplicate parameter names")

    ops: List[ChainOp] = []
    for i, entry in enumerate(doc["chain"]):
        loc = f"{where}.chain[{i}]"
        _require_keys(entry, _OP_KEYS, ["op"], loc)
        kind = entry["op"]
        if kind not in ("rx", "ry", "rz", "tx", "ty", "tz"):
            raise ParseError(f"{loc}.op: unknown op {kind!r}")
        rotation = kind in ("rx", "ry", "rz")
        if "const_mm" in entry and rotation:
            raise ParseError(f"{loc}.const_mm: rotation ops take const_deg")
        if "const_deg" in entry and not rotation:
            raise ParseError(f"{loc}.const_deg: translation ops take const_mm")
        const = 0.0
        if "const_mm" in entry:
            const = _number(entry["const_mm"], f"{loc}.const_mm")
        elif "const_deg" in entry:
            const = np.deg2rad(_number(entry["const_deg"], f"{loc}.const_deg"))
        joint = entry.get("joint", 0)
        if not isinstance(joint, int) or joint < 0 or joint > dof:
            raise ParseError(f"{loc}.joint: expected an integer in 1..{dof} (or omitted)")
        param = entry.get("param")
        if param is not None and param not in param_names:
            raise ParseError(f"{loc}.param: undeclared parameter {param!r}")
        compliant = entry.get("compliant", False)
        if not isinstance(compliant, bool):
            raise ParseError(f"{loc}.compliant: expected a boolean")
        try:
            ops.append(
                ChainOp(
                    op=kind,
                    joint=joint - 1,
                    joint_sign=_number(entry.get("joint_sign", 1.0), f"{loc}.joint_sign"),
                    param=param,
                    param_sign=_number(entry.get("param_sign", 1.0), f"{loc}.param_sign"),
                    compliant=compliant,
                    const=const,
                )
            )
        except ValueError as exc:
            raise ParseError(f"{loc}: {exc}") from exc

    marker_ids: List[str] = []
    markers: List[np.ndarray] = []
    for i, entry in enumerate(doc["markers"]):
        loc = f"{where}.markers[{i}]"
        _require_keys(entry, ["id", "position_mm"], ["id", "position_mm"], loc)
        marker_ids.append(str(entry["id"]))
        markers.append(_vector(entry["position_mm"], 3, f"{loc}.position_mm"))
    if len(set(marker_ids)) != len(marker_ids):
        raise ParseError(f"{where}.markers: duplicate marker ids")

    joint_limits = None
    if doc.get("joint_limits_deg") is not None:
        raw = doc["joint_limits_deg"]
        if not isinstance(raw, list) or len(raw) != dof:
            raise ParseError(f"{where}.joint_limits_deg: expected {dof} [lo, hi] pairs")
        joint_limits = np.deg2rad(
            [_vector(pair, 2, f"{where}.joint_limits_deg[{i}]") for i, pair in enumerate(raw)]
        )

    compliance = None
    compliant_joints = [op.joint for op in ops if op.compliant]
    if doc.get("compliance") is not None:
        comp = doc["compliance"]
        loc = f"{where}.compliance"
        _require_keys(
            comp,
            ["display_unit", "display_scale", "coefficients"],
            ["display_scale", "coefficients"],
            loc,
        )
        coefficients = []
        for i, entry in enumerate(comp["coefficients"]):
            cloc = f"{loc}.coefficients[{i}]"
            _require_keys(entry, ["name", "joint", "gate_deg"], ["name", "joint"], cloc)
            joint = entry["joint"]
            if not isinstance(joint, int):
                raise ParseError(f"{cloc}.joint: expected an integer")
            try:
                theta = compliant_joints.index(joint - 1)
            except ValueError:
                raise ParseError(
                    f"{cloc}.joint: joint {joint} has no compliant chain op"
                )
            gate = None
            if entry.get("gate_deg") is not None:
                pair = _vector(entry["gate_deg"], 2, f"{cloc}.gate_deg")
                gate = (float(np.deg2rad(pair[0])), float(np.deg2rad(pair[1])))
            try:
                coefficients.append(ComplianceCoefficient(str(entry["name"]), theta, gate))
            except ValueError as exc:
                raise ParseError(f"{cloc}: {exc}") from exc
        compliance = ComplianceModel(
            coefficients,
            display_scale=_number(comp["display_scale"], f"{loc}.display_scale"),
            display_unit=str(comp.get("display_unit", "rad/(N mm)")),
        )

    try:
        return SerialManipulator(
            name=name,
            dof=dof,
            ops=ops,
            param_names=param_names,
            param_nominal=np.array(param_nominal),
            param_units=param_units,
            markers=np.array(markers),
            marker_ids=marker_ids,
            joint_limits=joint_limits,
            compliance=compliance,
        )
    except ValueError as exc:
        raise ParseError(f"{source}: {exc}") from exc


def serialize_model(model: SerialManipulator) -> str:
    """Canonical YAML form of a manipulator (degrees/mm at the boundary)."""
    doc: Dict[str, object] = {"name": model.name, "dof": model.dof}
    parameters = []
    for name, nominal, unit in zip(model.param_names, model.param_nominal, model.param_units):
        if unit == "rad":
            parameters.append({"name": name, "nominal": _fmt(np.rad2deg(nominal)), "unit": "deg"})
        else:
            parameters.append({"name": name, "nominal": _fmt(nominal), "unit": "mm"})
    doc["parameters"] = parameters
    chain = []
    for op in model.ops:
        entry: Dict[str, object] = {"op": op.op}
        if op.joint >= 0:
            entry["joint"] = op.joint + 1
            if op.joint_sign != 1.0:
                entry["joint_sign"] = _fmt(op.joint_sign)
        if op.param is not None:
            entry["param"] = op.param
            if op.param_sign != 1.0:
                entry["param_sign"] = _fmt(op.param_sign)
        if op.compliant:
            entry["compliant"] = True
        if op.const != 0.0:
            if op.is_rotation:
                entry["const_deg"] = _fmt(np.rad2deg(op.const))
            else:
                entry["const_mm"] = _fmt(op.const)
        chain.append(entry)
    doc["chain"] = chain
    doc["markers"] = [
        {"id": mid, "position_mm": [_fmt(v) for v in pos]}
        for mid, pos in zip(model.marker_ids, model.markers)
    ]
    if model.joint_limits is not None:
        doc["joint_limits_deg"] = [
            [_fmt(v) for v in np.rad2deg(pair)] for pair in model.joint_limits
        ]
    if model.compliance is not None:
        comp = model.compliance
        theta_joint = model.program.theta_joint
        coefficients = []
        for coeff in comp.coefficients:
            entry = {"name": coeff.name, "joint": int(theta_joint[coeff.theta]) + 1}
            if coeff.gate is not None:
                entry["gate_deg"] = [_fmt(v) for v in np.rad2deg(coeff.gate)]
            coefficients.append(entry)
        doc["compliance"] = {
            "display_unit": comp.display_unit,
            "display_scale": _fmt(comp.display_scale),
            "coefficients": coefficients,
        }
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None, width=100)


def save_model(model: SerialManipulator, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(serialize_model(model))


# -- measurement files -----------------------------------------------------

_WRENCH_COLUMNS = ["Fx_N", "Fy_N", "Fz_N", "Tx_Nmm", "Ty_Nmm", "Tz_Nmm"]


def _measurement_header(dof: int) -> List[str]:
    return (
        ["config_id", "load_phase"]
        + [f"q{i + 1}_deg" for i in range(dof)]
        + _WRENCH_COLUMNS
        + ["marker_id", "x_mm", "y_mm", "z_mm"]
    )


def serialize_measurements(measurements: MeasurementSet, marker_ids: Sequence[str]) -> str:
    """CSV text: one row per (configuration, load phase, marker)."""
    if len(measurements) == 0:
        raise ValueError("refusing to write an empty measurement set")
    dof = measurements.dof
    buffer = _io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(_measurement_header(dof))
    for obs in measurements:
        q_deg = [_FLOAT_FMT % v for v in np.rad2deg(obs.q)]
        wrench = [_FLOAT_FMT % v for v in obs.load]
        for mid, pos in zip(marker_ids, obs.markers):
            writer.writerow(
                [obs.config_id, obs.phase]
                + q_deg
                + wrench
                + [mid]
                + [_FLOAT_FMT % v for v in pos]
            )
    return buffer.getvalue()


def save_measurements(measurements: MeasurementSet, marker_ids: Sequence[str], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(serialize_measurements(measurements, marker_ids))


def load_measurements(path: str) -> MeasurementSet:
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    return parse_measurements(text, source=str(path))


def parse_measurements(text: str, source: str = "<string>") -> MeasurementSet:
    """Parse a measurement CSV; errors name the offending row and column.

    Markers of each observation are ordered by first appearance within
    that observation; all observations must carry the same marker-id set.
    The parsed set's ``marker_ids`` records that order for later
    alignment against a model.
    """
    reader = csv.reader(_io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(f"{source}: empty file (header row required)")
    header = [h.strip() for h in header]
    if len(header) < 12 or header[0] != "config_id" or header[1] != "load_phase":
        raise ParseError(f"{source}: row 1: malformed header (config_id, load_phase, q*_deg, ...)")
    dof = 0
    while 2 + dof < len(header) and header[2 + dof] == f"q{dof + 1}_deg":
        dof += 1
    if dof == 0:
        raise ParseError(f"{source}: row 1: no q1_deg column found")
    expected = _measurement_header(dof)
    if header != expected:
        raise ParseError(
            f"{source}: row 1: header mismatch; expected {','.join(expected)}"
        )

    groups: Dict[tuple, dict] = {}
    order: List[tuple] = []
    for row_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(expected):
            raise ParseError(
                f"{source}: row {row_no}: expected {len(expected)} cells, got {len(row)}"
            )

        def cell(column: str) -> str:
            return row[expected.index(column)].strip()

        def number(column: str) -> float:
            raw = cell(column)
            try:
                value = float(raw)
            except ValueError:
                raise ParseError(
                    f"{source}: row {row_no}, column {column!r}: not a number: {raw!r}"
                )
            if not np.isfinite(value):
                raise ParseError(
                    f"{source}: row {row_no}, column {column!r}: value is not finite"
                )
            return value

        config_id = cell("config_id")
        phase = cell("load_phase")
        if phase not in ("pre", "post"):
            raise ParseError(
                f"{source}: row {row_no}, column 'load_phase': expected pre or post, got {phase!r}"
            )
        q = np.deg2rad([number(f"q{i + 1}_deg") for i in range(dof)])
        wrench = np.array([number(col) for col in _WRENCH_COLUMNS])
        marker_id = cell("marker_id")
        position = np.array([number("x_mm"), number("y_mm"), number("z_mm")])
        key = (config_id, phase)
        group = groups.get(key)
        if group is None:
            group = {"q": q, "wrench": wrench, "ids": [], "points": [], "row": row_no}
            groups[key] = group
            order.append(key)
        else:
            if not np.array_equal(group["q"], q):
                raise ParseError(
                    f"{source}: row {row_no}: joint angles differ from row "
                    f"{group['row']} of the same configuration/phase"
                )
            if not np.array_equal(group["wrench"], wrench):
                raise ParseError(
                    f"{source}: row {row_no}: wrench differs from row "
                    f"{group['row']} of the same configuration/phase"
                )
        if marker_id in group["ids"]:
            raise ParseError(
                f"{source}: row {row_no}: duplicate marker {marker_id!r} "
                f"in configuration {config_id!r} phase {phase!r}"
            )
        group["ids"].append(marker_id)
        group["points"].append(position)

    if not groups:
        raise ParseError(f"{source}: no measurement rows")
    reference_ids = groups[order[0]]["ids"]
    observations = []
    for key in order:
        group = groups[key]
        if set(group["ids"]) != set(reference_ids):
            raise ParseError(
                f"{source}: configuration {key[0]!r} phase {key[1]!r} carries markers "
                f"{sorted(group['ids'])}, expected {sorted(reference_ids)}"
            )
        index = [group["ids"].index(mid) for mid in reference_ids]
        points = np.array(group["points"])[index]
        wrench = group["wrench"]
        observations.append(
            Observation(
                config_id=key[0],
                q=group["q"],
                markers=points,
                load=None if not np.any(wrench) else wrench,
                phase=key[1],
            )
        )
    try:
        measurements = MeasurementSet(observations)
    except ValueError as exc:
        raise ParseError(f"{source}: {exc}") from exc
    measurements.marker_ids = list(reference_ids)
    return measurements


def align_markers(measurements: MeasurementSet, marker_ids: Sequence[str]) -> MeasurementSet:
    """Reorder each observation's markers to match ``marker_ids``."""
    file_ids = getattr(measurements, "marker_ids", None)
    if file_ids is None or list(file_ids) == list(marker_ids):
        return measurements
    if set(file_ids) != set(marker_ids):
        raise ParseError(
            f"measurement markers {sorted(file_ids)} do not match "
            f"model markers {sorted(marker_ids)}"
        )
    index = [list(file_ids).index(mid) for mid in marker_ids]
    observations = [
        Observation(obs.config_id, obs.q, obs.markers[index],
                    obs.load if np.any(obs.load) else None, obs.phase)
        for obs in measurements
    ]
    aligned = MeasurementSet(observations)
    aligned.marker_ids = list(marker_ids)
    return aligned


def fixture_path(name: str) -> str:
    """Absolute path of a bundled model or scenario file (``markercal/data``)."""
    from importlib.resources import files

    return str(files("markercal").joinpath("data", name))


# -- scenario files --------------------------------------------------------

def load_scenario(path: str) -> ExperimentScenario:
    """Read an experiment scenario; the model path resolves relative to it."""
    import os

    with open(path, "r", encoding="utf-8") as handle:
        try:
            doc = yaml.safe_load(handle)
        except yaml.YAMLError as exc:
            raise ParseError(f"{path}: invalid YAML: {exc}") from exc
    where = "scenario"
    _require_keys(
        doc,
        [
            "name", "kind", "model", "seed", "trials", "noise_std_mm",
            "configurations", "truth", "load", "identify",
        ],
        ["kind", "model", "configurations"],
        where,
    )
    kind = doc["kind"]
    if kind not in ("comparison", "elastostatic"):
        raise ParseError(f"{where}.kind: expected comparison or elastostatic")
    model_path = os.path.join(os.path.dirname(os.path.abspath(path)), str(doc["model"]))
    model = load_model(model_path)

    conf = doc["configurations"]
    _require_keys(conf, ["count", "values_deg"], [], f"{where}.configurations")
    configurations = None
    n_configurations = 3
    if "values_deg" in conf and conf["values_deg"] is not None:
        rows = conf["values_deg"]
        if not isinstance(rows, list) or not rows:
            raise ParseError(f"{where}.configurations.values_deg: expected a list of rows")
        configurations = np.deg2rad(
            [
                _vector(row, model.dof, f"{where}.configurations.values_deg[{i}]")
                for i, row in enumerate(rows)
            ]
        )
    elif "count" in conf and conf["count"] is not None:
        if not isinstance(conf["count"], int) or conf["count"] < 1:
            raise ParseError(f"{where}.configurations.count: expected a positive integer")
        n_configurations = conf["count"]
    else:
        raise ParseError(f"{where}.configurations: needs count or values_deg")

    truth_delta = np.zeros(model.n_params)
    truth_chi = None
    truth_base = RigidTransform.identity()
    if doc.get("truth") is not None:
        truth = doc["truth"]
        loc = f"{where}.truth"
        _require_keys(truth, ["delta_params", "chi", "base"], [], loc)
        if truth.get("delta_params") is not None:
            for key, value in truth["delta_params"].items():
                try:
                    idx = model.param_index(str(key))
                except KeyError:
                    raise ParseError(f"{loc}.delta_params.{key}: unknown parameter")
                value = _number(value, f"{loc}.delta_params.{key}")
                truth_delta[idx] = (
                    np.deg2rad(value) if model.param_units[idx] == "rad" else value
                )
        if truth.get("chi") is not None:
            if model.compliance is None:
                raise ParseError(f"{loc}.chi: the model declares no compliance")
            names = model.compliance.names
            truth_chi = np.zeros(len(names))
            for key, value in truth["chi"].items():
                if str(key) not in names:
                    raise ParseError(f"{loc}.chi.{key}: unknown compliance coefficient")
                truth_chi[names.index(str(key))] = _number(value, f"{loc}.chi.{key}")
        if truth.get("base") is not None:
            bloc = f"{loc}.base"
            _require_keys(
                truth["base"], ["translation_mm", "rotation_mrad"], [], bloc
            )
            translation = _vector(
                truth["base"].get("translation_mm", [0, 0, 0]), 3, f"{bloc}.translation_mm"
            )
            rotation = _vector(
                truth["base"].get("rotation_mrad", [0, 0, 0]), 3, f"{bloc}.rotation_mrad"
            )
            truth_base = RigidTransform.from_rotation_vector(rotation * 1e-3, translation)

    load = None
    if doc.get("load") is not None:
        loc = f"{where}.load"
        _require_keys(doc["load"], ["mass_kg", "attachment_mm"], ["mass_kg"], loc)
        attachment = _vector(
            doc["load"].get("attachment_mm", [0, 0, 0]), 3, f"{loc}.attachment_mm"
        )
        load = LoadCase(
            mass_kg=_number(doc["load"]["mass_kg"], f"{loc}.mass_kg"),
            attachment=tuple(attachment),
        )

    free_params = None
    estimate_base_tool = False
    fit_compliance = False
    differential = False
    orientation_weight = None
    max_iter = 20
    tol = 1e-9
    if doc.get("identify") is not None:
        ident = doc["identify"]
        loc = f"{where}.identify"
        _require_keys(
            ident,
            [
                "free_params", "estimate_base_tool", "fit_compliance",
                "differential", "orientation_weight", "max_iter", "tol",
            ],
            [],
            loc,
        )
        raw_free = ident.get("free_params")
        if raw_free is None or raw_free == "all":
            free_params = None
        elif raw_free == "none":
            free_params = ()
        elif isinstance(raw_free, list):
            for name in raw_free:
                try:
                    model.param_index(str(name))
                except KeyError:
                    raise ParseError(f"{loc}.free_params: unknown parameter {name!r}")
            free_params = tuple(str(name) for name in raw_free)
        else:
            raise ParseError(f"{loc}.free_params: expected all, none, or a list of names")
        estimate_base_tool = bool(ident.get("estimate_base_tool", False))
        fit_compliance = bool(ident.get("fit_compliance", False))
        differential = bool(ident.get("differential", False))
        if ident.get("orientation_weight") is not None:
            orientation_weight = _number(ident["orientation_weight"], f"{loc}.orientation_weight")
        if ident.get("max_iter") is not None:
            max_iter = int(ident["max_iter"])
        if ident.get("tol") is not None:
            tol = _number(ident["tol"], f"{loc}.tol")

    seed = doc.get("seed", 0)
    if not isinstance(seed, int):
        raise ParseError(f"{where}.seed: expected an integer")
    trials = doc.get("trials", 1)
    if not isinstance(trials, int) or trials < 1:
        raise ParseError(f"{where}.trials: expected a positive integer")

    try:
        return ExperimentScenario(
            model=model,
            name=str(doc.get("name", "scenario")),
            kind=kind,
            seed=seed,
            trials=trials,
            noise_std=_number(doc.get("noise_std_mm", 0.0), f"{where}.noise_std_mm"),
            configurations=configurations,
            n_configurations=n_configurations,
            truth_delta_params=truth_delta,
            truth_chi_display=truth_chi,
            truth_base=truth_base,
            load=load,
            free_params=free_params,
            estimate_base_tool=estimate_base_tool,
            fit_compliance=fit_compliance,
            differential=differential,
            orientation_weight=orientation_weight,
            max_iter=max_iter,
            tol=tol,
        )
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc
