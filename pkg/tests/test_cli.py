"""Command-line interface: subcommands, exit codes, and output files."""

import numpy as np
import pytest

from markercal import cli
from markercal.io import fixture_path, load_measurements, load_model, parse_model

EXPECTED_DELTAS_MM = {"l1": 3.0, "l2": 2.0, "l3": 5.0}
EXPECTED_DELTAS_DEG = {"dq1": 1.0, "dq2": 0.5, "dq3": 2.0}


def simulate_clean(tmp_path, name="m.csv"):
    out = tmp_path / name
    rc = cli.main(
        [
            "simulate",
            "--scenario", fixture_path("comparison_study.yaml"),
            "--noise", "0",
            "--output", str(out),
        ]
    )
    assert rc == 0
    return out


def test_simulate_writes_loadable_deterministic_csv(tmp_path, capsys):
    first = simulate_clean(tmp_path, "a.csv")
    message = capsys.readouterr().err
    assert "wrote 3 observations" in message
    second = simulate_clean(tmp_path, "b.csv")
    assert first.read_bytes() == second.read_bytes()
    measurements = load_measurements(str(first))
    assert len(measurements) == 3
    assert measurements.n_markers == 3


def test_simulate_noise_override_changes_data(tmp_path):
    clean = simulate_clean(tmp_path, "clean.csv")
    noisy = tmp_path / "noisy.csv"
    rc = cli.main(
        [
            "simulate",
            "--scenario", fixture_path("comparison_study.yaml"),
            "--noise", "0.05",
            "--output", str(noisy),
        ]
    )
    assert rc == 0
    assert clean.read_bytes() != noisy.read_bytes()


def test_identify_recovers_injected_truth(tmp_path, capsys):
    measurements = simulate_clean(tmp_path)
    rc = cli.main(
        [
            "identify",
            "--model", fixture_path("demo3r.yaml"),
            "--measurements", str(measurements),
        ]
    )
    assert rc == 0
    text = capsys.readouterr().out
    assert "converged" in text
    assert "residual RMS [mm]" in text
    assert "unit" in text and "deg" in text  # units stated per report column
    for name, delta in EXPECTED_DELTAS_MM.items():
        assert name in text
    # the text report rounds; check numbers via the machine-readable form
    out = tmp_path / "report.csv"
    rc = cli.main(
        [
            "identify",
            "--model", fixture_path("demo3r.yaml"),
            "--measurements", str(measurements),
            "--machine-readable",
            "--output", str(out),
        ]
    )
    assert rc == 0
    rows = {
        parts[1]: parts
        for parts in (line.split(",") for line in out.read_text().splitlines()[1:])
    }
    for name, expected in EXPECTED_DELTAS_MM.items():
        assert abs(float(rows[name][5]) - expected) < 1e-8
    for name, expected in EXPECTED_DELTAS_DEG.items():
        assert abs(float(rows[name][5]) - np.deg2rad(expected)) < 1e-8
    assert rows["converged"][4] == "1"


def test_identify_fullpose_matches_on_clean_data(tmp_path, capsys):
    measurements = simulate_clean(tmp_path)
    rc = cli.main(
        [
            "identify",
            "--model", fixture_path("demo3r.yaml"),
            "--measurements", str(measurements),
            "--approach", "fullpose",
            "--machine-readable",
        ]
    )
    assert rc == 0
    rows = {
        parts[1]: parts
        for parts in (
            line.split(",") for line in capsys.readouterr().out.splitlines()[1:]
        )
    }
    assert abs(float(rows["l3"][5]) - 5.0) < 1e-8
    assert rows["approach"][4] == "fullpose"
    assert int(rows["n_equations"][4]) == 6 * 3


def test_identify_nonconvergence_exits_5(tmp_path):
    noisy = tmp_path / "noisy.csv"
    cli.main(
        [
            "simulate",
            "--scenario", fixture_path("comparison_study.yaml"),
            "--noise", "0.05",
            "--output", str(noisy),
        ]
    )
    with pytest.warns(UserWarning, match="did not meet tol"):
        rc = cli.main(
            [
                "identify",
                "--model", fixture_path("demo3r.yaml"),
                "--measurements", str(noisy),
                "--max-iter", "2",
                "--tol", "1e-12",
            ]
        )
    assert rc == 5
    # a single pass is an explicit one-shot linear solve: no warning,
    # but the exit code still reports non-convergence
    rc = cli.main(
        [
            "identify",
            "--model", fixture_path("demo3r.yaml"),
            "--measurements", str(noisy),
            "--max-iter", "1",
            "--tol", "1e-12",
        ]
    )
    assert rc == 5


def test_missing_files_exit_3(tmp_path, capsys):
    assert cli.main(
        ["identify", "--model", "/nope/model.yaml", "--measurements", "/nope/m.csv"]
    ) == 3
    assert "markercal:" in capsys.readouterr().err
    assert cli.main(
        ["simulate", "--scenario", "/nope/s.yaml", "--output", str(tmp_path / "x")]
    ) == 3


def test_corrupt_measurement_file_exits_3(tmp_path, capsys):
    measurements = simulate_clean(tmp_path)
    text = measurements.read_text().replace("pre", "maybe")
    bad = tmp_path / "bad.csv"
    bad.write_text(text)
    rc = cli.main(
        [
            "identify",
            "--model", fixture_path("demo3r.yaml"),
            "--measurements", str(bad),
        ]
    )
    assert rc == 3
    assert "parse error" in capsys.readouterr().err


def test_empty_measurement_file_exits_3(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    rc = cli.main(
        [
            "identify",
            "--model", fixture_path("demo3r.yaml"),
            "--measurements", str(empty),
        ]
    )
    assert rc == 3
    assert "header row required" in capsys.readouterr().err


def test_unknown_flag_exits_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["identify", "--model", "x", "--measurements", "y", "--frobnicate"])
    assert exc.value.code == 2


def test_fullpose_rejects_compliance_flags(tmp_path, capsys):
    measurements = simulate_clean(tmp_path)
    with pytest.raises(SystemExit) as exc:
        cli.main(
            [
                "identify",
                "--model", fixture_path("demo3r.yaml"),
                "--measurements", str(measurements),
                "--approach", "fullpose",
                "--fit-compliance",
            ]
        )
    assert exc.value.code == 2
    assert "--approach partial" in capsys.readouterr().err


def test_unknown_free_parameter_exits_3(tmp_path, capsys):
    measurements = simulate_clean(tmp_path)
    rc = cli.main(
        [
            "identify",
            "--model", fixture_path("demo3r.yaml"),
            "--measurements", str(measurements),
            "--free-params", "l1,zz9",
        ]
    )
    assert rc == 3
    assert "unknown parameter 'zz9'" in capsys.readouterr().err


DEGENERATE_MODEL = """\
name: degenerate
dof: 1
parameters:
- {name: a, nominal: 300, unit: mm}
- {name: b, nominal: 200, unit: mm}
chain:
- {op: rz, joint: 1}
- {op: tx, param: a}
- {op: tx, param: b}
markers:
- {id: M1, position_mm: [0, 0, 0]}
- {id: M2, position_mm: [50, 0, 0]}
- {id: M3, position_mm: [0, 50, 0]}
joint_limits_deg:
- [-170, 170]
"""


def test_structurally_confounded_parameters_exit_4(tmp_path, capsys):
    """Two translations along the same axis produce identical regressor
    columns; the solver must refuse rather than split the sum arbitrarily."""
    model_path = tmp_path / "degenerate.yaml"
    model_path.write_text(DEGENERATE_MODEL)
    model = parse_model(DEGENERATE_MODEL)
    rng = np.random.default_rng(17)
    rows = ["config_id,load_phase,q1_deg,Fx_N,Fy_N,Fz_N,Tx_Nmm,Ty_Nmm,Tz_Nmm,marker_id,x_mm,y_mm,z_mm"]
    for i in range(4):
        q = rng.uniform(-2, 2, 1)
        markers = model.fk(q).markers
        q_deg = float(np.rad2deg(q[0]))
        for mid, pos in zip(model.marker_ids, markers):
            rows.append(
                f"c{i},pre,{q_deg!r},0,0,0,0,0,0,{mid},"
                f"{float(pos[0])!r},{float(pos[1])!r},{float(pos[2])!r}"
            )
    measurement_path = tmp_path / "m.csv"
    measurement_path.write_text("\n".join(rows) + "\n")
    rc = cli.main(
        [
            "identify",
            "--model", str(model_path),
            "--measurements", str(measurement_path),
        ]
    )
    assert rc == 4
    err = capsys.readouterr().err
    assert "identifiability failure" in err
    assert "a" in err and "b" in err


def test_two_marker_model_exits_3(tmp_path, capsys):
    text = DEGENERATE_MODEL.replace("- {id: M3, position_mm: [0, 50, 0]}\n", "")
    model_path = tmp_path / "two_markers.yaml"
    model_path.write_text(text)
    measurements = simulate_clean(tmp_path)
    rc = cli.main(
        ["identify", "--model", str(model_path), "--measurements", str(measurements)]
    )
    assert rc == 3
    assert "marker" in capsys.readouterr().err


def test_compare_reports_and_is_byte_deterministic(tmp_path, capsys):
    args = [
        "compare",
        "--scenario", fixture_path("comparison_study.yaml"),
        "--trials", "8",
        "--machine-readable",
    ]
    rc = cli.main(args + ["--output", str(tmp_path / "a.csv")])
    assert rc == 0
    rc = cli.main(args + ["--output", str(tmp_path / "b.csv")])
    assert rc == 0
    a = (tmp_path / "a.csv").read_bytes()
    assert a == (tmp_path / "b.csv").read_bytes()
    assert b"improvement_factor" in a
    rc = cli.main(
        [
            "compare",
            "--scenario", fixture_path("comparison_study.yaml"),
            "--trials", "8",
        ]
    )
    assert rc == 0
    text = capsys.readouterr().out
    assert "full-pose" in text and "partial" in text
    assert "[mm]" in text


def test_bare_fixture_names_resolve(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    out = tmp_path / "m.csv"
    rc = cli.main(
        ["simulate", "--scenario", "comparison_study.yaml", "--noise", "0",
         "--output", str(out)]
    )
    assert rc == 0
    rc = cli.main(["identify", "--model", "demo3r.yaml", "--measurements", str(out)])
    assert rc == 0
    capsys.readouterr()
    # a local file of the same name takes precedence over the bundled one
    (tmp_path / "demo3r.yaml").write_text("not yaml: [")
    rc = cli.main(["identify", "--model", "demo3r.yaml", "--measurements", str(out)])
    assert rc == 3


def test_compare_rejects_non_comparison_scenario(capsys):
    rc = cli.main(
        ["compare", "--scenario", fixture_path("elastostatic_study.yaml")]
    )
    assert rc == 3
    assert "kind 'comparison'" in capsys.readouterr().err


def test_elastostatic_workflow_through_cli(tmp_path, capsys):
    measurements = tmp_path / "loaded.csv"
    rc = cli.main(
        [
            "simulate",
            "--scenario", fixture_path("elastostatic_study.yaml"),
            "--output", str(measurements),
        ]
    )
    assert rc == 0
    rc = cli.main(
        [
            "identify",
            "--model", fixture_path("industrial6r.yaml"),
            "--measurements", str(measurements),
            "--free-params", "none",
            "--estimate-base-tool",
            "--fit-compliance",
            "--differential",
            "--machine-readable",
        ]
    )
    assert rc == 0
    rows = {
        parts[1]: parts
        for parts in (
            line.split(",") for line in capsys.readouterr().out.splitlines()[1:]
        )
    }
    # machine-readable chi values are in rad/(N mm); the study's display
    # scale is 1e-9, so chi21 = 0.287e-9
    assert abs(float(rows["chi21"][4]) - 0.287e-9) < 1e-15
    assert abs(float(rows["chi6"][4]) - 2.074e-9) < 1e-15
    assert abs(float(rows["px"][4]) - (-34.4)) < 1e-6
