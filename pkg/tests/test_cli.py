import json

import pytest

from copterftc.cli import EXIT_CONFIG, EXIT_CRASH, EXIT_OK, main
from copterftc.scenario import dump_scenario, load_packaged_scenario


@pytest.fixture
def hover_file(tmp_path):
    spec = load_packaged_scenario("scenario_hover.yaml")
    spec.sim.duration_s = 1.0
    spec.trajectory = spec.trajectory[:1]
    spec.trajectory[0].duration_s = 1.0
    path = tmp_path / "hover.yaml"
    path.write_text(dump_scenario(spec))
    return path


def test_analyze_acai_writes_outputs(tmp_path, capsys):
    out = tmp_path / "results"
    code = main(
        ["analyze-acai", "--config", "PPNNPN", "--failures", "2", "--format", "both", "--out", str(out)]
    )
    assert code == EXIT_OK
    assert (out / "acai_PPNNPN.csv").exists()
    assert (out / "acai_PPNNPN.svg").exists()
    captured = capsys.readouterr().out
    assert "[5]" in captured and "[6]" in captured  # uncontrollable singles


def test_analyze_arcai_writes_outputs(tmp_path):
    out = tmp_path / "results"
    code = main(["analyze-arcai", "--config", "PNPNPN", "--out", str(out)])
    assert code == EXIT_OK
    assert (out / "arcai_PNPNPN.csv").exists()


def test_analyze_bad_config_exit_code(tmp_path):
    code = main(["analyze-acai", "--config", "PQ", "--out", str(tmp_path)])
    assert code == EXIT_CONFIG


def test_simulate_and_plot(tmp_path, hover_file):
    out = tmp_path / "sim"
    code = main(
        ["simulate", "--scenario", str(hover_file), "--format", "both", "--out", str(out)]
    )
    assert code == EXIT_OK
    csv_path = out / "hover-hold.csv"
    assert csv_path.exists()
    assert (out / "hover-hold.svg").exists()
    summary = json.loads((out / "hover-hold_summary.json").read_text())
    assert summary["status"] == "completed"

    plots = tmp_path / "plots"
    code = main(["plot", "--log", str(csv_path), "--out", str(plots)])
    assert code == EXIT_OK
    assert (plots / "hover-hold.svg").exists()


def test_simulate_missing_scenario_exit_code(tmp_path):
    code = main(["simulate", "--scenario", str(tmp_path / "absent.yaml"), "--out", str(tmp_path)])
    assert code == EXIT_CONFIG


def test_simulate_invalid_scenario_exit_code(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("vehicle: {config: PNPNPN}\n")
    code = main(["simulate", "--scenario", str(bad), "--out", str(tmp_path)])
    assert code == EXIT_CONFIG


def test_simulate_crash_exit_code(tmp_path, hover_file):
    import yaml

    from copterftc.scenario import load_scenario

    data = load_scenario(hover_file).model_dump(mode="json")
    data["sim"]["duration_s"] = 5.0
    data["trajectory"][0]["duration_s"] = 5.0
    data["faults"] = [{"time_s": 2.5, "rotor": r} for r in range(1, 7)]
    crash_file = hover_file.parent / "crash.yaml"
    crash_file.write_text(yaml.safe_dump(data, sort_keys=False))
    code = main(["simulate", "--scenario", str(crash_file), "--out", str(hover_file.parent / "o")])
    assert code == EXIT_CRASH


def test_plot_missing_log_exit_code(tmp_path):
    code = main(["plot", "--log", str(tmp_path / "nope.csv"), "--out", str(tmp_path)])
    assert code == 4


def test_sweep_single_failures(tmp_path, hover_file):
    out = tmp_path / "sweep"
    code = main(
        [
            "sweep",
            "--scenario",
            str(hover_file),
            "--failures",
            "1",
            "--fault-time",
            "0.5",
            "--workers",
            "2",
            "--out",
            str(out),
        ]
    )
    # crashes among the variants are reported via exit code 3; with a 1 s
    # hover and 0.5 s faults every run still completes
    assert code == EXIT_OK
    summary = (out / "sweep_summary.csv").read_text().splitlines()
    assert summary[0].startswith("name,failure_set,status")
    assert len(summary) == 1 + 1 + 6  # header + nominal + one per rotor
    assert (out / "hover-hold__nominal.csv").exists()
    assert (out / "hover-hold__f3.csv").exists()


def test_seed_flag_overrides(tmp_path, hover_file, capsys):
    out = tmp_path / "s"
    code = main(["simulate", "--scenario", str(hover_file), "--seed", "42", "--out", str(out)])
    assert code == EXIT_OK
