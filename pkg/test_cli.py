import json

import pytest

from app.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, cli_main
from app.driver import FRONT_DAT, REPORT_JSON


def test_configs_lists_three_lines(capsys):
    assert cli_main(["configs", "--cores", "2"]) == EXIT_OK
    assert capsys.readouterr().out.splitlines() == ["(1,1)", "(1,2)", "(2,1)"]


def test_configs_rejects_zero_cores(capsys):
    assert cli_main(["configs", "--cores", "0"]) == EXIT_USAGE


def test_pareto_prints_table_16384_front(fixtures_dir, capsys):
    assert cli_main(["pareto", "--input", str(fixtures_dir / "table_16384.csv")]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    lines = [line for line in out if not line.startswith("#")]
    assert len(lines) == 5
    assert [line.split("\t")[0] for line in lines] == ["(1,48)", "(4,12)", "(8,6)", "(3,16)", "(12,4)"]
    notes = [line for line in out if line.startswith("#")]
    assert notes[0].startswith("# performance-optimal (1,48), energy-optimal (12,4), front size 5")
    assert any("degrades performance by 6.7%" in line for line in notes)
    assert any("increases dynamic energy by 56.1%" in line for line in notes)


def test_pareto_aggregates_several_inputs(fixtures_dir, tmp_path, capsys):
    argv = [
        "pareto",
        "--input", str(fixtures_dir / "table_16384.csv"),
        "--input", str(fixtures_dir / "table_17408.csv"),
        "--out", str(tmp_path), "--format", "plotdata",
    ]
    assert cli_main(argv) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[-1].startswith("# 2 fronts: size mean 5.5 max 6")
    assert len((tmp_path / "table_16384" / FRONT_DAT).read_text().splitlines()) == 5
    assert len((tmp_path / "table_17408" / FRONT_DAT).read_text().splitlines()) == 6


def test_pareto_writes_plotdata(fixtures_dir, tmp_path):
    argv = ["pareto", "--input", str(fixtures_dir / "table_17408.csv"), "--out", str(tmp_path), "--format", "plotdata"]
    assert cli_main(argv) == EXIT_OK
    assert len((tmp_path / FRONT_DAT).read_text().splitlines()) == 6


def test_pareto_missing_file_is_runtime_error(tmp_path):
    assert cli_main(["pareto", "--input", str(tmp_path / "absent.csv")]) == EXIT_RUNTIME


def test_stub_sweep_writes_report(tmp_path, capsys):
    argv = ["sweep", "--kernel", "stub", "--n", "1", "--cores", "3", "--energy", "synthetic:unit", "--out", str(tmp_path)]
    assert cli_main(argv) == EXIT_OK
    report = json.loads((tmp_path / REPORT_JSON).read_text())
    assert len(report["samples"]) == 5
    assert report["complete"]


def test_gemm_sweep_smoke(tmp_path):
    argv = [
        "sweep", "--kernel", "gemm_h", "--n", "32", "--cores", "2",
        "--energy", "synthetic:unit", "--out", str(tmp_path),
        "--max-reps", "40", "--eps", "0.5", "--failure-budget", "3",
    ]
    assert cli_main(argv) == EXIT_OK
    assert (tmp_path / REPORT_JSON).exists()


def test_gemm_h_sweep_with_api_preset(tmp_path):
    argv = [
        "sweep", "--kernel", "gemm_h", "--n", "256", "--cores", "4",
        "--energy", "synthetic:unit", "--preset", "api", "--eps", "0.2",
        "--failure-budget", "8", "--format", "plotdata", "--out", str(tmp_path),
    ]
    assert cli_main(argv) == EXIT_OK
    assert (tmp_path / FRONT_DAT).read_text().strip()


def test_gemm_v_sweep_with_copied_bands(tmp_path):
    argv = [
        "sweep", "--kernel", "gemm_v", "--n", "32", "--cores", "2", "--copy-bands",
        "--energy", "synthetic:unit", "--eps", "0.5", "--failure-budget", "3", "--out", str(tmp_path),
    ]
    assert cli_main(argv) == EXIT_OK
    report = json.loads((tmp_path / REPORT_JSON).read_text())
    assert report["provenance"]["spec"]["workload"]["copy_bands"] is True


def test_sweep_config_file(tmp_path, fixtures_dir):
    config = tmp_path / "sweep.env"
    config.write_text(f"energy_source=replay\nreplay_path={fixtures_dir / 'replay_session'}\nstatic_power_w=60\n")
    out = tmp_path / "out"
    argv = ["sweep", "--kernel", "stub", "--n", "1", "--cores", "2", "--config", str(config), "--out", str(out)]
    assert cli_main(argv) == EXIT_OK
    report = json.loads((out / REPORT_JSON).read_text())
    assert report["provenance"]["energy_source"].startswith("replay:")


def test_fit_energy(fixtures_dir, tmp_path, capsys):
    target = tmp_path / "fit.json"
    assert cli_main(["fit-energy", "--input", str(fixtures_dir / "table_16384.csv"), "--report", str(target)]) == EXIT_OK
    assert capsys.readouterr().out.startswith("beta1=")
    report = json.loads(target.read_text())
    assert len(report["rows"]) == 10
    assert min(report["model"][k] for k in ("beta1", "beta2", "beta3")) >= 0


def test_kernels_selftest(capsys):
    assert cli_main(["kernels", "selftest", "--n", "8"]) == EXIT_OK
    assert "FAIL" not in capsys.readouterr().out
    assert cli_main(["kernels", "selftest", "--n", "6"]) == EXIT_USAGE


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["configs", "--cores", "two"],
        ["sweep", "--kernel", "gemm_q", "--n", "4"],
        ["sweep", "--kernel", "fft_h", "--n", "12", "--cores", "2"],
        ["sweep", "--kernel", "stub", "--n", "1", "--cores", "0"],
    ],
)
def test_usage_errors(argv, capsys):
    assert cli_main(argv) == EXIT_USAGE


def test_help_exits_cleanly(capsys):
    assert cli_main(["--help"]) == EXIT_OK
    assert "sweep" in capsys.readouterr().out
