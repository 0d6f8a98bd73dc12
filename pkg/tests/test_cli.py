"""Tests for the mdi-keyrate command line."""

import json
from pathlib import Path

import pytest
from typer.testing import CliRunner

from mdi_keyrate.cli import app
from mdi_keyrate.finitekey import synthesize_counts
from mdi_keyrate.model.channel import ChannelParams
from mdi_keyrate.scan.counts import write_counts
from tests.conftest import BIASED_POINT, make_biased_protocol

runner = CliRunner()

BIASED_OVERRIDES = [
    arg
    for key, value in {"scheme": "biased", "distance_per_arm": 40, **BIASED_POINT}.items()
    for arg in ("--set", f"{key}={value}")
]


class TestConfigCommands:
    """Tests for config show and config init."""

    def test_version(self, isolated_settings: Path) -> None:
        """Prints the package version."""
        result = runner.invoke(app, ["version"])
        assert result.exit_code == 0
        assert "mdi-keyrate v" in result.stdout

    def test_show_defaults_and_overrides(self, isolated_settings: Path) -> None:
        """Every key is listed and --set wins."""
        result = runner.invoke(app, ["config", "show", "--set", "beta_deg=25"])
        assert result.exit_code == 0
        assert "mu_z = 0.67" in result.stdout
        assert "beta_deg = 25.0" in result.stdout

    def test_init_then_refuse_overwrite(self, isolated_settings: Path) -> None:
        """init writes the default location once; --force replaces it."""
        target = isolated_settings / "config" / "run.conf"
        first = runner.invoke(app, ["config", "init"])
        assert first.exit_code == 0
        assert target.exists()
        assert "mu_z = 0.67" in target.read_text()

        second = runner.invoke(app, ["config", "init"])
        assert second.exit_code == 1
        assert "Already exists" in second.stdout

        forced = runner.invoke(app, ["config", "init", "--force"])
        assert forced.exit_code == 0

    def test_default_file_is_picked_up(self, isolated_settings: Path) -> None:
        """A run.conf in the config directory feeds every command."""
        config_dir = isolated_settings / "config"
        config_dir.mkdir()
        (config_dir / "run.conf").write_text("beta_deg = 12.5\n")
        result = runner.invoke(app, ["config", "show"])
        assert "beta_deg = 12.5" in result.stdout

    def test_unknown_key_fails(self, isolated_settings: Path) -> None:
        """Named errors exit with status 1."""
        result = runner.invoke(app, ["config", "show", "--set", "lambda=1"])
        assert result.exit_code == 1
        assert "ConfigurationError" in result.stdout


class TestEvaluationCommands:
    """Tests for simulate, optimize and keyrate."""

    def test_simulate_json(self, isolated_settings: Path) -> None:
        """The JSON report carries the rate and its inputs."""
        result = runner.invoke(app, ["simulate", "--json", "--set", "distance_per_arm=80"])
        assert result.exit_code == 0
        report = json.loads(result.stdout)
        assert report["rate"] == pytest.approx(3.97e-7, rel=1e-2)
        assert report["status"] == "ok"
        assert report["channel"]["dist_a"] == 80.0

    def test_simulate_writes_report_and_log(self, isolated_settings: Path) -> None:
        """--output saves the JSON; the command logs to its own file."""
        output = isolated_settings / "out" / "report.json"
        result = runner.invoke(app, ["simulate", "--set", "distance_per_arm=80", "-o", str(output)])
        assert result.exit_code == 0
        assert json.loads(output.read_text())["variant"] == "rfi"
        log = isolated_settings / "logs" / "mdi-keyrate-simulate.log"
        assert "rate=" in log.read_text()

    def test_optimize_json(self, isolated_settings: Path) -> None:
        """Pinned decoy, one quasi-random start."""
        result = runner.invoke(
            app,
            [
                "optimize",
                "--json",
                "--set",
                "distance_per_arm=80",
                "-b",
                "nu_x=0.01",
                "--starts",
                "1",
            ],
        )
        assert result.exit_code == 0
        payload = json.loads(result.stdout)
        assert payload["optimum"]["nu_x"] == 0.01
        assert payload["best_rate"] >= 3.97e-7 * 0.99

    def test_optimize_bad_bound(self, isolated_settings: Path) -> None:
        """Bounds must parse."""
        result = runner.invoke(app, ["optimize", "-b", "mu_z=low:high"])
        assert result.exit_code == 1
        assert "ConfigurationError" in result.stdout

    def test_keyrate_from_counts(self, isolated_settings: Path) -> None:
        """Counts synthesized at 40 km give the finite-size reference rate."""
        counts = synthesize_counts(make_biased_protocol(), ChannelParams.symmetric(40.0), 3e12)
        path = isolated_settings / "counts.txt"
        write_counts(counts, path)
        result = runner.invoke(app, ["keyrate", str(path), "--json", *BIASED_OVERRIDES])
        assert result.exit_code == 0
        report = json.loads(result.stdout)
        assert report["mode"] == "finite"
        assert report["rate"] == pytest.approx(1.775e-7, rel=0.05)

    def test_keyrate_missing_file(self, isolated_settings: Path) -> None:
        """Schema errors exit with status 1 and are mirrored to the error log."""
        result = runner.invoke(app, ["keyrate", str(isolated_settings / "absent.txt")])
        assert result.exit_code == 1
        assert "CountsSchemaError" in result.stdout
        error_log = isolated_settings / "logs" / "mdi-keyrate-error.log"
        assert "CountsSchemaError" in error_log.read_text()


class TestScanCommand:
    """Tests for the sweep command."""

    def test_csv_to_stdout(self, isolated_settings: Path) -> None:
        """Without an output path the CSV goes to stdout."""
        result = runner.invoke(app, ["scan", "--start", "0", "--stop", "40", "--step", "20"])
        assert result.exit_code == 0
        data = [line for line in result.stdout.splitlines() if not line.startswith("#")]
        assert data[0].startswith("axis,value,variant")
        assert len(data) == 4

    def test_csv_to_file(self, isolated_settings: Path) -> None:
        """--output writes the file and prints a summary."""
        output = isolated_settings / "scan.csv"
        result = runner.invoke(
            app,
            [
                "scan",
                "--axis",
                "beta",
                "--stop",
                "30",
                "--step",
                "15",
                "-V",
                "rfi",
                "-V",
                "original",
                "--set",
                "distance_per_arm=50",
                "-o",
                str(output),
            ],
        )
        assert result.exit_code == 0
        rows = [line for line in output.read_text().splitlines() if not line.startswith("#")]
        assert len(rows) == 1 + 3 * 2
        assert "Wrote" in result.stdout

    def test_empty_range_fails(self, isolated_settings: Path) -> None:
        """stop below start is a configuration error."""
        result = runner.invoke(app, ["scan", "--start", "50", "--stop", "10"])
        assert result.exit_code == 1
        assert "Invalid scan" in result.stdout
