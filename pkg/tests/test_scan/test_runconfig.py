"""Tests for run configuration files and overrides."""

from pathlib import Path

import pytest

from mdi_keyrate.errors import ConfigurationError
from mdi_keyrate.protocol import EvaluationMode, ProtocolVariant, SamplingScheme
from mdi_keyrate.scan.runconfig import (
    RunConfig,
    apply_overrides,
    dump_run_config,
    load_run_config,
    parse_key_values,
    resolve_run_config,
    save_run_config,
)


def write_config(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


class TestParseKeyValues:
    """Tests for the key=value text format."""

    def test_comments_blanks_and_sections(self) -> None:
        """Only settings survive."""
        text = "# header\n[channel]\n\ndist_a = 40  # km\nvariant=rfi\n"
        assert parse_key_values(text) == [("dist_a", "40"), ("variant", "rfi")]

    def test_line_without_equals(self) -> None:
        """The offending line is located."""
        with pytest.raises(ConfigurationError, match="run.cfg:2"):
            parse_key_values("mu = 0.5\nbeta_deg 25\n", source="run.cfg")


class TestResolveRunConfig:
    """Tests for applying settings on top of defaults."""

    def test_defaults(self) -> None:
        """No settings give the default configuration."""
        assert resolve_run_config([]) == RunConfig()

    def test_aliases(self) -> None:
        """mu sets both signal intensities; total_distance splits evenly."""
        config = resolve_run_config([("mu", "0.5"), ("total_distance", "120")])
        assert config.protocol.mu_z == config.protocol.mu_x == 0.5
        assert config.channel.dist_a == config.channel.dist_b == 60.0

    def test_later_values_win(self) -> None:
        """Settings apply in order."""
        config = resolve_run_config([("beta_deg", "10"), ("beta_deg", "25")])
        assert config.protocol.beta_deg == 25.0

    def test_enums_by_value(self) -> None:
        """Enumerations take their text values."""
        config = resolve_run_config(
            [("variant", "original"), ("mode", "finite"), ("scheme", "biased"), ("mu_z", "0.29")]
        )
        assert config.protocol.variant is ProtocolVariant.ORIGINAL
        assert config.protocol.scheme is SamplingScheme.BIASED
        assert config.mode is EvaluationMode.FINITE

    def test_unknown_key(self) -> None:
        """Unknown keys are named."""
        with pytest.raises(ConfigurationError) as exc_info:
            resolve_run_config([("lambda", "1")])
        assert exc_info.value.key == "lambda"

    @pytest.mark.parametrize(
        "pair",
        [("mu", "bright"), ("epsilon", "2"), ("nu", "0.9"), ("total_distance", "far")],
        ids=["not-a-number", "epsilon-range", "decoy-above-signal", "bad-alias"],
    )
    def test_invalid_values(self, pair: tuple[str, str]) -> None:
        """Values failing validation are configuration errors."""
        with pytest.raises(ConfigurationError):
            resolve_run_config([pair])


class TestRunConfigFiles:
    """Tests for loading, saving and overriding."""

    def test_dump_round_trips(self, tmp_path: Path) -> None:
        """The dump lists every default and loads back to the same configuration."""
        config = resolve_run_config([("beta_deg", "25"), ("distance_per_arm", "50")])
        path = write_config(tmp_path / "run.cfg", dump_run_config(config))
        assert load_run_config(path) == config

    def test_dump_lists_every_key(self) -> None:
        """Defaults included."""
        text = dump_run_config(RunConfig())
        for key in ("eta_d", "p_d", "mu_z", "ie_bound", "n_pairs", "epsilon", "seed"):
            assert f"\n{key} = " in text

    @pytest.mark.parametrize("name", ["run.cfg", "run.yaml"])
    def test_save_and_load(self, tmp_path: Path, name: str) -> None:
        """Both file formats preserve every setting."""
        config = resolve_run_config([("variant", "original"), ("n_pairs", "3e13")])
        path = tmp_path / name
        save_run_config(path, config)
        assert load_run_config(path) == config

    def test_yaml_must_be_mapping(self, tmp_path: Path) -> None:
        """A YAML list is rejected."""
        path = write_config(tmp_path / "run.yaml", "- mu\n- nu\n")
        with pytest.raises(ConfigurationError, match="flat mapping"):
            load_run_config(path)

    def test_missing_file(self, tmp_path: Path) -> None:
        """Missing files are configuration errors."""
        with pytest.raises(ConfigurationError, match="not found"):
            load_run_config(tmp_path / "absent.cfg")

    @pytest.mark.parametrize("name", ["run.cfg", "run.yaml"])
    def test_binary_file(self, tmp_path: Path, name: str) -> None:
        """Undecodable bytes are configuration errors in both formats."""
        path = tmp_path / name
        path.write_bytes(b"mu_z = \xff\xfe\x9c")
        with pytest.raises(ConfigurationError, match="Cannot read"):
            load_run_config(path)

    def test_directory(self, tmp_path: Path) -> None:
        """A directory in place of the file is a configuration error."""
        folder = tmp_path / "run.cfg"
        folder.mkdir()
        with pytest.raises(ConfigurationError, match="Cannot read"):
            load_run_config(folder)

    def test_file_then_overrides(self, tmp_path: Path) -> None:
        """File values replace the base; --set values replace the file."""
        path = write_config(tmp_path / "run.cfg", "beta_deg = 10\nmu = 0.5\n")
        config = load_run_config(path, base=RunConfig(seed=3))
        config = apply_overrides(config, ["beta_deg=25"])
        assert config.seed == 3
        assert config.protocol.mu_z == 0.5
        assert config.protocol.beta_deg == 25.0

    def test_override_needs_equals(self) -> None:
        """--set values look like key=value."""
        with pytest.raises(ConfigurationError, match="key=value"):
            apply_overrides(RunConfig(), ["beta_deg"])
