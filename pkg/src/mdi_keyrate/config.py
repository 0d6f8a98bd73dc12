"""Process-level settings read from MDI_KEYRATE_* variables and .env files."""

from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process settings with environment variable support.

    Physics parameters live in the run configuration (see ``mdi_keyrate.scan.runconfig``);
    these settings only cover logging, concurrency and default locations.
    """

    model_config = SettingsConfigDict(
        env_prefix="MDI_KEYRATE_",
        env_file=[
            ".env",  # working directory first
            Path.home() / ".config" / "mdi-keyrate" / ".env",  # user file wins
        ],
        env_file_encoding="utf-8",
    )

    # Paths
    config_dir: Path = Field(
        default=Path.home() / ".config" / "mdi-keyrate",
        description="Holds run.conf and the user .env",
    )
    run_config_file: str = Field(
        default="run.conf", description="Default run configuration filename"
    )

    # Execution
    max_workers: int = Field(
        default=4, ge=1, description="Worker threads for sweeps and optimizer candidates"
    )
    default_seed: int = Field(
        default=7, description="Seed used by the optimizer when none is configured"
    )

    # Logging
    log_level: str = Field(default="INFO", description="Level of mdi_keyrate.* loggers")
    log_dir: Path = Field(
        default=Path.home() / ".local" / "state" / "mdi-keyrate" / "logs",
        description="Directory for log files (one log per command plus an error log)",
    )
    log_rotation_size_mb: int = Field(
        default=5, ge=1, description="Rotate a log file past this many MB"
    )
    log_backup_count: int = Field(
        default=3, ge=0, description="Rotated copies kept per log file"
    )

    @property
    def run_config_path(self) -> Path:
        """Full path to the default run configuration."""
        return self.config_dir / self.run_config_file

    def ensure_config_dir(self) -> None:
        """Create the configuration directory on first use."""
        self.config_dir.mkdir(parents=True, exist_ok=True)
