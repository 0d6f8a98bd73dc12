"""Run configuration, counts ingestion and parameter sweeps."""

from mdi_keyrate.scan.counts import compute_from_counts, load_counts, write_counts
from mdi_keyrate.scan.runconfig import (
    RunConfig,
    apply_overrides,
    dump_run_config,
    load_run_config,
    save_run_config,
)
from mdi_keyrate.scan.sweep import ScanAxis, ScanRow, ScanSpec, render_csv, run_scan, write_csv

__all__ = [
    # Configuration
    "RunConfig",
    "apply_overrides",
    "dump_run_config",
    "load_run_config",
    "save_run_config",
    # Counts
    "compute_from_counts",
    "load_counts",
    "write_counts",
    # Sweeps
    "ScanAxis",
    "ScanRow",
    "ScanSpec",
    "render_csv",
    "run_scan",
    "write_csv",
]
