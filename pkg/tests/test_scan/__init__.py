"""Tests for run configuration, counts files and sweeps."""
