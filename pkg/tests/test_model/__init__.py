"""Tests for the channel and detector model."""
