"""Test suite for mdi-keyrate."""
