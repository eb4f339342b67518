"""Tests for qbc-sim."""
