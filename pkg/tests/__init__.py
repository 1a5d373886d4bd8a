"""Tests for lightake."""
