"""Tests for the decsynth package."""
