"""Tests for keymark package."""
