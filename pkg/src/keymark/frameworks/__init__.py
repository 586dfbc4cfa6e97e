"""Command-line integration."""

from .cli import KeymarkCli, build_parser, main

__all__ = [
    "KeymarkCli",
    "build_parser",
    "main",
]
