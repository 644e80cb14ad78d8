"""Trusted application emulator: Python bindings."""

from ._taemu import (  # noqa: F401
    Manager,
    TaemuError,
    assemble,
    fuzz,
    rank_apis,
    replay,
    taelf_roundtrip,
)
from .client import Client  # noqa: F401

__all__ = [
    "Client",
    "Manager",
    "TaemuError",
    "assemble",
    "fuzz",
    "rank_apis",
    "replay",
    "taelf_roundtrip",
]
