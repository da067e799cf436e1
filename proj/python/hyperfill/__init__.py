"""Parallel advancing-front point fills."""

import json

from . import _core
from ._core import FillError, ParseError

__all__ = ["fill", "validate", "repair", "FillError", "ParseError"]


def fill(h, domain="disc:1", dim=2, threads=1, **kwargs):
    """Fill `domain` with spacing `h` ("H" or "H0:H1").

    Returns (points, owner, record): an (n, dim) array, per-point thread ids
    (None for sequential fills) and the run record as a dict.
    """
    points, owner, record = _core.fill(str(h), domain, dim, threads, **kwargs)
    return points, owner, json.loads(record)


def validate(points, h, domain="disc:1", samples=10000, seed=0):
    """Spacing, containment and coverage report as a dict."""
    return json.loads(_core.validate(points, str(h), domain, samples, seed))


def repair(points, h, domain="disc:1"):
    """Drop points until no pair is closer than the local spacing."""
    return _core.repair(points, str(h), domain)
