"""Simulator and numerical checks for supercritical CMJ branching processes.

Every function takes a YAML configuration document (the format read by the
``cmj`` command-line tool) and returns the report as a dict.
"""

import json

from . import _core
from ._core import (
    AssumptionViolation,
    CapabilityError,
    CmjError,
    ConfigError,
    DomainError,
    NumericalError,
    ResourceError,
    UndecidableError,
    UnsupportedRegime,
    anderson_darling_normal,
    ks_normal,
)

__all__ = [
    "AssumptionViolation",
    "CapabilityError",
    "CmjError",
    "ConfigError",
    "DomainError",
    "NumericalError",
    "ResourceError",
    "UndecidableError",
    "UnsupportedRegime",
    "anderson_darling_normal",
    "clt",
    "fringe",
    "ks_normal",
    "lln",
    "martingales",
    "simulate",
    "spectral",
]


def spectral(config: str) -> dict:
    return json.loads(_core.spectral(config))


def lln(config: str, threads: int = 1) -> dict:
    return json.loads(_core.run_lln(config, threads))


def clt(config: str, threads: int = 1, aalpha_bias: float = 0.0) -> dict:
    return json.loads(_core.run_clt(config, threads, aalpha_bias))


def fringe(config: str, threads: int = 1) -> dict:
    return json.loads(_core.run_fringe_census(config, threads))


def martingales(config: str, threads: int = 1) -> dict:
    return json.loads(_core.run_martingale_suite(config, threads))


def simulate(config: str, seed: int) -> list:
    """Rows (node_id, parent_id or None, birth_time, child_rank)."""
    rows = []
    for line in _core.simulate_csv(config, seed).splitlines()[1:]:
        node, parent, birth, rank = line.split(",")
        rows.append((int(node), int(parent) if parent else None, float(birth), int(rank)))
    return rows
