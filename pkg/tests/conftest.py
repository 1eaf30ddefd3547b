"""Shared fixtures: profiles and one cached exhaustion trace."""

from pathlib import Path

import pytest

from yamabe_lab import manifold
from yamabe_lab.exhaustion import run_exhaustion

REPO_ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="session")
def configs_dir():
    return REPO_ROOT / "configs"


@pytest.fixture(scope="session")
def flat_profile():
    return manifold.euclidean(3, r_max=1e8)


@pytest.fixture(scope="session")
def flat_trace(flat_profile):
    """The standard flat-space exhaustion on radii 2, 4, 8 (cached)."""
    return run_exhaustion(flat_profile, (2.0, 4.0, 8.0), nodes_per_unit=128)
