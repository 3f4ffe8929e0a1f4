from __future__ import annotations

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
_root_str = str(ROOT)
# Project root first so "pollinglab" and "cli" resolve to the repo packages.
# Alternatives: pip install -e . (editable) or set PYTHONPATH=. in pytest config.
sys.path.insert(0, _root_str)

from pollinglab import distributions as dist  # noqa: E402
from pollinglab.model import SystemSpec, symmetric_system  # noqa: E402


@pytest.fixture
def mm1_system() -> SystemSpec:
    """Single exhaustive queue, lambda = 0.5, exponential service mean 1, no switch-over."""
    return symmetric_system(
        1,
        interarrival=dist.Exponential(0.5),
        service=dist.Exponential(1.0),
        switchover=dist.Deterministic(0.0),
    )
