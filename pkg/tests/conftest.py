from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from leaktree import BoundaryConditions, LeakSpec, Network, PipeGeometry

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

# 1 km ductile main used throughout the single-pipe tests
MAIN = PipeGeometry(length=1000.0, diameter=0.3, roughness=1.5e-4)


@pytest.fixture
def main_pipe():
    return MAIN


@pytest.fixture
def pipe_net():
    return Network(2, [(0, 1, MAIN)])


@pytest.fixture
def pipe_bc():
    return BoundaryConditions(source=0, head=50.0, demands={1: -0.05})


@pytest.fixture
def pipe_leak():
    return LeakSpec(pipe=0, x=400.0, constant=1e-3, exponent=0.5)


def star(spokes=3, length=300.0):
    """Hub 0 with leaves 1..spokes, source at leaf 1."""
    geoms = [PipeGeometry(length + 50.0 * k, 0.25 - 0.02 * k, 1e-4) for k in range(spokes)]
    net = Network(spokes + 1, [(0, k + 1, g) for k, g in enumerate(geoms)])
    demands = {k: -0.004 * k for k in range(2, spokes + 1)}
    return net, BoundaryConditions(1, 60.0, demands)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
