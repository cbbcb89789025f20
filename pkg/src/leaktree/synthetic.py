"""Seeded random tree scenarios for round-trip testing and demos."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasiblePressureError
from .forward import BoundaryConditions, HydraulicState, LeakSpec, solve_with_leak
from .hydraulics import WATER, PhysicalConstants, PipeGeometry
from .network import Network


@dataclass(frozen=True)
class TreeCase:
    network: Network
    boundary: BoundaryConditions
    leak: LeakSpec
    state: HydraulicState


def random_tree_edges(rng: np.random.Generator, n: int) -> list[tuple[int, int]]:
    """Uniform random recursive tree on ``n`` vertices with shuffled labels."""
    labels = rng.permutation(n)
    return [(int(labels[k]), int(labels[rng.integers(k)])) for k in range(1, n)]


def random_geometry(rng: np.random.Generator, minor_loss: bool = True) -> PipeGeometry:
    d = rng.uniform(0.15, 0.5)
    m = rng.uniform(0.0, 200.0) if minor_loss and rng.random() < 0.5 else 0.0
    return PipeGeometry(
        length=rng.uniform(50.0, 800.0),
        diameter=d,
        roughness=rng.uniform(1e-5, 1e-3),
        minor_loss=m,
    )


def random_tree_case(
    rng: np.random.Generator,
    min_vertices: int = 3,
    max_vertices: int = 40,
    *,
    head: float = 100.0,
    junction_margin: float = 1.0,
    consts: PhysicalConstants = WATER,
    max_attempts: int = 50,
) -> TreeCase:
    """Draw a tree, boundary conditions and one leak, then solve it.

    The leak sits at least ``junction_margin`` meters from both pipe ends on a
    pipe without minor losses. Draws whose solution has non-positive heads are
    rejected and redrawn from the same generator.
    """
    for _ in range(max_attempts):
        n = int(rng.integers(min_vertices, max_vertices + 1))
        edges = random_tree_edges(rng, n)
        leak_pipe = int(rng.integers(len(edges)))
        pipes = [
            (i, j, random_geometry(rng, minor_loss=k != leak_pipe))
            for k, (i, j) in enumerate(edges)
        ]
        net = Network(n, pipes)
        leaves = list(net.leaves)
        source = int(rng.choice(leaves))
        demands = {
            v: (0.0 if rng.random() < 0.1 else -rng.uniform(1e-3, 1e-2))
            for v in leaves if v != source
        }
        length = net.pipes[leak_pipe].length
        beta = rng.uniform(0.5, 1.5)
        target = rng.uniform(5e-4, 5e-3)
        leak = LeakSpec(
            pipe=leak_pipe,
            x=rng.uniform(junction_margin, length - junction_margin),
            constant=target / head**beta,
            exponent=beta,
        )
        bc = BoundaryConditions(source, head, demands)
        try:
            state = solve_with_leak(net, bc, leak, consts)
        except InfeasiblePressureError:
            continue
        return TreeCase(net, bc, leak, state)
    raise RuntimeError(f"no feasible scenario in {max_attempts} draws")
