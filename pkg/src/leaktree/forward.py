"""Steady-state simulator for a tree network with at most one pressure-driven leak.

Boundary conditions are one fixed-head source leaf plus a fixed inflow at
every other leaf (negative for consumers). On a tree the leaf inflows fix
every pipe flow by continuity, so the only unknown is the leak demand ``D``.
It is found as the root of::

    r(D) = C * H_leak(D) ** beta - D

where ``H_leak(D)`` is the head at the leak after routing the demands plus
``D`` through the tree and propagating head losses from the source. ``r`` is
strictly decreasing on ``[0, C * H_source ** beta]``, so the root is unique.

Sign convention for leaf flows: positive means water entering the network.
With that convention the leaf inflows of a solved state sum to ``D``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import BracketError, InfeasiblePressureError, LeakTreeError, PreconditionError
from .hydraulics import WATER, PhysicalConstants, flow_regime, head_loss, resistance_term
from .network import Network

LEAK_DEMAND_TOL = 1e-10
MAX_ITER = 200


@dataclass(frozen=True)
class LeakSpec:
    """A leak on ``pipe`` at distance ``x`` from the pipe's ``start`` vertex.

    The leak drains ``constant * H ** exponent`` where ``H`` is the local head.
    """

    pipe: int
    x: float
    constant: float
    exponent: float

    def __post_init__(self):
        if not self.constant >= 0:
            raise PreconditionError(f"leak constant must be >= 0, got {self.constant}")
        if not self.exponent > 0:
            raise PreconditionError(f"leak exponent must be > 0, got {self.exponent}")

    def check(self, net: Network):
        if not 0 <= self.pipe < len(net.pipes):
            raise PreconditionError(f"leak pipe {self.pipe} does not exist")
        geom = net.pipes[self.pipe].geometry
        if not 0.0 <= self.x <= geom.length:
            raise PreconditionError(f"leak position {self.x} outside [0, {geom.length}]")
        if geom.minor_loss != 0.0:
            raise PreconditionError(f"leak pipe {self.pipe} has minor losses; leaks must sit on m = 0 pipes")


@dataclass(frozen=True)
class BoundaryConditions:
    """One fixed-head ``source`` leaf and fixed inflows at all other leaves."""

    source: int
    head: float
    demands: Mapping[int, float]

    def check(self, net: Network):
        leaves = set(net.leaves)
        if self.source not in leaves:
            raise PreconditionError(f"source {self.source} is not a leaf")
        if not self.head > 0:
            raise PreconditionError(f"source head must be > 0, got {self.head}")
        expected = leaves - {self.source}
        got = set(self.demands)
        if got != expected:
            missing = sorted(expected - got)
            extra = sorted(got - expected)
            raise PreconditionError(f"demands must cover the non-source leaves: missing {missing}, unexpected {extra}")
        positive = [v for v, q in self.demands.items() if q > 0]
        if positive:
            raise PreconditionError(f"consumer demands must be <= 0 (leaving the network): leaves {sorted(positive)}")

    def with_head(self, head: float) -> "BoundaryConditions":
        return BoundaryConditions(self.source, head, dict(self.demands))


@dataclass(frozen=True)
class HydraulicState:
    """Solved heads and flows.

    ``flows[k]`` is the signed flow of pipe ``k`` in its start-to-end
    direction. On the leaking pipe it is the flow on the segment touching
    ``start``; :meth:`pipe_end_flows` gives both segments.
    """

    network: Network
    heads: np.ndarray
    flows: np.ndarray
    leak: LeakSpec | None = None
    leak_head: float = math.nan
    leak_demand: float = 0.0
    diagnostics: dict = field(default_factory=dict, compare=False)

    def pipe_end_flows(self, k: int) -> tuple[float, float]:
        q = float(self.flows[k])
        if self.leak is not None and self.leak.pipe == k:
            return q, q - self.leak_demand
        return q, q

    def flow(self, i: int, j: int) -> float:
        """Flow from ``i`` toward ``j`` measured where the pipe leaves ``i``."""
        k = self.network.edge_id(i, j)
        q_start, q_end = self.pipe_end_flows(k)
        return q_start if i < j else -q_end

    def leaf_inflow(self, leaf: int) -> float:
        (nbr, _), = self.network.neighbors(leaf)
        return self.flow(leaf, nbr)


@dataclass(frozen=True)
class MeasurementSet:
    """Head and signed inflow at every leaf for one snapshot.

    ``sigma_head`` / ``sigma_flow`` are per-leaf standard deviations when the
    readings are known to be noisy.
    """

    heads: Mapping[int, float]
    flows: Mapping[int, float]
    sigma_head: Mapping[int, float] | None = None
    sigma_flow: Mapping[int, float] | None = None
    label: str = ""

    def __post_init__(self):
        if set(self.heads) != set(self.flows):
            raise PreconditionError("head and flow readings must cover the same leaves")
        for sig in (self.sigma_head, self.sigma_flow):
            if sig is not None and any(not s >= 0 for s in sig.values()):
                raise PreconditionError("standard deviations must be >= 0")

    @property
    def leaves(self) -> list[int]:
        return sorted(self.heads)

    @property
    def is_noisy(self) -> bool:
        sigmas = [*(self.sigma_head or {}).values(), *(self.sigma_flow or {}).values()]
        return any(s > 0 for s in sigmas)

    def total_inflow(self) -> float:
        return math.fsum(self.flows[v] for v in self.leaves)


def _directed_loss(geom, q, consts):
    return head_loss(q, geom, consts)


class _TreeRouting:
    """Pipe flows and head propagation for a fixed source and set of leaf inflows."""

    def __init__(self, net: Network, bc: BoundaryConditions, leak: LeakSpec | None, consts):
        self.net = net
        self.bc = bc
        self.leak = leak
        self.consts = consts
        self.parent, self.order = net.parents_from(bc.source)
        self.parent_edge = {v: net.edge_id(v, p) for v, p in self.parent.items() if p >= 0}

        # outflow parent -> child without leak: minus the leaf inflows below the child
        below = {v: 0.0 for v in self.order}
        for v in reversed(self.order):
            if v != bc.source and net.is_leaf(v):
                below[v] += bc.demands[v]
            p = self.parent[v]
            if p >= 0:
                below[p] += below[v]
        self.base_out = {v: -below[v] for v in self.order if self.parent[v] >= 0}

        self.leak_path = []
        if leak is not None:
            pipe = net.pipes[leak.pipe]
            child = pipe.end if self.parent.get(pipe.end) == pipe.start else pipe.start
            upper = self.parent[child]
            self.leak_child = child
            self.leak_upper = upper
            self.leak_offset = leak.x if upper == pipe.start else pipe.length - leak.x
            v = child
            while self.parent[v] >= 0:
                self.leak_path.append(v)
                v = self.parent[v]
            self.leak_path.reverse()  # children along source -> leak_child
            self._on_path = set(self.leak_path)

    def out_flow(self, v: int, demand: float) -> float:
        """Flow leaving ``parent[v]`` toward ``v``."""
        q = self.base_out[v]
        if self.leak is not None and v in self._on_path:
            q += demand
        return q

    def leak_head(self, demand: float) -> float:
        h = self.bc.head
        for v in self.leak_path[:-1]:
            geom = self.net.pipes[self.parent_edge[v]].geometry
            h -= _directed_loss(geom, self.out_flow(v, demand), self.consts)
        geom = self.net.pipes[self.leak.pipe].geometry
        q = self.out_flow(self.leak_child, demand)
        return h - self.leak_offset * resistance_term(q, geom, self.consts)

    def state(self, demand: float, diagnostics: dict) -> HydraulicState:
        net = self.net
        heads = np.empty(net.num_vertices)
        flows = np.zeros(len(net.pipes))
        heads[self.bc.source] = self.bc.head
        leak_head = math.nan
        transitional = set()
        for v in self.order[1:]:
            p = self.parent[v]
            k = self.parent_edge[v]
            pipe = net.pipes[k]
            sign = 1.0 if p == pipe.start else -1.0
            q = self.out_flow(v, demand)
            if self.leak is not None and k == self.leak.pipe:
                qa, qb = q, q - demand
                leak_head = heads[p] - self.leak_offset * resistance_term(qa, pipe.geometry, self.consts)
                heads[v] = leak_head - (pipe.length - self.leak_offset) * resistance_term(qb, pipe.geometry, self.consts)
                flows[k] = qa if sign > 0 else -qb
                seg = (qa, qb)
            else:
                heads[v] = heads[p] - _directed_loss(pipe.geometry, q, self.consts)
                flows[k] = sign * q
                seg = (q,)
            if any(flow_regime(s, pipe.geometry, self.consts) == "transitional" for s in seg):
                transitional.add(k)
        diagnostics = dict(diagnostics, transitional_pipes=sorted(transitional))
        if np.any(heads <= 0) or (self.leak is not None and not leak_head > 0):
            bad = [int(v) for v in np.flatnonzero(heads <= 0)]
            raise InfeasiblePressureError(f"non-positive head at vertices {bad} (leak head {leak_head:.6g})")
        return HydraulicState(net, heads, flows, self.leak, leak_head, demand if self.leak else 0.0, diagnostics)


def find_root(f: Callable[[float], float], lo: float, hi: float, *, ftol: float, maxiter: int = MAX_ITER):
    """Root of ``f`` on ``[lo, hi]`` by false position (Illinois variant) with bisection fallback.

    Stops when ``|f| <= ftol`` or the bracket collapses to adjacent floats.
    Returns ``(root, iterations, history)`` with ``history`` the evaluated
    ``(x, f(x))`` pairs.
    """
    flo, fhi = f(lo), f(hi)
    history = [(lo, flo), (hi, fhi)]
    if abs(flo) <= ftol:
        return lo, 0, history
    if abs(fhi) <= ftol:
        return hi, 0, history
    if np.sign(flo) == np.sign(fhi):
        raise BracketError(f"no sign change on [{lo:.6g}, {hi:.6g}]: f = ({flo:.3g}, {fhi:.3g})")
    side = 0
    width = hi - lo
    for it in range(1, maxiter + 1):
        x = hi - fhi * (hi - lo) / (fhi - flo)
        if not lo < x < hi or (it % 3 == 0 and hi - lo > 0.5 * width):
            x = 0.5 * (lo + hi)
        if it % 3 == 0:
            width = hi - lo
        fx = f(x)
        history.append((x, fx))
        if abs(fx) <= ftol:
            return x, it, history
        if np.sign(fx) == np.sign(flo):
            lo, flo = x, fx
            if side == -1:
                fhi *= 0.5
            side = -1
        else:
            hi, fhi = x, fx
            if side == 1:
                flo *= 0.5
            side = 1
        if np.nextafter(lo, hi) >= hi:
            return x, it, history
    raise BracketError(f"root not converged after {maxiter} iterations")


def solve_no_leak(net: Network, bc: BoundaryConditions, consts: PhysicalConstants = WATER) -> HydraulicState:
    """Flows from continuity alone, heads propagated from the source."""
    bc.check(net)
    return _TreeRouting(net, bc, None, consts).state(0.0, {"iterations": 0})


def solve_with_leak(
    net: Network, bc: BoundaryConditions, leak: LeakSpec, consts: PhysicalConstants = WATER,
    *, tol: float = LEAK_DEMAND_TOL,
) -> HydraulicState:
    """Solve for the leak demand and return the full state.

    Raises
    ------
    InfeasiblePressureError
        If the leak head is non-positive without any leak flow, or any head of
        the solved state is non-positive.
    BracketError
        If the residual has no sign change or fails to converge.
    """
    bc.check(net)
    leak.check(net)
    routing = _TreeRouting(net, bc, leak, consts)
    if leak.constant == 0.0:
        return routing.state(0.0, {"iterations": 0, "residual": 0.0})

    h0 = routing.leak_head(0.0)
    if not h0 > 0:
        raise InfeasiblePressureError(f"leak head is {h0:.6g} m before any leak flow")

    def residual(d):
        # pressure-driven leak stops at zero head; keeps r monotone past the feasible range
        h = routing.leak_head(d)
        return leak.constant * max(h, 0.0) ** leak.exponent - d

    d_max = leak.constant * bc.head**leak.exponent
    demand, iterations, history = find_root(residual, 0.0, d_max, ftol=tol)
    history.sort()
    rs = [r for _, r in history]
    if any(b > a for a, b in zip(rs, rs[1:])):
        raise LeakTreeError("leak residual is not monotone in the demand; friction model is inconsistent")
    diagnostics = {"iterations": iterations, "residual": residual(demand), "bracket": (0.0, d_max)}
    return routing.state(demand, diagnostics)


def measurements_of(state: HydraulicState, label: str = "") -> MeasurementSet:
    """Leaf heads and inflows of a solved state."""
    net = state.network
    heads = {v: float(state.heads[v]) for v in net.leaves}
    flows = {v: state.leaf_inflow(v) for v in net.leaves}
    return MeasurementSet(heads, flows, label=label)


def _per_leaf(value, leaves):
    if isinstance(value, Mapping):
        return {v: float(value.get(v, 0.0)) for v in leaves}
    return {v: float(value) for v in leaves}


def add_noise(meas: MeasurementSet, sigma_head, sigma_flow, seed) -> MeasurementSet:
    """Independent zero-mean Gaussian noise on every channel.

    ``sigma_head`` / ``sigma_flow`` are scalars or per-leaf mappings. Draws
    are taken leaf by leaf in ascending id, head before flow, so a fixed
    ``seed`` reproduces the output bit for bit.
    """
    leaves = meas.leaves
    sh = _per_leaf(sigma_head, leaves)
    sq = _per_leaf(sigma_flow, leaves)
    if any(s < 0 for s in (*sh.values(), *sq.values())):
        raise PreconditionError("standard deviations must be >= 0")
    rng = np.random.default_rng(seed)
    heads, flows = {}, {}
    for v in leaves:
        zh, zq = rng.standard_normal(2)
        heads[v] = meas.heads[v] + sh[v] * zh
        flows[v] = meas.flows[v] + sq[v] * zq
    return MeasurementSet(heads, flows, sh, sq, meas.label)


def add_offset(meas: MeasurementSet, head=0.0, flow=0.0) -> MeasurementSet:
    """Deterministic bias on each channel (scalar or per-leaf mapping)."""
    leaves = meas.leaves
    dh = _per_leaf(head, leaves)
    dq = _per_leaf(flow, leaves)
    heads = {v: meas.heads[v] + dh[v] for v in leaves}
    flows = {v: meas.flows[v] + dq[v] for v in leaves}
    return MeasurementSet(heads, flows, meas.sigma_head, meas.sigma_flow, meas.label)
