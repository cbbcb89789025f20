"""Leak detection and localization from leaf-only head and flow readings.

The tree search repeatedly picks a junction, computes for one leaf in each of
its branches the head the junction *would* have if nothing leaked on the way
(the apparent head), and keeps the branch with the lowest value: extra flow
attributed to pipes downstream of a leak inflates the predicted losses, so
only the leaking branch under-predicts. The junction then becomes a measured
leaf of the smaller tree, with its head and outflow taken from a non-leaking
branch where the no-leak prediction is exact. When one pipe is left, the
closed-form single-pipe estimate gives the position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import (
    AmbiguousSubtreeError,
    CoverageError,
    DegenerateDenominatorError,
    InfeasiblePressureError,
    InsufficientExcitationError,
    LeakTreeError,
    NoLeakDetectedError,
    OutOfRangeError,
    PreconditionError,
)
from .forward import MeasurementSet
from .hydraulics import WATER, PhysicalConstants, PipeGeometry, d_resistance_dq, head_loss, resistance_term
from .network import Network

DENOM_TOL = 1e-12
DETECT_TOL = 1e-9
TIE_TOL = 1e-9
RANGE_SLACK = 1e-6
JUNCTION_FRACTION = 1e-3


class LeakDetection(NamedTuple):
    detected: bool
    imbalance: float
    threshold: float


@dataclass(frozen=True)
class LocalizationResult:
    """Identified pipe and leak position.

    ``x`` is measured from ``from_vertex``, the endpoint with the higher head
    in the final single-pipe step. ``raw_x`` is the unclamped estimate.
    """

    pipe: int
    x: float
    from_vertex: int
    to_vertex: int
    length: float
    raw_x: float
    beta: float | None = None
    constant: float | None = None
    sigma_x: float | None = None
    junction_proximate: bool = False
    diagnostics: dict = field(default_factory=dict, compare=False)

    def x_from(self, vertex: int) -> float:
        if vertex == self.from_vertex:
            return self.x
        if vertex == self.to_vertex:
            return self.length - self.x
        raise KeyError(f"vertex {vertex} is not an endpoint of pipe {self.pipe}")


def require_coverage(net: Network, meas: MeasurementSet):
    missing = sorted(set(net.leaves) - set(meas.heads))
    extra = sorted(set(meas.heads) - set(net.leaves))
    if missing or extra:
        raise CoverageError(f"measurements must cover exactly the leaves: missing {missing}, not leaves {extra}")


def detection_threshold(meas: MeasurementSet) -> float:
    """``1e-9`` m^3/s for exact data, else three standard deviations of the summed flow noise."""
    if meas.sigma_flow and any(s > 0 for s in meas.sigma_flow.values()):
        return 3.0 * math.sqrt(sum(s * s for s in meas.sigma_flow.values()))
    return DETECT_TOL


def detect_leak(meas: MeasurementSet, net: Network | None = None, threshold: float | None = None) -> LeakDetection:
    """Flag a leak when the summed leaf inflow exceeds ``threshold``."""
    if net is not None:
        require_coverage(net, meas)
    if threshold is None:
        threshold = detection_threshold(meas)
    imbalance = meas.total_inflow()
    return LeakDetection(imbalance > threshold, imbalance, threshold)


# -- single pipe -----------------------------------------------------------

def _position(h0, h1, q0, q1, geom, consts):
    u_in = resistance_term(q0, geom, consts)
    u_out = resistance_term(-np.asarray(q1, dtype=float), geom, consts)
    den = u_in - u_out
    return (h0 - h1 - geom.length * u_out), den


def localize_single_pipe(h0, h1, q0, q1, geom: PipeGeometry, consts: PhysicalConstants = WATER):
    """Leak distance from end 0 of a single pipe.

    ``q0`` and ``q1`` are the inflows at the two ends (positive into the
    pipe), so ``q0 + q1`` is the leak demand. The position follows from
    equating the two friction drops on either side of the leak::

        x = (H0 - H1 - l U(-q1)) / (U(q0) - U(-q1))

    Accepts arrays for vectorized use. The raw value is returned; it may fall
    slightly outside ``[0, l]`` for noisy inputs.
    """
    scalar = np.ndim(h0) == 0 and np.ndim(q0) == 0 and np.ndim(h1) == 0 and np.ndim(q1) == 0
    if np.any(np.asarray(q0) + np.asarray(q1) <= 0):
        raise PreconditionError("inflow does not exceed outflow; there is no leak to locate")
    num, den = _position(h0, h1, q0, q1, geom, consts)
    if np.any(np.abs(den) < DENOM_TOL):
        raise DegenerateDenominatorError(
            "resistance on both sides of the leak is indistinguishable "
            f"(|dU| < {DENOM_TOL:g}); the leak is below measurement resolution"
        )
    x = num / den
    return float(x) if scalar else x


def leak_head(h0, q0, x, geom: PipeGeometry, consts: PhysicalConstants = WATER):
    """Head at the leak seen from end 0."""
    return h0 - x * resistance_term(q0, geom, consts)


def estimate_leak_params(snapshot_a, snapshot_b, x: float, geom: PipeGeometry, consts: PhysicalConstants = WATER):
    """Leak exponent and constant from two snapshots ``(H0, q0, q1)``.

    Both snapshots share the leak position ``x`` but differ in source head
    and leak demand; the ratio of demands against the ratio of leak heads
    fixes the exponent, after which the constant follows from either one.
    """
    (h0a, q0a, q1a), (h0b, q0b, q1b) = snapshot_a, snapshot_b
    da, db = q0a + q1a, q0b + q1b
    if h0a == h0b or da == db:
        raise InsufficientExcitationError("snapshots need different source heads and different leak demands")
    if da <= 0 or db <= 0:
        raise PreconditionError("both snapshots must show a positive leak demand")
    ha = leak_head(h0a, q0a, x, geom, consts)
    hb = leak_head(h0b, q0b, x, geom, consts)
    if not (ha > 0 and hb > 0):
        raise InfeasiblePressureError(f"non-positive head at the leak ({ha:.6g}, {hb:.6g})")
    if ha == hb:
        raise InsufficientExcitationError("leak heads coincide across snapshots")
    beta = math.log(da / db) / math.log(ha / hb)
    constant = da / ha**beta
    return beta, constant


# -- propagation on the full network ----------------------------------------

def _side_flow(net, meas, s, t):
    return math.fsum(meas.flows[v] for v in net.leaves_behind(s, t))


def _walk(net, meas, path, consts):
    h = meas.heads[path[0]]
    for u, w in zip(path, path[1:]):
        geom = net.pipes[net.edge_id(u, w)].geometry
        h -= head_loss(_side_flow(net, meas, u, w), geom, consts)
    return h


def propagate(net: Network, meas: MeasurementSet, p: int, s: int, t: int, consts: PhysicalConstants = WATER):
    """Head at ``s`` and flow from ``s`` into ``t``, from the readings on ``s``'s side.

    Exact when nothing leaks on that side of pipe ``(s, t)``. The flow on each
    pipe of the path from leaf ``p`` is the summed inflow of the leaves
    behind it, and the head drops by ``l U + M`` per pipe.
    """
    behind = net.leaves_behind(s, t)
    if p not in behind:
        raise PreconditionError(f"leaf {p} is not on vertex {s}'s side of pipe ({s}, {t})")
    q_st = math.fsum(meas.flows[v] for v in behind)
    return _walk(net, meas, net.path(p, s), consts), q_st


def apparent_head(net: Network, meas: MeasurementSet, leaf: int, a: int, consts: PhysicalConstants = WATER) -> float:
    """Head at ``a`` computed from ``leaf`` assuming no leak anywhere on the path."""
    if not net.is_leaf(leaf):
        raise PreconditionError(f"vertex {leaf} is not a leaf")
    return _walk(net, meas, net.path(leaf, a), consts)


# -- tree search -------------------------------------------------------------

@dataclass
class _Reading:
    head: float
    flow: float
    var_head: float = 0.0
    var_flow: float = 0.0


class _ShrinkingTree:
    """Active part of the network with a reading at each of its leaves."""

    def __init__(self, net: Network, readings: dict[int, _Reading], consts, noisy: bool):
        self.net = net
        self.active = set(net.vertices)
        self.readings = readings
        self.consts = consts
        self.noisy = noisy

    def nbrs(self, v):
        return [(w, k) for w, k in self.net.neighbors(v) if w in self.active]

    def is_leaf(self, v):
        return len(self.nbrs(v)) == 1

    def rooted(self, root):
        parent = {root: (-1, -1)}
        order = [root]
        for u in order:
            for w, k in self.nbrs(u):
                if w not in parent:
                    parent[w] = (u, k)
                    order.append(w)
        return parent, order

    def pick_pivot(self, policy, rng):
        inner = sorted(v for v in self.active if not self.is_leaf(v))
        if policy == "first":
            return inner[0]
        if policy == "random":
            return int(rng.choice(inner))
        if policy != "centroid":
            raise ValueError(f"unknown pivot policy {policy!r}")
        root = inner[0]
        parent, order = self.rooted(root)
        size = {v: 1 for v in order}
        for v in reversed(order[1:]):
            size[parent[v][0]] += size[v]
        n = len(order)
        best, best_load = None, None
        for v in inner:
            load = max([n - size[v]] + [size[w] for w, _ in self.nbrs(v) if parent[w][0] == v])
            if best_load is None or load < best_load:
                best, best_load = v, load
        return best

    def branches(self, a, policy, rng):
        """Per neighbor of ``a``: (representative leaf, leaves of the branch), plus rooted data."""
        parent, order = self.rooted(a)
        children = {v: [] for v in order}
        for v in order[1:]:
            children[parent[v][0]].append(v)
        below = {v: 0.0 for v in order}
        depth = {a: 0}
        for v in order[1:]:
            depth[v] = depth[parent[v][0]] + 1
        for v in reversed(order[1:]):
            if not children[v]:
                below[v] += self.readings[v].flow
            below[parent[v][0]] += below[v]
        out = {}
        for b in sorted(children[a]):
            leaves, stack = [], [b]
            while stack:
                u = stack.pop()
                if children[u]:
                    stack.extend(children[u])
                else:
                    leaves.append(u)
            leaves.sort()
            if policy == "first":
                rep = leaves[0]
            elif policy == "nearest":
                rep = min(leaves, key=lambda v: (depth[v], v))
            elif policy == "random":
                rep = int(rng.choice(leaves))
            else:
                raise ValueError(f"unknown leaf policy {policy!r}")
            out[b] = (rep, leaves)
        return out, parent, children, below

    def apparent(self, leaf, parent, children, below):
        """Apparent head at the root of ``parent`` from ``leaf`` and its variance."""
        r = self.readings[leaf]
        h = r.head
        var = r.var_head
        coef = {}
        v = leaf
        while parent[v][0] >= 0:
            u, k = parent[v]
            geom = self.net.pipes[k].geometry
            q = below[v]
            h -= head_loss(q, geom, self.consts)
            if self.noisy:
                g = geom.length * _safe_du(q, geom, self.consts) + 2.0 * geom.minor_loss * abs(q)
                for j in _leaves_under(v, children):
                    coef[j] = coef.get(j, 0.0) + g
            v = u
        if self.noisy:
            var += sum(self.readings[j].var_flow * c * c for j, c in coef.items())
        return h, var


def _safe_du(q, geom, consts):
    try:
        return d_resistance_dq(q, geom, consts)
    except LeakTreeError:
        return d_resistance_dq(q * (1 + 1e-12) + 1e-300, geom, consts)


def _leaves_under(v, children):
    stack, out = [v], []
    while stack:
        u = stack.pop()
        if children[u]:
            stack.extend(children[u])
        else:
            out.append(u)
    return out


def _readings(meas: MeasurementSet):
    sh = meas.sigma_head or {}
    sq = meas.sigma_flow or {}
    return {
        v: _Reading(meas.heads[v], meas.flows[v], sh.get(v, 0.0) ** 2, sq.get(v, 0.0) ** 2)
        for v in meas.leaves
    }


def _reduce(net, meas, consts, pivot, leaf_choice, rng, tie_tol):
    noisy = meas.is_noisy
    tree = _ShrinkingTree(net, _readings(meas), consts, noisy)
    trace = []
    while len(tree.active) > 2:
        a = tree.pick_pivot(pivot, rng)
        branches, parent, children, below = tree.branches(a, leaf_choice, rng)
        scores = {b: tree.apparent(rep, parent, children, below) for b, (rep, _) in branches.items()}
        ranked = sorted(scores, key=lambda b: (scores[b][0], b))
        v_min, runner = ranked[0], ranked[1]
        gap = scores[runner][0] - scores[v_min][0]
        step = {
            "pivot": a,
            "apparent": {b: scores[b][0] for b in branches},
            "representatives": {b: rep for b, (rep, _) in branches.items()},
            "chosen": v_min,
        }
        if noisy:
            tol = 3.0 * math.sqrt(scores[v_min][1] + scores[runner][1])
            if gap <= tol:
                raise AmbiguousSubtreeError(
                    f"branches {v_min} and {runner} of vertex {a} are within {tol:.3g} m of each other",
                    {"trace": trace + [step]},
                )
        elif gap <= tie_tol:
            tied = sorted(b for b in branches if scores[b][0] - scores[v_min][0] <= tie_tol)
            v_min = tied[0]
            step["chosen"] = v_min
            step["tie"] = tied
        trace.append(step)

        # the pivot becomes a measured leaf, read from the most reliable intact branch
        intact = [b for b in branches if b != v_min]
        donor = max(intact, key=lambda b: (scores[b][0], -b))
        flow = math.fsum(below[b] for b in intact)
        var_flow = sum(tree.readings[j].var_flow for b in intact for j in branches[b][1])
        tree.readings[a] = _Reading(scores[donor][0], flow, scores[donor][1], var_flow)
        keep = set(_subtree_vertices(v_min, children)) | {a}
        tree.active = keep
    u, v = sorted(tree.active)
    return u, v, tree.readings[u], tree.readings[v], trace


def _subtree_vertices(v, children):
    stack, out = [v], []
    while stack:
        u = stack.pop()
        out.append(u)
        stack.extend(children[u])
    return out


def localize_tree(
    net: Network,
    meas: MeasurementSet,
    second: MeasurementSet | None = None,
    *,
    consts: PhysicalConstants = WATER,
    pivot: str = "centroid",
    leaf_choice: str = "first",
    rng: np.random.Generator | int | None = None,
    tie_tol: float = TIE_TOL,
    detect_threshold: float | None = None,
) -> LocalizationResult:
    """Find the leaking pipe and the leak position on a tree network.

    Parameters
    ----------
    second:
        Optional second snapshot taken at a different operating point. When
        given, the leak exponent and constant are estimated as well.
    pivot:
        Junction picking rule: ``"centroid"`` (default, most balanced split),
        ``"first"`` or ``"random"``.
    leaf_choice:
        Which leaf represents each branch: ``"first"``, ``"nearest"`` or
        ``"random"``.

    Raises
    ------
    NoLeakDetectedError
        If the leaf inflows balance.
    AmbiguousSubtreeError
        Noisy readings only: two branches are statistically indistinguishable.
    OutOfRangeError
        Exact readings whose estimate lies outside the identified pipe.
    """
    require_coverage(net, meas)
    detection = detect_leak(meas, threshold=detect_threshold)
    if not detection.detected:
        raise NoLeakDetectedError(
            f"leaf inflows balance to {detection.imbalance:.3g} m^3/s (threshold {detection.threshold:.3g})"
        )
    rng = np.random.default_rng(rng)
    u, v, ru, rv, trace = _reduce(net, meas, consts, pivot, leaf_choice, rng, tie_tol)
    k = net.edge_id(u, v)
    geom = net.pipes[k].geometry
    # upstream end (higher head) plays the role of end 0
    if ru.head >= rv.head:
        (v0, r0), (v1, r1) = (u, ru), (v, rv)
    else:
        (v0, r0), (v1, r1) = (v, rv), (u, ru)
    raw = localize_single_pipe(r0.head, r1.head, r0.flow, r1.flow, geom, consts)
    diagnostics = {"iterations": len(trace), "trace": trace, "imbalance": detection.imbalance}

    beta = constant = None
    x_used = raw
    if second is not None:
        require_coverage(net, second)
        u2, w2, s_u, s_w, trace2 = _reduce(net, second, consts, pivot, leaf_choice, rng, tie_tol)
        if {u2, w2} != {u, v}:
            raise LeakTreeError(f"snapshots disagree on the leaking pipe: {u}-{v} vs {u2}-{w2}")
        s0, s1 = (s_u, s_w) if u2 == v0 else (s_w, s_u)
        raw2 = localize_single_pipe(s0.head, s1.head, s0.flow, s1.flow, geom, consts)
        x_used = 0.5 * (raw + raw2)
        diagnostics["x_snapshots"] = (raw, raw2)
        diagnostics["x_spread"] = abs(raw - raw2)
        beta, constant = estimate_leak_params(
            (r0.head, r0.flow, r1.flow), (s0.head, s0.flow, s1.flow), x_used, geom, consts
        )

    length = geom.length
    noisy = meas.is_noisy
    if not noisy and not (-RANGE_SLACK * length <= x_used <= length * (1 + RANGE_SLACK)):
        raise OutOfRangeError(f"estimate {x_used:.6g} m lies outside pipe {k} of length {length:g} m")
    x = min(max(x_used, 0.0), length)
    diagnostics["raw_x"] = x_used

    sigma_x = None
    if noisy:
        from .uncertainty import NoiseSpec, variance_x

        noise = NoiseSpec(math.sqrt(r0.var_head), math.sqrt(r1.var_head),
                          math.sqrt(r0.var_flow), math.sqrt(r1.var_flow))
        sigma_x = math.sqrt(variance_x(x, (r0.head, r1.head, r0.flow, r1.flow), geom, noise, consts))

    return LocalizationResult(
        pipe=k,
        x=x,
        from_vertex=v0,
        to_vertex=v1,
        length=length,
        raw_x=x_used,
        beta=beta,
        constant=constant,
        sigma_x=sigma_x,
        junction_proximate=min(x, length - x) <= JUNCTION_FRACTION * length,
        diagnostics=diagnostics,
    )
