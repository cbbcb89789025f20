"""Scenario files (TOML) and measurement files (CSV).

Scenario layout, all quantities SI::

    vertices = 2
    seed = 1                      # optional

    [constants]                   # optional
    g = 9.80665
    nu = 1e-06

    [[pipes]]                     # edge id = position in this list
    start = 0
    end = 1
    length = 1000.0
    diameter = 0.3
    roughness = 0.00015           # optional, default 0
    minor_loss = 0.0              # optional, default 0

    [boundary]                    # optional for localize/validate
    source = 0
    head = 50.0
    extra_heads = [45.0]          # optional: one more snapshot per entry

    [[boundary.demands]]          # one per non-source leaf, flow <= 0
    leaf = 1
    flow = -0.05

    [leak]                        # optional
    pipe = 0
    x = 400.0                     # from the pipe's lower-id end
    constant = 0.001
    exponent = 0.5

    [noise]                       # optional
    sigma_head = 0.01
    sigma_flow = 1e-05

Measurement CSV header: ``snapshot,leaf,head,flow,sigma_head,sigma_flow``.
The sigma columns are empty for exact readings. Floats are written with
``repr`` so values survive a round trip unchanged.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import LeakTreeError, ScenarioError
from .forward import BoundaryConditions, HydraulicState, LeakSpec, MeasurementSet
from .hydraulics import WATER, PhysicalConstants, PipeGeometry, geometry_problems
from .network import Network, validate

MEASUREMENT_HEADER = ["snapshot", "leaf", "head", "flow", "sigma_head", "sigma_flow"]


@dataclass(frozen=True)
class LeafNoise:
    sigma_head: float
    sigma_flow: float


@dataclass(frozen=True)
class Scenario:
    network: Network
    boundary: BoundaryConditions | None = None
    extra_heads: tuple[float, ...] = ()
    leak: LeakSpec | None = None
    noise: LeafNoise | None = None
    constants: PhysicalConstants = field(default=WATER)
    seed: int | None = None

    def snapshot_boundaries(self) -> list[BoundaryConditions]:
        if self.boundary is None:
            return []
        return [self.boundary] + [self.boundary.with_head(h) for h in self.extra_heads]


class _Checker:
    def __init__(self):
        self.problems = []

    def table(self, obj, where, allowed, required=()):
        if not isinstance(obj, dict):
            self.problems.append(f"{where}: expected a table")
            return None
        for key in obj:
            if key not in allowed:
                self.problems.append(f"{where}: unknown key {key!r}")
        for key in required:
            if key not in obj:
                self.problems.append(f"{where}: missing key {key!r}")
        return obj

    def number(self, obj, key, where, default=None):
        if key not in obj:
            return default
        v = obj[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.problems.append(f"{where}.{key}: expected a finite number, got {v!r}")
            return default
        return float(v)

    def integer(self, obj, key, where, default=None):
        if key not in obj:
            return default
        v = obj[key]
        if isinstance(v, bool) or not isinstance(v, int):
            self.problems.append(f"{where}.{key}: expected an integer, got {v!r}")
            return default
        return v


def parse_scenario(data: str | bytes) -> Scenario:
    """Parse and fully validate a scenario document.

    Raises
    ------
    ScenarioError
        With one located message per problem found.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ScenarioError([f"encoding: {exc}"]) from None
    try:
        doc = tomllib.loads(data)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError([f"syntax: {exc}"]) from None

    ck = _Checker()
    ck.table(doc, "scenario", {"vertices", "seed", "constants", "pipes", "boundary", "leak", "noise"},
             required=("vertices", "pipes"))
    n = ck.integer(doc, "vertices", "scenario")
    seed = ck.integer(doc, "seed", "scenario")
    if seed is not None and seed < 0:
        ck.problems.append("scenario.seed: must be >= 0")

    consts = WATER
    if "constants" in doc and ck.table(doc["constants"], "constants", {"g", "nu"}) is not None:
        c = doc["constants"]
        try:
            consts = PhysicalConstants(ck.number(c, "g", "constants", WATER.g), ck.number(c, "nu", "constants", WATER.nu))
        except ValueError as exc:
            ck.problems.append(f"constants: {exc}")

    pipes = []
    raw_pipes = doc.get("pipes", [])
    if not isinstance(raw_pipes, list):
        ck.problems.append("pipes: expected an array of tables")
        raw_pipes = []
    for k, p in enumerate(raw_pipes):
        where = f"pipes[{k}]"
        if ck.table(p, where, {"start", "end", "length", "diameter", "roughness", "minor_loss"},
                    required=("start", "end", "length", "diameter")) is None:
            continue
        i, j = ck.integer(p, "start", where), ck.integer(p, "end", where)
        vals = [ck.number(p, "length", where), ck.number(p, "diameter", where),
                ck.number(p, "roughness", where, 0.0), ck.number(p, "minor_loss", where, 0.0)]
        if None in vals or i is None or j is None:
            continue
        geo = geometry_problems(*vals)
        if geo:
            ck.problems.extend(f"{where}: {g}" for g in geo)
            continue
        pipes.append((i, j, PipeGeometry(*vals)))

    net = None
    if n is not None and len(pipes) == len(raw_pipes) and not ck.problems:
        violations = validate(n, [(i, j) for i, j, _ in pipes])
        if violations:
            ck.problems.extend(f"network: {v}" for v in violations)
        else:
            net = Network(n, pipes)
    if net is None:
        raise ScenarioError(ck.problems or ["network: could not be built"])

    boundary, extra = None, ()
    if "boundary" in doc:
        b = ck.table(doc["boundary"], "boundary", {"source", "head", "extra_heads", "demands"},
                     required=("source", "head"))
        if b is not None:
            src = ck.integer(b, "source", "boundary")
            head = ck.number(b, "head", "boundary")
            raw_extra = b.get("extra_heads", [])
            if not isinstance(raw_extra, list):
                ck.problems.append("boundary.extra_heads: expected an array")
                raw_extra = []
            extra = tuple(ck.number({f"extra_heads[{i}]": h}, f"extra_heads[{i}]", "boundary")
                          for i, h in enumerate(raw_extra))
            demands = {}
            raw_d = b.get("demands", [])
            if not isinstance(raw_d, list):
                ck.problems.append("boundary.demands: expected an array of tables")
                raw_d = []
            for i, d in enumerate(raw_d):
                where = f"boundary.demands[{i}]"
                if ck.table(d, where, {"leaf", "flow"}, required=("leaf", "flow")) is None:
                    continue
                leaf, flow = ck.integer(d, "leaf", where), ck.number(d, "flow", where)
                if leaf in demands:
                    ck.problems.append(f"{where}: duplicate leaf {leaf}")
                if leaf is not None and flow is not None:
                    demands[leaf] = flow
            if src is not None and head is not None and None not in extra:
                boundary = BoundaryConditions(src, head, demands)
                for h in (head, *extra):
                    try:
                        boundary.with_head(h).check(net)
                    except LeakTreeError as exc:
                        ck.problems.append(f"boundary: {exc}")
                        break

    leak = None
    if "leak" in doc:
        lk = ck.table(doc["leak"], "leak", {"pipe", "x", "constant", "exponent"},
                      required=("pipe", "x", "constant", "exponent"))
        if lk is not None:
            vals = (ck.integer(lk, "pipe", "leak"), ck.number(lk, "x", "leak"),
                    ck.number(lk, "constant", "leak"), ck.number(lk, "exponent", "leak"))
            if None not in vals:
                try:
                    leak = LeakSpec(*vals)
                    leak.check(net)
                except LeakTreeError as exc:
                    ck.problems.append(f"leak: {exc}")

    noise = None
    if "noise" in doc:
        nz = ck.table(doc["noise"], "noise", {"sigma_head", "sigma_flow"}, required=("sigma_head", "sigma_flow"))
        if nz is not None:
            sh, sq = ck.number(nz, "sigma_head", "noise"), ck.number(nz, "sigma_flow", "noise")
            if sh is not None and sq is not None:
                if sh < 0 or sq < 0:
                    ck.problems.append("noise: standard deviations must be >= 0")
                noise = LeafNoise(sh, sq)

    if ck.problems:
        raise ScenarioError(ck.problems)
    return Scenario(net, boundary, extra, leak, noise, consts, seed)


def dump_scenario(sc: Scenario) -> str:
    doc = {"vertices": sc.network.num_vertices}
    if sc.seed is not None:
        doc["seed"] = sc.seed
    if sc.constants != WATER:
        doc["constants"] = {"g": sc.constants.g, "nu": sc.constants.nu}
    doc["pipes"] = [
        {"start": p.start, "end": p.end, "length": p.geometry.length, "diameter": p.geometry.diameter,
         "roughness": p.geometry.roughness, "minor_loss": p.geometry.minor_loss}
        for p in sc.network.pipes
    ]
    if sc.boundary is not None:
        b = {"source": sc.boundary.source, "head": sc.boundary.head}
        if sc.extra_heads:
            b["extra_heads"] = list(sc.extra_heads)
        b["demands"] = [{"leaf": v, "flow": q} for v, q in sorted(sc.boundary.demands.items())]
        doc["boundary"] = b
    if sc.leak is not None:
        doc["leak"] = {"pipe": sc.leak.pipe, "x": sc.leak.x, "constant": sc.leak.constant,
                       "exponent": sc.leak.exponent}
    if sc.noise is not None:
        doc["noise"] = {"sigma_head": sc.noise.sigma_head, "sigma_flow": sc.noise.sigma_flow}
    return tomli_w.dumps(doc)


def load_scenario(path) -> Scenario:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ScenarioError([f"{path}: {exc.strerror}"]) from None
    try:
        return parse_scenario(data)
    except ScenarioError as exc:
        raise ScenarioError([f"{path}: {p}" for p in exc.problems]) from None


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def format_measurements(snapshots: list[MeasurementSet]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MEASUREMENT_HEADER)
    for idx, m in enumerate(snapshots):
        label = m.label or str(idx)
        for v in m.leaves:
            sh = m.sigma_head.get(v) if m.sigma_head else None
            sq = m.sigma_flow.get(v) if m.sigma_flow else None
            w.writerow([label, v, _fmt(m.heads[v]), _fmt(m.flows[v]), _fmt(sh), _fmt(sq)])
    return buf.getvalue()


def parse_measurements(text: str, net: Network | None = None) -> list[MeasurementSet]:
    """Read snapshots in order of first appearance.

    Every ``(snapshot, leaf)`` pair must appear once; with ``net`` given each
    snapshot must cover exactly the network's leaves.
    """
    reader = csv.reader(_io.StringIO(text))
    problems = []
    try:
        header = next(reader)
    except StopIteration:
        raise ScenarioError(["line 1: empty measurement file"]) from None
    if [h.strip() for h in header] != MEASUREMENT_HEADER:
        raise ScenarioError([f"line 1: header must be {','.join(MEASUREMENT_HEADER)}"])
    rows = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(MEASUREMENT_HEADER):
            problems.append(f"line {lineno}: expected {len(MEASUREMENT_HEADER)} fields, got {len(row)}")
            continue
        snap, leaf, head, flow, sh, sq = (c.strip() for c in row)
        try:
            leaf_id = int(leaf)
            vals = [float(head), float(flow), float(sh) if sh else None, float(sq) if sq else None]
        except ValueError as exc:
            problems.append(f"line {lineno}: {exc}")
            continue
        if any(v is not None and not math.isfinite(v) for v in vals):
            problems.append(f"line {lineno}: non-finite value")
            continue
        if any(v is not None and v < 0 for v in vals[2:]):
            problems.append(f"line {lineno}: negative standard deviation")
            continue
        table = rows.setdefault(snap, {})
        if leaf_id in table:
            problems.append(f"line {lineno}: duplicate reading for snapshot {snap!r}, leaf {leaf_id}")
            continue
        table[leaf_id] = vals
    out = []
    for snap, table in rows.items():
        if net is not None and set(table) != set(net.leaves):
            missing = sorted(set(net.leaves) - set(table))
            extra = sorted(set(table) - set(net.leaves))
            problems.append(f"snapshot {snap!r}: must cover the leaves (missing {missing}, not leaves {extra})")
            continue
        heads = {v: r[0] for v, r in table.items()}
        flows = {v: r[1] for v, r in table.items()}
        sh = {v: r[2] for v, r in table.items() if r[2] is not None}
        sq = {v: r[3] for v, r in table.items() if r[3] is not None}
        out.append(MeasurementSet(heads, flows, sh or None, sq or None, snap))
    if problems:
        raise ScenarioError(problems)
    return out


def state_report(state: HydraulicState) -> dict:
    """JSON-ready dump of a solved state."""
    net = state.network
    pipes = []
    for k, p in enumerate(net.pipes):
        q_start, q_end = state.pipe_end_flows(k)
        pipes.append({"pipe": k, "start": p.start, "end": p.end, "flow_start": q_start, "flow_end": q_end})
    leak = None
    if state.leak is not None:
        leak = {"pipe": state.leak.pipe, "x": state.leak.x, "constant": state.leak.constant,
                "exponent": state.leak.exponent, "head": state.leak_head, "demand": state.leak_demand}
    return {
        "heads": {str(v): float(h) for v, h in enumerate(state.heads)},
        "pipes": pipes,
        "leak": leak,
        "diagnostics": _jsonable(state.diagnostics),
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def to_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True)
