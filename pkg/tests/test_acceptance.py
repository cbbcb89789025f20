"""End-to-end acceptance checks.

Each test prints a single ``PASS``/``FAIL`` line with the measured numbers,
then asserts the same condition, so ``pytest -v`` output doubles as a report.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from leaktree.forward import BoundaryConditions, LeakSpec, measurements_of, solve_with_leak
from leaktree.hydraulics import PipeGeometry, d_resistance_dq, resistance_term
from leaktree.localization import apparent_head, localize_single_pipe, localize_tree
from leaktree.network import Network
from leaktree.synthetic import random_tree_case
from leaktree.uncertainty import NoiseSpec, OffsetSpec, first_order_offset, mc_experiment, single_pipe_readings

MAIN = PipeGeometry(length=1000.0, diameter=0.3, roughness=1.5e-4, minor_loss=0.0)
NET = Network(2, [(0, 1, MAIN)])
BC = BoundaryConditions(source=0, head=50.0, demands={1: -0.05})


@pytest.fixture
def report(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, f"{name}: {detail}"

    return emit


def test_position_sweep_on_main_pipe(report):
    t0 = time.perf_counter()
    errors = []
    for x in range(100, 1000, 100):
        m = measurements_of(solve_with_leak(NET, BC, LeakSpec(0, float(x), 1e-3, 0.5)))
        x_hat = localize_single_pipe(m.heads[0], m.heads[1], m.flows[0], m.flows[1], MAIN)
        errors.append(abs(x_hat - x))
    elapsed = time.perf_counter() - t0
    worst = max(errors)
    report("1 position sweep x=100..900 m", worst <= 0.1 and elapsed < 1.0,
           f"max |x_hat - x| = {worst:.2e} m (limit 0.1), {elapsed:.3f} s (limit 1 s)")


def test_random_tree_round_trip(report):
    rng = np.random.default_rng(20240601)
    t0 = time.perf_counter()
    right, worst, sizes = 0, 0.0, []
    for _ in range(200):
        case = random_tree_case(rng, 3, 40, junction_margin=1.0)
        sizes.append(case.network.num_vertices)
        res = localize_tree(case.network, measurements_of(case.state))
        if res.pipe == case.leak.pipe:
            right += 1
            start = case.network.pipes[res.pipe].start
            worst = max(worst, abs(res.x_from(start) - case.leak.x))
        else:
            worst = math.inf
    elapsed = time.perf_counter() - t0
    report("2 tree round trip, 200 trees", right == 200 and worst <= 0.1 and elapsed < 30.0,
           f"{right}/200 pipes correct, max |x_hat - x| = {worst:.2e} m, "
           f"{min(sizes)}-{max(sizes)} vertices, {elapsed:.2f} s (limit 30 s)")


def test_leak_law_recovery(report):
    worst = 0.0
    cases = []
    for beta in (0.5, 1.0, 1.5):
        for c in (1e-4, 1e-3):
            leak = LeakSpec(0, 400.0, c, beta)
            snaps = [measurements_of(solve_with_leak(NET, BC.with_head(h), leak)) for h in (50.0, 45.0)]
            res = localize_tree(NET, *snaps)
            err = max(abs(res.beta / beta - 1), abs(res.constant / c - 1))
            worst = max(worst, err)
            cases.append(f"beta={beta:g},C={c:g}:{err:.1e}")
    report("3 leak exponent/constant from heads 50 m and 45 m", worst <= 1e-3,
           f"max relative error {worst:.2e} (limit 1e-3) [{' '.join(cases)}]")


def test_variance_prediction(report):
    noise = NoiseSpec.uniform(1e-2, 1e-5)
    details, ok = [], True
    for x in (200.0, 400.0, 800.0):
        leak = LeakSpec(0, x, 1e-3, 0.5)
        row, = mc_experiment(NET, BC, leak, noise, [1], 10_000, seed=17)
        ratio = row.variance / row.predicted
        ok &= abs(ratio - 1) <= 0.2
        details.append(f"x={x:g}: empirical {row.variance:.1f} m^2 vs predicted {row.predicted:.1f} (ratio {ratio:.3f})")
    report("4 predicted position variance, 1e4 trials", ok, "; ".join(details))


def test_mse_scaling_and_coverage(report):
    leak = LeakSpec(0, 400.0, 1e-3, 0.5)
    levels = [2**k for k in range(9)]
    t0 = time.perf_counter()
    rows = mc_experiment(NET, BC, leak, NoiseSpec.uniform(1e-2, 1e-5), levels, 2000, seed=2024)
    elapsed = time.perf_counter() - t0
    slope = np.polyfit(np.log(levels), np.log([r.mse for r in rows]), 1)[0]
    cov = [r.coverage for r in rows]
    ok = -1.1 <= slope <= -0.9 and all(0.93 <= c <= 0.97 for c in cov) and elapsed < 120.0
    report("5 MSE vs N slope and 95% interval coverage", ok,
           f"slope {slope:.3f} (need [-1.1, -0.9]), coverage {min(cov):.4f}-{max(cov):.4f} "
           f"(need [0.93, 0.97]), {elapsed:.1f} s (limit 120 s)")


def _junction_residual(state):
    net = state.network
    worst = 0.0
    for v in net.vertices:
        if not net.is_leaf(v):
            worst = max(worst, abs(math.fsum(state.flow(v, w) for w, _ in net.neighbors(v))))
    return worst / np.max(np.abs(state.flows))


def _flow_monotone(state, source):
    net = state.network
    for leaf in net.leaves:
        path = net.path(source, leaf)
        seq = []
        for u, w in zip(path, path[1:]):
            qa, qb = state.pipe_end_flows(net.edge_id(u, w))
            seq += [qa, qb] if u < w else [-qb, -qa]
        if any(b > a + 1e-15 for a, b in zip(seq, seq[1:])):
            return False
    return True


def _ordering_holds(case):
    net = case.network
    m = measurements_of(case.state)
    leak = net.pipes[case.leak.pipe]
    for a in net.vertices:
        if net.is_leaf(a):
            continue
        low, high = [], []
        for _, part in net.subtrees_at(a):
            heads = [apparent_head(net, m, i, a) for i in net.leaves if i in part]
            (low if {leak.start, leak.end} <= part else high).extend(heads)
        if not max(low) < min(high):
            return False
    return True


def test_invariant_suites(report):
    rng = np.random.default_rng(7)
    fd_worst = 0.0
    for _ in range(100):
        d = rng.uniform(0.05, 1.0)
        geom = PipeGeometry(100.0, d, rng.uniform(0, 1e-2) * d)
        re = 10 ** rng.uniform(1, 7)
        if abs(re - 2000) < 5 or abs(re - 4000) < 5:
            re *= 1.01
        q = rng.choice([-1, 1]) * re * math.pi * 1e-6 * d / 4
        h = abs(q) * 1e-6
        fd = (resistance_term(q + h, geom) - resistance_term(q - h, geom)) / (2 * h)
        fd_worst = max(fd_worst, abs(d_resistance_dq(q, geom) / fd - 1))

    cons_worst, monotone, ordered = 0.0, 0, 0
    case_rng = np.random.default_rng(31337)
    for _ in range(100):
        case = random_tree_case(case_rng)
        cons_worst = max(cons_worst, _junction_residual(case.state))
        monotone += _flow_monotone(case.state, case.boundary.source)
        ordered += _ordering_holds(case)

    readings = single_pipe_readings(NET, BC, LeakSpec(0, 400.0, 1e-3, 0.5))
    off = OffsetSpec(0.013, -0.007, 3e-5, -2e-5)
    base = first_order_offset(400.0, readings, MAIN, off)
    linear = all(first_order_offset(400.0, readings, MAIN, off.scaled(c)) == c * base for c in (2.0, 4.0, 0.5, -1.0))

    ok = fd_worst <= 1e-5 and cons_worst <= 1e-12 and monotone == 100 and ordered == 100 and linear
    report("6 invariants", ok,
           f"derivative vs FD max rel {fd_worst:.1e} (1e-5); junction residual {cons_worst:.1e}*max|q| (1e-12); "
           f"flow monotone {monotone}/100; apparent-head ordering {ordered}/100; offset linear {linear}")
