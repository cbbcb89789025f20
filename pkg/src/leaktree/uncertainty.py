"""First-order error propagation for the single-pipe position estimate.

Readings are passed as ``(H0, H1, q0, q1)`` with leaf inflows ``q0`` and
``q1`` (positive into the pipe). Inside the pipe the flow upstream of the
leak is ``q0`` and downstream it is ``-q1``; the sensitivities below are with
respect to those pipe-frame flows. Higher-order terms of the expansion are
dropped, so the results hold in the small-noise regime; :func:`mc_experiment`
measures how well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import DegenerateDenominatorError
from .forward import BoundaryConditions, LeakSpec, measurements_of, solve_with_leak
from .hydraulics import WATER, PhysicalConstants, PipeGeometry, d_resistance_dq, resistance_term
from .localization import DENOM_TOL, localize_single_pipe
from .network import Network


@dataclass(frozen=True)
class NoiseSpec:
    """Independent Gaussian standard deviations of the four single-pipe channels."""

    head0: float = 0.0
    head1: float = 0.0
    flow0: float = 0.0
    flow1: float = 0.0

    def __post_init__(self):
        if any(not s >= 0 for s in (self.head0, self.head1, self.flow0, self.flow1)):
            raise ValueError("standard deviations must be >= 0")

    @classmethod
    def uniform(cls, sigma_head: float, sigma_flow: float) -> "NoiseSpec":
        return cls(sigma_head, sigma_head, sigma_flow, sigma_flow)

    def scaled(self, c: float) -> "NoiseSpec":
        c = abs(c)
        return NoiseSpec(c * self.head0, c * self.head1, c * self.flow0, c * self.flow1)


@dataclass(frozen=True)
class OffsetSpec:
    """Constant biases; ``flow_in`` acts on the upstream pipe flow, ``flow_out`` downstream."""

    head0: float = 0.0
    head1: float = 0.0
    flow_in: float = 0.0
    flow_out: float = 0.0

    @classmethod
    def from_leaf_offsets(cls, head0=0.0, head1=0.0, flow0=0.0, flow1=0.0) -> "OffsetSpec":
        # a bias on leaf inflow q1 is a bias of opposite sign on the downstream pipe flow -q1
        return cls(head0, head1, flow0, -flow1)

    def scaled(self, c: float) -> "OffsetSpec":
        return OffsetSpec(c * self.head0, c * self.head1, c * self.flow_in, c * self.flow_out)


@dataclass(frozen=True)
class EstimateWithCI:
    x: float
    sigma_x: float
    n: int
    level: float
    lo: float
    hi: float

    @property
    def half_width(self) -> float:
        return 0.5 * (self.hi - self.lo)


def _sensitivities(readings, geom, consts):
    h0, h1, q0, q1 = readings
    q_in = np.asarray(q0, dtype=float)
    q_out = -np.asarray(q1, dtype=float)
    den = resistance_term(q_in, geom, consts) - resistance_term(q_out, geom, consts)
    if np.any(np.abs(den) < DENOM_TOL):
        raise DegenerateDenominatorError("resistance on both sides of the leak is indistinguishable")
    return den, d_resistance_dq(q_in, geom, consts), d_resistance_dq(q_out, geom, consts)


def first_order_offset(x, readings, geom: PipeGeometry, offset: OffsetSpec, consts: PhysicalConstants = WATER):
    """Linear shift of the position estimate caused by constant reading biases."""
    den, du_in, du_out = _sensitivities(readings, geom, consts)
    num = (offset.head0 - offset.head1
           - x * du_in * offset.flow_in
           + (x - geom.length) * du_out * offset.flow_out)
    return num / den


def variance_x(x, readings, geom: PipeGeometry, noise: NoiseSpec, consts: PhysicalConstants = WATER):
    """Predicted variance of a single-snapshot position estimate.

    Derivatives are evaluated at the supplied (possibly noisy) readings.
    """
    den, du_in, du_out = _sensitivities(readings, geom, consts)
    num = (noise.head0**2 + noise.head1**2
           + (x * du_in * noise.flow0) ** 2
           + ((x - geom.length) * du_out * noise.flow1) ** 2)
    return num / den**2


def confidence_interval(x_hat: float, sigma_x: float, n: int, level: float = 0.95) -> EstimateWithCI:
    """Symmetric Gaussian interval ``x_hat +/- z sigma_x / sqrt(n)`` for the mean of ``n`` estimates."""
    if n < 1:
        raise ValueError(f"need at least one sample, got {n}")
    if not 0 < level < 1:
        raise ValueError(f"confidence level must lie in (0, 1), got {level}")
    if sigma_x < 0:
        raise ValueError("sigma_x must be >= 0")
    half = norm.ppf(0.5 + level / 2) * sigma_x / math.sqrt(n)
    return EstimateWithCI(x_hat, sigma_x, n, level, x_hat - half, x_hat + half)


@dataclass(frozen=True)
class McRow:
    n: int
    mse: float
    predicted: float
    coverage: float
    bias: float
    variance: float
    trials: int


def single_pipe_readings(net: Network, bc: BoundaryConditions, leak: LeakSpec, consts: PhysicalConstants = WATER):
    """Exact ``(H0, H1, q0, q1)`` of a single-pipe scenario, end 0 being the pipe start."""
    if len(net.pipes) != 1:
        raise ValueError("scenario must consist of exactly one pipe")
    pipe = net.pipes[0]
    meas = measurements_of(solve_with_leak(net, bc, leak, consts))
    return (meas.heads[pipe.start], meas.heads[pipe.end], meas.flows[pipe.start], meas.flows[pipe.end])


def mc_experiment(
    net: Network,
    bc: BoundaryConditions,
    leak: LeakSpec,
    noise: NoiseSpec,
    n_list,
    trials: int,
    seed: int,
    *,
    level: float = 0.95,
    consts: PhysicalConstants = WATER,
) -> list[McRow]:
    """Monte Carlo check of the averaged estimator on a single-pipe scenario.

    For every ``n`` in ``n_list`` and every trial, ``n`` noisy snapshots are
    drawn, the position is estimated as the mean of the per-snapshot
    estimates, and its squared error and interval coverage are recorded.
    Trial ``t`` draws from ``default_rng([seed, t])`` in the order of
    ``n_list``, snapshot by snapshot, channels ``H0, q0, H1, q1``.
    """
    geom = net.pipes[0].geometry
    truth = single_pipe_readings(net, bc, leak, consts)
    x_true = leak.x
    predicted_var = float(variance_x(x_true, truth, geom, noise, consts))
    scale = np.array([noise.head0, noise.flow0, noise.head1, noise.flow1])
    base = np.array([truth[0], truth[2], truth[1], truth[3]])
    z_level = norm.ppf(0.5 + level / 2)

    n_list = [int(n) for n in n_list]
    est = np.empty((len(n_list), trials))
    cover = np.empty((len(n_list), trials), dtype=bool)
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        for i, n in enumerate(n_list):
            draws = base + scale * rng.standard_normal((n, 4))
            h0, q0, h1, q1 = draws.T
            xs = localize_single_pipe(h0, h1, q0, q1, geom, consts)
            x_hat = float(np.mean(xs))
            mean_read = (h0.mean(), h1.mean(), q0.mean(), q1.mean())
            sig = math.sqrt(float(variance_x(x_hat, mean_read, geom, noise, consts)))
            est[i, t] = x_hat
            cover[i, t] = abs(x_hat - x_true) <= z_level * sig / math.sqrt(n)

    rows = []
    for i, n in enumerate(n_list):
        err = est[i] - x_true
        rows.append(McRow(
            n=n,
            mse=float(np.mean(err**2)),
            predicted=predicted_var / n,
            coverage=float(np.mean(cover[i])),
            bias=float(np.mean(err)),
            variance=float(np.var(est[i], ddof=1)) if trials > 1 else 0.0,
            trials=trials,
        ))
    return rows
