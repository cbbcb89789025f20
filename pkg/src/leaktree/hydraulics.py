"""Pointwise pipe physics: Reynolds number, Darcy friction and head-loss terms.

All functions accept a scalar flow or a numpy array of flows and return the
same shape. Flows are signed (m^3/s); the head-loss terms are odd in the flow.

The friction factor uses three regimes:

* laminar, ``Re < 2000``: ``f = 64 / Re``
* turbulent, ``Re > 4000``: Swamee-Jain explicit approximation
* transitional band: ``f`` linear in ``Re`` between the two endpoint values

The laminar resistance is evaluated in closed form,
``U = 128 nu q / (pi g d^4)``, so it is finite and smooth through ``q = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BoundaryDerivativeError, InvalidGeometryError

LAMINAR_LIMIT = 2000.0
TURBULENT_LIMIT = 4000.0
MAX_RELATIVE_ROUGHNESS = 1e-2


@dataclass(frozen=True)
class PhysicalConstants:
    g: float = 9.80665
    nu: float = 1e-6

    def __post_init__(self):
        if not (self.g > 0 and math.isfinite(self.g)):
            raise ValueError(f"gravitational acceleration must be positive, got {self.g}")
        if not (self.nu > 0 and math.isfinite(self.nu)):
            raise ValueError(f"kinematic viscosity must be positive, got {self.nu}")


WATER = PhysicalConstants()


@dataclass(frozen=True)
class PipeGeometry:
    """Length, diameter and roughness in meters; ``minor_loss`` in head per flow^2."""

    length: float
    diameter: float
    roughness: float = 0.0
    minor_loss: float = 0.0

    def __post_init__(self):
        problems = geometry_problems(self.length, self.diameter, self.roughness, self.minor_loss)
        if problems:
            raise InvalidGeometryError("; ".join(problems))

    @property
    def relative_roughness(self) -> float:
        return self.roughness / self.diameter


def geometry_problems(length, diameter, roughness, minor_loss) -> list[str]:
    """Return human-readable reasons a pipe geometry is invalid (empty if valid)."""
    out = []
    vals = dict(length=length, diameter=diameter, roughness=roughness, minor_loss=minor_loss)
    for name, v in vals.items():
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            out.append(f"{name} must be a finite number, got {v!r}")
    if out:
        return out
    if length <= 0:
        out.append(f"length must be > 0, got {length}")
    if diameter <= 0:
        out.append(f"diameter must be > 0, got {diameter}")
    if roughness < 0:
        out.append(f"roughness must be >= 0, got {roughness}")
    if minor_loss < 0:
        out.append(f"minor_loss must be >= 0, got {minor_loss}")
    if diameter > 0 and roughness / diameter > MAX_RELATIVE_ROUGHNESS:
        out.append(
            f"relative roughness {roughness / diameter:.3g} exceeds Swamee-Jain validity "
            f"({MAX_RELATIVE_ROUGHNESS:g})"
        )
    return out


@dataclass(frozen=True)
class PipeFlowTerms:
    reynolds: float
    friction: float
    resistance: float
    minor: float
    dresistance_dq: float
    regime: str


def _wrap(value, scalar):
    return float(value) if scalar else value


def _prepare(q):
    arr = np.asarray(q, dtype=float)
    return arr, arr.ndim == 0


def reynolds(q, diameter, consts: PhysicalConstants = WATER):
    """Reynolds number ``4|q| / (pi nu d)`` of a circular pipe."""
    if diameter <= 0:
        raise InvalidGeometryError(f"diameter must be > 0, got {diameter}")
    arr, scalar = _prepare(q)
    return _wrap(4.0 * np.abs(arr) / (math.pi * consts.nu * diameter), scalar)


def _swamee_jain(re, rel):
    return 0.25 / np.log10(rel / 3.7 + 5.74 * re**-0.9) ** 2


def _swamee_jain_dre(re, rel):
    s = rel / 3.7 + 5.74 * re**-0.9
    log_s = np.log10(s)
    dlog_s = -0.9 * 5.74 * re**-1.9 / (s * math.log(10.0))
    return -0.5 * dlog_s / log_s**3


def _bridge(rel):
    """Intercept and slope of the transitional f(Re) line."""
    f_lo = 64.0 / LAMINAR_LIMIT
    f_hi = float(_swamee_jain(TURBULENT_LIMIT, rel))
    slope = (f_hi - f_lo) / (TURBULENT_LIMIT - LAMINAR_LIMIT)
    return f_lo - slope * LAMINAR_LIMIT, slope


def flow_regime(q, geom: PipeGeometry, consts: PhysicalConstants = WATER):
    """'laminar', 'transitional' or 'turbulent' (array of strings for array input)."""
    re, scalar = _prepare(reynolds(q, geom.diameter, consts))
    out = np.where(re < LAMINAR_LIMIT, "laminar",
                   np.where(re > TURBULENT_LIMIT, "turbulent", "transitional"))
    return str(out) if scalar else out


def friction_factor(q, geom: PipeGeometry, consts: PhysicalConstants = WATER):
    """Darcy friction factor. Infinite at ``q = 0``; use :func:`resistance_term` there."""
    re, scalar = _prepare(reynolds(q, geom.diameter, consts))
    rel = geom.relative_roughness
    a, b = _bridge(rel)
    lam = re < LAMINAR_LIMIT
    turb = re > TURBULENT_LIMIT
    f = a + b * re
    with np.errstate(divide="ignore"):
        f = np.where(lam, 64.0 / np.where(lam, re, 1.0), f)
    f = np.where(re == 0, np.inf, f)
    if np.any(turb):
        f = np.where(turb, _swamee_jain(np.where(turb, re, TURBULENT_LIMIT), rel), f)
    return _wrap(f, scalar)


def _resistance_coefficient(geom, consts):
    return 8.0 / (geom.diameter**5 * math.pi**2 * consts.g)


def resistance_term(q, geom: PipeGeometry, consts: PhysicalConstants = WATER):
    """Friction head loss per unit length, ``8 f q|q| / (d^5 pi^2 g)``."""
    arr, scalar = _prepare(q)
    d = geom.diameter
    re = np.asarray(reynolds(arr, d, consts))
    c = _resistance_coefficient(geom, consts)
    qq = arr * np.abs(arr)
    a, b = _bridge(geom.relative_roughness)

    u = c * (a + b * re) * qq
    lam = re < LAMINAR_LIMIT
    u = np.where(lam, 128.0 * consts.nu * arr / (math.pi * consts.g * d**4), u)
    turb = re > TURBULENT_LIMIT
    if np.any(turb):
        f = _swamee_jain(np.where(turb, re, TURBULENT_LIMIT), geom.relative_roughness)
        u = np.where(turb, c * f * qq, u)
    return _wrap(u, scalar)


def minor_loss_term(q, geom: PipeGeometry):
    """Localized loss ``m q|q|`` from fittings and valves."""
    arr, scalar = _prepare(q)
    return _wrap(geom.minor_loss * arr * np.abs(arr), scalar)


def head_loss(q, geom: PipeGeometry, consts: PhysicalConstants = WATER):
    """Head drop from the pipe's start to its end for flow ``q`` in that direction."""
    arr, scalar = _prepare(q)
    dh = geom.length * np.asarray(resistance_term(arr, geom, consts)) + geom.minor_loss * arr * np.abs(arr)
    return _wrap(dh, scalar)


def d_resistance_dq(q, geom: PipeGeometry, consts: PhysicalConstants = WATER):
    """Analytic derivative of :func:`resistance_term` with respect to the flow.

    Raises
    ------
    BoundaryDerivativeError
        If any flow sits exactly on a regime seam, where the one-sided
        derivatives differ.
    """
    arr, scalar = _prepare(q)
    d = geom.diameter
    k = 4.0 / (math.pi * consts.nu * d)
    re = np.asarray(reynolds(arr, d, consts))
    if np.any((re == LAMINAR_LIMIT) | (re == TURBULENT_LIMIT)):
        raise BoundaryDerivativeError("flow lies exactly on a friction regime boundary")
    c = _resistance_coefficient(geom, consts)
    a, b = _bridge(geom.relative_roughness)
    absq = np.abs(arr)

    du = c * (2.0 * a * absq + 3.0 * b * k * arr**2)
    du = np.where(re < LAMINAR_LIMIT, 128.0 * consts.nu / (math.pi * consts.g * d**4), du)
    turb = re > TURBULENT_LIMIT
    if np.any(turb):
        rt = np.where(turb, re, TURBULENT_LIMIT)
        rel = geom.relative_roughness
        f = _swamee_jain(rt, rel)
        df = _swamee_jain_dre(rt, rel)
        du = np.where(turb, c * (df * k * arr**2 + 2.0 * f * absq), du)
    return _wrap(du, scalar)


def flow_terms(q: float, geom: PipeGeometry, consts: PhysicalConstants = WATER) -> PipeFlowTerms:
    """Bundle every pointwise quantity for one scalar flow."""
    try:
        du = d_resistance_dq(q, geom, consts)
    except BoundaryDerivativeError:
        du = float("nan")
    return PipeFlowTerms(
        reynolds=reynolds(q, geom.diameter, consts),
        friction=friction_factor(q, geom, consts),
        resistance=resistance_term(q, geom, consts),
        minor=minor_loss_term(q, geom),
        dresistance_dq=du,
        regime=flow_regime(q, geom, consts),
    )
