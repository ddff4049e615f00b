"""Characteristic functions, with the convention chf(t) = integral of rho(x) exp(-i t x) dx.

With this sign and no 2*pi factor, chf''(0) = -gamma for a mean-zero density
and the inverse transform carries 1/(2*pi).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .density import Density, moments, write_columns_csv
from .errors import (
    InvalidParams,
    LimitMismatch,
    MeanNotZero,
    NearZeroT,
    QuadratureUnreliable,
    ZeroModulusWarning,
)

CHF_TOL = 1e-6
UNDERFLOW_FLOOR = 1e-300
T_FLOOR = 1e-4
LIMIT_TOL = 1e-4
LIMIT_PROBES = (1e-1, 10 ** -1.5, 1e-2)

_CHUNK = 1 << 22


def _sinpi(u: np.ndarray) -> np.ndarray:
    # exact zeros at integer u, unlike np.sin(np.pi * u)
    k = np.round(u)
    sign = np.where(np.mod(k, 2) == 0, 1.0, -1.0)
    return sign * np.sin(np.pi * (u - k))


def _sinc_scaled(at: np.ndarray) -> np.ndarray:
    """sin(at)/(at) with exact zeros at multiples of pi."""
    u = at / np.pi
    out = np.ones_like(u)
    nz = u != 0
    out[nz] = _sinpi(u[nz]) / (np.pi * u[nz])
    return out


def nyquist(d: Density) -> float:
    """Largest |t| at which the chf of ``d`` is trusted (inf for closed forms)."""
    return math.inf if d.closed_form_chf else math.pi / d.grid.dx


def chf_eval(d: Density, t):
    """Characteristic function at scalar or array ``t``."""
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    f, p = d.family, d.param
    if f == "uniform":
        out = _sinc_scaled(p * t).astype(complex)
    elif f == "laplace":
        out = (1.0 / (1.0 + (p * t) ** 2)).astype(complex)
    elif f == "gaussian":
        out = np.exp(-0.5 * p * t * t).astype(complex)
    elif f == "triangular":
        out = (_sinc_scaled(0.5 * p * t) ** 2).astype(complex)
    else:
        out = _grid_chf(d, t)
    return complex(out[0]) if scalar else out


def _grid_chf(d: Density, t: np.ndarray) -> np.ndarray:
    g = d.grid
    if np.any(np.abs(t) > math.pi / g.dx * (1 + 1e-12)):
        raise QuadratureUnreliable(
            f"|t| beyond the grid Nyquist frequency {math.pi / g.dx:.6g}"
        )
    w = np.full(g.n, g.dx)
    w[0] = w[-1] = 0.5 * g.dx
    w = w * g.values
    x = g.x
    out = np.empty(t.size, dtype=complex)
    step = max(1, _CHUNK // g.n)
    for i in range(0, t.size, step):
        tt = t[i:i + step]
        out[i:i + step] = np.exp(-1j * np.outer(tt, x)) @ w
    return out


@dataclass(frozen=True)
class SpectralTable:
    """chf samples at ``t0 + k*dt``."""

    t0: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidParams("dt must be positive")
        vals = np.asarray(self.values, dtype=complex)
        if np.any(np.abs(vals) > 1.0 + CHF_TOL):
            raise InvalidParams("characteristic function exceeds 1 in modulus")
        t = self.t
        zero = np.isclose(t, 0.0, atol=1e-12 * self.dt)
        if np.any(zero) and np.any(np.abs(vals[zero] - 1.0) > CHF_TOL):
            raise InvalidParams("characteristic function differs from 1 at t=0")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.values))

    @property
    def modulus(self) -> np.ndarray:
        return np.abs(self.values)

    def to_csv(self, path) -> None:
        v = self.values
        write_columns_csv(path, ("t", "re", "im", "modulus"), [self.t, v.real, v.imag, np.abs(v)])


def chf_table(d: Density, t0: float, dt: float, count: int) -> SpectralTable:
    if not dt > 0:
        raise InvalidParams("dt must be positive")
    t = t0 + dt * np.arange(count)
    return SpectralTable(t0, dt, chf_eval(d, t))


def _log_modulus_ratio(d: Density, t: np.ndarray) -> np.ndarray:
    """|chf(t)|**(1/t^2) for |t| >= T_FLOOR; zero where |chf| underflows."""
    m = np.abs(chf_eval(d, t))
    out = np.zeros_like(t)
    ok = m >= UNDERFLOW_FLOOR
    out[ok] = np.exp(np.log(m[ok]) / (t[ok] * t[ok]))
    return out


def normalized_log_modulus(d: Density, t: float) -> float:
    """|chf(t)|**(1/t^2), evaluated as exp(log|chf(t)| / t^2)."""
    t = float(t)
    if abs(t) < T_FLOOR:
        raise NearZeroT(f"|t|={abs(t):.3g} below {T_FLOOR}; use zero_limit")
    m = abs(chf_eval(d, t))
    if m < UNDERFLOW_FLOOR:
        warnings.warn(f"|chf({t:g})| underflows; reporting 0", ZeroModulusWarning, stacklevel=2)
        return 0.0
    return math.exp(math.log(m) / (t * t))


class ZeroLimit(NamedTuple):
    value: float
    extrapolated: float
    discrepancy: float


def zero_limit(d: Density) -> ZeroLimit:
    """Limit of |chf(t)|**(1/t^2) as t -> 0+, with a Richardson cross-check."""
    mom = moments(d)
    if abs(mom.mean) > mom.mean_tol:
        raise MeanNotZero(f"{d.label} has mean {mom.mean:.3g}")
    value = math.exp(-0.5 * mom.gamma)
    f1, f2, f3 = (normalized_log_modulus(d, t) for t in LIMIT_PROBES)
    # error expands in powers of t^2 and consecutive probes differ by 10x in t^2
    r12 = (10.0 * f2 - f1) / 9.0
    r23 = (10.0 * f3 - f2) / 9.0
    extrapolated = (100.0 * r23 - r12) / 99.0
    discrepancy = abs(extrapolated - value)
    if discrepancy > LIMIT_TOL:
        raise LimitMismatch(
            f"{d.label}: extrapolated limit {extrapolated:.8g} vs exp(-gamma/2)={value:.8g}"
        )
    return ZeroLimit(value, extrapolated, discrepancy)
