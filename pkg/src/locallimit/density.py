"""Probability densities on the real line: analytic families and tabulated grids.

Every density here is immutable.  Analytic families are centered:

    uniform     on [-a, a]               param a
    laplace     (1/2b) exp(-|x|/b)       param b
    gaussian    N(0, v)                  param v (variance)
    triangular  (a - |x|)/a^2 on [-a, a] param a

A ``grid`` density is a nonnegative :class:`GridFunction` read as a
piecewise-linear function that vanishes outside its nodes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import special

from .errors import (
    DivergentMoment,
    DomainTooSmall,
    InvalidParams,
    NonnormalizedGrid,
)

MASS_TOL_ANALYTIC = 1e-9
MASS_TOL_GRID = 1e-6
MEAN_TOL = 1e-8
TAIL_TOL = 1e-10
BOUNDARY_TOL = 1e-12
INTERP_TOL = 1e-9
SPACING_RTOL = 1e-12

FAMILIES = ("uniform", "laplace", "gaussian", "triangular")
_PARAM_NAME = {"uniform": "a", "laplace": "b", "gaussian": "v", "triangular": "a"}


class GridFunction:
    """Real samples ``values[k]`` at ``x0 + k*dx``.

    Immutable; ``values`` is stored as a read-only float array.
    """

    __slots__ = ("x0", "dx", "values")

    def __init__(self, x0: float, dx: float, values) -> None:
        vals = np.array(values, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise InvalidParams("grid values must be a nonempty 1-D sequence")
        if not (np.isfinite(dx) and dx > 0):
            raise InvalidParams(f"grid spacing must be positive, got {dx!r}")
        if not np.isfinite(x0):
            raise InvalidParams("grid origin must be finite")
        if not np.all(np.isfinite(vals)):
            raise InvalidParams("grid values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "x0", float(x0))
        object.__setattr__(self, "dx", float(dx))
        object.__setattr__(self, "values", vals)

    def __setattr__(self, name, value):
        raise AttributeError("GridFunction is immutable")

    def __repr__(self) -> str:
        return f"GridFunction(x0={self.x0!r}, dx={self.dx!r}, n={self.n})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridFunction):
            return NotImplemented
        return (
            self.x0 == other.x0
            and self.dx == other.dx
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n)

    @property
    def x_end(self) -> float:
        return self.x0 + self.dx * (self.n - 1)

    def mass(self) -> float:
        return float(np.trapezoid(self.values, dx=self.dx))

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.x0, self.dx, values)

    def same_domain(self, other: "GridFunction", rtol: float = SPACING_RTOL) -> bool:
        scale = max(abs(self.x0), abs(self.x_end), self.dx)
        return (
            self.n == other.n
            and abs(self.dx - other.dx) <= rtol * self.dx
            and abs(self.x0 - other.x0) <= rtol * scale
        )

    def interp(self, x) -> np.ndarray:
        return np.interp(x, self.x, self.values, left=0.0, right=0.0)

    def to_csv(self, path, header=("x", "value"), clamp_negative: bool = False) -> None:
        vals = np.maximum(self.values, 0.0) if clamp_negative else self.values
        write_columns_csv(path, header, [self.x, vals])


def symmetric_grid(L: float, n: int) -> GridFunction:
    """Zero-valued grid ``-L + k*2L/n``, ``k = 0..n-1``; node ``n//2`` sits at 0."""
    if not (L > 0 and np.isfinite(L)):
        raise InvalidParams(f"half-width L must be positive, got {L!r}")
    if n < 16 or n % 2:
        raise InvalidParams(f"grid size must be even and >= 16, got {n!r}")
    return GridFunction(-L, 2.0 * L / n, np.zeros(n))


def write_columns_csv(path, header, columns) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in zip(*columns):
            writer.writerow([format_float(v) for v in row])


def format_float(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return f"{float(v):.17g}"


def read_grid_csv(path) -> GridFunction:
    """Read a two-column ``x,value`` CSV; a non-numeric first row is a header."""
    xs, vs = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise InvalidParams(f"{path}: row {i + 1} does not have two columns")
            try:
                x, v = float(row[0]), float(row[1])
            except ValueError:
                if i == 0:
                    continue
                raise InvalidParams(f"{path}: row {i + 1} is not numeric") from None
            xs.append(x)
            vs.append(v)
    if len(xs) < 2:
        raise InvalidParams(f"{path}: need at least two rows")
    x = np.asarray(xs)
    steps = np.diff(x)
    dx = (x[-1] - x[0]) / (len(x) - 1)
    if dx <= 0 or np.max(np.abs(steps - dx)) > SPACING_RTOL * max(1.0, np.max(np.abs(x))):
        raise InvalidParams(f"{path}: x column is not uniformly spaced")
    return GridFunction(x[0], dx, vs)


class MomentReport(NamedTuple):
    mean: float
    gamma: float
    mass: float
    mass_tol: float
    mean_tol: float


@dataclass(frozen=True)
class Density:
    """A probability density; build with :func:`make_density`."""

    family: str
    param: float = math.nan
    grid: GridFunction | None = None

    @property
    def kind(self) -> str:
        return "grid-tabulated" if self.family == "grid" else "analytic-family"

    @property
    def closed_form_chf(self) -> bool:
        return self.family != "grid"

    @property
    def mass_tol(self) -> float:
        return MASS_TOL_GRID if self.family == "grid" else MASS_TOL_ANALYTIC

    @property
    def label(self) -> str:
        if self.family == "grid":
            return f"grid(n={self.grid.n}, dx={self.grid.dx:.6g})"
        return f"{self.family}({_PARAM_NAME[self.family]}={self.param:g})"

    def support(self) -> tuple[float, float]:
        f, p = self.family, self.param
        if f in ("uniform", "triangular"):
            return (-p, p)
        if f == "grid":
            return (self.grid.x0, self.grid.x_end)
        return (-math.inf, math.inf)

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        f, p = self.family, self.param
        if f == "uniform":
            ax = np.abs(x)
            # midpoint value at the jumps keeps trapezoid sums exact on aligned grids
            return np.where(ax < p, 0.5 / p, np.where(ax == p, 0.25 / p, 0.0))
        if f == "laplace":
            return np.exp(-np.abs(x) / p) / (2.0 * p)
        if f == "gaussian":
            return np.exp(-0.5 * x * x / p) / math.sqrt(2.0 * math.pi * p)
        if f == "triangular":
            return np.maximum(p - np.abs(x), 0.0) / (p * p)
        return self.grid.interp(x)

    def cdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        f, p = self.family, self.param
        if f == "uniform":
            return np.clip((x + p) / (2.0 * p), 0.0, 1.0)
        if f == "laplace":
            e = 0.5 * np.exp(-np.abs(x) / p)
            return np.where(x < 0, e, 1.0 - e)
        if f == "gaussian":
            return special.ndtr(x / math.sqrt(p))
        if f == "triangular":
            xc = np.clip(x, -p, p)
            lo = 0.5 * ((xc + p) / p) ** 2
            hi = 1.0 - 0.5 * ((p - xc) / p) ** 2
            return np.where(xc < 0, lo, hi)
        return _grid_cdf(self.grid, x)

    def ppf(self, u) -> np.ndarray:
        """Inverse CDF for ``u`` in [0, 1)."""
        u = np.asarray(u, dtype=float)
        f, p = self.family, self.param
        if f == "uniform":
            return p * (2.0 * u - 1.0)
        if f == "laplace":
            c = u - 0.5
            return -p * np.sign(c) * np.log1p(-2.0 * np.abs(c))
        if f == "gaussian":
            return math.sqrt(p) * special.ndtri(u)
        if f == "triangular":
            lo = -p + p * np.sqrt(2.0 * u)
            hi = p - p * np.sqrt(2.0 * (1.0 - u))
            return np.where(u < 0.5, lo, hi)
        g = self.grid
        nodes_cdf = _grid_cdf(g, g.x)
        return np.interp(u, nodes_cdf, g.x)


def _grid_cdf(g: GridFunction, x) -> np.ndarray:
    v = g.values
    cum = np.concatenate(([0.0], np.cumsum(0.5 * g.dx * (v[1:] + v[:-1]))))
    total = cum[-1]
    s = (np.asarray(x, dtype=float) - g.x0) / g.dx
    k = np.clip(np.floor(s).astype(int), 0, g.n - 2)
    r = np.clip(s - k, 0.0, 1.0)
    # exact integral of the piecewise-linear interpolant inside cell k
    part = g.dx * (v[k] * r + 0.5 * (v[k + 1] - v[k]) * r * r)
    out = cum[k] + part
    out = np.where(s <= 0, 0.0, np.where(s >= g.n - 1, total, out))
    return out / total


def make_density(family: str, *, grid: GridFunction | None = None,
                 renormalize: bool = False, **params) -> Density:
    """Build a validated density.

    >>> make_density("uniform", a=1.0).pdf(0.0)
    array(0.5)
    """
    family = family.lower()
    if family == "grid":
        if grid is None:
            raise InvalidParams("grid family needs a GridFunction")
        if params:
            raise InvalidParams(f"unexpected parameters for grid density: {sorted(params)}")
        vals = grid.values
        if np.min(vals) < -INTERP_TOL:
            raise InvalidParams("grid density has negative values")
        vals = np.maximum(vals, 0.0)
        mass = float(np.trapezoid(vals, dx=grid.dx))
        if not mass > 0:
            raise NonnormalizedGrid("grid density has zero mass")
        if abs(mass - 1.0) > MASS_TOL_GRID:
            if not renormalize:
                raise NonnormalizedGrid(f"grid mass {mass:.12g} deviates from 1")
            vals = vals / mass
        return Density("grid", grid=grid.with_values(vals))
    if family not in FAMILIES:
        raise InvalidParams(f"unknown family {family!r}; expected one of {FAMILIES + ('grid',)}")
    name = _PARAM_NAME[family]
    if set(params) != {name}:
        raise InvalidParams(f"{family} takes exactly one parameter {name!r}, got {sorted(params)}")
    value = float(params[name])
    if not (np.isfinite(value) and value > 0):
        raise InvalidParams(f"{family} parameter {name} must be positive, got {value!r}")
    return Density(family, value)


def moments(d: Density) -> MomentReport:
    """Mean, second moment (gamma) and mass."""
    f, p = d.family, d.param
    if f != "grid":
        gamma = {"uniform": p * p / 3.0, "laplace": 2.0 * p * p,
                 "gaussian": p, "triangular": p * p / 6.0}[f]
        return MomentReport(0.0, gamma, 1.0, MASS_TOL_ANALYTIC, MEAN_TOL)
    g = d.grid
    if max(g.values[0], g.values[-1]) > BOUNDARY_TOL:
        raise DivergentMoment(
            "grid density does not vanish at the domain boundary; "
            "the second moment may still be accumulating"
        )
    x = g.x
    mass = float(np.trapezoid(g.values, dx=g.dx))
    mean = float(np.trapezoid(x * g.values, dx=g.dx)) / mass
    gamma = float(np.trapezoid(x * x * g.values, dx=g.dx)) / mass
    return MomentReport(mean, gamma, mass, MASS_TOL_GRID, MEAN_TOL)


def scale_density(d: Density, ell: float) -> Density:
    """Return x -> pdf(x/ell)/ell."""
    if not (np.isfinite(ell) and ell > 0):
        raise InvalidParams(f"scale must be positive, got {ell!r}")
    if d.family == "grid":
        g = d.grid
        return Density("grid", grid=GridFunction(g.x0 * ell, g.dx * ell, g.values / ell))
    factor = ell * ell if d.family == "gaussian" else ell
    return Density(d.family, d.param * factor)


def center_density(d: Density) -> Density:
    """Shift a grid density to mean zero; analytic families are already centered."""
    if d.family != "grid":
        return d
    m = moments(d).mean
    g = d.grid
    return Density("grid", grid=GridFunction(g.x0 - m, g.dx, g.values))


def tail_mass(d: Density, L: float) -> float:
    """Probability outside [-L, L]."""
    return float(1.0 - (d.cdf(L) - d.cdf(-L)))


def to_grid(d: Density, L: float, n: int, renormalize: bool = False) -> GridFunction:
    """Sample ``d.pdf`` on ``-L + k*2L/n``, ``k = 0..n-1``."""
    grid = symmetric_grid(L, n)
    if tail_mass(d, L) > TAIL_TOL:
        raise DomainTooSmall(f"{d.label}: mass beyond [-{L}, {L}] exceeds {TAIL_TOL}")
    vals = d.pdf(grid.x)
    if renormalize:
        vals = vals / np.trapezoid(vals, dx=grid.dx)
    return grid.with_values(vals)


def lattice_weights(d: Density, L: float, n: int) -> np.ndarray:
    """Point masses on the nodes of ``symmetric_grid(L, n)`` matching d's first three moments.

    Point samples ``dx*pdf(x_k)`` are reweighted by a quadratic ``a + b*x + c*x^2``
    so that mass, mean and second moment equal the exact values.  Lattice
    convolution then carries mass and variance over exactly.
    """
    grid = symmetric_grid(L, n)
    if tail_mass(d, L) > TAIL_TOL:
        raise DomainTooSmall(f"{d.label}: mass beyond [-{L}, {L}] exceeds {TAIL_TOL}")
    x = grid.x
    p = d.pdf(x) * grid.dx
    mom = moments(d)
    # work in units of the standard deviation to keep the system well conditioned
    s = math.sqrt(mom.gamma - mom.mean ** 2) or 1.0
    u = x / s
    basis = np.vstack([np.ones_like(u), u, u * u])
    A = np.array([[np.dot(p, basis[i] * basis[j]) for j in range(3)] for i in range(3)])
    rhs = np.array([1.0, mom.mean / s, mom.gamma / (s * s)])
    coef = np.linalg.solve(A, rhs)
    w = p * (coef @ basis)
    if np.min(w) < 0:
        raise DomainTooSmall(f"{d.label}: grid too coarse for moment-matched weights")
    return w


def sample(d: Density, count: int, seed: int) -> np.ndarray:
    """``count`` i.i.d. draws by inverse-CDF transform of uniforms from ``seed``."""
    if count < 0:
        raise InvalidParams("count must be nonnegative")
    rng = np.random.default_rng(seed)
    return d.ppf(rng.random(count))


def load_density_csv(path, renormalize: bool = False) -> Density:
    return make_density("grid", grid=read_grid_csv(Path(path)), renormalize=renormalize)
