"""Gaussian targets, distances, convergence sweeps and report output."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .convolution import (
    CONV_MASS_TOL,
    ConvolutionResult,
    complex_power,
    h_N,
    phi_n_spectral,
)
from .density import Density, GridFunction, format_float, moments
from .errors import GridMismatch, InvalidParams, ReportIOError, TailNotNegligible
from .spectrum import chf_eval

log = logging.getLogger(__name__)

TAIL_NEGLIGIBLE = 1e-12
BERNSTEIN_SLACK = 1e-6
NOISE_FLOOR = 1e-9
CONV_VAR_RTOL = 1e-6
Y_MAX_CAP = 1e5
L1_MAX_POINTS = 1 << 24


def gaussian_target(variance: float, grid: GridFunction) -> GridFunction:
    """N(0, variance) density on the nodes of ``grid`` (its values are ignored)."""
    if not (np.isfinite(variance) and variance > 0):
        raise InvalidParams(f"variance must be positive, got {variance!r}")
    x = grid.x
    return grid.with_values(np.exp(-0.5 * x * x / variance) / math.sqrt(2 * math.pi * variance))


def _check_grids(f: GridFunction, g: GridFunction) -> None:
    if not f.same_domain(g):
        raise GridMismatch(f"grids differ: {f!r} vs {g!r}")


def sup_distance(f: GridFunction, g: GridFunction) -> float:
    _check_grids(f, g)
    return float(np.max(np.abs(f.values - g.values)))


def l1_spatial_distance(f: GridFunction, g: GridFunction) -> float:
    _check_grids(f, g)
    return float(f.dx * np.sum(np.abs(f.values - g.values)))


def _boundary_ok(d: Density, N: int, h: float, target_variance: float, y_max: float) -> bool:
    # a window, not a point: oscillating chfs have isolated zeros
    window = np.linspace(0.95 * y_max, y_max, 257)
    lhs = float(np.max(np.abs(chf_eval(d, h * window)))) ** N
    return lhs < TAIL_NEGLIGIBLE and math.exp(-0.5 * target_variance * y_max ** 2) < TAIL_NEGLIGIBLE


def _auto_y_max(d: Density, N: int, h: float, target_variance: float) -> float:
    y = math.sqrt(2 * math.log(1 / TAIL_NEGLIGIBLE) / target_variance) * 1.01
    while not _boundary_ok(d, N, h, target_variance, y):
        y *= 1.25
        if y > Y_MAX_CAP:
            raise TailNotNegligible(
                f"{d.label}, N={N}: |chf(h_N y)|^N still above {TAIL_NEGLIGIBLE:g} at y={Y_MAX_CAP:g}"
            )
    return y


def l1_spectral_distance(d: Density, N: int, sigma: int, target_variance: float,
                         y_max: float | None = None, n: int | None = None) -> float:
    """Trapezoid integral of |chf(h_N y)**N - exp(-target_variance*y^2/2)| over [-y_max, y_max]."""
    if int(N) != N or N < sigma:
        raise InvalidParams(f"N={N} is below sigma={sigma}")
    if not target_variance > 0:
        raise InvalidParams("target variance must be positive")
    h = h_N(N, sigma)
    if y_max is None:
        y_max = _auto_y_max(d, N, h, target_variance)
    elif not _boundary_ok(d, N, h, target_variance, y_max):
        raise TailNotNegligible(f"integrand not negligible at y_max={y_max:g}")
    if n is None:
        # resolve both the Gaussian width and oscillations at the factor's scale
        sd = math.sqrt(moments(d).gamma)
        dy = min(0.01 / math.sqrt(max(target_variance, 1.0)), 0.1 / (6.0 * h * sd))
        n = int(math.ceil(2 * y_max / dy)) + 1
        n = max(n, (1 << 16) + 1)
    if n > L1_MAX_POINTS:
        raise InvalidParams(f"{n} quadrature points requested; pass a smaller y_max or n")
    # the integrand is even in y, so integrate [0, y_max] and double
    y = np.linspace(0.0, y_max, n // 2 + 1)
    diff = np.abs(complex_power(chf_eval(d, h * y), int(N))
                  - np.exp(-0.5 * target_variance * y * y))
    return float(2.0 * np.trapezoid(diff, y))


@dataclass
class ConvergenceRow:
    N: int
    sup_spatial: float
    l1_spatial: float
    l1_spectral: float
    bernstein_ok: bool
    mass: float
    variance: float
    invariants_ok: bool


@dataclass
class ConvergenceReport:
    density: str
    sigma: int
    target_variance: float
    strict_paper: bool
    rows: list = field(default_factory=list)
    slopes: dict = field(default_factory=dict)

    @property
    def N_list(self) -> list:
        return [r.N for r in self.rows]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    @property
    def all_invariants_ok(self) -> bool:
        return all(r.invariants_ok and r.bernstein_ok for r in self.rows)

    def to_dict(self) -> dict:
        return {
            "density": self.density,
            "sigma": self.sigma,
            "target_variance": self.target_variance,
            "strict_paper": self.strict_paper,
            "rows": [asdict(r) for r in self.rows],
            "slopes": self.slopes,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ConvergenceReport":
        return cls(data["density"], data["sigma"], data["target_variance"],
                   data["strict_paper"], [ConvergenceRow(**r) for r in data["rows"]],
                   data["slopes"])


def fit_slope(N_list, errors, floor: float = NOISE_FLOOR) -> dict:
    """Least-squares slope of log(error) against log(N), ignoring points below ``floor``."""
    N = np.asarray(N_list, dtype=float)
    e = np.asarray(errors, dtype=float)
    keep = e >= floor
    out = {"slope": None, "intercept": None, "residual": None,
           "points": int(np.count_nonzero(keep)), "at_noise_floor": False}
    if np.count_nonzero(keep) < 2:
        out["at_noise_floor"] = True
        return out
    X, Y = np.log(N[keep]), np.log(e[keep])
    A = np.vstack([X, np.ones_like(X)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, Y, rcond=None)
    resid = Y - (slope * X + icpt)
    out.update(slope=float(slope), intercept=float(icpt),
               residual=float(math.sqrt(np.mean(resid ** 2))))
    return out


def bernstein_holds(sup: float, l1_spectral: float, slack: float = BERNSTEIN_SLACK) -> bool:
    """sup|f| <= (2 pi)^-1 ||f_hat||_1 with a numerical slack."""
    return sup <= l1_spectral / (2 * math.pi) + slack


def result_invariants_ok(res: ConvolutionResult, target_variance: float) -> bool:
    return (abs(res.mass - 1.0) <= CONV_MASS_TOL
            and abs(res.variance - target_variance) <= CONV_VAR_RTOL * target_variance)


def convergence_study(d: Density, sigma: int, N_list, L: float | None = None,
                      n: int | None = None, strict_paper: bool = False) -> ConvergenceReport:
    """Sweep N, comparing spectral Phi_N with the Gaussian of variance sigma*gamma.

    ``strict_paper`` compares against variance gamma instead.
    """
    N_list = [int(N) for N in N_list]
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise InvalidParams("N list must be strictly increasing")
    if any(N < sigma for N in N_list):
        raise InvalidParams(f"every N must be >= sigma={sigma}")
    gamma = moments(d).gamma
    limit_variance = sigma * gamma
    target = gamma if strict_paper else limit_variance
    report = ConvergenceReport(d.label, int(sigma), target, strict_paper)
    for N in N_list:
        res = phi_n_spectral(d, N, sigma, L, n)
        g = gaussian_target(target, res.phi)
        sup = sup_distance(res.phi, g)
        l1 = l1_spatial_distance(res.phi, g)
        l1s = l1_spectral_distance(d, N, sigma, target)
        row = ConvergenceRow(N, sup, l1, l1s, bernstein_holds(sup, l1s), res.mass,
                             res.variance, result_invariants_ok(res, limit_variance))
        log.info("N=%d sup=%.3e l1=%.3e l1_spec=%.3e", N, sup, l1, l1s)
        report.rows.append(row)
    for name in ("sup_spatial", "l1_spatial", "l1_spectral"):
        report.slopes[name] = fit_slope(N_list, report.column(name))
    return report


CSV_COLUMNS = ("N", "sup_spatial", "l1_spatial", "l1_spectral")


def emit_report(report, path, format: str = "json") -> None:
    """Write ``report`` as JSON (anything with ``to_dict``) or CSV (convergence reports)."""
    try:
        if format == "json":
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(report.to_dict(), fh, indent=2, allow_nan=True)
                fh.write("\n")
        elif format == "csv":
            if not isinstance(report, ConvergenceReport):
                raise InvalidParams("CSV output is only defined for convergence reports")
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(CSV_COLUMNS)
                for r in report.rows:
                    w.writerow([format_float(getattr(r, c)) for c in CSV_COLUMNS])
        else:
            raise InvalidParams(f"unknown format {format!r}")
    except OSError as exc:
        raise ReportIOError(f"cannot write {path}: {exc}") from exc


def load_report(path) -> ConvergenceReport:
    with open(path, encoding="utf-8") as fh:
        return ConvergenceReport.from_dict(json.load(fh))


def histogram_l1(mc: ConvolutionResult, reference: ConvolutionResult) -> float:
    """L1 distance between a histogram and a gridded density evaluated at bin centers."""
    ref = np.interp(mc.phi.x, reference.phi.x, reference.phi.values, left=0.0, right=0.0)
    return float(mc.phi.dx * np.sum(np.abs(mc.phi.values - ref)))


def statistical_band(bins: int, samples: int) -> float:
    return 3.0 * math.sqrt(bins / samples)
