"""Sufficient-condition checks, pinned constants and the dominating function.

Pipeline: ``find_T`` -> ``pinned_C`` -> ``check_tail`` -> ``find_y0`` ->
``build_dominator`` -> ``verify_domination``.  ``check_condition`` runs the
first four and collects a :class:`ConditionReport`.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize

from .density import Density, GridFunction, moments, write_columns_csv
from .errors import (
    DominationViolated,
    InvalidParams,
    MeanNotZero,
    NoCrossing,
    NonpositiveC,
    NotDominatable,
    NoValidT,
    TruncatedScan,
    ZeroModulusWarning,
)
from .spectrum import _log_modulus_ratio, chf_eval, nyquist

log = logging.getLogger(__name__)

SQRT_E = math.sqrt(math.e)
CAP_EPS = 1e-6
T_CAP = SQRT_E - CAP_EPS
T_SCAN_DX = 1e-3
T_BISECT_TOL = 1e-9
T_MAX_DEFAULT = 1e4
POINTS_PER_DECADE = 2000
Y0_TOL = 1e-10
DOM_TOL = 1e-9
MAX_WITNESSES = 200

# decay exponent and coefficient of |chf(t)| for large t, per unit parameter
_ENVELOPES = {
    "uniform": lambda p: (1.0, 1.0 / p),
    "laplace": lambda p: (2.0, 1.0 / (p * p)),
    "triangular": lambda p: (2.0, 4.0 / (p * p)),
    "gaussian": lambda p: (math.inf, 0.0),
}


@dataclass(frozen=True)
class SlackParams:
    """Integer scale sigma and the slack-reduced constants sigma_minus, gamma_minus."""

    sigma: int
    gamma: float
    sigma_minus: float
    gamma_minus: float

    def __post_init__(self):
        if int(self.sigma) != self.sigma or self.sigma < 1:
            raise InvalidParams(f"sigma must be an integer >= 1, got {self.sigma!r}")
        object.__setattr__(self, "sigma", int(self.sigma))
        if not self.sigma_minus > 0:
            raise InvalidParams("sigma_minus must be positive")
        if not self.gamma_minus > 0:
            raise InvalidParams("gamma_minus must be positive")

    @classmethod
    def from_relative(cls, sigma: int, gamma: float, delta_rel: float = 0.01) -> "SlackParams":
        if not 0 < delta_rel < 1:
            raise InvalidParams(f"delta_rel must lie in (0, 1), got {delta_rel!r}")
        return cls(sigma, gamma, sigma * (1 - delta_rel), gamma * (1 - delta_rel))

    @property
    def plateau(self) -> float:
        return math.exp(-0.5 * self.gamma_minus)

    @property
    def tail_exponent(self) -> float:
        return self.sigma / self.sigma_minus


def find_T(d: Density, slack: SlackParams, scan_dx: float = T_SCAN_DX) -> float:
    """Largest T <= sqrt(e) - 1e-6 with |chf(t)|**(1/t^2) <= exp(-gamma_minus/2) on (0, T]."""
    mom = moments(d)
    if abs(mom.mean) > mom.mean_tol:
        raise MeanNotZero(f"{d.label} has mean {mom.mean:.3g}")
    target = slack.plateau
    cap = min(T_CAP, nyquist(d))

    def ratio(t):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ZeroModulusWarning)
            return _log_modulus_ratio(d, t)

    t = np.append(np.arange(1, int(cap / scan_dx) + 1) * scan_dx, cap)
    t = t[t <= cap]
    bad = np.flatnonzero(ratio(t) > target)
    if bad.size == 0:
        return float(cap)
    i = bad[0]
    if i == 0:
        raise NoValidT(
            f"{d.label}: |chf|^(1/t^2) exceeds exp(-gamma_minus/2) already at t={t[0]:g}"
        )
    lo, hi = t[i - 1], t[i]
    fine = np.linspace(lo, hi, 11)
    fbad = np.flatnonzero(ratio(fine) > target)
    j = fbad[0]
    lo, hi = fine[j - 1], fine[j]
    while hi - lo > T_BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if ratio(np.array([mid]))[0] > target:
            hi = mid
        else:
            lo = mid
    return float(lo)


def pinned_C(T: float, slack: SlackParams) -> float:
    """C = T**(1/sigma_minus) * (1 - gamma_minus*T^2)."""
    if not 0 < T < SQRT_E:
        raise InvalidParams(f"T must lie in (0, sqrt(e)), got {T!r}")
    factor = 1.0 - slack.gamma_minus * T * T
    if factor <= 0:
        raise NonpositiveC(f"1 - gamma_minus*T^2 = {factor:.6g} <= 0 at T={T:.6g}")
    return T ** (1.0 / slack.sigma_minus) * factor


@dataclass
class TailCheck:
    ok: bool
    violations: list = field(default_factory=list)
    envelope_ok: bool | None = None
    inconclusive_above: float | None = None
    points: int = 0

    def __iter__(self):
        # allows ``ok, violations = check_tail(...)``
        yield self.ok
        yield self.violations


def check_tail(d: Density, T: float, C: float, slack: SlackParams,
               t_max: float | None = None,
               points_per_decade: int = POINTS_PER_DECADE) -> TailCheck:
    """Scan |chf(t)| <= C * t**(-1/sigma_minus) on a log grid of (T, t_max]."""
    limit = nyquist(d)
    if t_max is None:
        t_max = T_MAX_DEFAULT if math.isinf(limit) else limit
    if not t_max > T:
        raise InvalidParams("t_max must exceed T")
    inconclusive = None
    if t_max > limit:
        warnings.warn(
            f"grid chf is only reliable up to t={limit:.6g}; scan truncated there",
            TruncatedScan, stacklevel=2,
        )
        inconclusive = limit
        t_max = limit
    k = math.ceil(points_per_decade * math.log10(t_max / T))
    t = T * 10.0 ** (np.arange(1, k + 1) / points_per_decade)
    t[-1] = t_max
    mod = np.abs(chf_eval(d, t))
    bound = C * t ** (-1.0 / slack.sigma_minus)
    bad = mod > bound
    violations = [(float(a), float(b), float(c)) for a, b, c in zip(t[bad], mod[bad], bound[bad])]

    envelope_ok = None
    if d.family in _ENVELOPES:
        expo, coef = _ENVELOPES[d.family](d.param)
        q = 1.0 / slack.sigma_minus
        if expo > q:
            envelope_ok = True
        elif expo < q:
            envelope_ok = False
        else:
            envelope_ok = coef <= C
    ok = not violations and envelope_ok is not False and inconclusive is None
    return TailCheck(ok, violations, envelope_ok, inconclusive, int(t.size))


def zeta(t, C: float, slack: SlackParams):
    """exp(-log(t/C) / (sigma_minus * t^2))."""
    t = np.asarray(t, dtype=float)
    with np.errstate(over="ignore"):  # t << C sends zeta to +inf
        out = np.exp(-np.log(t / C) / (slack.sigma_minus * t * t))
    return float(out) if out.ndim == 0 else out


def zeta_turning_point(C: float) -> float:
    """zeta decreases up to C*sqrt(e) and increases after it."""
    return C * SQRT_E


def find_y0(C: float, slack: SlackParams) -> float:
    """Unique y0 > sqrt(e) on the increasing branch of zeta with zeta(y0) = exp(-gamma_minus/2)."""
    if not C > 0:
        raise InvalidParams("C must be positive")
    target = slack.plateau
    left = max(SQRT_E, zeta_turning_point(C))
    if zeta(left, C, slack) > target:
        raise NoCrossing(
            f"min zeta on [sqrt(e), inf) is {zeta(left, C, slack):.6g} > "
            f"exp(-gamma_minus/2) = {target:.6g}"
        )
    right = 2.0 * left
    while zeta(right, C, slack) <= target:
        right *= 2.0
    return float(optimize.bisect(lambda y: zeta(y, C, slack) - target, left, right,
                                 xtol=Y0_TOL, maxiter=500))


@dataclass
class ConditionReport:
    moment_ok: bool
    T: float | None
    C: float | None
    tail_ok: bool
    violations: list
    y0: float | None
    slack: SlackParams
    gamma: float
    mean: float = 0.0
    density: str = ""
    envelope_ok: bool | None = None
    inconclusive_above: float | None = None
    notes: list = field(default_factory=list)

    @property
    def satisfied(self) -> bool:
        return self.moment_ok and self.tail_ok

    def to_dict(self) -> dict:
        out = asdict(self)
        out["slack"] = asdict(self.slack)
        out["violations"] = [list(v) for v in self.violations]
        out["satisfied"] = self.satisfied
        return out

    def violations_to_csv(self, path) -> None:
        cols = list(zip(*self.violations)) or [(), (), ()]
        write_columns_csv(path, ("t", "modulus", "bound"), cols)


def check_condition(d: Density, sigma: int = 1, delta_rel: float = 0.01,
                    t_max: float | None = None) -> ConditionReport:
    """Moment check, T, C, tail scan and y0 for one density."""
    mom = moments(d)
    slack = SlackParams.from_relative(sigma, mom.gamma, delta_rel)
    report = ConditionReport(
        moment_ok=abs(mom.mean) <= mom.mean_tol and math.isfinite(mom.gamma),
        T=None, C=None, tail_ok=False, violations=[], y0=None, slack=slack,
        gamma=mom.gamma, mean=mom.mean, density=d.label,
    )
    if not report.moment_ok:
        report.notes.append(f"mean {mom.mean:.3g} is not zero")
        return report
    try:
        report.T = find_T(d, slack)
        report.C = pinned_C(report.T, slack)
    except (NoValidT, NonpositiveC) as exc:
        report.notes.append(f"{type(exc).__name__}: {exc}")
        return report
    with warnings.catch_warnings(record=True):
        warnings.simplefilter("always", TruncatedScan)
        tail = check_tail(d, report.T, report.C, slack, t_max)
    report.tail_ok = tail.ok
    report.violations = tail.violations
    report.envelope_ok = tail.envelope_ok
    report.inconclusive_above = tail.inconclusive_above
    try:
        report.y0 = find_y0(report.C, slack)
    except NoCrossing as exc:
        report.notes.append(f"NoCrossing: {exc}")
    log.info("%s: T=%.6g C=%.6g tail_ok=%s y0=%s", d.label, report.T, report.C,
             report.tail_ok, report.y0)
    return report


@dataclass(frozen=True)
class DominatorM:
    """Majorant of |chf(h_N y)|^N over N >= sigma, as a function of y >= 0.

    Closed form: ``plateau`` on (0, y0] and ``(C/y)**tail_exponent`` beyond.
    Numeric fallback: ``table`` holds the tabulated majorant and the tail past
    the table continues as ``tail_coefficient * y**(-tail_exponent)``.
    """

    y0: float | None
    plateau: float | None
    C: float
    tail_coefficient: float
    tail_exponent: float
    table: GridFunction | None = None

    @property
    def closed_form(self) -> bool:
        return self.table is None

    def __call__(self, y):
        y = np.abs(np.asarray(y, dtype=float))
        tail = self.tail_coefficient * np.power(np.maximum(y, 1e-300), -self.tail_exponent)
        if self.closed_form:
            out = np.where(y <= self.y0, self.plateau, tail)
        else:
            t = self.table
            out = np.where(y <= t.x_end, t.interp(y), tail)
        return float(out) if out.ndim == 0 else out

    def integral(self) -> float:
        """Integral of M over (0, inf)."""
        p = self.tail_exponent
        if self.closed_form:
            return (self.y0 * self.plateau
                    + self.tail_coefficient * self.y0 ** (1 - p) / (p - 1))
        t = self.table
        return (t.mass()
                + self.tail_coefficient * t.x_end ** (1 - p) / (p - 1))

    def to_dict(self) -> dict:
        out = {
            "y0": self.y0, "plateau": self.plateau, "C": self.C,
            "tail_coefficient": self.tail_coefficient,
            "tail_exponent": self.tail_exponent,
            "closed_form": self.closed_form, "integral": self.integral(),
        }
        if self.table is not None:
            out["table"] = {"x0": self.table.x0, "dx": self.table.dx, "n": self.table.n}
        return out


def numeric_dominator(T: float, C: float, slack: SlackParams,
                      y_max: float = 200.0, n: int = 200_001) -> DominatorM:
    """Tabulate [max(plateau, sup_{T<t<=y} zeta(t))]**(sigma*y^2) and fit its tail."""
    y = np.linspace(0.0, y_max, n)
    z = np.where(y > T, zeta(np.maximum(y, T), C, slack), 0.0)
    run = np.maximum(np.maximum.accumulate(z), slack.plateau)
    if run[-1] >= 1.0:
        raise NotDominatable("running supremum of zeta reaches 1; majorant is not integrable")
    with np.errstate(over="ignore", under="ignore"):
        m = np.exp(slack.sigma * y * y * np.log(run))
    tail = (y >= 0.1 * y_max) & (m > 0)
    if np.count_nonzero(tail) < 10:
        raise NotDominatable("tabulated majorant has no usable tail")
    slope, icpt = np.polyfit(np.log(y[tail]), np.log(m[tail]), 1)
    exponent = -slope
    if not exponent > 1:
        raise NotDominatable(f"fitted tail exponent {exponent:.4g} <= 1; not integrable")
    return DominatorM(None, None, C, float(math.exp(icpt)), float(exponent),
                      GridFunction(0.0, y[1] - y[0], m))


def build_dominator(report: ConditionReport, require_tail_ok: bool = True) -> DominatorM:
    """Piecewise majorant from the pinned constants.

    ``require_tail_ok=False`` builds it even when the tail scan failed, which is
    how a failed condition gets exercised by :func:`verify_domination`.
    """
    if require_tail_ok and not report.tail_ok:
        raise InvalidParams("dominator needs a report whose tail check passed")
    if report.T is None or report.C is None:
        raise InvalidParams("dominator needs pinned T and C")
    slack = report.slack
    p = slack.tail_exponent
    if report.y0 is None:
        return numeric_dominator(report.T, report.C, slack)
    if not p > 1:
        raise NotDominatable(f"tail exponent {p:.6g} <= 1; not integrable")
    return DominatorM(report.y0, slack.plateau, report.C, report.C ** p, p)


@dataclass
class DominationReport:
    worst_margin: float
    violation_count: int
    witnesses: list
    checked: int
    N_list: list

    @property
    def ok(self) -> bool:
        return self.violation_count == 0

    def to_dict(self) -> dict:
        return {
            "ok": self.ok, "worst_margin": self.worst_margin,
            "violation_count": self.violation_count, "checked": self.checked,
            "N_list": list(self.N_list),
            "witnesses": [list(w) for w in self.witnesses],
        }


def verify_domination(d: Density, slack: SlackParams, M: DominatorM, N_set,
                      y_grid, raise_on_violation: bool = False) -> DominationReport:
    """Check |chf(h_N y)|^N <= M(y) * (1 + 1e-9) for every N and grid y.

    ``y_grid`` is an array of y values or a GridFunction whose nodes are used.
    ``worst_margin`` is max(lhs - M(y)); negative means every point dominated.
    """
    N_list = sorted({int(N) for N in N_set})
    if any(N < slack.sigma for N in N_list):
        raise InvalidParams(f"every N must be >= sigma={slack.sigma}")
    y = y_grid.x if isinstance(y_grid, GridFunction) else np.asarray(y_grid, dtype=float)
    bound = M(y)
    worst = -math.inf
    count = 0
    witnesses = []
    for N in N_list:
        h = math.sqrt(slack.sigma / N)
        lhs = np.abs(chf_eval(d, h * y)) ** N
        diff = lhs - bound
        worst = max(worst, float(np.max(diff)))
        bad = np.flatnonzero(lhs > bound * (1.0 + DOM_TOL))
        count += bad.size
        for k in bad[: max(0, MAX_WITNESSES - len(witnesses))]:
            witnesses.append((N, float(y[k]), float(lhs[k]), float(bound[k])))
    report = DominationReport(worst, count, witnesses, len(N_list) * y.size, N_list)
    if raise_on_violation and count:
        raise DominationViolated(f"{count} (N, y) points exceed the majorant", witnesses)
    return report
