"""Command-line front end: ``locallimit {check,converge,convolve,dominate,montecarlo}``.

Exit status: 0 success / condition holds, 2 condition or check violated,
1 configuration, input or numerical error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import conditions, convolution, metrics
from .density import Density, center_density, load_density_csv, make_density, moments
from .errors import CostGuard, InvalidParams, LocalLimitError

log = logging.getLogger("locallimit")

EXIT_OK, EXIT_ERROR, EXIT_VIOLATED = 0, 1, 2


class ConfigError(LocalLimitError):
    pass


@dataclass
class RunConfig:
    density: dict = field(default_factory=lambda: {"family": "laplace", "b": 1.0})
    sigma: int = 1
    delta_rel: float = 0.01
    grid: dict = field(default_factory=dict)
    N_list: list = field(default_factory=lambda: [4, 16, 64, 256])
    N: int = 1
    seed: int = 0
    samples: int = 1_000_000
    bins: int = 512
    out: str = "."
    format: str = "json"
    strict_paper: bool = False
    method: str = "spectral"
    center: bool = False
    force: bool = False
    t_max: float | None = None
    y_max: float = 50.0
    y_points: int = 5000

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not isinstance(self.density, dict):
            raise ConfigError("density must be an object")
        if not isinstance(self.sigma, int) or self.sigma < 1:
            raise ConfigError("sigma must be an integer >= 1")
        if not 0 < self.delta_rel < 1:
            raise ConfigError("delta_rel must lie in (0, 1)")
        if set(self.grid) - {"L", "n"}:
            raise ConfigError("grid accepts only L and n")
        if "n" in self.grid and (self.grid["n"] < 16 or self.grid["n"] % 2):
            raise ConfigError("grid n must be even and >= 16")
        if "L" in self.grid and not self.grid["L"] > 0:
            raise ConfigError("grid L must be positive")
        if not self.N_list or any(int(N) != N or N < 1 for N in self.N_list):
            raise ConfigError("N_list must hold positive integers")
        if int(self.N) != self.N or self.N < 1:
            raise ConfigError("N must be a positive integer")
        if self.format not in ("json", "csv"):
            raise ConfigError("format must be json or csv")
        if self.method not in ("spectral", "spatial", "direct"):
            raise ConfigError("method must be spectral, spatial or direct")
        if self.bins < 2 or self.y_points < 2 or not self.y_max > 0:
            raise ConfigError("bins, y_points and y_max must be positive")

    def build_density(self) -> Density:
        spec = dict(self.density)
        if "csv" in spec:
            path = spec.pop("csv")
            renorm = bool(spec.pop("renormalize", False))
            if spec:
                raise ConfigError(f"unknown density keys: {sorted(spec)}")
            d = load_density_csv(path, renormalize=renorm)
        else:
            family = spec.pop("family", None)
            if family is None:
                raise ConfigError("density needs a family or a csv path")
            d = make_density(family, **spec)
        return center_density(d) if self.center else d

    @property
    def L(self):
        return self.grid.get("L")

    @property
    def n(self):
        return self.grid.get("n")


def _write_json(path: Path, data: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")


def cmd_check(cfg: RunConfig) -> int:
    d = cfg.build_density()
    report = conditions.check_condition(d, cfg.sigma, cfg.delta_rel, cfg.t_max)
    out = Path(cfg.out)
    metrics.emit_report(report, out / "condition_report.json")
    report.violations_to_csv(out / "violations.csv")
    if report.T is not None and report.C is not None:
        try:
            dom = conditions.build_dominator(report, require_tail_ok=False)
            _write_json(out / "dominator.json", dom.to_dict())
        except LocalLimitError as exc:
            log.info("no dominator: %s", exc)
    if not report.satisfied:
        print(f"condition violated for {d.label}: {len(report.violations)} tail violations; "
              + "; ".join(report.notes), file=sys.stderr)
        return EXIT_VIOLATED
    return EXIT_OK


def cmd_converge(cfg: RunConfig) -> int:
    d = cfg.build_density()
    report = metrics.convergence_study(d, cfg.sigma, cfg.N_list, cfg.L, cfg.n, cfg.strict_paper)
    out = Path(cfg.out)
    metrics.emit_report(report, out / "convergence.json", "json")
    metrics.emit_report(report, out / "convergence.csv", "csv")
    return EXIT_OK if report.all_invariants_ok else EXIT_VIOLATED


def cmd_convolve(cfg: RunConfig) -> int:
    d = cfg.build_density()
    if cfg.method == "direct":
        L, n = convolution._resolve_grid(d, cfg.N, cfg.sigma, cfg.L, cfg.n)
        res = convolution.phi_n_direct(d, cfg.N, cfg.sigma, L, n, force=cfg.force)
    else:
        res = convolution.METHODS[cfg.method](d, cfg.N, cfg.sigma, cfg.L, cfg.n)
    out = Path(cfg.out)
    stem = f"phi_N{cfg.N}_{cfg.method}"
    res.export(out / f"{stem}.csv", out / f"{stem}.json")
    return EXIT_OK


def _default_N_list(sigma: int) -> list:
    return [N for N in (2 ** k for k in range(11)) if N >= sigma]


def cmd_dominate(cfg: RunConfig, N_explicit: bool) -> int:
    d = cfg.build_density()
    N_list = list(cfg.N_list) if N_explicit else _default_N_list(cfg.sigma)
    if any(N < cfg.sigma for N in N_list):
        raise InvalidParams(f"every N must be >= sigma={cfg.sigma}")
    report = conditions.check_condition(d, cfg.sigma, cfg.delta_rel, cfg.t_max)
    out = Path(cfg.out)
    if report.T is None or report.C is None:
        _write_json(out / "domination.json",
                    {"ok": False, "reason": "; ".join(report.notes) or "constants not pinned"})
        print("no dominator: constants could not be pinned", file=sys.stderr)
        return EXIT_VIOLATED
    M = conditions.build_dominator(report, require_tail_ok=False)
    y = np.linspace(cfg.y_max / cfg.y_points, cfg.y_max, cfg.y_points)
    dom = conditions.verify_domination(d, report.slack, M, N_list, y)
    payload = {"density": d.label, "sigma": cfg.sigma, "tail_ok": report.tail_ok,
               "dominator": M.to_dict(), "verification": dom.to_dict()}
    _write_json(out / "domination.json", payload)
    if not dom.ok:
        w = dom.witnesses[0]
        print(f"domination violated at {dom.violation_count} points, e.g. N={w[0]} y={w[1]:.6g}",
              file=sys.stderr)
        return EXIT_VIOLATED
    return EXIT_OK


def cmd_montecarlo(cfg: RunConfig) -> int:
    d = cfg.build_density()
    L = cfg.L if cfg.L is not None else convolution.covering_half_width(d, max(cfg.N, cfg.sigma), cfg.sigma)
    mc = convolution.monte_carlo_density(d, cfg.N, cfg.sigma, cfg.samples, cfg.bins,
                                         cfg.seed, L)
    ref = convolution.phi_n_spectral(d, max(cfg.N, cfg.sigma), cfg.sigma, L, cfg.n) \
        if cfg.N >= cfg.sigma else None
    out = Path(cfg.out)
    stem = f"mc_N{cfg.N}"
    mc.phi.to_csv(out / f"{stem}.csv")
    stats = mc.sidecar()
    stats.update(seed=cfg.seed, bins=cfg.bins, band=metrics.statistical_band(cfg.bins, cfg.samples))
    if ref is not None:
        stats["l1_vs_spectral"] = metrics.histogram_l1(mc, ref)
        stats["within_band"] = stats["l1_vs_spectral"] < stats["band"]
    _write_json(out / f"{stem}.json", stats)
    return EXIT_OK if stats.get("within_band", True) else EXIT_VIOLATED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="locallimit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("check", "converge", "convolve", "dominate", "montecarlo"):
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path)
        s.add_argument("--out", type=Path)
        s.add_argument("--format", choices=("json", "csv"))
        s.add_argument("--sigma", type=int)
        s.add_argument("--delta-rel", type=float, dest="delta_rel")
        s.add_argument("--seed", type=int)
        s.add_argument("--N", type=int, dest="N")
        s.add_argument("--N-list", type=lambda s: [int(v) for v in s.split(",")], dest="N_list")
        s.add_argument("--samples", type=int)
        s.add_argument("--method", choices=("spectral", "spatial", "direct"))
        s.add_argument("--strict-paper", action="store_true", default=None, dest="strict_paper")
        s.add_argument("--force", action="store_true", default=None)
        s.add_argument("--center", action="store_true", default=None)
    return p


def _load_config(args) -> tuple[RunConfig, bool]:
    data = {}
    if args.config is not None:
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    for key in ("out", "format", "sigma", "delta_rel", "seed", "N", "N_list", "samples",
                "method", "strict_paper", "force", "center"):
        val = getattr(args, key)
        if val is not None:
            data[key] = str(val) if key == "out" else val
    N_explicit = "N_list" in data
    cfg = RunConfig.from_dict(data)
    Path(cfg.out).mkdir(parents=True, exist_ok=True)
    return cfg, N_explicit


def _setup_logging() -> None:
    level = os.environ.get("LLT_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg, N_explicit = _load_config(args)
        if args.command == "check":
            return cmd_check(cfg)
        if args.command == "converge":
            return cmd_converge(cfg)
        if args.command == "convolve":
            return cmd_convolve(cfg)
        if args.command == "dominate":
            return cmd_dominate(cfg, N_explicit)
        return cmd_montecarlo(cfg)
    except CostGuard as exc:
        print(f"CostGuard: {exc} (use --force)", file=sys.stderr)
        return EXIT_ERROR
    except (LocalLimitError, TypeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
