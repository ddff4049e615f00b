"""N-fold self-convolutions Phi_N of the h_N-scaled density, h_N = sqrt(sigma/N).

Four routes to the same object:

* ``phi_n_spectral``  -- inverse FFT of chf(h_N y)**N on the conjugate grid
* ``phi_n_spatial``   -- FFT linear convolution powers of lattice weights
* ``phi_n_direct``    -- repeated O(n^2) sums (the oracle for the other two)
* ``monte_carlo_density`` -- histogram of h_N * (X_1 + ... + X_N)

All grids are ``-L + k*2L/n``; node ``n//2`` is the origin, so weights on the
grid form a lattice measure and convolution indices add.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .density import (
    TAIL_TOL,
    Density,
    GridFunction,
    lattice_weights,
    moments,
    scale_density,
    symmetric_grid,
    tail_mass,
)
from .errors import (
    AliasingDetected,
    CostGuard,
    InvalidParams,
    NyquistExceeded,
    SpacingMismatch,
    SupportOverflow,
)
from .spectrum import chf_eval

CONV_MASS_TOL = 1e-7
IMAG_TOL = 1e-9
RINGING_TOL = 1e-9
CROP_TOL = TAIL_TOL
DEFAULT_N = 1 << 14
DIRECT_MAX_N = 64
DIRECT_MAX_GRID = 1 << 12
MC_CHUNK = 1 << 22
MC_MIN_SAMPLES = 10_000


def h_N(N: int, sigma: int) -> float:
    return math.sqrt(sigma / N)


def default_grid(sigma: int, gamma: float) -> tuple[float, int]:
    """Half-width 12 standard deviations of the limit, 2^14 nodes."""
    return 12.0 * math.sqrt(sigma * gamma), DEFAULT_N


def covering_half_width(d: Density, N: int, sigma: int) -> float:
    """Default half-width, widened until the h_N-scaled factor's tail mass is negligible."""
    L = default_grid(sigma, moments(d).gamma)[0]
    factor = scale_density(d, h_N(N, sigma))
    while tail_mass(factor, L) > 0.1 * TAIL_TOL:
        L *= 1.25
    return L


@dataclass(frozen=True)
class ConvolutionResult:
    phi: GridFunction
    N: int
    sigma: int
    h_N: float
    method: str
    mass: float
    variance: float
    imag_residue: float = 0.0
    samples: int | None = None

    @property
    def min_value(self) -> float:
        return float(self.phi.values.min())

    def sidecar(self) -> dict:
        out = {"N": self.N, "sigma": self.sigma, "h_N": self.h_N, "method": self.method,
               "mass": self.mass, "variance": self.variance,
               "imag_residue": self.imag_residue, "min_value": self.min_value}
        if self.samples is not None:
            out["samples"] = self.samples
        return out

    def export(self, csv_path, json_path=None) -> None:
        """CSV of (x, value) with ringing clamped to zero, plus a JSON sidecar."""
        self.phi.to_csv(csv_path, clamp_negative=True)
        if json_path is not None:
            with open(json_path, "w", encoding="utf-8") as fh:
                json.dump(self.sidecar(), fh, indent=2)
                fh.write("\n")


def _check_N(N: int, sigma: int, need_sigma: bool = True) -> None:
    if int(sigma) != sigma or sigma < 1:
        raise InvalidParams(f"sigma must be an integer >= 1, got {sigma!r}")
    if int(N) != N or N < 1:
        raise InvalidParams(f"N must be a positive integer, got {N!r}")
    if need_sigma and N < sigma:
        raise InvalidParams(f"N={N} is below sigma={sigma}")


def _resolve_grid(d: Density, N: int, sigma: int, L, n) -> tuple[float, int]:
    if L is None:
        L = covering_half_width(d, N, sigma)
    if n is None:
        n = DEFAULT_N
    return float(L), int(n)


def _stats(grid: GridFunction, values: np.ndarray) -> tuple[float, float]:
    x = grid.x
    mass = float(np.sum(values) * grid.dx)
    mean = float(np.sum(x * values) * grid.dx) / mass
    var = float(np.sum((x - mean) ** 2 * values) * grid.dx) / mass
    return mass, var


def complex_power(z: np.ndarray, N: int) -> np.ndarray:
    """z**N by repeated squaring; no fractional powers or branch cuts."""
    z = np.asarray(z, dtype=complex)
    result = np.ones_like(z)
    base = z.copy()
    while N:
        if N & 1:
            result = result * base
        N >>= 1
        if N:
            base = base * base
    return result


def _finish(grid, values, N, sigma, method, imag=0.0, samples=None, mass_tol=CONV_MASS_TOL):
    mass, var = _stats(grid, values)
    if abs(mass - 1.0) > mass_tol:
        raise AliasingDetected(f"{method}: mass {mass:.12g} off by more than {mass_tol:g}")
    return ConvolutionResult(grid.with_values(values), int(N), int(sigma), h_N(N, sigma),
                             method, mass, var, float(imag), samples)


def phi_n_spectral(d: Density, N: int, sigma: int, L: float | None = None,
                   n: int | None = None, chf_source: str = "auto") -> ConvolutionResult:
    """Phi_N from chf(h_N y)**N sampled on the FFT-conjugate frequency grid.

    ``chf_source``: ``"closed_form"`` uses the family's chf; ``"grid"`` uses the
    trapezoid chf of the moment-matched lattice weights of rho_{h_N} on the
    output grid; ``"auto"`` picks closed form when the family has one.
    """
    _check_N(N, sigma)
    L, n = _resolve_grid(d, N, sigma, L, n)
    grid = symmetric_grid(L, n)
    dx = grid.dx
    h = h_N(N, sigma)
    y = 2.0 * np.pi * np.fft.fftfreq(n, d=dx)
    shift = np.exp(1j * y * L)  # e^{-i y x0} with x0 = -L
    if chf_source == "auto":
        chf_source = "closed_form" if d.closed_form_chf else "grid"
    if chf_source == "closed_form":
        if not d.closed_form_chf:
            raise InvalidParams("density has no closed-form chf")
        spec = chf_eval(d, h * y)
    elif chf_source == "grid":
        scaled = scale_density(d, h)
        if scaled.family == "grid" and scaled.grid.dx > dx * (1 + 1e-12):
            raise NyquistExceeded(
                f"source grid spacing {scaled.grid.dx:.6g} (after scaling) is coarser "
                f"than the output spacing {dx:.6g}"
            )
        w = lattice_weights(scaled, L, n)
        spec = shift * np.fft.fft(w)
    else:
        raise InvalidParams(f"unknown chf_source {chf_source!r}")
    power = complex_power(spec, N)
    raw = np.fft.ifft(power / shift) / dx
    imag = float(np.max(np.abs(raw.imag)))
    return _finish(grid, raw.real.copy(), N, sigma, "spectral", imag)


def _linear_convolve_fft(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    m = a.size + b.size - 1
    size = 1 << (m - 1).bit_length()
    out = np.fft.irfft(np.fft.rfft(a, size) * np.fft.rfft(b, size), size)[:m]
    return out


def _crop_centered(c: np.ndarray, n: int) -> np.ndarray:
    """Keep the n lattice nodes of a full convolution of two centered length-n arrays."""
    # inputs have the origin at n//2, so the full result has it at 2*(n//2)
    start = n // 2
    kept = c[start:start + n]
    lost = float(np.sum(np.abs(c[:start])) + np.sum(np.abs(c[start + n:])))
    if lost > CROP_TOL:
        raise SupportOverflow(f"convolution mass {lost:.3g} spills outside the domain")
    return kept


def _power_by_squaring(w: np.ndarray, N: int, conv) -> np.ndarray:
    n = w.size
    result = None
    base = w
    while N:
        if N & 1:
            result = base if result is None else _crop_centered(conv(result, base), n)
        N >>= 1
        if N:
            base = _crop_centered(conv(base, base), n)
    return result


def phi_n_spatial(d: Density, N: int, sigma: int, L: float | None = None,
                  n: int | None = None, out_grid: GridFunction | None = None) -> ConvolutionResult:
    """Phi_N by zero-padded FFT linear convolution powers of the lattice weights."""
    _check_N(N, sigma)
    L, n = _resolve_grid(d, N, sigma, L, n)
    grid = symmetric_grid(L, n)
    w = lattice_weights(scale_density(d, h_N(N, sigma)), L, n)
    phi = _power_by_squaring(w, int(N), _linear_convolve_fft) / grid.dx
    if out_grid is not None and not out_grid.same_domain(grid):
        phi = np.interp(out_grid.x, grid.x, phi, left=0.0, right=0.0)
        grid = out_grid
    return _finish(grid, phi, N, sigma, "spatial")


def convolve_direct(f: GridFunction, g: GridFunction) -> GridFunction:
    """h[k] = dx * sum_j f[j] g[k-j] on the full support, by direct summation."""
    if abs(f.dx - g.dx) > 1e-12 * max(f.dx, g.dx):
        raise SpacingMismatch(f"spacings differ: {f.dx!r} vs {g.dx!r}")
    # np.convolve sums directly; it never goes through an FFT
    return GridFunction(f.x0 + g.x0, f.dx, f.dx * np.convolve(f.values, g.values))


def phi_n_direct(d: Density, N: int, sigma: int, L: float | None = None,
                 n: int | None = None, force: bool = False) -> ConvolutionResult:
    """Phi_N by N-1 direct convolutions, cropped back to [-L, L) after each."""
    _check_N(N, sigma)
    L, n = _resolve_grid(d, N, sigma, L, n)
    if not force and (N > DIRECT_MAX_N or n > DIRECT_MAX_GRID):
        raise CostGuard(
            f"direct convolution limited to N <= {DIRECT_MAX_N} and n <= {DIRECT_MAX_GRID}"
        )
    grid = symmetric_grid(L, n)
    factor = grid.with_values(lattice_weights(scale_density(d, h_N(N, sigma)), L, n) / grid.dx)
    acc = factor
    for _ in range(int(N) - 1):
        full = convolve_direct(acc, factor)
        acc = grid.with_values(_crop_centered(full.values * grid.dx, n) / grid.dx)
    return _finish(grid, np.array(acc.values), N, sigma, "direct")


def monte_carlo_density(d: Density, N: int, sigma: int, samples: int, bins: int = 512,
                        seed: int = 0, L: float | None = None) -> ConvolutionResult:
    """Density-normalized histogram of h_N * sum of N i.i.d. draws on [-L, L]."""
    _check_N(N, sigma, need_sigma=False)
    if samples < MC_MIN_SAMPLES:
        raise InvalidParams(f"need at least {MC_MIN_SAMPLES} samples, got {samples}")
    if bins < 2:
        raise InvalidParams("need at least two bins")
    if L is None:
        L = covering_half_width(d, N, sigma)
    h = h_N(N, sigma)
    rng = np.random.default_rng(seed)
    counts = np.zeros(bins, dtype=np.int64)
    edges = np.linspace(-L, L, bins + 1)
    total = 0.0
    total_sq = 0.0
    per_chunk = max(1, MC_CHUNK // N)
    done = 0
    while done < samples:
        m = min(per_chunk, samples - done)
        s = h * d.ppf(rng.random((m, N))).sum(axis=1)
        counts += np.histogram(s, bins=edges)[0]
        total += float(s.sum())
        total_sq += float(np.dot(s, s))
        done += m
    width = 2.0 * L / bins
    values = counts / (samples * width)
    grid = GridFunction(-L + 0.5 * width, width, values)
    mean = total / samples
    variance = total_sq / samples - mean * mean
    mass = float(values.sum() * width)
    if abs(mass - 1.0) > 3.0 / math.sqrt(samples):
        raise AliasingDetected(f"histogram mass {mass:.6g}: domain too small for the draws")
    return ConvolutionResult(grid, int(N), int(sigma), h, "montecarlo", mass, variance,
                             0.0, int(samples))


METHODS = {
    "spectral": phi_n_spectral,
    "spatial": phi_n_spatial,
    "direct": phi_n_direct,
}
