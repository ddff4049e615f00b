import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from locallimit.density import (
    GridFunction,
    center_density,
    lattice_weights,
    load_density_csv,
    make_density,
    moments,
    read_grid_csv,
    sample,
    scale_density,
    symmetric_grid,
    tail_mass,
    to_grid,
)
from locallimit.errors import (
    DivergentMoment,
    DomainTooSmall,
    InvalidParams,
    NonnormalizedGrid,
)

FAMILIES = [
    ("uniform", {"a": 1.0}),
    ("uniform", {"a": 2.5}),
    ("laplace", {"b": 1.0}),
    ("laplace", {"b": 0.3}),
    ("gaussian", {"v": 1.0}),
    ("gaussian", {"v": 0.25}),
    ("triangular", {"a": 1.5}),
]


@pytest.mark.parametrize("family,params", FAMILIES)
def test_closed_form_moments_match_quadrature(family, params):
    d = make_density(family, **params)
    lo, hi = d.support()
    lo, hi = max(lo, -60.0), min(hi, 60.0)
    pts = [0.0]
    mass = integrate.quad(d.pdf, lo, hi, points=pts, limit=200)[0]
    mean = integrate.quad(lambda x: x * d.pdf(x), lo, hi, points=pts, limit=200)[0]
    second = integrate.quad(lambda x: x * x * d.pdf(x), lo, hi, points=pts, limit=200)[0]
    m = moments(d)
    assert mass == pytest.approx(1.0, abs=1e-9)
    assert mean == pytest.approx(m.mean, abs=1e-9)
    assert second == pytest.approx(m.gamma, rel=1e-9)


@pytest.mark.parametrize("family,params", FAMILIES)
def test_cdf_and_ppf_invert(family, params):
    d = make_density(family, **params)
    u = np.linspace(0.001, 0.999, 101)
    assert np.allclose(d.cdf(d.ppf(u)), u, atol=1e-12)


@pytest.mark.parametrize(
    "family,params,ref",
    [
        ("uniform", {"a": 1.0}, stats.uniform(loc=-1.0, scale=2.0)),
        ("laplace", {"b": 0.7}, stats.laplace(scale=0.7)),
        ("gaussian", {"v": 2.0}, stats.norm(scale=math.sqrt(2.0))),
        ("triangular", {"a": 1.0}, stats.triang(c=0.5, loc=-1.0, scale=2.0)),
    ],
)
def test_pdf_cdf_agree_with_scipy(family, params, ref):
    d = make_density(family, **params)
    x = np.linspace(-3, 3, 601)
    x = x[np.abs(np.abs(x) - 1.0) > 1e-9]  # skip jump points
    assert np.allclose(d.pdf(x), ref.pdf(x), atol=1e-14)
    assert np.allclose(d.cdf(x), ref.cdf(x), atol=1e-14)


def test_uniform_pdf_is_midpoint_at_jumps():
    d = make_density("uniform", a=1.0)
    assert d.pdf(1.0) == pytest.approx(0.25)
    assert d.pdf(-1.0) == pytest.approx(0.25)


@pytest.mark.parametrize(
    "family,params",
    [
        ("uniform", {"a": 0.0}),
        ("laplace", {"b": -1.0}),
        ("gaussian", {"v": float("nan")}),
        ("cauchy", {"a": 1.0}),
        ("uniform", {"b": 1.0}),
        ("uniform", {"a": 1.0, "b": 2.0}),
    ],
)
def test_invalid_parameters_rejected(family, params):
    with pytest.raises(InvalidParams):
        make_density(family, **params)


def test_grid_density_mass_check_and_renormalize():
    grid = to_grid(make_density("gaussian", v=1.0), 12.0, 4096)
    heavy = grid.with_values(grid.values * 1.01)
    with pytest.raises(NonnormalizedGrid):
        make_density("grid", grid=heavy)
    d = make_density("grid", grid=heavy, renormalize=True)
    assert d.grid.mass() == pytest.approx(1.0, abs=1e-12)


def test_grid_density_rejects_negative_values():
    g = GridFunction(-1.0, 0.5, [0.0, 0.6, 0.8, -0.1, 0.0])
    with pytest.raises(InvalidParams):
        make_density("grid", grid=g)


def test_grid_moments_match_source():
    src = make_density("laplace", b=1.0)
    d = make_density("grid", grid=to_grid(src, 40.0, 1 << 16))
    m = moments(d)
    assert m.mean == pytest.approx(0.0, abs=1e-10)
    assert m.gamma == pytest.approx(2.0, rel=1e-5)


def test_grid_not_vanishing_at_boundary_raises():
    g = GridFunction(-1.0, 0.01, np.full(201, 0.5))
    d = make_density("grid", grid=g, renormalize=True)
    with pytest.raises(DivergentMoment):
        moments(d)


def test_grid_pdf_interpolates_and_cdf_is_exact():
    g = GridFunction(-1.0, 0.5, [0.0, 0.5, 1.0, 0.5, 0.0])
    d = make_density("grid", grid=g)
    assert d.pdf(-0.25) == pytest.approx(0.75)
    assert d.pdf(5.0) == 0.0
    # piecewise-linear pdf integrates to a piecewise-quadratic cdf
    assert d.cdf(-0.75) == pytest.approx(0.5 * 0.25 * 0.25)
    assert d.cdf(0.0) == pytest.approx(0.5)
    assert d.cdf(2.0) == pytest.approx(1.0)


def test_center_density_shifts_grid_to_zero_mean():
    g = to_grid(make_density("gaussian", v=0.5), 10.0, 2048)
    shifted = GridFunction(g.x0 + 0.3, g.dx, g.values)
    d = center_density(make_density("grid", grid=shifted))
    assert moments(d).mean == pytest.approx(0.0, abs=1e-10)


@given(
    family=st.sampled_from(["uniform", "laplace", "gaussian", "triangular"]),
    p=st.floats(0.1, 5.0),
    ell=st.floats(0.05, 20.0),
    x=st.floats(-10.0, 10.0),
)
@settings(max_examples=200, deadline=None)
def test_scaling_law(family, p, ell, x):
    name = {"uniform": "a", "laplace": "b", "gaussian": "v", "triangular": "a"}[family]
    d = make_density(family, **{name: p})
    s = scale_density(d, ell)
    lo, hi = d.support()
    if np.isfinite(hi) and min(abs(x / ell - lo), abs(x / ell - hi)) < 1e-9:
        return
    assert s.pdf(x) == pytest.approx(d.pdf(x / ell) / ell, rel=1e-12, abs=1e-300)
    assert moments(s).gamma == pytest.approx(ell * ell * moments(d).gamma, rel=1e-12)


def test_scaling_grid_density():
    d = make_density("grid", grid=to_grid(make_density("laplace", b=1.0), 40.0, 1 << 16))
    s = scale_density(d, 0.5)
    assert s.grid.dx == pytest.approx(0.5 * d.grid.dx)
    assert moments(s).gamma == pytest.approx(0.25 * moments(d).gamma, rel=1e-12)


def test_to_grid_refuses_small_domain():
    with pytest.raises(DomainTooSmall):
        to_grid(make_density("laplace", b=1.0), 5.0, 1024)


@pytest.mark.parametrize("L,n", [(0.0, 64), (1.0, 15), (1.0, 17)])
def test_symmetric_grid_validation(L, n):
    with pytest.raises(InvalidParams):
        symmetric_grid(L, n)


def test_symmetric_grid_has_origin_at_centre():
    g = symmetric_grid(3.0, 64)
    assert g.x[32] == 0.0
    assert g.x[0] == -3.0


@pytest.mark.parametrize("family,params", FAMILIES)
def test_lattice_weights_match_moments_exactly(family, params):
    d = make_density(family, **params)
    L = 40.0 * math.sqrt(moments(d).gamma)
    w = lattice_weights(d, L, 4096)
    x = symmetric_grid(L, 4096).x
    assert w.sum() == pytest.approx(1.0, abs=1e-13)
    assert np.dot(w, x) == pytest.approx(0.0, abs=1e-13)
    assert np.dot(w, x * x) == pytest.approx(moments(d).gamma, rel=1e-12)
    assert np.all(w >= 0)


def test_tail_mass_laplace():
    assert tail_mass(make_density("laplace", b=1.0), 3.0) == pytest.approx(math.exp(-3.0))


def test_gridfunction_is_immutable():
    g = GridFunction(0.0, 1.0, [1.0, 2.0])
    with pytest.raises(AttributeError):
        g.dx = 2.0
    with pytest.raises(ValueError):
        g.values[0] = 5.0


@pytest.mark.parametrize("bad", [[], [[1.0, 2.0]], [1.0, float("inf")]])
def test_gridfunction_validation(bad):
    with pytest.raises(InvalidParams):
        GridFunction(0.0, 1.0, bad)


def test_csv_round_trip(tmp_path):
    g = to_grid(make_density("gaussian", v=1.0), 12.0, 512)
    path = tmp_path / "rho.csv"
    g.to_csv(path)
    back = read_grid_csv(path)
    assert back.n == g.n
    assert back.dx == pytest.approx(g.dx, rel=1e-14)
    assert np.array_equal(back.values, g.values)
    d = load_density_csv(path)
    assert d.family == "grid"


def test_csv_nonuniform_spacing_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,value\n0,0\n1,1\n3,0\n")
    with pytest.raises(InvalidParams):
        read_grid_csv(path)


def test_to_grid_uniform_value_at_origin():
    g = to_grid(make_density("uniform", a=1.0), 2.0, 1 << 10)
    assert g.values[np.argmin(np.abs(g.x))] == 0.5


@pytest.mark.parametrize("family,params", FAMILIES)
def test_to_grid_mass_within_tolerance(family, params):
    d = make_density(family, **params)
    L = 40.0 * math.sqrt(moments(d).gamma)
    assert abs(to_grid(d, L, 1 << 16, renormalize=True).mass() - 1.0) <= 1e-6


def test_to_grid_gaussian_mass_without_renormalizing():
    g = to_grid(make_density("gaussian", v=1.0), 10.0, 1 << 12)
    assert g.mass() == pytest.approx(1.0, abs=1e-9)


def test_to_grid_uniform_too_narrow():
    with pytest.raises(DomainTooSmall):
        to_grid(make_density("uniform", a=1.0), 0.5, 64)


def test_scale_examples():
    half = scale_density(make_density("uniform", a=1.0), 0.5)
    assert half.support() == (-0.5, 0.5)
    assert half.pdf(0.0) == 1.0
    lap = make_density("laplace", b=1.0)
    assert scale_density(lap, 1.0) == lap
    wide = scale_density(lap, 2.0)
    q = integrate.quad(lambda x: x * x * wide.pdf(x), -np.inf, np.inf, points=None)[0]
    assert q == pytest.approx(8.0, rel=1e-9)
    assert moments(wide).gamma == 8.0
    with pytest.raises(InvalidParams):
        scale_density(lap, 0.0)


@pytest.mark.parametrize("ell", [0.25, 1.0, 4.0])
@pytest.mark.parametrize("family,params", FAMILIES)
def test_scaling_law_fixed_factors(family, params, ell):
    d = make_density(family, **params)
    assert moments(scale_density(d, ell)).gamma == pytest.approx(
        ell * ell * moments(d).gamma, rel=1e-8
    )


def test_sample_is_reproducible():
    d = make_density("laplace", b=1.0)
    assert np.array_equal(sample(d, 1000, seed=3), sample(d, 1000, seed=3))
    assert not np.array_equal(sample(d, 1000, seed=3), sample(d, 1000, seed=4))


def test_uniform_sample_mean_in_clt_band():
    x = sample(make_density("uniform", a=1.0), 100_000, seed=11)
    assert abs(x.mean()) < 4.0 / math.sqrt(1e5 * 3.0)


def test_laplace_sample_second_moment():
    x = sample(make_density("laplace", b=1.0), 100_000, seed=12)
    assert np.mean(x * x) == pytest.approx(2.0, rel=0.05)


@pytest.mark.parametrize("family,params", FAMILIES)
def test_sample_ks_statistic(family, params):
    d = make_density(family, **params)
    x = sample(d, 100_000, seed=5)
    assert stats.kstest(x, d.cdf).statistic < 2.0 / math.sqrt(1e5)
