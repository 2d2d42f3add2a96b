import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavetemp.analytic import BoxParams, box_eigenstate
from wavetemp.errors import InvariantViolation
from wavetemp.fields import PhysicalConstants, ScalarField, integrate_array, make_grid, sample
from wavetemp.thermo import (first_law_ledger, heat_exchange, ledger_sweep, pointwise_energy,
                             pointwise_entropy, product_additivity_report, temperature_field,
                             tilt_direction, work_exchange)

GRID = make_grid(1, [(-8, 8)], [1024], "periodic")
X = GRID.axes()[0]
GAUSS = ScalarField(GRID, np.sqrt(2 / np.pi) * np.exp(-2 * X**2))
AT_ONE = int(np.argmin(np.abs(X - 1.0)))


def box_density(points=2049):
    grid = make_grid(1, [(0, 1)], [points], "dirichlet-zero")
    return sample(grid, box_eigenstate(BoxParams())).density()


def uniform(points=64):
    grid = make_grid(1, [(0, 1)], [points], "periodic")
    return ScalarField(grid, np.ones(points))


def test_pointwise_energy_values():
    assert np.allclose(pointwise_energy(uniform()).values, 0.0, atol=1e-20)
    assert pointwise_energy(GAUSS).values[AT_ONE] == pytest.approx(2.0, rel=1e-10)
    p = box_density()
    assert pointwise_energy(p).values[512] == pytest.approx(np.pi**2 / 2, rel=1e-6)


def test_temperature_values():
    p = box_density()
    assert temperature_field(p).values[512] == pytest.approx(np.pi**2, rel=1e-6)
    assert np.allclose(temperature_field(uniform()).values, 0.0, atol=1e-20)
    assert temperature_field(GAUSS).values[AT_ONE] == pytest.approx(4.0, rel=1e-10)
    T = temperature_field(GAUSS, form="modulus")
    assert T.values[AT_ONE] == pytest.approx(4.0, rel=1e-10)
    with pytest.raises(ValueError):
        temperature_field(GAUSS, form="kinetic")


def test_temperature_with_constants():
    c = PhysicalConstants(hbar=0.5, mass=2.0, k_b=3.0)
    T = temperature_field(GAUSS, c).values[AT_ONE]
    assert T == pytest.approx(4.0 * 0.25 / (2.0 * 3.0), rel=1e-10)


def test_pointwise_entropy_values():
    assert np.allclose(pointwise_entropy(uniform()).values, 0.0)
    half = ScalarField(make_grid(1, [(0, 0.5)], [32], "dirichlet-zero"), np.full(32, 2.0))
    assert np.allclose(pointwise_entropy(half).values, -np.log(2))
    assert pointwise_entropy(GAUSS).values[512] == pytest.approx(-np.log(np.sqrt(2 / np.pi)))


def test_heat_exchange():
    eps = 1e-4
    assert np.all(np.nan_to_num(heat_exchange(GAUSS, np.zeros(1024)).values) == 0)
    u = uniform()
    assert np.allclose(heat_exchange(u, 1e-4 * np.sin(2 * np.pi * u.grid.axes()[0])).values, 0)
    heat = heat_exchange(GAUSS, eps * X * GAUSS.values)
    assert heat.values[AT_ONE] == pytest.approx(-4e-4, rel=1e-9)


def test_work_exchange():
    eps = 1e-4
    w = work_exchange(GAUSS, np.zeros(1024))
    assert np.all(w.values[w.unmasked] == 0)
    T = temperature_field(GAUSS)
    w = work_exchange(GAUSS, eps * GAUSS.values)
    keep = w.unmasked
    bulk = keep & (np.abs(X) < 2)
    assert np.allclose(w.values[bulk], eps * T.values[bulk], rtol=1e-9)
    # near the node threshold p is ~1e-10 of its peak and round-off in the
    # spectral gradient shows up at the 1e-6 level
    assert np.allclose(w.values[keep], eps * T.values[keep], rtol=1e-5)


def test_perturbation_guards():
    with pytest.raises(InvariantViolation, match="1e-3"):
        heat_exchange(GAUSS, 1e-2 * GAUSS.values)
    with pytest.raises(InvariantViolation, match="integral"):
        first_law_ledger(GAUSS, 1e-4 * GAUSS.values, mass_preserving=True)


def test_ledger_gaussian_shift():
    eps = 1e-4
    led = first_law_ledger(GAUSS, eps * X * GAUSS.values, mass_preserving=True)
    s = led.summary()
    assert s["residual_inf"] / s["delta_e_inf"] < 2e-3
    # at x = 1 the work is the complement of the heat to O(eps^2)
    dE = led.delta_e.values[AT_ONE]
    assert led.work.values[AT_ONE] == pytest.approx(dE - led.heat.values[AT_ONE], abs=1e-6)


def test_ledger_trivial():
    s = first_law_ledger(GAUSS, np.zeros(1024)).summary()
    assert s["residual_inf"] == 0 and s["delta_e_inf"] == 0


@pytest.mark.parametrize("density", ["gauss", "box"])
def test_ledger_sweep_is_second_order(density):
    p = GAUSS if density == "gauss" else box_density()
    d = tilt_direction(p)
    assert abs(integrate_array(d, p.grid)) < 1e-12
    out = ledger_sweep(p, d, [1e-3, 5e-4, 2.5e-4], mass_preserving=True)
    assert out["residual_slope"] == pytest.approx(2.0, abs=0.1)
    assert [r["eps"] for r in out["ledgers"]] == [1e-3, 5e-4, 2.5e-4]


def test_additivity_scaling_perturbation():
    grid = make_grid(1, [(-8, 8)], [128], "periodic")
    x = grid.axes()[0]
    p = ScalarField(grid, np.sqrt(2 / np.pi) * np.exp(-2 * x**2))
    eps = 1e-4
    rep = product_additivity_report(p, p, eps * p.values, eps * p.values, probe=(0.5, 0.5))
    assert rep.heat_gap < 1e-10 and rep.heat_additive
    # scaling leaves every gradient ratio equal to eps: work is additive too
    assert rep.work_gap < 1e-6


def test_additivity_shift_perturbation():
    grid = make_grid(1, [(-8, 8)], [128], "periodic")
    x = grid.axes()[0]
    p = ScalarField(grid, np.sqrt(2 / np.pi) * np.exp(-2 * x**2))
    dp = 1e-4 * x * p.values
    rep = product_additivity_report(p, p, dp, dp, probe=(0.5, 0.5))
    assert rep.heat_gap < 1e-10
    assert rep.work_gap > 0.01 and not rep.work_additive
    assert rep.work_lhs == pytest.approx(0.5e-4, rel=1e-6)
    assert rep.as_dict()["probe"] == [0.5, 0.5]


def test_additivity_zero_perturbation():
    grid = make_grid(1, [(-8, 8)], [64], "periodic")
    x = grid.axes()[0]
    p = ScalarField(grid, np.sqrt(2 / np.pi) * np.exp(-2 * x**2))
    rep = product_additivity_report(p, p, np.zeros(64), np.zeros(64))
    assert rep.heat_gap == 0 and rep.work_gap == 0
    assert rep.heat_additive and rep.work_additive


@settings(max_examples=25, deadline=None)
@given(eps=st.floats(1e-6, 1e-3))
def test_heat_scales_linearly(eps):
    h1 = heat_exchange(GAUSS, eps * X * GAUSS.values / 8).values[AT_ONE]
    assert h1 == pytest.approx(-4 * eps / 8, rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(hbar=st.floats(0.1, 3.0))
def test_temperature_scales_with_hbar_squared(hbar):
    T = temperature_field(GAUSS, PhysicalConstants(hbar=hbar)).values[AT_ONE]
    assert T == pytest.approx(4.0 * hbar**2, rel=1e-10)
