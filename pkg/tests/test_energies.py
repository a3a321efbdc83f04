"""Energy routes: standard, smoothed, weak (grid), Green, Fourier."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rieszpot.energies import (EnergyReport, GridSpec, deny_schwartz_energy,
                               ds_calibration_consistency, green_energy,
                               half_potential_field, identity_residuals,
                               smoothed_standard_energy, standard_energy,
                               weak_energy, weak_inner_product)
from rieszpot.geometry import DomainSpec, discretize_sphere
from rieszpot.kernels import KernelSpec
from rieszpot.measures import DiscreteMeasure, measure_from_cloud, zero_measure

ORIGIN = (0.0, 0.0, 0.0)
ATOM = DiscreteMeasure([[0.0, 0.0, 0.0]], [1.0], [0.02])
DIPOLE = DiscreteMeasure([[0.2, 0.0, 0.0], [-0.2, 0.0, 0.0]],
                         [1.0, -1.0], [0.015, 0.015])
TWO_SCALE = DiscreteMeasure([[0.25, 0.0, 0.0], [-0.25, 0.0, 0.0]],
                            [1.0, 0.5], [0.01, 0.03])


@pytest.fixture(scope="module")
def grid():
    return GridSpec(L=1.0, M=48)


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(L=0.0, M=32)
    with pytest.raises(ValueError):
        GridSpec(L=1.0, M=8)
    assert GridSpec(L=2.0, M=32).cell == 0.125


# --- standard / smoothed ----------------------------------------------------

def test_standard_energy_two_atoms(spec2):
    m = DiscreteMeasure([[0, 0, 0], [1.0, 0, 0]], [1.0, 1.0], [0.01, 0.01])
    assert np.isclose(standard_energy(m, m, spec2), 202.0, rtol=1e-12)


def test_standard_energy_mutual(spec2):
    a = DiscreteMeasure([[0, 0, 0]], [1.0], [0.01])
    b = DiscreteMeasure([[2.0, 0, 0]], [1.0], [0.01])
    assert np.isclose(standard_energy(a, b, spec2), 0.5, rtol=1e-12)
    assert standard_energy(a, b, spec2) == standard_energy(b, a, spec2)
    assert standard_energy(zero_measure(), a, spec2) == 0.0


def test_standard_energy_rejects_half_order(spec2):
    with pytest.raises(ValueError):
        standard_energy(ATOM, ATOM, spec2.half())


def test_uniform_sphere_energy_is_inverse_capacity(spec2):
    m = measure_from_cloud(discretize_sphere(ORIGIN, 1.0, 1000))
    m = m.scaled(1.0 / m.total_mass)
    assert abs(standard_energy(m, m, spec2) - 1.0) < 0.01


def test_smoothed_equals_standard_at_order_two(spec2, rng):
    # separated shells see each other as points at order 2 (mean value)
    pts = rng.uniform(-0.5, 0.5, size=(25, 3))
    m = DiscreteMeasure(pts, rng.normal(size=25), np.full(25, 0.004))
    assert np.isclose(smoothed_standard_energy(m, spec2),
                      standard_energy(m, m, spec2), rtol=1e-12)


def test_smoothed_close_to_standard_fractional(spec15):
    assert np.isclose(smoothed_standard_energy(DIPOLE, spec15),
                      standard_energy(DIPOLE, DIPOLE, spec15), rtol=5e-3)


def test_smoothing_rejects_nonintegrable_order():
    with pytest.raises(ValueError):
        smoothed_standard_energy(ATOM, KernelSpec(3, 1.0))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_smoothed_energy_parallelogram(seed):
    # quadratic form: E(m+n) + E(m-n) = 2E(m) + 2E(n)
    rng = np.random.default_rng(seed)
    spec = KernelSpec(3, 1.5)
    pts = rng.uniform(-1.0, 1.0, size=(14, 3))
    m = DiscreteMeasure(pts[:7], rng.normal(size=7), np.full(7, 0.003))
    n = DiscreteMeasure(pts[7:], rng.normal(size=7), np.full(7, 0.003))
    lhs = (smoothed_standard_energy(m + n, spec)
           + smoothed_standard_energy(m + n.scaled(-1.0), spec))
    rhs = 2.0 * (smoothed_standard_energy(m, spec)
                 + smoothed_standard_energy(n, spec))
    assert np.isclose(lhs, rhs, rtol=1e-9)


# --- weak (grid) route ------------------------------------------------------

def test_weak_energy_atom_exact(spec2, spec15, grid):
    for spec, ref in ((spec2, 50.0), (spec15, 500.0)):
        v, t = weak_energy(ATOM, spec, grid)
        assert np.isclose(v + t, ref, rtol=1e-9)


@pytest.mark.parametrize("m", [DIPOLE, TWO_SCALE], ids=["dipole", "two_scale"])
def test_weak_matches_smoothed(m, spec2, spec15, grid):
    for spec in (spec2, spec15):
        ref = smoothed_standard_energy(m, spec)
        v, t = weak_energy(m, spec, grid)
        assert abs((v + t) / ref - 1.0) < 2e-3


def test_weak_energy_positive_on_signed(spec2, grid):
    v, t = weak_energy(DIPOLE, spec2, grid)
    assert v + t > 0.0


def test_weak_energy_margin_rejected(spec2, grid):
    far = DiscreteMeasure([[0.7, 0.0, 0.0]], [1.0], [0.01])
    with pytest.raises(ValueError):
        weak_energy(far, spec2, grid)


def test_weak_energy_zero_measure(spec2, grid):
    assert weak_energy(zero_measure(), spec2, grid) == (0.0, 0.0)


def test_weak_grid_halving(spec2):
    vals = [sum(weak_energy(TWO_SCALE, spec2, GridSpec(L=1.0, M=M)))
            for M in (32, 64)]
    assert abs(vals[1] / vals[0] - 1.0) < 0.01


def test_weak_inner_product_disjoint_spheres(spec2):
    # mutual energy of two unit-mass spheres = 1/center distance at order 2
    s1 = measure_from_cloud(discretize_sphere((0.45, 0, 0), 0.18, 200))
    s2 = measure_from_cloud(discretize_sphere((-0.45, 0, 0), 0.18, 200))
    s1, s2 = s1.scaled(1.0 / s1.total_mass), s2.scaled(1.0 / s2.total_mass)
    ip = weak_inner_product(s1, s2, spec2, GridSpec(L=1.4, M=48))
    ref = standard_energy(s1, s2, spec2)
    assert np.isclose(ref, 1.0 / 0.9, rtol=1e-3)
    assert abs(ip / ref - 1.0) < 0.02


def test_weak_cauchy_schwarz(spec2, grid):
    a = DiscreteMeasure([[0.2, 0.0, 0.0]], [1.0], [0.015])
    b = DiscreteMeasure([[-0.2, 0.0, 0.0]], [1.0], [0.015])
    ip = weak_inner_product(a, b, spec2, grid)
    ea = sum(weak_energy(a, spec2, grid))
    eb = sum(weak_energy(b, spec2, grid))
    assert abs(ip) <= np.sqrt(ea * eb) * (1.0 + 1e-9)


def test_half_potential_field_shape(spec2):
    # shell-smoothed half-order potential: log((d+h)/(d-h))/(2dh) at a = 1
    u = half_potential_field(ATOM, [[0.5, 0, 0], [1.0, 0, 0]], spec2)
    h = 0.02
    ref = [np.log((d + h) / (d - h)) / (2.0 * d * h) for d in (0.5, 1.0)]
    assert np.allclose(u, ref, rtol=1e-12)


# --- Green route ------------------------------------------------------------

def test_green_energy_center_atom(spec2):
    # g-energy of a smoothed atom at the center: s*h^(-1) - 1/R
    for R, ref in ((1.0, 49.0), (2.0, 49.5)):
        D = DomainSpec("Ball", center=ORIGIN, radius=R)
        assert abs(green_energy(ATOM, D, spec2) - ref) < 5e-3 * ref


def test_green_energy_below_standard(spec2):
    D = DomainSpec("Ball", center=ORIGIN, radius=1.0)
    m = DiscreteMeasure([[0.3, 0.0, 0.0], [-0.2, 0.1, 0.0]],
                        [1.0, 0.5], [0.01, 0.01])
    assert green_energy(m, D, spec2) < standard_energy(m, m, spec2)


def test_green_energy_requires_containment(spec2):
    D = DomainSpec("Ball", center=ORIGIN, radius=1.0)
    with pytest.raises(ValueError):
        green_energy(DiscreteMeasure([[1.5, 0, 0]], [1.0], [0.01]), D, spec2)


# --- Fourier route ----------------------------------------------------------

@pytest.mark.parametrize("m", [DIPOLE, TWO_SCALE], ids=["dipole", "two_scale"])
def test_fourier_matches_smoothed(m, spec2, spec15):
    for spec in (spec2, spec15):
        ref = smoothed_standard_energy(m, spec)
        assert abs(deny_schwartz_energy(m, spec) / ref - 1.0) < 2e-3


def test_fourier_calibration_consistency(spec2, spec15):
    for spec in (spec2, spec15):
        ratios = list(ds_calibration_consistency(spec).values())
        assert (max(ratios) - min(ratios)) / min(ratios) < 1e-4


def test_fourier_cutoff_warning(spec2):
    with pytest.warns(UserWarning):
        deny_schwartz_energy(DIPOLE, spec2, xi_max=20.0)


def test_fourier_rejects_order_one():
    with pytest.raises(ValueError):
        deny_schwartz_energy(ATOM, KernelSpec(3, 1.0))


def test_fourier_zero_measure(spec2):
    assert deny_schwartz_energy(zero_measure(), spec2) == 0.0


# --- identity battery -------------------------------------------------------

def test_identity_residuals_atom(spec2, spec15):
    D = DomainSpec("Ball", center=ORIGIN, radius=1.0)
    for spec in (spec2, spec15):
        r = identity_residuals(ATOM, D, spec)
        assert r.green_vs_weak < 0.01
        assert r.green_vs_difference < 0.01
        assert r.potential_sup < 0.01
        d = r.as_dict()
        assert set(d) == {"green_vs_weak", "green_vs_difference",
                          "potential_sup"}


def test_identity_residuals_validation(spec2):
    D = DomainSpec("Ball", center=ORIGIN, radius=1.0)
    out = identity_residuals(zero_measure(), D, spec2)
    assert out.green_vs_weak == 0.0
    with pytest.raises(ValueError):
        identity_residuals(DiscreteMeasure([[2.0, 0, 0]], [1.0], [0.01]),
                           D, spec2)


def test_energy_report_round_trip():
    rep = EnergyReport(standard=1.0, weak=1.01, residuals={"x": 0.01})
    d = rep.to_dict()
    assert d["standard"] == 1.0 and d["residuals"] == {"x": 0.01}
    assert d["green"] is None
