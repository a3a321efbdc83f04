"""Sweeping onto complements: closed forms, cone projection, mass accounting."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from rieszpot.balayage import (BalayageResult, balayage_dirac_analytic,
                               balayage_project, balayage_signed,
                               default_sweep_target, dirac_sweep_weights,
                               exterior_tail_mass, exterior_target,
                               harmonic_boundary_density,
                               mass_preservation_check, sphere_area,
                               stable_constant, sweep_measure_analytic)
from rieszpot.geometry import DomainSpec, PointCloud, discretize_sphere
from rieszpot.kernels import KernelSpec, cross_gram, gram, potential
from rieszpot.measures import DiscreteMeasure, measure_from_cloud

ORIGIN = (0.0, 0.0, 0.0)


@pytest.fixture(scope="module")
def ball():
    return DomainSpec("Ball", center=ORIGIN, radius=1.0)


@pytest.fixture(scope="module")
def boundary(ball, spec2):
    return default_sweep_target(ball, spec2)


def test_constants():
    assert np.isclose(sphere_area(3), 4.0 * math.pi, rtol=1e-12)
    assert np.isclose(stable_constant(3, 1.0), 1.0 / (2.0 * math.pi**2),
                      rtol=1e-12)
    assert abs(stable_constant(3, 2.0)) < 1e-15


# --- order-2 ball sweeps ----------------------------------------------------

def test_center_dirac_sweeps_to_uniform(ball, spec2, boundary):
    sw = balayage_dirac_analytic(ORIGIN, ball, spec2, boundary)
    dens = sw.weights / boundary.cell_weights
    assert np.allclose(dens, 1.0 / (4.0 * math.pi), rtol=1e-12)
    assert abs(sw.total_mass - 1.0) < 1e-9


def test_offcenter_dirac_density_and_mass(ball, spec2, boundary):
    y = np.array([0.0, 0.0, 0.5])
    sw = balayage_dirac_analytic(y, ball, spec2, boundary)
    assert abs(sw.total_mass - 1.0) < 1e-3
    # pole-to-pole density ratio ((r+d)/(r-d))^3 = 27
    dens = sw.weights / boundary.cell_weights
    near = dens[np.argmax(boundary.points @ np.array([0, 0, 1.0]))]
    far = dens[np.argmin(boundary.points @ np.array([0, 0, 1.0]))]
    assert abs(near / far - 27.0) < 27.0 * 0.02


def test_sweep_reproduces_exterior_potential(ball, spec2, boundary):
    y = (0.0, 0.0, 0.5)
    mu = DiscreteMeasure([y], [1.0], [0.01])
    sw = balayage_dirac_analytic(y, ball, spec2, boundary)
    for x in [(0, 0, 2.0), (3.0, 0, 0), (0, -1.5, 0), (1.2, 1.2, 0)]:
        ref = potential(mu, x, spec2)
        assert abs(potential(sw, x, spec2) / ref - 1.0) < 1e-3


def test_sweep_lowers_interior_potential(ball, spec2, boundary):
    y = (0.0, 0.0, 0.5)
    mu = DiscreteMeasure([y], [1.0], [0.01])
    sw = balayage_dirac_analytic(y, ball, spec2, boundary)
    for x in [ORIGIN, (0.3, 0, 0), (0, 0, -0.7)]:
        assert potential(sw, x, spec2) <= potential(mu, x, spec2) + 1e-9


def test_sweep_source_validation(ball, spec2, boundary):
    with pytest.raises(ValueError):
        balayage_dirac_analytic((0, 0, 1.5), ball, spec2, boundary)
    interior = discretize_sphere(ORIGIN, 0.5, 100)
    with pytest.raises(ValueError):
        dirac_sweep_weights([[0, 0, 0]], ball, spec2, interior)


def test_inward_sweep_mass_defect(spec2):
    # sweeping from outside onto the sphere loses mass: r/d in the limit
    comp = DomainSpec("BallComplement", center=ORIGIN, radius=1.0)
    mu = DiscreteMeasure([[3.0, 0.0, 0.0]], [1.0], [0.01])
    mass_in, mass_out, preserved = mass_preservation_check(mu, comp, spec2)
    assert abs(mass_out - 1.0 / 3.0) < 1e-3
    assert not preserved


def test_mass_preserved_for_interior_cloud(ball, spec2, rng):
    pts = rng.uniform(-0.4, 0.4, size=(15, 3))
    mu = DiscreteMeasure(pts, rng.uniform(0.1, 1.0, size=15),
                         np.full(15, 0.005))
    mass_in, mass_out, preserved = mass_preservation_check(mu, ball, spec2)
    assert preserved and abs(mass_out - mass_in) < 1e-2 * mass_in


# --- order < 2 exterior sweeps ----------------------------------------------

def test_exterior_target_weights_match_quadrature(ball, spec15):
    tgt = exterior_target(ball, spec15, n_dirs=64, n_radial=12)
    a = 0.75
    ref, _ = quad(lambda r: (r * r - 1.0) ** (-a) * r * r, 1.0, 20.0,
                  points=[1.0])
    assert abs(tgt.cell_weights.sum() / (4.0 * math.pi * ref) - 1.0) < 1e-6


def test_fractional_sweep_mass_and_potential(ball, spec15):
    y = (0.0, 0.0, 0.5)
    tgt = exterior_target(ball, spec15, n_dirs=512, n_radial=32)
    sw = balayage_dirac_analytic(y, ball, spec15, tgt)
    tail = exterior_tail_mass(y, ball, spec15)
    assert 0.0 < tail < 0.01
    assert abs(sw.total_mass + tail - 1.0) < 1e-2
    mu = DiscreteMeasure([y], [1.0], [0.01])
    for x in [(0, 0, 2.0), (3.0, 0, 0), (0, -1.5, 0)]:
        ref = potential(mu, x, spec15)
        assert abs(potential(sw, x, spec15) / ref - 1.0) < 1.5e-2


def test_fractional_sweep_converges_with_mesh(ball, spec15):
    y = (0.0, 0.0, 0.5)
    tail = exterior_tail_mass(y, ball, spec15)
    errs = []
    for nd, nr in ((128, 16), (512, 32)):
        tgt = exterior_target(ball, spec15, n_dirs=nd, n_radial=nr)
        sw = balayage_dirac_analytic(y, ball, spec15, tgt)
        errs.append(abs(sw.total_mass + tail - 1.0))
    assert errs[1] < 0.5 * errs[0]


def test_fractional_needs_exterior_target(ball, spec15, boundary):
    with pytest.raises(NotImplementedError):
        default_sweep_target(DomainSpec("BallComplement", center=ORIGIN,
                                        radius=1.0), spec15)


# --- half-space sweeps ------------------------------------------------------

def _plane_mesh(n_r=90, n_phi=64, r_min=0.05, r_max=80.0):
    edges = r_min * (r_max / r_min) ** (np.arange(n_r + 1) / n_r)
    phi = 2.0 * math.pi * (np.arange(n_phi) + 0.5) / n_phi
    pts, wts, hs = [], [], []
    for i in range(n_r):
        lo, hi = edges[i], edges[i + 1]
        rc = math.sqrt(0.5 * (lo * lo + hi * hi))
        area = math.pi * (hi * hi - lo * lo) / n_phi
        for p in phi:
            pts.append([rc * math.cos(p), rc * math.sin(p), 0.0])
            wts.append(area)
            hs.append(0.25 * (hi - lo))
    return PointCloud(np.array(pts), np.array(hs), np.array(wts))


def test_halfspace_sweep(spec2):
    D = DomainSpec("HalfSpace", normal=(0.0, 0.0, 1.0), offset=0.0)
    plane = _plane_mesh()
    y = (0.0, 0.0, 1.0)
    sw = balayage_dirac_analytic(y, D, spec2, plane)
    # truncation at r_max leaves ~ depth/r_max of the mass
    assert 0.97 < sw.total_mass < 1.001
    mu = DiscreteMeasure([y], [1.0], [0.01])
    for x in [(0, 0, -1.0), (2.0, 0, -0.5), (0, -3.0, -2.0)]:
        ref = potential(mu, x, spec2)
        assert abs(potential(sw, x, spec2) / ref - 1.0) < 1e-2


def test_halfspace_requires_plane_target(spec2):
    D = DomainSpec("HalfSpace", normal=(0.0, 0.0, 1.0), offset=0.0)
    with pytest.raises(ValueError):
        dirac_sweep_weights([[0, 0, 1.0]], D, spec2,
                            discretize_sphere(ORIGIN, 1.0, 100))


# --- cone projection --------------------------------------------------------

def test_projection_fixed_point(spec2, boundary, ball):
    sw = balayage_dirac_analytic((0, 0, 0.5), ball, spec2, boundary)
    res = balayage_project(sw, boundary, spec2)
    assert np.abs(res.swept.weights / sw.weights - 1.0).max() < 1e-6
    assert res.residual < 1e-8 * sw.total_mass
    assert res.mass_bound_ok


def test_projection_matches_analytic(spec2, ball):
    target = discretize_sphere(ORIGIN, 1.0, 600)
    y = (0.0, 0.0, 0.5)
    mu = DiscreteMeasure([y], [1.0], [0.015])
    res = balayage_project(mu, target, spec2)
    ref = balayage_dirac_analytic(y, ball, spec2, target)
    assert np.abs(res.swept.weights / ref.weights - 1.0).max() < 0.02
    assert abs(res.mass_out - 1.0) < 1e-3
    assert res.mass_bound_ok


def test_projection_linearity(spec2, ball):
    target = discretize_sphere(ORIGIN, 1.0, 400)
    m1 = DiscreteMeasure([[0.0, 0.0, 0.5]], [1.0], [0.015])
    m2 = DiscreteMeasure([[0.3, 0.0, 0.0]], [2.0], [0.015])
    w_sum = balayage_project(m1 + m2, target, spec2).swept.weights
    w_parts = (balayage_project(m1, target, spec2).swept.weights
               + balayage_project(m2, target, spec2).swept.weights)
    assert np.abs(w_sum / w_parts - 1.0).max() < 1e-6


def test_projection_optimality(spec2, rng):
    target = discretize_sphere(ORIGIN, 1.0, 300)
    mu = DiscreteMeasure([[0.0, 0.0, 0.5]], [1.0], [0.015])
    res = balayage_project(mu, target, spec2)
    K = gram(target.points, target.cell_radii, spec2)
    b = cross_gram(target.points, target.cell_radii, mu.points,
                   mu.cell_radii, spec2) @ mu.weights
    e_mu = float(mu.weights @ (gram(mu.points, mu.cell_radii, spec2)
                               @ mu.weights))
    for _ in range(20):
        theta = rng.dirichlet(np.ones(len(target))) * rng.uniform(0.5, 1.5)
        obj = e_mu - 2.0 * b @ theta + theta @ K @ theta
        assert res.residual <= obj + 1e-9 * e_mu


def test_projection_validation(spec2, boundary):
    with pytest.raises(ValueError):
        balayage_project(DiscreteMeasure([[0, 0, 0]], [-1.0], [0.01]),
                         boundary, spec2)
    empty = balayage_project(
        DiscreteMeasure([[0, 0, 0]], [1.0], [0.01]).scaled(1.0) +
        DiscreteMeasure([[0, 0, 0]], [-1.0], [0.01]), boundary, spec2)
    assert empty.mass_in == 0.0 and len(empty.swept) == 0


def test_signed_sweep_dipole(spec2, ball):
    target = discretize_sphere(ORIGIN, 1.0, 600)
    dip = (DiscreteMeasure([[0.2, 0.0, 0.0]], [1.0], [0.015])
           + DiscreteMeasure([[-0.2, 0.0, 0.0]], [-1.0], [0.015]))
    sw = balayage_signed(dip, target, spec2)
    ref = (balayage_dirac_analytic((0.2, 0, 0), ball, spec2, target)
           + balayage_dirac_analytic((-0.2, 0, 0), ball, spec2, target).scaled(-1.0))
    # compare as densities relative to the peak magnitude
    scale = np.abs(ref.weights).max()
    assert np.abs(sw.weights - ref.weights).max() < 0.02 * scale
    assert abs(sw.total_mass) < 1e-3
