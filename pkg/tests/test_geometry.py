"""Meshes, domains, profiles: closure, scaling, determinism, shell windows."""

import math

import numpy as np
import pytest
from scipy.spatial import cKDTree

from rieszpot.geometry import (DomainSpec, PointCloud, ProfileSpec,
                               discretize_ball, discretize_sphere,
                               separation, shell_decompose)

ORIGIN = (0.0, 0.0, 0.0)


# --- sphere meshes ----------------------------------------------------------

def test_sphere_area_closure():
    cloud = discretize_sphere(ORIGIN, 1.0, 500)
    assert len(cloud) == 500
    assert np.allclose(np.linalg.norm(cloud.points, axis=1), 1.0, atol=1e-12)
    assert abs(cloud.cell_weights.sum() - 4.0 * math.pi) < 1e-9


def test_sphere_scaling_covariance():
    a = discretize_sphere(ORIGIN, 1.0, 500)
    b = discretize_sphere(ORIGIN, 2.0, 500)
    assert np.allclose(b.points, 2.0 * a.points, rtol=0, atol=1e-15)
    assert np.allclose(b.cell_weights, 4.0 * a.cell_weights, rtol=1e-15)
    assert np.allclose(b.cell_radii, 2.0 * a.cell_radii, rtol=1e-15)


def test_sphere_nn_spacing_scale():
    cloud = discretize_sphere(ORIGIN, 1.0, 2000)
    nn = cKDTree(cloud.points).query(cloud.points, k=2)[0][:, 1]
    expected = math.sqrt(4.0 * math.pi / 2000)
    assert abs(nn.mean() - expected) < 0.2 * expected


def test_sphere_determinism():
    a = discretize_sphere((0.2, -0.1, 0.4), 1.3, 777)
    b = discretize_sphere((0.2, -0.1, 0.4), 1.3, 777)
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.cell_weights, b.cell_weights)
    assert np.array_equal(a.cell_radii, b.cell_radii)


def test_sphere_too_coarse_rejected():
    with pytest.raises(ValueError):
        discretize_sphere(ORIGIN, 1.0, 11)


@pytest.mark.parametrize("count", [401, 600, 977, 1500, 2000, 3000])
def test_sphere_cell_areas_near_uniform(count):
    # the spiral endpoint corrections keep every Voronoi cell area within a
    # couple percent of the mean, which is what nodewise-uniform equilibrium
    # weights ultimately rest on
    cloud = discretize_sphere(ORIGIN, 1.0, count)
    areas = cloud.cell_weights
    assert np.abs(areas / areas.mean() - 1.0).max() < 0.02


def test_sphere_radii_respect_nn_invariant():
    cloud = discretize_sphere(ORIGIN, 1.0, 1200)
    nn = cKDTree(cloud.points).query(cloud.points, k=2)[0][:, 1]
    assert np.all(cloud.cell_radii <= 0.5 * nn * (1 + 1e-9))


# --- ball meshes ------------------------------------------------------------

def test_ball_volume_closure_and_containment():
    cloud = discretize_ball(ORIGIN, 1.0, 1000)
    assert abs(cloud.cell_weights.sum() - 4.0 * math.pi / 3.0) < 1e-9
    assert np.all(np.linalg.norm(cloud.points, axis=1) <= 1.0 + 1e-12)


def test_ball_centroid_near_center():
    cloud = discretize_ball(ORIGIN, 1.0, 1000)
    centroid = cloud.cell_weights @ cloud.points / cloud.cell_weights.sum()
    assert np.linalg.norm(centroid) < 1e-2


def test_ball_too_coarse_rejected():
    with pytest.raises(ValueError):
        discretize_ball(ORIGIN, 1.0, 19)


# --- rotation-body shells ---------------------------------------------------

def test_cylinder_first_shell_window():
    # s=0 power law is the straight cylinder of radius 1; the first shell
    # lives in the annulus 2 <= |x| < 4
    profile = ProfileSpec("PowerLaw", s=0.0, q=2.0, k_max=2)
    shell = shell_decompose(profile)[0]
    r = np.linalg.norm(shell.points, axis=1)
    assert r.min() >= 2.0 - 1e-9
    assert r.max() < 4.0
    cross = np.sqrt(shell.points[:, 1] ** 2 + shell.points[:, 2] ** 2)
    assert abs(cross.max() - 1.0) < 1e-9


def test_decaying_shell_flagged_sub_precision():
    profile = ProfileSpec("ExpFiniteCap", s=2.0, q=2.0, k_max=5)
    shells = shell_decompose(profile)
    assert len(shells) == 5
    assert shells[4].sub_precision
    assert len(shells[4]) > 0  # emitted as a needle, not dropped


@pytest.mark.parametrize("family,s", [("PowerLaw", 0.5), ("SubexpThin", 0.5)])
def test_shells_respect_annuli_and_profile(family, s):
    profile = ProfileSpec(family, s=s, q=2.0, k_max=4)
    shells = shell_decompose(profile, budget=200)
    for k, shell in enumerate(shells, start=1):
        r = np.linalg.norm(shell.points, axis=1)
        assert r.min() >= profile.q**k - 1e-6
        assert r.max() < profile.q ** (k + 1)
        cross2 = shell.points[:, 1] ** 2 + shell.points[:, 2] ** 2
        rho2 = profile.rho(shell.points[:, 0]) ** 2
        assert np.all(cross2 <= rho2 * (1 + 1e-9))


# --- separation -------------------------------------------------------------

def test_separation_concentric_spheres():
    a = discretize_sphere(ORIGIN, 0.5, 300)
    b = discretize_sphere(ORIGIN, 1.0, 300)
    assert abs(separation(a, b) - 0.5) < 0.05


def test_separation_identical_and_translated():
    a = discretize_sphere(ORIGIN, 0.4, 100)
    assert separation(a, a) == 0.0
    b = PointCloud(a.points + np.array([3.0, 0.0, 0.0]),
                   a.cell_radii, a.cell_weights)
    assert separation(a, b) >= 1.0


def test_separation_empty_rejected():
    a = discretize_sphere(ORIGIN, 1.0, 50)
    empty = PointCloud(np.zeros((0, 3)), np.zeros(0), np.zeros(0))
    with pytest.raises(ValueError):
        separation(a, empty)


# --- types and serialization ------------------------------------------------

def test_pointcloud_radius_invariant_enforced():
    pts = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    with pytest.raises(ValueError):
        PointCloud(pts, np.array([0.6, 0.6]), np.array([1.0, 1.0]))
    PointCloud(pts, np.array([0.5, 0.5]), np.array([1.0, 1.0]))  # boundary ok


def test_pointcloud_csv_roundtrip(tmp_path):
    cloud = discretize_sphere((0.1, 0.2, -0.3), 0.7, 64)
    path = tmp_path / "cloud.csv"
    cloud.to_csv(path)
    back = PointCloud.from_csv(path)
    assert np.allclose(back.points, cloud.points, rtol=0, atol=0)
    assert np.allclose(back.cell_radii, cloud.cell_radii, rtol=0, atol=0)
    assert np.allclose(back.cell_weights, cloud.cell_weights, rtol=0, atol=0)


@pytest.mark.parametrize("family,s", [
    ("PowerLaw", -0.1), ("SubexpThin", 0.0), ("SubexpThin", 1.5),
    ("ExpFiniteCap", 1.0), ("NoSuchFamily", 1.0),
])
def test_profile_parameter_validation(family, s):
    with pytest.raises(ValueError):
        ProfileSpec(family, s=s)


def test_profile_shell_ratio_validation():
    with pytest.raises(ValueError):
        ProfileSpec("PowerLaw", s=1.0, q=1.0)
    with pytest.raises(ValueError):
        ProfileSpec("PowerLaw", s=1.0, k_max=0)


def test_domain_contains():
    ball = DomainSpec("Ball", center=ORIGIN, radius=1.0)
    comp = DomainSpec("BallComplement", center=ORIGIN, radius=1.0)
    pts = np.array([[0.0, 0.0, 0.5], [0.0, 0.0, 2.0]])
    assert ball.contains(pts).tolist() == [True, False]
    assert comp.contains(pts).tolist() == [False, True]
    half = DomainSpec("HalfSpace", normal=(0.0, 0.0, 1.0), offset=0.0)
    assert half.contains(pts).tolist() == [True, True]
    assert half.contains([[0.0, 0.0, -1.0]]).tolist() == [False]


def test_domain_validation_and_roundtrip():
    with pytest.raises(ValueError):
        DomainSpec("Ball", radius=-1.0)
    with pytest.raises(ValueError):
        DomainSpec("HalfSpace", normal=(1.0, 1.0, 0.0))
    with pytest.raises(ValueError):
        DomainSpec("Torus")
    body = DomainSpec("RotationBodyComplement",
                      profile=ProfileSpec("SubexpThin", s=0.5))
    for D in (DomainSpec("Ball", center=(0.1, 0.0, 0.0), radius=2.0), body):
        back = DomainSpec.from_dict(D.to_dict())
        assert back == D
