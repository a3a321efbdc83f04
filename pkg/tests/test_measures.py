"""Signed atomic measures: Jordan structure, restriction, mass bookkeeping."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rieszpot.measures import (DiscreteMeasure, MassReport, canonical_suite,
                               coalesce, combine, jordan_decompose,
                               mass_report, measure_from_cloud, restrict,
                               zero_measure)


def _measure(points, weights, h=0.01):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return DiscreteMeasure(pts, weights, np.full(len(pts), h))


# deterministic random signed measures for the property tests
signed_measures = st.integers(min_value=1, max_value=12).flatmap(
    lambda k: st.tuples(
        st.just(k),
        st.lists(st.floats(-5, 5).filter(lambda w: abs(w) > 1e-3),
                 min_size=k, max_size=k),
        st.integers(min_value=0, max_value=2**31 - 1),
    ))


def _build(drawn):
    k, weights, seed = drawn
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1.0, 1.0, size=(k, 3))
    # enforce the pairwise-distinct invariant
    while len(pts) > 1:
        from scipy.spatial import cKDTree
        nn = cKDTree(pts).query(pts, k=2)[0][:, 1]
        if nn.min() > 1e-9:
            break
        pts = rng.uniform(-1.0, 1.0, size=(k, 3))
    return _measure(pts, weights)


# --- jordan decomposition ---------------------------------------------------

def test_jordan_basic_split():
    mu = _measure([[0, 0, 0], [1, 0, 0]], [2.0, -3.0])
    plus, minus = jordan_decompose(mu)
    assert plus.total_mass == 2.0
    assert minus.total_mass == 3.0
    assert np.all(minus.weights > 0)


def test_jordan_all_positive():
    mu = _measure([[0, 0, 0], [1, 0, 0]], [1.0, 2.0])
    plus, minus = jordan_decompose(mu)
    assert plus is not None and len(minus) == 0
    assert np.array_equal(plus.weights, mu.weights)


@settings(max_examples=30, deadline=None)
@given(signed_measures)
def test_jordan_mass_balance(drawn):
    mu = _build(drawn)
    plus, minus = jordan_decompose(mu)
    assert np.isclose(plus.total_mass - minus.total_mass, mu.weights.sum(),
                      rtol=1e-12, atol=1e-12)
    # supports disjoint: every atom appears in exactly one part
    assert len(plus) + len(minus) == len(mu)


@settings(max_examples=30, deadline=None)
@given(signed_measures, st.floats(0.1, 1.8))
def test_restriction_commutes_with_jordan(drawn, r):
    mu = _build(drawn)
    region = lambda p: np.linalg.norm(p) <= r
    left = jordan_decompose(restrict(mu, region))[0]
    right = restrict(jordan_decompose(mu)[0], region)
    assert len(left) == len(right)
    if len(left):
        assert np.allclose(np.sort(left.weights), np.sort(right.weights))


# --- restriction ------------------------------------------------------------

def test_restrict_identity_and_empty():
    mu = _measure([[0, 0, 0], [1, 0, 0]], [1.0, -1.0])
    assert len(restrict(mu, lambda p: True)) == 2
    assert len(restrict(mu, lambda p: False)) == 0


def test_restrict_exhaustion_masses_nondecreasing():
    rng = np.random.default_rng(7)
    pts = rng.uniform(-1, 1, size=(10, 3))
    mu = _measure(pts, np.ones(10))
    radii = np.linspace(0.1, 2.0, 12)
    masses = [restrict(mu, lambda p, r=r: np.linalg.norm(p) <= r).total_mass
              for r in radii]
    assert all(b >= a for a, b in zip(masses, masses[1:]))
    assert masses[-1] == mu.total_mass


# --- mass report ------------------------------------------------------------

def test_mass_report_examples():
    mu = _measure([[0, 0, 0], [1, 0, 0]], [1.0, -1.0])
    assert mass_report(mu) == MassReport(1.0, 1.0, 2.0)
    assert mass_report(zero_measure()) == MassReport(0.0, 0.0, 0.0)
    many = _measure(np.column_stack([np.arange(100), np.zeros(100),
                                     np.zeros(100)]), np.ones(100))
    assert mass_report(many) == MassReport(100.0, 0.0, 100.0)


@settings(max_examples=30, deadline=None)
@given(signed_measures)
def test_mass_report_additive_under_disjoint_union(drawn):
    mu = _build(drawn)
    nu = _measure(mu.points + np.array([10.0, 0, 0]), mu.weights)
    both = combine(mu, nu)
    a, b, c = mass_report(mu), mass_report(nu), mass_report(both)
    assert np.isclose(c.positive_mass, a.positive_mass + b.positive_mass)
    assert np.isclose(c.total_variation, a.total_variation + b.total_variation)


# --- carrier type -----------------------------------------------------------

def test_measure_invariants_enforced():
    with pytest.raises(ValueError):
        _measure([[0, 0, 0], [0, 0, 0]], [1.0, 1.0])  # duplicate points
    with pytest.raises(ValueError):
        _measure([[0, 0, 0]], [0.0])  # zero weight
    with pytest.raises(ValueError):
        DiscreteMeasure([[0.0, 0.0, 0.0]], [1.0], [-0.1])  # bad radius


def test_measure_algebra():
    mu = _measure([[0, 0, 0]], [2.0])
    nu = _measure([[1, 0, 0]], [1.0])
    assert (mu + nu).total_mass == 3.0
    assert np.isclose((mu - nu).total_mass, 1.0)
    assert mu.scaled(0.5).total_mass == 1.0
    # adding a measure to its own negation cancels atom-wise
    assert len(mu + mu.scaled(-1.0)) == 0


def test_coalesce_merges_and_drops():
    pts = [[0, 0, 0], [0, 0, 1e-13], [1, 0, 0]]
    out = coalesce(pts, [1.0, 2.0, -1.0], [0.01, 0.02, 0.01])
    assert len(out) == 2
    assert np.isclose(out.total_mass, 2.0)
    cancel = coalesce([[0, 0, 0], [0, 0, 1e-13]], [1.0, -1.0], [0.01, 0.01])
    assert len(cancel) == 0


def test_csv_roundtrip(tmp_path):
    mu = _measure([[0.25, -0.5, 0.125], [1, 0, 0]], [1.5, -2.5])
    path = tmp_path / "mu.csv"
    mu.to_csv(path)
    back = DiscreteMeasure.from_csv(path)
    assert np.array_equal(back.points, mu.points)
    assert np.array_equal(back.weights, mu.weights)
    assert np.array_equal(back.cell_radii, mu.cell_radii)


def test_dict_roundtrip():
    mu = _measure([[0.25, -0.5, 0.125]], [1.5])
    back = DiscreteMeasure.from_dict(mu.to_dict())
    assert np.array_equal(back.points, mu.points)
    assert np.array_equal(back.weights, mu.weights)


def test_measure_from_cloud_drops_zero_weights():
    from rieszpot.geometry import discretize_sphere
    cloud = discretize_sphere((0, 0, 0), 1.0, 100)
    w = cloud.cell_weights.copy()
    w[::2] = 0.0
    mu = measure_from_cloud(cloud, w)
    assert len(mu) == 50


def test_canonical_suite_shape():
    suite = canonical_suite()
    assert set(suite) == {"atom", "dipole", "sphere_uniform",
                          "annulus_uniform", "random_signed"}
    assert np.isclose(suite["sphere_uniform"].total_mass, 1.0)
    assert np.isclose(suite["annulus_uniform"].total_mass, 1.0)
    assert np.isclose(suite["dipole"].total_mass, 0.0)
    assert len(suite["random_signed"]) == 50
    # deterministic across calls
    again = canonical_suite()
    assert np.array_equal(again["random_signed"].points,
                          suite["random_signed"].points)
    # all supports inside the unit ball
    for m in suite.values():
        assert np.all(np.linalg.norm(m.points, axis=1) < 1.0)
