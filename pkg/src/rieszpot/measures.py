"""Signed atomic measures: Hahn-Jordan structure, restriction, mass bookkeeping.

A measure is a finite list of weighted atoms, each carrying its own
regularization radius h (the shell-smoothing scale used by every quadrature
in the package). Continuous densities enter only through quadrature weights
baked into atom weights.
"""

from dataclasses import dataclass
import csv

import numpy as np
from scipy.spatial import cKDTree


@dataclass(frozen=True)
class DiscreteMeasure:
    """Atoms (points, weights, cell_radii) in R^n; weights may be signed."""

    points: np.ndarray
    weights: np.ndarray
    cell_radii: np.ndarray
    n: int = 3

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        h = np.asarray(self.cell_radii, dtype=float).reshape(-1)
        if len(P) == 0:
            P = P.reshape(0, self.n)
        if P.shape[1] != self.n:
            raise ValueError(f"points have dimension {P.shape[1]}, expected n={self.n}")
        if not (len(P) == len(w) == len(h)):
            raise ValueError("points, weights, cell_radii must have equal length")
        if len(w):
            if not np.all(np.isfinite(w)) or np.any(w == 0.0):
                raise ValueError("weights must be finite and nonzero")
            if not np.all(h > 0):
                raise ValueError("cell radii must be positive")
            if len(P) > 1 and cKDTree(P).query(P, k=2)[0][:, 1].min() <= 0:
                raise ValueError("atoms must sit at pairwise-distinct points")
        object.__setattr__(self, "points", P)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "cell_radii", h)

    def __len__(self):
        return len(self.weights)

    @property
    def total_mass(self):
        return float(self.weights.sum()) if len(self) else 0.0

    def scaled(self, factor):
        if factor == 0:
            return zero_measure(self.n)
        return DiscreteMeasure(self.points, self.weights * factor, self.cell_radii, self.n)

    def __add__(self, other):
        return combine(self, other)

    def __sub__(self, other):
        return combine(self, other.scaled(-1.0))

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            wr = csv.writer(f)
            wr.writerow([f"x{i+1}" for i in range(self.n)] + ["weight", "cell_radius"])
            for p, w, h in zip(self.points, self.weights, self.cell_radii):
                wr.writerow([repr(float(v)) for v in p]
                            + [repr(float(w)), repr(float(h))])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        head = rows[0]
        if head[-2:] != ["weight", "cell_radius"]:
            raise ValueError("measure CSV must end with weight, cell_radius columns")
        d = len(head) - 2
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
        if data.size == 0:
            return zero_measure(d)
        return cls(data[:, :d], data[:, d], data[:, d + 1], n=d)

    def to_dict(self):
        return {"points": self.points.tolist(), "weights": self.weights.tolist(),
                "cell_radii": self.cell_radii.tolist(), "n": self.n}

    @classmethod
    def from_dict(cls, d):
        n = int(d.get("n", 3))
        pts = np.asarray(d["points"], dtype=float).reshape(-1, n) if d["points"] else np.zeros((0, n))
        return cls(pts, np.asarray(d["weights"], dtype=float),
                   np.asarray(d["cell_radii"], dtype=float), n=n)


@dataclass(frozen=True)
class MassReport:
    positive_mass: float
    negative_mass: float
    total_variation: float


def zero_measure(n=3):
    return DiscreteMeasure(np.zeros((0, n)), np.zeros(0), np.zeros(0), n=n)


def measure_from_cloud(cloud, weights=None):
    """Measure on a mesh; default weights are the quadrature cell weights."""
    w = cloud.cell_weights if weights is None else np.asarray(weights, dtype=float)
    keep = w != 0.0
    return DiscreteMeasure(cloud.points[keep], w[keep], cloud.cell_radii[keep],
                           n=cloud.points.shape[1])


def jordan_decompose(mu):
    """Split into (positive part, negated negative part) with disjoint supports."""
    pos = mu.weights > 0
    neg = ~pos
    plus = DiscreteMeasure(mu.points[pos], mu.weights[pos], mu.cell_radii[pos], mu.n) \
        if pos.any() else zero_measure(mu.n)
    minus = DiscreteMeasure(mu.points[neg], -mu.weights[neg], mu.cell_radii[neg], mu.n) \
        if neg.any() else zero_measure(mu.n)
    return plus, minus


def restrict(mu, region):
    """Keep exactly the atoms whose points satisfy the predicate."""
    if len(mu) == 0:
        return mu
    keep = np.fromiter((bool(region(p)) for p in mu.points), dtype=bool, count=len(mu))
    if not keep.any():
        return zero_measure(mu.n)
    return DiscreteMeasure(mu.points[keep], mu.weights[keep], mu.cell_radii[keep], mu.n)


def mass_report(mu):
    w = mu.weights
    pos = float(w[w > 0].sum()) if len(w) else 0.0
    neg = float(-w[w < 0].sum()) if len(w) else 0.0
    return MassReport(pos, neg, pos + neg)


def combine(mu, nu):
    """Union of atom lists; coincident atoms (within 1e-12) merge, weights add."""
    if len(mu) == 0:
        return nu
    if len(nu) == 0:
        return mu
    if mu.n != nu.n:
        raise ValueError("dimension mismatch")
    P = np.vstack([mu.points, nu.points])
    w = np.concatenate([mu.weights, nu.weights])
    h = np.concatenate([mu.cell_radii, nu.cell_radii])
    return coalesce(P, w, h, mu.n)


def canonical_suite():
    """Five benchmark measures inside the unit ball, keyed by name.

    atom, dipole, sphere_uniform, annulus_uniform, random_signed -- the set
    every identity battery and the CLI verify run share. Deterministic: the
    random measure is seed-fixed and thinned to a 0.03 minimum spacing.
    """
    from .geometry import discretize_ball, discretize_sphere

    atom = DiscreteMeasure([[0.0, 0.0, 0.0]], [1.0], [0.02])
    dipole = DiscreteMeasure([[0.2, 0.0, 0.0], [-0.2, 0.0, 0.0]],
                             [1.0, -1.0], [0.015, 0.015])
    sph = measure_from_cloud(discretize_sphere((0.0, 0.0, 0.0), 0.6, 700))
    sph = sph.scaled(1.0 / sph.total_mass)
    ball = measure_from_cloud(discretize_ball((0.0, 0.0, 0.0), 0.7, 1200))
    ann = restrict(ball, lambda p: np.linalg.norm(p) >= 0.5)
    ann = ann.scaled(1.0 / ann.total_mass)

    rng = np.random.default_rng(823117)
    pts = []
    while len(pts) < 50:
        p = rng.uniform(-0.68, 0.68, size=3)
        if np.linalg.norm(p) > 0.68:
            continue
        if pts and np.linalg.norm(np.asarray(pts) - p, axis=1).min() < 0.03:
            continue
        pts.append(p)
    w = np.where(rng.random(50) < 0.5, -1.0, 1.0) * (0.5 + rng.random(50))
    rnd = DiscreteMeasure(np.asarray(pts), w, np.full(50, 0.01))
    return {"atom": atom, "dipole": dipole, "sphere_uniform": sph,
            "annulus_uniform": ann, "random_signed": rnd}


def coalesce(points, weights, radii, n=3, tol=1e-12):
    """Merge atoms closer than tol; weights add, radius takes the minimum.

    Atoms whose merged weight vanishes are dropped.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    w = np.asarray(weights, dtype=float).copy()
    h = np.asarray(radii, dtype=float).copy()
    if len(P) == 0:
        return zero_measure(n)
    tree = cKDTree(P)
    pairs = tree.query_pairs(tol, output_type="ndarray")
    parent = np.arange(len(P))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in pairs:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri
    roots = np.array([find(i) for i in range(len(P))])
    out_p, out_w, out_h = [], [], []
    for r in np.unique(roots):
        grp = roots == r
        tw = w[grp].sum()
        if tw != 0.0:
            out_p.append(P[grp][0])
            out_w.append(tw)
            out_h.append(h[grp].min())
    if not out_w:
        return zero_measure(n)
    return DiscreteMeasure(np.array(out_p), np.array(out_w), np.array(out_h), n=n)
