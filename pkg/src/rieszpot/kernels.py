"""Riesz kernels, regularized Gram matrices, potentials, Green kernel.

Conventions used throughout the package:
  kernel value  |x-y|^(order-n), bare (no dimensional constant);
  atoms smoothed as uniform spherical shells of radius h, so the kernel
  matrix diagonal is s(n, order) * h^(order-n) with s the shell self-energy;
  the half-order kernel composes to the full one up to the explicit
  constant composition_constant(n, alpha).
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import gamma, roots_jacobi


@dataclass(frozen=True)
class KernelSpec:
    """Kernel |x-y|^(order-n) with order = alpha (full) or alpha/2 (half)."""

    n: int
    alpha: float
    variant: str = "full"

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("dimension n must be >= 3")
        if not (0.0 < self.alpha <= 2.0):
            raise ValueError("alpha must lie in (0, 2]")
        if self.variant not in ("full", "half"):
            raise ValueError("variant must be 'full' or 'half'")

    @property
    def order(self):
        return self.alpha if self.variant == "full" else 0.5 * self.alpha

    def half(self):
        return KernelSpec(self.n, self.alpha, "half")

    def full(self):
        return KernelSpec(self.n, self.alpha, "full")


def kernel_eval(spec, x, y):
    """Pointwise kernel value; coincident points return the infinity marker."""
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.size != spec.n or y.size != spec.n:
        raise ValueError("point dimension does not match the kernel dimension")
    d = float(np.linalg.norm(x - y))
    if d == 0.0:
        return math.inf
    return d ** (spec.order - spec.n)


def self_energy_constant(n, beta):
    """Self-energy s(n, beta) of the uniform unit-sphere probability measure.

    Computed by polar-angle quadrature (Gauss-Jacobi absorbs the u^(beta-2)
    endpoint factor, so the value is exact to machine precision for smooth
    remainders). Diverges for beta <= 1 (returns +inf) and for beta >= n
    (rejected: the kernel is no longer locally integrable on the sphere).
    """
    if beta >= n:
        raise ValueError("self-energy diverges for order >= n")
    if beta <= 0:
        raise ValueError("kernel order must be positive")
    if beta <= 1.0:
        return math.inf
    b = beta - 2.0
    x, w = roots_jacobi(64, 0.0, b)
    u = 0.5 * (x + 1.0)
    g = 2.0 ** (beta - 1.0) * (1.0 - u * u) ** ((n - 3) / 2.0)
    integral = (w @ g) / 2.0 ** (b + 1.0)
    W_n = math.sqrt(math.pi) * gamma((n - 1) / 2.0) / gamma(n / 2.0)
    return float(integral / W_n)


def composition_constant(n, alpha):
    """Constant B with (half-order kernel) o (half-order kernel) = B * (full kernel).

    B(3, 2) = pi^3. Enters every weak-energy quadrature: the L^2 norm of the
    half-order potential equals B times the standard energy.
    """
    a = 0.5 * alpha
    return float(math.pi ** (n / 2.0) * gamma(a / 2.0) ** 2 * gamma((n - 2 * a) / 2.0)
                 / (gamma((n - a) / 2.0) ** 2 * gamma(a)))


def shell_potential(r, h, order, n=3):
    """Potential of the uniform unit-mass shell of radius h at distance r (n=3).

    Closed form: ((r+h)^(b-1) - |r-h|^(b-1)) / (2 r h (b-1)); log form at b=1;
    value h^(b-3) at the center. Finite and continuous across r = h for b > 1,
    integrable spike for b in (1/2, 1].
    """
    if n != 3:
        raise NotImplementedError("shell potential closed form is for n=3")
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    small = r < 1e-12 * h
    rs = np.where(small, h, r)
    if abs(order - 1.0) < 1e-12:
        v = (np.log(rs + h) - np.log(np.abs(rs - h) + 1e-300)) / (2.0 * rs * h)
    else:
        v = ((rs + h) ** (order - 1.0) - np.abs(rs - h) ** (order - 1.0)) \
            / (2.0 * rs * h * (order - 1.0))
    v = np.where(small, h ** (order - 3.0), v)
    return float(v[0]) if scalar else v


def shell_mutual_energy(d, h1, h2, order):
    """Mutual energy of two uniform unit shells at center distance d (n=3).

    Exact for disjoint shells (d >= h1 + h2). At order 2 this collapses to
    1/d by the mean value property.
    """
    if d < h1 + h2:
        raise ValueError("shells overlap; closed form requires d >= h1 + h2")
    a = order

    def F(t):
        return ((t + h1) ** a - (t - h1) ** a) / (2.0 * h1 * a * (a - 1.0))

    return float((F(d + h2) - F(d - h2)) / (2.0 * d * h2))


@dataclass(frozen=True)
class KernelMatrix:
    entries: np.ndarray
    row_points: object
    spec: KernelSpec

    def spd_spot_check(self, size=20, trials=8, seed=0):
        """Smallest eigenvalue over random principal submatrices."""
        rng = np.random.default_rng(seed)
        N = len(self.entries)
        worst = math.inf
        for _ in range(trials):
            idx = rng.choice(N, size=min(size, N), replace=False)
            ev = np.linalg.eigvalsh(self.entries[np.ix_(idx, idx)])
            worst = min(worst, float(ev[0]))
        return worst


def gram(points, radii, spec):
    """Regularized kernel Gram matrix on raw arrays."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    h = np.asarray(radii, dtype=float).reshape(-1)
    D = cdist(P, P)
    off = ~np.eye(len(P), dtype=bool)
    if len(P) > 1 and D[off].min() == 0.0:
        raise ValueError("duplicate points in kernel matrix assembly")
    expo = spec.order - spec.n
    K = np.zeros_like(D)
    K[off] = D[off] ** expo
    np.fill_diagonal(K, self_energy_constant(spec.n, spec.order) * h ** expo)
    return 0.5 * (K + K.T)


def kernel_matrix(cloud, spec):
    return KernelMatrix(gram(cloud.points, cloud.cell_radii, spec), cloud, spec)


def cross_gram(points_a, radii_a, points_b, radii_b, spec):
    """Kernel values between two atom sets; coincident pairs regularized.

    A zero-distance pair gets s(n, order) * (h_a h_b)^((order-n)/2), which
    reduces to the Gram diagonal when the radii agree.
    """
    A = np.atleast_2d(np.asarray(points_a, dtype=float))
    B = np.atleast_2d(np.asarray(points_b, dtype=float))
    ha = np.asarray(radii_a, dtype=float).reshape(-1)
    hb = np.asarray(radii_b, dtype=float).reshape(-1)
    D = cdist(A, B)
    expo = spec.order - spec.n
    hit = D == 0.0
    D[hit] = 1.0
    K = D**expo
    if hit.any():
        s = self_energy_constant(spec.n, spec.order)
        ii, jj = np.nonzero(hit)
        K[ii, jj] = s * (ha[ii] * hb[jj]) ** (0.5 * expo)
    return K


def potential_field(mu, X, spec, chunk=4_000_000):
    """Potential of a measure on an array of field points, chunked.

    Field points that coincide with an atom use the regularized self-term.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.zeros(len(X))
    if len(mu) == 0:
        return out
    expo = spec.order - spec.n
    s = self_energy_constant(spec.n, spec.order)
    P, w, h = mu.points, mu.weights, mu.cell_radii
    rows = max(1, chunk // max(len(P), 1))
    for lo in range(0, len(X), rows):
        hi = min(lo + rows, len(X))
        D = cdist(X[lo:hi], P)
        hit = D == 0.0
        D[hit] = 1.0
        V = D**expo
        if hit.any():
            ii, jj = np.nonzero(hit)
            V[ii, jj] = s * h[jj] ** expo
        out[lo:hi] = V @ w
    return out


def potential(mu, x, spec):
    """Potential at a single point (regularized at atom locations)."""
    return float(potential_field(mu, np.asarray(x, dtype=float).reshape(1, -1), spec)[0])


def sweep_matrix(sources, D, spec, target):
    """Analytic balayage weights of point Diracs onto a target mesh.

    Row j holds the cell masses of the swept Dirac at sources[j]. Lazy import
    keeps the analytic densities in the balayage module.
    """
    from . import balayage as _bal
    return _bal.dirac_sweep_weights(sources, D, spec, target)


def green_matrix(points_a, radii_a, D, spec, target, points_b=None, radii_b=None):
    """Green-kernel Gram block: full kernel minus the swept-Dirac potential.

    With B = A this is the symmetric Green Gram; the diagonal combines the
    regularized kernel self-term with the swept potential at the source.
    """
    if spec.variant != "full":
        raise ValueError("Green kernel is defined for the full-order kernel")
    A = np.atleast_2d(np.asarray(points_a, dtype=float))
    same = points_b is None
    B = A if same else np.atleast_2d(np.asarray(points_b, dtype=float))
    hb = radii_a if same else radii_b
    if not np.all(D.contains(A)) or not np.all(D.contains(B)):
        raise ValueError("Green kernel arguments must lie inside the domain")
    W = sweep_matrix(B, D, spec, target)
    K_at = cross_gram(A, radii_a, target.points, target.cell_radii, spec)
    K_ab = cross_gram(A, radii_a, B, hb, spec)
    G = K_ab - K_at @ W.T
    if same:
        G = 0.5 * (G + G.T)
    return G


def green_kernel(D, x, y, spec, target=None):
    """Green kernel value g(x, y) for a ball domain, via the swept Dirac."""
    from . import balayage as _bal
    if D.variant != "Ball":
        raise ValueError("Green kernel implemented for ball domains")
    x = np.asarray(x, dtype=float).reshape(1, -1)
    y = np.asarray(y, dtype=float).reshape(1, -1)
    if not (D.contains(x)[0] and D.contains(y)[0]):
        raise ValueError("Green kernel arguments must lie inside the domain")
    if np.array_equal(x, y):
        raise ValueError("Green kernel needs x != y (see green Gram for diagonals)")
    if target is None:
        target = _bal.default_sweep_target(D, spec)
    W = _bal.dirac_sweep_weights(y, D, spec, target)
    kxy = float(np.linalg.norm(x - y) ** (spec.order - spec.n))
    swept = (cross_gram(x, np.array([1.0]), target.points, target.cell_radii, spec) @ W[0]).item()
    return kxy - swept
