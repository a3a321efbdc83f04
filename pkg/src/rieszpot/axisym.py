"""Axisymmetric reduction for rotation bodies at Newtonian order.

Surfaces of revolution collapse to coaxial rings: the ring-ring potential
has a closed form in the complete elliptic integral, and profile radii that
underflow double precision are handled in log space, where the ring limits
smoothly to a rod. Everything here is order alpha = 2, n = 3; thin bodies
at lower orders have zero capacity in the needle limit and are out of
numerical reach along this route.
"""

import math

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import ellipkm1

from .solvers import nnqp, simplex_qp

LOG_TINY = math.log(1e-300)


def ring_potential(u, r1, r2):
    """Mutual potential of unit-mass coaxial rings, axial separation u.

    (2/pi) K(m) / sqrt(u^2 + (r1+r2)^2) with complementary parameter
    m1 = (u^2 + (r1-r2)^2) / (u^2 + (r1+r2)^2). Degenerate radii reduce to
    the point-ring and point-point values exactly.
    """
    u = np.asarray(u, dtype=float)
    den = np.maximum(u**2 + (r1 + r2) ** 2, 1e-300)
    m1 = (u**2 + (r1 - r2) ** 2) / den
    return 2.0 / math.pi * ellipkm1(np.maximum(m1, 1e-300)) / np.sqrt(den)


def band_self_energy(log_rho, delta):
    """Self-energy of a uniform unit-mass band of axial width delta.

    The ring radius enters as log(rho) so that profiles far below the
    floating-point floor still produce finite energies (rod asymptotics).
    """
    log_rho = float(log_rho)
    delta = float(delta)
    if log_rho < math.log(delta) - 6.0 * math.log(10.0):
        # needle: classical rod self-energy, evaluated without exp(log_rho);
        # the dropped O(rho/delta) term is below 1e-6 relative here
        return 2.0 / delta * (math.log(2.0 * delta) - log_rho - 1.0)
    rho = math.exp(log_rho)
    gx, gw = leggauss(32)
    # the integrand transitions on the scale rho: resolve [0, 20 rho]
    # linearly and the rest in log-u, where the rod behavior is polynomial
    cut = min(20.0 * rho, 0.5 * delta)
    u1 = 0.5 * cut * (gx + 1.0)
    w1 = 0.5 * cut * gw
    span = math.log(delta) - math.log(cut)
    u2 = cut * np.exp(0.5 * span * (gx + 1.0))
    w2 = 0.5 * span * gw * u2
    u = np.concatenate([u1, u2])
    w = np.concatenate([w1, w2])
    smooth = ring_potential(u, rho, rho) - np.log(8.0 * rho / u) / (math.pi * rho)
    rem = float(w @ ((delta - u) * smooth))
    ana = delta**2 / (2.0 * math.pi * rho) * (math.log(8.0 * rho / delta) + 1.5)
    return 2.0 / delta**2 * (ana + rem)


def profile_stations(profile, x_lo, x_hi, n_ax, spacing="linear"):
    """Midpoint stations of a profile window: positions, log radii, arc widths.

    Geometric spacing keeps long probe windows (several decades of x)
    resolved near their inner edge where the swept mass concentrates.
    """
    if x_hi <= x_lo:
        raise ValueError("empty window")
    if spacing == "geometric":
        edges = np.geomspace(x_lo, x_hi, n_ax + 1)
    else:
        edges = np.linspace(x_lo, x_hi, n_ax + 1)
    x = 0.5 * (edges[:-1] + edges[1:])
    dx = np.diff(edges)
    lr = profile.log_rho(x)
    dr = profile.drho_dx(x)
    widths = dx * np.sqrt(1.0 + dr**2)
    return x, lr, widths


def ring_gram(x, log_rho, widths):
    """Gram matrix of unit-mass rings with banded self-terms."""
    x = np.asarray(x, dtype=float)
    rho = np.exp(np.maximum(np.asarray(log_rho, dtype=float), LOG_TINY))
    rho = np.where(np.asarray(log_rho) < LOG_TINY, 0.0, rho)
    N = len(x)
    G = np.empty((N, N))
    for i in range(N):
        G[i] = ring_potential(np.abs(x - x[i]), rho[i], rho)
        G[i, i] = band_self_energy(log_rho[i], widths[i])
    return 0.5 * (G + G.T)


def ring_equilibrium(x, log_rho, widths):
    """Robin problem on a ring family: (capacity, mass distribution)."""
    G = ring_gram(x, log_rho, widths)
    res = simplex_qp(G)
    if res.value <= 0:
        raise ArithmeticError("ring Gram produced a nonpositive energy")
    return 1.0 / res.value, res.w


def window_capacity(profile, x_lo, x_hi, n_ax=48):
    """Newtonian capacity of one profile window of a rotation body."""
    x, lr, widths = profile_stations(profile, x_lo, x_hi, n_ax)
    cap, _ = ring_equilibrium(x, lr, widths)
    return cap


def point_ring_rhs(x_src, rho_src, x, log_rho):
    """Potentials of an on-axis ring source at a ring family."""
    rho = np.exp(np.maximum(np.asarray(log_rho, dtype=float), LOG_TINY))
    rho = np.where(np.asarray(log_rho) < LOG_TINY, 0.0, rho)
    return ring_potential(np.abs(np.asarray(x) - x_src), rho_src, rho)


def probe_swept_mass(profile, x_src, x_lo, x_hi, n_ax=96, tol=1e-8,
                     spacing="geometric"):
    """Mass captured when sweeping an axis point onto a body window.

    Solves the projection QP on the ring family; the shortfall from 1 is the
    escape probability of the underlying process, i.e. the thinness deficit
    seen by the probe.
    """
    x, lr, widths = profile_stations(profile, x_lo, x_hi, n_ax, spacing=spacing)
    G = ring_gram(x, lr, widths)
    b = point_ring_rhs(x_src, 0.0, x, lr)
    res = nnqp(G, b, tol=tol)
    return float(res.w.sum()), res
