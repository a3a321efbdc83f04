"""Dense convex QP solvers on measure cones.

Three entry points:
  simplex_qp          min w'Kw over the probability simplex
  nnqp                min w'Kw - 2 b'w over the nonnegative orthant
  signed_simplex_qp   min u'K11u - 2 u'K12 v + v'K22v over simplex x simplex

All use cheap global phases (Frank-Wolfe / projected gradient with
Barzilai-Borwein steps) followed by an active-set polish that delivers the
KKT certificate the equilibrium-potential checks need.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve


class SolverFailure(RuntimeError):
    """Non-convergence within budget; carries the best iterate."""

    def __init__(self, message, iterate=None, kkt=None):
        super().__init__(message)
        self.iterate = iterate
        self.kkt = kkt


@dataclass
class QPResult:
    w: np.ndarray
    value: float
    kkt_residual: float
    iterations: int


def _chol_solve(K, B):
    try:
        c = cho_factor(K, lower=True, check_finite=False)
        return cho_solve(c, B, check_finite=False)
    except np.linalg.LinAlgError:
        ridge = 1e-12 * np.trace(K) / len(K)
        return np.linalg.solve(K + ridge * np.eye(len(K)), B)


def simplex_qp(K, start=None, fw_iters=400, polish_rounds=60, tol=1e-9):
    """Minimize w'Kw over the probability simplex.

    KKT residual is relative: spread of the potential K w over the support
    plus any dip below the support level off the support.
    """
    N = len(K)
    w = np.full(N, 1.0 / N) if start is None else np.asarray(start, dtype=float).copy()
    Kw = K @ w
    for it in range(fw_iters):
        s = int(np.argmin(Kw))
        d_Kd = K[s, s] - 2.0 * Kw[s] + w @ Kw
        gap = w @ Kw - Kw[s]
        if gap <= tol * max(abs(w @ Kw), 1e-300) or d_Kd <= 0:
            break
        step = min(1.0, max(0.0, gap / d_Kd))
        w *= 1.0 - step
        w[s] += step
        Kw = K @ w if it % 32 == 31 else (1.0 - step) * Kw + step * K[:, s]
    support = w > 1e-12 / N
    for _ in range(polish_rounds):
        idx = np.nonzero(support)[0]
        u = _chol_solve(K[np.ix_(idx, idx)], np.ones(len(idx)))
        total = u.sum()
        if total <= 0:
            break
        u /= total
        if u.min() < 0:
            support[idx[u < 0]] = False
            if support.sum() == 0:
                raise SolverFailure("active set collapsed", iterate=w)
            continue
        w = np.zeros(N)
        w[idx] = u
        # the support potential is level by construction; an off-support
        # atom sitting below that level must be brought into the support
        Kw = K @ w
        level = float(w @ Kw)
        off = ~support
        if off.any() and level - Kw[off].min() > tol * max(abs(level), 1e-300):
            support[int(np.argmin(np.where(off, Kw, np.inf)))] = True
            continue
        break
    Kw = K @ w
    value = float(w @ Kw)
    on = w > 0
    spread = float(np.ptp(Kw[on])) if on.any() else 0.0
    dip = float(max(0.0, (Kw[on].min() - Kw[~on].min()) if (~on).any() else 0.0))
    kkt = (spread + dip) / max(abs(value), 1e-300)
    return QPResult(w, value, kkt, fw_iters)


def nnqp(K, b, tol=1e-8, pg_iters=800, polish_rounds=60):
    """Minimize w'Kw - 2 b'w subject to w >= 0.

    Returns the minimizer with an absolute KKT residual measured on the
    gradient K w - b (scaled by max(1, |b|_inf)).
    """
    N = len(K)
    scale = max(1.0, float(np.abs(b).max()) if N else 1.0)
    w = np.maximum(b, 0.0) / max(np.diag(K).mean(), 1e-300)
    g = K @ w - b
    step = 1.0 / max(np.diag(K).max(), 1e-300)
    w_prev, g_prev = None, None
    best = (np.inf, w.copy())
    for it in range(pg_iters):
        if w_prev is not None:
            dw = w - w_prev
            dg = g - g_prev
            denom = float(dw @ dg)
            if denom > 0:
                step = float(dw @ dw) / denom
        w_prev, g_prev = w.copy(), g.copy()
        w = np.maximum(w - step * g, 0.0)
        g = K @ w - b
        kkt = _nn_kkt(w, g, scale)
        if kkt < best[0]:
            best = (kkt, w.copy())
        if kkt <= 10 * tol:
            break
    w = best[1]
    support = w > 0
    for _ in range(polish_rounds):
        idx = np.nonzero(support)[0]
        if len(idx) == 0:
            w = np.zeros(N)
            break
        u = _chol_solve(K[np.ix_(idx, idx)], b[idx])
        if u.min() >= 0:
            cand = np.zeros(N)
            cand[idx] = u
            g = K @ cand - b
            viol = g < -tol * scale
            viol[idx] = False
            if viol.any():
                support[np.argmin(np.where(support, np.inf, g))] = True
                w = cand
                continue
            w = cand
            break
        support[idx[u < 0]] = False
    g = K @ w - b
    kkt = _nn_kkt(w, g, scale)
    if kkt > 1e3 * tol:
        raise SolverFailure(f"nnqp stalled at KKT residual {kkt:.3e}", iterate=w, kkt=kkt)
    value = float(w @ (K @ w) - 2.0 * b @ w)
    return QPResult(w, value, kkt, pg_iters)


def _nn_kkt(w, g, scale):
    on = w > 0
    r = 0.0
    if on.any():
        r = float(np.abs(g[on]).max())
    if (~on).any():
        r = max(r, float(max(0.0, -(g[~on].min()))))
    return r / scale


def signed_simplex_qp(K11, K22, K12, fw_iters=600, polish_rounds=80, tol=1e-10):
    """Minimize the signed energy u'K11u - 2u'K12v + v'K22v, u and v on simplices."""
    N1, N2 = len(K11), len(K22)
    u = np.full(N1, 1.0 / N1)
    v = np.full(N2, 1.0 / N2)
    for it in range(fw_iters):
        gu = K11 @ u - K12 @ v
        gv = K22 @ v - K12.T @ u
        i = int(np.argmin(gu))
        j = int(np.argmin(gv))
        du = -u.copy()
        du[i] += 1.0
        dv = -v.copy()
        dv[j] += 1.0
        # exact line search on the joint quadratic
        lin = 2.0 * (gu @ du + gv @ dv)
        quad = (du @ K11 @ du - 2.0 * du @ K12 @ dv + dv @ K22 @ dv)
        if lin >= -tol * max(1.0, abs(u @ gu + v @ gv)) or quad <= 0:
            break
        step = min(1.0, -0.5 * lin / quad)
        u += step * du
        v += step * dv
    s1 = u > 1e-12 / N1
    s2 = v > 1e-12 / N2
    for _ in range(polish_rounds):
        i1 = np.nonzero(s1)[0]
        i2 = np.nonzero(s2)[0]
        m1, m2 = len(i1), len(i2)
        if m1 == 0 or m2 == 0:
            break
        H = np.zeros((m1 + m2 + 2, m1 + m2 + 2))
        H[:m1, :m1] = 2.0 * K11[np.ix_(i1, i1)]
        H[:m1, m1:m1 + m2] = -2.0 * K12[np.ix_(i1, i2)]
        H[m1:m1 + m2, :m1] = H[:m1, m1:m1 + m2].T
        H[m1:m1 + m2, m1:m1 + m2] = 2.0 * K22[np.ix_(i2, i2)]
        H[:m1, m1 + m2] = 1.0
        H[m1 + m2, :m1] = 1.0
        H[m1:m1 + m2, m1 + m2 + 1] = 1.0
        H[m1 + m2 + 1, m1:m1 + m2] = 1.0
        rhs = np.zeros(m1 + m2 + 2)
        rhs[m1 + m2] = 1.0
        rhs[m1 + m2 + 1] = 1.0
        try:
            sol = np.linalg.solve(H, rhs)
        except np.linalg.LinAlgError:
            sol, *_ = np.linalg.lstsq(H, rhs, rcond=None)
        uu, vv = sol[:m1], sol[m1:m1 + m2]
        if uu.min() >= -1e-14 and vv.min() >= -1e-14:
            u = np.zeros(N1)
            v = np.zeros(N2)
            u[i1] = np.maximum(uu, 0.0)
            v[i2] = np.maximum(vv, 0.0)
            u /= u.sum()
            v /= v.sum()
            break
        s1[i1[uu < 0]] = False
        s2[i2[vv < 0]] = False
    value = float(u @ K11 @ u - 2.0 * u @ K12 @ v + v @ K22 @ v)
    gu = K11 @ u - K12 @ v
    gv = K22 @ v - K12.T @ u
    kkt = 0.0
    for g, z in ((gu, u), (gv, v)):
        on = z > 0
        spread = float(np.ptp(g[on])) if on.any() else 0.0
        dip = float(max(0.0, g[on].min() - g[~on].min())) if (~on).any() and on.any() else 0.0
        kkt = max(kkt, (spread + dip) / max(abs(value), 1e-300))
    return QPResult(np.concatenate([u, v]), value, kkt, fw_iters), u, v
