"""Extra-stress evolution in Lagrangian form.

Stress fields are symmetric and stored as ``(s11, s12, s22)`` on the first
axis; velocity gradients are full 2x2 tensors ``G[i, j] = du_i/dX_j``.
Trajectories carry a leading time axis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scaling import DimensionlessParams


class ConstitutiveError(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# symmetric tensor helpers

def sym_to_full(s):
    s = np.asarray(s, dtype=float)
    return np.stack([np.stack([s[0], s[1]]), np.stack([s[1], s[2]])])


def full_to_sym(t):
    t = np.asarray(t, dtype=float)
    return np.stack([t[0, 0], t[0, 1], t[1, 1]])


def sym_norm(s):
    """Pointwise Frobenius norm of a symmetric field."""
    s = np.asarray(s)
    return np.sqrt(s[0] ** 2 + 2.0 * s[1] ** 2 + s[2] ** 2)


def sym_matmul(p, x):
    """Symmetric part of p @ x for symmetric p, x (both stored as 3-vectors)."""
    a = p[0] * x[0] + p[1] * x[1]
    b = 0.5 * (p[0] * x[1] + p[1] * x[2] + x[0] * p[1] + x[1] * p[2])
    c = p[1] * x[1] + p[2] * x[2]
    return np.stack([a, b, c])


def rate_of_strain(grad_u):
    """D[u] as a symmetric field."""
    g = np.asarray(grad_u)
    return np.stack([g[0, 0], 0.5 * (g[0, 1] + g[1, 0]), g[1, 1]])


_BASIS = np.eye(3)


def _linear_map_matrix(fn, like):
    """Matrix M[..., i, k] of a linear map on symmetric 3-vectors, evaluated on the basis."""
    cols = []
    for k in range(3):
        e = np.broadcast_to(_BASIS[k].reshape((3,) + (1,) * (like.ndim - 1)), like.shape)
        cols.append(fn(e))
    return np.moveaxis(np.stack(cols, axis=1), (0, 1), (-2, -1))


# ---------------------------------------------------------------------------
# Johnson-Segalman nonlinearity

def g_a_tensor(grad_u, sigma_full, a):
    """g_a on full 2x2 tensors; returns a full tensor."""
    G = np.asarray(grad_u, dtype=float)
    S = np.asarray(sigma_full, dtype=float)
    GtS = np.einsum("ki...,kj...->ij...", G, S)
    SG = np.einsum("ik...,kj...->ij...", S, G)
    SGt = np.einsum("ik...,jk...->ij...", S, G)
    GS = np.einsum("ik...,kj...->ij...", G, S)
    return 0.5 * (a - 1.0) * (GtS + SG) + 0.5 * (a + 1.0) * (SGt + GS)


def g_a(grad_u, sigma, a):
    """Interpolated Johnson-Segalman term for a symmetric stress field.

    Both bracketed groups are transposes of each other, so only the upper
    triangle is formed and the result is symmetric by construction.
    """
    G = np.asarray(grad_u, dtype=float)
    s11, s12, s22 = np.asarray(sigma, dtype=float)
    g11, g12, g21, g22 = G[0, 0], G[0, 1], G[1, 0], G[1, 1]
    # (G^T S + S G) and (S G^T + G S), upper triangle only
    A11 = 2.0 * (g11 * s11 + g21 * s12)
    A12 = (g11 * s12 + g21 * s22) + (s11 * g12 + s12 * g22)
    A22 = 2.0 * (g12 * s12 + g22 * s22)
    B11 = 2.0 * (s11 * g11 + s12 * g12)
    B12 = (s11 * g21 + s12 * g22) + (g11 * s12 + g12 * s22)
    B22 = 2.0 * (s12 * g21 + s22 * g22)
    cm, cp = 0.5 * (a - 1.0), 0.5 * (a + 1.0)
    return np.stack([cm * A11 + cp * B11, cm * A12 + cp * B12, cm * A22 + cp * B22])


def g_a_matrix(grad_u, a):
    """Per-node 3x3 matrix of sigma -> g_a(grad_u, sigma); shape (..., 3, 3)."""
    G = np.asarray(grad_u, dtype=float)
    like = np.zeros((3,) + G.shape[2:])
    return _linear_map_matrix(lambda e: g_a(G, e, a), like)


# ---------------------------------------------------------------------------
# laws

class ConstitutiveLaw:
    """Base law: Johnson-Segalman derivative with no extra nonlinearity."""

    name = "johnson_segalman"
    a: float

    def nonlinear(self, sigma, We):
        """Extra term N(sigma) added to the left-hand side of the stress equation."""
        return np.zeros_like(np.asarray(sigma, dtype=float))

    def picard_terms(self, sigma_lag, sigma_lift, We):
        """Lagged linearisation of N(lift + s) - N(lift).

        Returns ``(matrix, source)``: the matrix (shape (..., 3, 3) or None)
        multiplies the unknown implicitly; the source moves to the right-hand side.
        """
        return None, None


@dataclass(frozen=True)
class JohnsonSegalman(ConstitutiveLaw):
    a: float = 1.0
    name = "johnson_segalman"

    def __post_init__(self):
        if not -1.0 <= self.a <= 1.0:
            raise ValueError("a must lie in [-1, 1]")


@dataclass(frozen=True)
class Giesekus(ConstitutiveLaw):
    a: float = 1.0
    c_giesekus: float = 0.1
    name = "giesekus"

    def __post_init__(self):
        if not -1.0 <= self.a <= 1.0:
            raise ValueError("a must lie in [-1, 1]")
        if not self.c_giesekus > 0:
            raise ValueError("c_giesekus must be > 0")

    def nonlinear(self, sigma, We):
        s = np.asarray(sigma, dtype=float)
        return self.c_giesekus * sym_matmul(s, s)

    def picard_terms(self, sigma_lag, sigma_lift, We):
        # c[(l + s)^2 - l^2] = c[l s + s l + s s], with one factor s lagged
        p = 2.0 * np.asarray(sigma_lift) + np.asarray(sigma_lag)
        mat = _linear_map_matrix(lambda e: self.c_giesekus * sym_matmul(p, e), p)
        return mat, None


@dataclass(frozen=True)
class PTTExponential(ConstitutiveLaw):
    a: float = 1.0
    eps_ptt: float = 0.1
    we_in_exponent: bool = False
    name = "ptt_exponential"

    def __post_init__(self):
        if not -1.0 <= self.a <= 1.0:
            raise ValueError("a must lie in [-1, 1]")
        if not self.eps_ptt > 0:
            raise ValueError("eps_ptt must be > 0")

    def _k(self, We):
        return self.eps_ptt * (We if self.we_in_exponent else 1.0)

    def y_minus_one(self, trace, We):
        return np.expm1(self._k(We) * np.asarray(trace))

    def nonlinear(self, sigma, We):
        s = np.asarray(sigma, dtype=float)
        return self.y_minus_one(s[0] + s[2], We) * s

    def picard_terms(self, sigma_lag, sigma_lift, We):
        lift = np.asarray(sigma_lift, dtype=float)
        tot = lift + np.asarray(sigma_lag, dtype=float)
        ym1 = self.y_minus_one(tot[0] + tot[2], We)
        mat = ym1[..., None, None] * np.eye(3)
        src = -(ym1 - self.y_minus_one(lift[0] + lift[2], We)) * lift
        return mat, src


@dataclass(frozen=True)
class PTTLinear(PTTExponential):
    name = "ptt_linear"

    def y_minus_one(self, trace, We):
        return self._k(We) * np.asarray(trace)


def make_law(kind: str, a: float = 1.0, c_giesekus: float = 0.1, eps_ptt: float = 0.1,
             we_in_exponent: bool = False) -> ConstitutiveLaw:
    kind = kind.lower()
    if kind in ("johnson_segalman", "js", "oldroyd", "oldroyd_b"):
        return JohnsonSegalman(a)
    if kind == "giesekus":
        return Giesekus(a, c_giesekus)
    if kind in ("ptt_exponential", "ptt_exp", "ptt"):
        return PTTExponential(a, eps_ptt, we_in_exponent)
    if kind == "ptt_linear":
        return PTTLinear(a, eps_ptt, we_in_exponent)
    raise ValueError(f"unknown constitutive law {kind!r}")


# ---------------------------------------------------------------------------
# time integration

def _check_finite(name, x):
    if x is not None and not np.all(np.isfinite(x)):
        raise ConstitutiveError(f"non-finite values in {name}")


def _solve_nodes(A, rhs, n):
    """Batched 3x3 solves; A (..., 3, 3), rhs (3, ...)."""
    b = np.moveaxis(rhs, 0, -1)
    det = np.linalg.det(A)
    scale = np.max(np.abs(A), axis=(-2, -1)) ** 3
    bad = np.abs(det) <= 1e-13 * np.maximum(scale, 1e-300)
    if np.any(bad):
        idx = tuple(int(i[0]) for i in np.nonzero(bad))
        cond = np.linalg.cond(A[idx])
        raise ConstitutiveError(
            f"singular stress update at node {idx}, time level {n} (cond ~ {cond:.3e})")
    x = np.linalg.solve(A, b[..., None])[..., 0]
    return np.moveaxis(x, -1, 0)


def integrate_stress(sigma_init, grad_u, dt, params: DimensionlessParams, law: ConstitutiveLaw,
                     m=None, grad_u1=None, sigma1=None, sigma_lag=None, couple_lift_nonlinear=True):
    """Backward-Euler integration of the linearised stress equation.

    Solves, for n = 1..nt,

        s + We (ds/dt - g_a(G + G1, s) - g_a(G, sigma1)) + L s = 2 eps D[G] + m + src

    where G is the prescribed velocity gradient trajectory, (G1, sigma1) an
    optional lift and (L, src) the law's lagged nonlinearity built from
    ``sigma_lag``. Everything linear in the unknown is implicit.
    """
    G = np.asarray(grad_u, dtype=float)
    nt = G.shape[0] - 1
    We, eps, a = params.We, params.eps, params.a
    grid = G.shape[3:]
    zero_sym = np.zeros((nt + 1, 3) + grid)
    m = zero_sym if m is None else np.asarray(m, dtype=float)
    sigma1 = zero_sym if sigma1 is None else np.asarray(sigma1, dtype=float)
    sigma_lag = zero_sym if sigma_lag is None else np.asarray(sigma_lag, dtype=float)
    for name, x in (("velocity gradient", G), ("source m", m), ("lift velocity gradient", grad_u1),
                    ("lift stress", sigma1), ("lagged stress", sigma_lag)):
        _check_finite(name, x)
    Gt = G if grad_u1 is None else G + np.asarray(grad_u1, dtype=float)
    out = np.empty((nt + 1, 3) + grid)
    eye = np.eye(3)
    start = 0 if We == 0 else 1
    if We != 0:
        out[0] = np.asarray(sigma_init, dtype=float)
    for n in range(start, nt + 1):
        A = np.broadcast_to(eye, grid + (3, 3)).copy()
        rhs = 2.0 * eps * rate_of_strain(G[n]) + m[n]
        if We != 0:
            A *= 1.0 + We / dt
            A -= We * g_a_matrix(Gt[n], a)
            rhs = rhs + (We / dt) * out[n - 1] + We * g_a(G[n], sigma1[n], a)
        mat, src = law.picard_terms(sigma_lag[n], sigma1[n], We)
        if mat is not None:
            A += mat
        if src is not None:
            rhs = rhs + src
        out[n] = _solve_nodes(A, rhs, n)
    return out


def picard_sigma_step(sigma_prev, grad_un, grad_u1, sigma1, m, dt, params, law):
    """One Picard stress update with zero initial stress.

    ``sigma_prev`` is the previous iterate (used only by laws with lagged
    nonlinear terms); ``grad_un`` is the gradient of the previous velocity
    iterate; ``grad_u1`` and ``sigma1`` the lift (``None`` means zero).
    """
    G = np.asarray(grad_un, dtype=float)
    init = np.zeros((3,) + G.shape[3:])
    return integrate_stress(init, G, dt, params, law, m=m, grad_u1=grad_u1, sigma1=sigma1,
                            sigma_lag=sigma_prev)


def lift_sigma1(sigma0, m1, We, dt, nt=None):
    """Solve s + We ds/dt = m1, s(0) = sigma0 with the exact exponential integrator.

    The convolution with m1 uses the trapezoidal rule on the time grid.
    ``m1 = None`` means a zero source, in which case ``nt`` is required.
    """
    sigma0 = np.asarray(sigma0, dtype=float)
    if m1 is None:
        if nt is None:
            raise ValueError("nt is required when m1 is None")
        m1 = np.zeros((nt + 1,) + sigma0.shape)
    m1 = np.asarray(m1, dtype=float)
    nt = m1.shape[0] - 1
    if We == 0:
        return m1.copy()
    out = np.empty_like(m1)
    out[0] = sigma0
    decay = np.exp(-dt / We)
    for n in range(1, nt + 1):
        out[n] = decay * out[n - 1] + dt / (2.0 * We) * (decay * m1[n - 1] + m1[n])
    return out


def full_lagrangian_stress_residual(sigma, grad_u, xibar, dt, params: DimensionlessParams,
                                    law: ConstitutiveLaw, m=None):
    """Residual of the stress equation with xi-contracted gradients at levels 1..nt.

    Written directly in index form (independent of :func:`g_a`); the time
    derivative is a backward difference.
    """
    S = sym_to_full(np.moveaxis(np.asarray(sigma, dtype=float), 1, 0))  # (2,2,nt+1,...)
    S = np.moveaxis(S, 2, 0)                                            # (nt+1,2,2,...)
    Gu = np.asarray(grad_u, dtype=float)
    Xb = np.asarray(xibar, dtype=float)
    We, eps, a = params.We, params.eps, params.a
    res = []
    for n in range(1, S.shape[0]):
        s, g, x = S[n], Gu[n], Xb[n]
        ta = (np.einsum("li...,kl...,kj...->ij...", x, g, s)
              + np.einsum("ik...,kl...,lj...->ij...", s, g, x))
        tb = (np.einsum("ik...,lk...,jl...->ij...", s, x, g)
              + np.einsum("il...,lk...,kj...->ij...", g, x, s))
        visc = np.einsum("ik...,kj...->ij...", g, x) + np.einsum("jk...,ki...->ij...", g, x)
        dsdt = (S[n] - S[n - 1]) / dt
        r = s + We * (dsdt - 0.5 * (a - 1.0) * ta - 0.5 * (a + 1.0) * tb) - eps * visc
        r = full_to_sym(r) + law.nonlinear(full_to_sym(s), We)
        if m is not None:
            r = r - m[n]
        res.append(r)
    return np.stack(res)


def stress_sup(sigma_traj):
    """sup over time and nodes of the pointwise stress norm."""
    return float(np.max(sym_norm(np.moveaxis(np.asarray(sigma_traj), 1, 0))))


def giesekus_bound_condition(c_giesekus, S, T0, We):
    """2 c S T0 / We and whether it is below one."""
    if We == 0:
        return np.inf, False
    v = 2.0 * c_giesekus * S * T0 / We
    return v, bool(v < 1.0)


def ptt_bound_condition(eps_ptt, S, T0, C=1.0):
    v = C * np.expm1(eps_ptt * S) * T0
    return v, bool(v < 1.0)
