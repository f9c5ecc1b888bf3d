"""Fixed-point solution of the full Lagrangian free-surface system.

The full operator is split as ``P = P(0) + P1 + E``: ``P(0)`` holds gravity
and the initial curvature, ``P1`` is the viscoelastic Stokes operator about
the reference domain and ``E`` collects every term carrying a deformation
``xi`` or a higher power of the surface unknown. ``P1`` is inverted by
alternating stress updates and Stokes solves; the outer loop applies
``x <- P2^-1[u1, sigma1](-E(u1 + x, ...))`` until it stops moving.

Time grids run over levels 0..nt; residuals are evaluated on levels 1..nt.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import constitutive as cst
from .constitutive import ConstitutiveLaw, JohnsonSegalman
from .geometry import (GeometryState, Mesh, geometry_trajectory, phi_rate, surface_normal,
                       surface_tangent, tangential_derivative, unit_slope_vector)
from .scaling import DimensionlessParams
from .stokes import div_sym, get_operator, sym_dot_normal, viscous_traction


class NonConvergenceError(RuntimeError):
    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


class CompatibilityError(ValueError):
    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


# ---------------------------------------------------------------------------
# containers

@dataclass
class FlowState:
    u: np.ndarray      # (nt+1, 2, nz, nx)
    q: np.ndarray      # (nt+1, nz-1, nx)
    phi: np.ndarray    # (nt+1, nx)
    sigma: np.ndarray  # (nt+1, 3, nz, nx)

    @classmethod
    def zeros(cls, mesh: Mesh, nt: int):
        return cls(np.zeros((nt + 1, 2) + mesh.shape), np.zeros((nt + 1,) + mesh.center_shape),
                   np.zeros((nt + 1, mesh.nx)), np.zeros((nt + 1, 3) + mesh.shape))

    def _map(self, other, op):
        return FlowState(op(self.u, other.u), op(self.q, other.q), op(self.phi, other.phi),
                         op(self.sigma, other.sigma))

    def __add__(self, other):
        return self._map(other, np.add)

    def __sub__(self, other):
        return self._map(other, np.subtract)

    def scaled(self, c):
        return FlowState(c * self.u, c * self.q, c * self.phi, c * self.sigma)

    @property
    def nt(self):
        return self.u.shape[0] - 1


@dataclass
class RHSData:
    f: np.ndarray       # (nt+1, 2, nz, nx)
    a_div: np.ndarray   # (nt+1, nz-1, nx)
    m: np.ndarray       # (nt+1, 3, nz, nx)
    g: np.ndarray       # (nt+1, 2, nx)
    k: np.ndarray       # (nt+1, nx)
    u0: np.ndarray      # (2, nz, nx)
    sigma0: np.ndarray  # (3, nz, nx)

    @classmethod
    def zeros(cls, mesh: Mesh, nt: int):
        return cls(np.zeros((nt + 1, 2) + mesh.shape), np.zeros((nt + 1,) + mesh.center_shape),
                   np.zeros((nt + 1, 3) + mesh.shape), np.zeros((nt + 1, 2, mesh.nx)),
                   np.zeros((nt + 1, mesh.nx)), np.zeros((2,) + mesh.shape),
                   np.zeros((3,) + mesh.shape))

    def __neg__(self):
        return RHSData(-self.f, -self.a_div, -self.m, -self.g, -self.k, -self.u0, -self.sigma0)

    def __add__(self, o):
        return RHSData(self.f + o.f, self.a_div + o.a_div, self.m + o.m, self.g + o.g,
                       self.k + o.k, self.u0 + o.u0, self.sigma0 + o.sigma0)

    def slots(self):
        return {"f": self.f, "a": self.a_div, "m": self.m, "g": self.g, "k": self.k,
                "u0": self.u0, "sigma0": self.sigma0}


@dataclass
class IterationReport:
    label: str = ""
    diffs: list = field(default_factory=list)
    kappas: list = field(default_factory=list)
    sigma_sup: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    wall_time: float = 0.0
    inner: list = field(default_factory=list)
    note: str = ""

    @property
    def kappa(self) -> float:
        """Contraction estimate: geometric mean of the recorded ratios above roundoff."""
        if not self.kappas:
            return float("nan")
        d = np.asarray(self.diffs)
        floor = 1e-11 * max(d.max(), 1e-300)
        ks = [k for k, dn in zip(self.kappas, d[1:]) if dn > floor and np.isfinite(k) and k > 0]
        if not ks:
            ks = [k for k in self.kappas if np.isfinite(k) and k > 0]
        if not ks:
            return 0.0
        return float(np.exp(np.mean(np.log(ks))))


@dataclass
class SolverSettings:
    tol: float = 1e-8
    max_iter: int = 50
    inner_tol: float | None = None
    max_inner: int = 200
    lin_tol: float = 1e-10
    compat_tol: float = 1e-8
    solver: str = "direct"
    stub_stress: bool = False
    force: bool = False
    auto_halve: bool = False
    max_halvings: int = 6
    raise_on_failure: bool = False

    @property
    def inner(self) -> float:
        return self.inner_tol if self.inner_tol is not None else 1e-3 * self.tol


@dataclass
class Problem:
    mesh: Mesh
    params: DimensionlessParams
    law: ConstitutiveLaw
    dt: float
    nt: int
    settings: SolverSettings = field(default_factory=SolverSettings)

    @property
    def T(self):
        return self.dt * self.nt

    @property
    def op(self):
        return get_operator(self.mesh, self.params, self.dt, self.settings.solver,
                            self.settings.lin_tol)


# ---------------------------------------------------------------------------
# norms used by the stopping rule

def _l2(mesh_w, f, dt):
    return float(np.sqrt(dt * np.sum(mesh_w * f ** 2)))


def state_norm(x: FlowState, mesh: Mesh, dt: float) -> float:
    """Composite space-time norm: H2-type for u, H1 plus sup for sigma, L2 for q and phi."""
    wn, wc, ws = mesh.node_weights, mesh.center_weights, mesh.surface_weights
    u = x.u[1:]
    gu = mesh.grad(u)
    ggu = mesh.grad(gu)
    nu = _l2(wn, u, dt) + _l2(wn, gu, dt) + _l2(wn, ggu, dt)
    s = x.sigma[1:]
    ns = _l2(wn, s, dt) + _l2(wn, mesh.grad(s), dt) + (float(np.max(np.abs(s))) if s.size else 0.0)
    nq = _l2(wc, x.q[1:], dt)
    nphi = _l2(ws, x.phi[1:], dt)
    return nu + ns + nq + nphi


# ---------------------------------------------------------------------------
# boundary data helpers

def zeroth_order_source(mesh: Mesh, params: DimensionlessParams, nt: int = 0) -> RHSData:
    """Gravity and initial surface tension: only the traction slot is nonzero."""
    p = mesh.profile
    N = surface_normal(p)
    T0 = surface_tangent(p)
    g = params.g0 * p.zeta * N - params.alpha * tangential_derivative(T0, p)
    out = RHSData.zeros(mesh, nt)
    out.g[:] = g
    return out


@dataclass
class CompatibilityReport:
    divergence: float
    bottom: float
    tangential: float
    tol: float

    @property
    def passed(self) -> bool:
        return max(self.divergence, self.bottom, self.tangential) < self.tol


def compatibility_check(u0, sigma0, mesh: Mesh, params: DimensionlessParams,
                        compat_tol: float = 1e-8) -> CompatibilityReport:
    u0 = np.asarray(u0, dtype=float)
    sigma0 = np.asarray(sigma0, dtype=float)
    p = mesh.profile
    gu = mesh.grad_nc(u0)
    div = gu[0, 0] + gu[1, 1]
    rdiv = float(np.sqrt(np.sum(mesh.center_weights * div ** 2)))
    rbot = float(np.max(np.abs(u0[:, 0, :])))
    N = surface_normal(p)
    T = surface_tangent(p)
    D = cst.rate_of_strain(mesh.grad(u0)[:, :, -1, :])
    v = (sym_dot_normal(sigma0[:, -1, :], N) + (1.0 - params.eps) * sym_dot_normal(D, N)
         - params.alpha * tangential_derivative(T, p))
    tang = v[0] * T[0] + v[1] * T[1]
    rtan = float(np.sqrt(np.sum(mesh.surface_weights * tang ** 2)))
    return CompatibilityReport(rdiv, rbot, rtan, compat_tol)


# ---------------------------------------------------------------------------
# surface-tension remainder

def Q1(phi, zp):
    phi = np.asarray(phi, dtype=float)
    zp = np.asarray(zp, dtype=float)
    m = 1.0 + zp ** 2
    return m ** -0.5 * ((1.0 + (2.0 * zp * phi + phi ** 2) / m) ** -0.5 - 1.0 + zp * phi / m)


def Q2(phi, zp):
    phi = np.asarray(phi, dtype=float)
    zp = np.asarray(zp, dtype=float)
    return -zp * phi ** 2 * (1.0 + zp ** 2) ** -1.5 + (phi + zp) * Q1(phi, zp)


# ---------------------------------------------------------------------------
# operators on trajectories

def _grad_traj(mesh, u):
    return mesh.grad(u)


def p1_residual(x: FlowState, rhs: RHSData, prob: Problem) -> dict:
    """Residual of the linearised operator P1(x) - rhs on levels 1..nt (raw arrays)."""
    m, p, law, dt = prob.mesh, prob.params, prob.law, prob.dt
    N = surface_normal(m.profile)
    u, q, phi, s = x.u, x.q, x.phi, x.sigma
    gu_c = m.grad_nc(u)                                  # (nt+1, 2, 2, M, nx)
    lap = m.grad_cn(gu_c[:, :, 0])[:, :, 0] + m.grad_cn(gu_c[:, :, 1])[:, :, 1]
    mom = (p.Re * (u[1:] - u[:-1]) / dt - (1 - p.eps) * lap[1:] + m.grad_cn(q)[1:]
           - div_sym(m, s)[1:] - rhs.f[1:])[:, :, 1:-1]
    div = gu_c[1:, 0, 0] + gu_c[1:, 1, 1] - rhs.a_div[1:]
    gu = m.grad(u)
    con = []
    for n in range(1, x.nt + 1):
        r = (s[n] + p.We * ((s[n] - s[n - 1]) / dt - cst.g_a(gu[n], s[n], p.a))
             - 2 * p.eps * cst.rate_of_strain(gu[n]) + law.nonlinear(s[n], p.We) - rhs.m[n])
        con.append(r)
    qs = m.center_to_surface(q)
    DT = lambda f: tangential_derivative(f, m.profile)
    trac = []
    rate = []
    for n in range(1, x.nt + 1):
        t = (sym_dot_normal(s[n][:, -1, :], N) - qs[n] * N
             + (1 - p.eps) * viscous_traction(m, u[n], N) - p.alpha * DT(phi[n] * N) - rhs.g[n])
        trac.append(t)
        dTu = DT(u[n][:, -1, :])
        rate.append((phi[n] - phi[n - 1]) / dt - (dTu[0] * N[0] + dTu[1] * N[1]) - rhs.k[n])
    return {"momentum": mom, "divergence": div, "constitutive": np.stack(con),
            "traction": np.stack(trac), "phi": np.stack(rate)}


def error_terms(x: FlowState, geoms: list, prob: Problem) -> RHSData:
    """E1..E5 evaluated on levels 1..nt; E6 = E7 = 0.

    The k-slot is returned in the units of the linearised phi-equation, i.e.
    E5 / (1 + zeta'^2), and the surface-tension remainder is evaluated at the
    slope perturbation Phi = (1 + zeta'^2) phi.
    """
    m, p = prob.mesh, prob.params
    prof = m.profile
    zp = prof.zeta_prime
    N = surface_normal(prof)
    DT = lambda f: tangential_derivative(f, prof)
    out = RHSData.zeros(m, x.nt)
    mu = 1.0 - p.eps
    I2 = np.eye(2)[:, :, None, None]
    for n in range(1, x.nt + 1):
        geo: GeometryState = geoms[n]
        xi, xic = geo.xi, geo.xi_c
        xib, xibc = xi + I2, xic + I2
        u, q, s = x.u[n], x.q[n], x.sigma[n]
        gu = m.grad(u)                     # u_{i,l} at nodes
        guc = m.grad_nc(u)                 # at centres
        # E1
        inner_bar = np.einsum("lj...,il...->ij...", xibc, guc)   # xibar_lj u_i,l (centres)
        inner = np.einsum("lj...,il...->ij...", xic, guc)        # xi_lj u_i,l
        # d_k of centre fields, back at nodes: dk[..., k]
        d_bar = m.grad_cn(inner_bar)       # (2 i, 2 j, 2 k, nz, nx)
        d_xi = m.grad_cn(inner)
        t1 = np.einsum("kj...,ijk...->i...", xi, d_bar)
        t2 = np.einsum("ijj...->i...", d_xi)
        gq = m.grad_cn(q)                  # (2 k, nz, nx)
        t3 = np.einsum("ki...,k...->i...", xi, gq)
        ds = m.grad(cst.sym_to_full(s))    # s_ij,k -> (2, 2, 2, nz, nx)
        t4 = np.einsum("ijk...,kj...->i...", ds, xi)
        E1 = -mu * t1 - mu * t2 + t3 - t4
        E1[:, 0, :] = 0.0
        E1[:, -1, :] = 0.0
        out.f[n] = E1
        # E2
        out.a_div[n] = np.einsum("kj...,jk...->...", xic, guc)
        # E3
        S = cst.sym_to_full(s)
        ta = (np.einsum("li...,kl...,kj...->ij...", xi, gu, S)
              + np.einsum("ik...,kl...,lj...->ij...", S, gu, xi))
        tb = (np.einsum("ik...,lk...,jl...->ij...", S, xi, gu)
              + np.einsum("il...,lk...,kj...->ij...", gu, xi, S))
        visc = np.einsum("ik...,kj...->ij...", gu, xi) + np.einsum("jk...,ki...->ij...", gu, xi)
        E3 = -p.We * (0.5 * (p.a - 1) * ta + 0.5 * (p.a + 1) * tb) - p.eps * visc
        out.m[n] = cst.full_to_sym(E3)
        # E4
        cN = geo.calN
        dN = cN - N
        gus = gu[..., -1, :]
        xis = xi[..., -1, :]
        xibs = xib[..., -1, :]
        qs = m.center_to_surface(q)
        Ss = S[..., -1, :]
        A_xi = np.einsum("kj...,ik...->ij...", xis, gus) + np.einsum("ki...,jk...->ij...", xis, gus)
        A_bar = (np.einsum("kj...,ik...->ij...", xibs, gus)
                 + np.einsum("ki...,jk...->ij...", xibs, gus))
        Phi = (1.0 + zp ** 2) * x.phi[n]
        Q = np.stack([Q1(Phi, zp), Q2(Phi, zp)])
        eta2 = geo.eta_s[1]
        E4 = (-qs * dN + mu * np.einsum("ij...,j...->i...", A_xi, N)
              + mu * np.einsum("ij...,j...->i...", A_bar, dN)
              + p.g0 * prof.zeta * dN + p.g0 * eta2 * cN - p.alpha * DT(Q)
              + np.einsum("ij...,j...->i...", Ss, dN))
        out.g[n] = E4
        # E5 (Phi-equation units), converted to phi units
        dTu = DT(u[:, -1, :])
        dTe = DT(geo.eta_s)
        c2 = N[1] + dTe[0]
        E5 = (-(dTu[0] * N[0] + dTu[1] * N[1]) * (c2 ** -2 - N[1] ** -2)
              - c2 ** -2 * (dTu[1] * dTe[0] - dTu[0] * dTe[1]))
        out.k[n] = E5 / (1.0 + zp ** 2)
    return out


def full_residual(x: FlowState, geoms: list, prob: Problem) -> dict:
    """Residuals of the complete Lagrangian system on levels 1..nt (raw arrays).

    Written directly from the xi-contracted equations, independently of
    :func:`error_terms`. The surface equation is expressed for Phi.
    """
    m, p, law, dt = prob.mesh, prob.params, prob.law, prob.dt
    prof = m.profile
    zp = prof.zeta_prime
    mu = 1.0 - p.eps
    I2 = np.eye(2)[:, :, None, None]
    DT = lambda f: tangential_derivative(f, prof)
    mom, div, trac, rate = [], [], [], []
    gu_all = m.grad(x.u)
    xib_all = []
    Phi = (1.0 + zp ** 2) * x.phi
    for n in range(1, x.nt + 1):
        geo = geoms[n]
        xib, xibc = geo.xi + I2, geo.xi_c + I2
        xib_all.append(xib)
        u, q, s = x.u[n], x.q[n], x.sigma[n]
        guc = m.grad_nc(u)
        flux = np.einsum("lj...,il...->ij...", xibc, guc)
        visc = np.einsum("kj...,ijk...->i...", xib, m.grad_cn(flux))
        press = np.einsum("ki...,k...->i...", xib, m.grad_cn(q))
        S = cst.sym_to_full(s)
        dstress = np.einsum("ijk...,kj...->i...", m.grad(S), xib)
        r = p.Re * (x.u[n] - x.u[n - 1]) / dt - mu * visc + press - dstress
        mom.append(r[:, 1:-1, :])
        div.append(np.einsum("kj...,jk...->...", xibc, guc))
        cN = geo.calN
        gus = gu_all[n][..., -1, :]
        xibs = xib[..., -1, :]
        A = np.einsum("kj...,ik...->ij...", xibs, gus) + np.einsum("ki...,jk...->ij...", xibs, gus)
        qs = m.center_to_surface(q)
        W = unit_slope_vector(Phi[n] + zp)
        t = (np.einsum("ij...,j...->i...", S[..., -1, :], cN) - qs * cN
             + mu * np.einsum("ij...,j...->i...", A, cN)
             + p.g0 * (prof.zeta + geo.eta_s[1]) * cN - p.alpha * DT(W))
        trac.append(t)
        rate.append((Phi[n] - Phi[n - 1]) / dt - phi_rate(u[:, -1, :], cN, prof))
    xib_traj = np.stack([xib_all[0]] + xib_all)
    con = cst.full_lagrangian_stress_residual(x.sigma, gu_all, xib_traj, dt, p, law)
    return {"momentum": np.stack(mom), "divergence": np.stack(div), "constitutive": con,
            "traction": np.stack(trac), "phi": np.stack(rate)}


def residual_norms(res: dict, mesh: Mesh, dt: float) -> dict:
    """Space-time discrete L2 norms of residual blocks returned by the residual functions."""
    w = {"momentum": mesh.node_weights[1:-1], "divergence": mesh.center_weights,
         "constitutive": mesh.node_weights, "traction": mesh.surface_weights,
         "phi": mesh.surface_weights}
    return {k: _l2(w[k], v, dt) for k, v in res.items()}


# ---------------------------------------------------------------------------
# Picard machinery

def _picard(prob: Problem, rhs: RHSData, lift_u=None, lift_sigma=None, tol=None, max_iter=None,
            label="picard", on_iteration=None):
    """Solve P2[lift](x) = rhs for x with zero initial data by Picard iteration.

    With zero lifts this is the P1 problem with vanishing initial conditions.
    Each sweep updates the stress from the previous velocity, then marches
    the Stokes step with that stress.
    """
    m, p, s = prob.mesh, prob.params, prob.settings
    tol = s.inner if tol is None else tol
    max_iter = s.max_inner if max_iter is None else max_iter
    op = prob.op
    nt = prob.nt
    x = FlowState.zeros(m, nt)
    grad_lift = None if lift_u is None else m.grad(lift_u)
    rep = IterationReport(label=label)
    t0 = time.perf_counter()
    u_init = np.zeros((2,) + m.shape)
    for it in range(1, max_iter + 1):
        if s.stub_stress:
            sig = np.zeros_like(x.sigma)
        else:
            sig = cst.picard_sigma_step(x.sigma, m.grad(x.u), grad_lift, lift_sigma, rhs.m,
                                        prob.dt, p, prob.law)
        u, q, phi = op.march(u_init, rhs.f, rhs.a_div, rhs.g, rhs.k, sigma=sig)
        xn = FlowState(u, q, phi, sig)
        d = state_norm(xn - x, m, prob.dt)
        rep.diffs.append(d)
        if it >= 2:
            prev = rep.diffs[-2]
            rep.kappas.append(d / prev if prev > 0 else 0.0)
        rep.sigma_sup.append(cst.stress_sup(sig) if sig.size else 0.0)
        rep.iterations = it
        x = xn
        if on_iteration is not None:
            on_iteration(rep)
        if d < tol:
            rep.converged = True
            break
    rep.wall_time = time.perf_counter() - t0
    return x, rep


def lift_residual_source(lift: FlowState, prob: Problem, m1=None):
    """m-slot left over by the lift (u1, sigma1) in the discrete stress equation."""
    m, p, law, dt = prob.mesh, prob.params, prob.law, prob.dt
    gu = m.grad(lift.u)
    out = np.zeros_like(lift.sigma)
    s = lift.sigma
    for n in range(1, prob.nt + 1):
        out[n] = (s[n] + p.We * ((s[n] - s[n - 1]) / dt - cst.g_a(gu[n], s[n], p.a))
                  - 2 * p.eps * cst.rate_of_strain(gu[n]) + law.nonlinear(s[n], p.We))
    return out


def invert_P1(rhs: RHSData, prob: Problem, m1=None, tol=None, max_iter=None, force=None,
              on_iteration=None):
    """Solve P1(u, q, phi, sigma) = rhs; returns (state, report)."""
    m, p, s = prob.mesh, prob.params, prob.settings
    force = s.force if force is None else force
    if not force:
        rep_c = compatibility_check(rhs.u0, rhs.sigma0, m, p, s.compat_tol)
        if not rep_c.passed:
            raise CompatibilityError(
                f"initial data incompatible: div={rep_c.divergence:.2e}, bottom={rep_c.bottom:.2e},"
                f" tangential={rep_c.tangential:.2e}", rep_c)
    nt = prob.nt
    if s.stub_stress:
        sigma1 = np.zeros((nt + 1, 3) + m.shape)
    else:
        sigma1 = cst.lift_sigma1(rhs.sigma0, m1, p.We, prob.dt, nt)
        if p.We == 0:
            sigma1[0] = rhs.sigma0
    zero_f = np.zeros_like(rhs.f)
    u1, q1, phi1 = prob.op.march(rhs.u0, zero_f, rhs.a_div, rhs.g, rhs.k, sigma=sigma1)
    lift = FlowState(u1, q1, phi1, sigma1)
    if s.stub_stress:
        m_hat = np.zeros_like(rhs.m)
    else:
        m_hat = rhs.m - lift_residual_source(lift, prob, m1)
    red = RHSData(rhs.f, np.zeros_like(rhs.a_div), m_hat, np.zeros_like(rhs.g),
                  np.zeros_like(rhs.k), np.zeros_like(rhs.u0), np.zeros_like(rhs.sigma0))
    x, rep = _picard(prob, red, lift_u=u1, lift_sigma=sigma1,
                     tol=s.tol if tol is None else tol,
                     max_iter=s.max_iter if max_iter is None else max_iter,
                     label="P1", on_iteration=on_iteration)
    if not rep.converged and s.raise_on_failure:
        raise NonConvergenceError(f"P1 inversion did not converge in {rep.iterations} iterations", rep)
    return lift + x, rep


@dataclass
class FullSolution:
    state: FlowState
    geoms: list
    report: IterationReport
    lift: FlowState
    problem: Problem

    @property
    def eta(self):
        return np.stack([g.eta for g in self.geoms])


def solve_full(u0, sigma0, prob: Problem, on_iteration=None) -> FullSolution:
    """Outer contraction for the complete Lagrangian system on one window."""
    m, p, s = prob.mesh, prob.params, prob.settings
    nt = prob.nt
    t0 = time.perf_counter()
    rhs0 = -zeroth_order_source(m, p, nt)
    rhs0.u0 = np.asarray(u0, dtype=float)
    rhs0.sigma0 = np.asarray(sigma0, dtype=float)
    X1, rep1 = invert_P1(rhs0, prob, tol=s.inner, max_iter=s.max_inner)
    rep = IterationReport(label="outer")
    rep.inner.append(rep1)
    x = FlowState.zeros(m, nt)
    for it in range(1, s.max_iter + 1):
        total = X1 + x
        geoms = geometry_trajectory(total.u, prob.dt, m)
        E = error_terms(total, geoms, prob)
        xn, irep = _picard(prob, -E, lift_u=X1.u, lift_sigma=X1.sigma, label=f"P2[{it}]")
        rep.inner.append(irep)
        d = state_norm(xn - x, m, prob.dt)
        rep.diffs.append(d)
        if it >= 2:
            prev = rep.diffs[-2]
            rep.kappas.append(d / prev if prev > 0 else 0.0)
        rep.sigma_sup.append(cst.stress_sup(xn.sigma + X1.sigma))
        rep.iterations = it
        x = xn
        if on_iteration is not None:
            on_iteration(rep)
        if not np.isfinite(d):
            break
        if d < s.tol:
            rep.converged = True
            break
    total = X1 + x
    geoms = geometry_trajectory(total.u, prob.dt, m)
    rep.wall_time = time.perf_counter() - t0
    if not rep.converged:
        rep.note = f"no convergence at T={prob.T:g}; retry with T/2"
        if s.raise_on_failure:
            raise NonConvergenceError(rep.note, rep)
    return FullSolution(total, geoms, rep, X1, prob)


def solve_full_auto(u0, sigma0, prob: Problem, on_iteration=None) -> FullSolution:
    """:func:`solve_full`, halving the window on failure when ``auto_halve`` is set."""
    s = prob.settings
    sol = solve_full(u0, sigma0, prob, on_iteration)
    halvings = 0
    while not sol.report.converged and s.auto_halve and halvings < s.max_halvings:
        halvings += 1
        nt, dt = prob.nt, prob.dt
        if nt >= 2:
            nt //= 2
        else:
            dt /= 2.0
        prob = replace(prob, nt=nt, dt=dt)
        sol = solve_full(u0, sigma0, prob, on_iteration)
        sol.report.note = f"window halved {halvings} time(s)"
    return sol


# ---------------------------------------------------------------------------
# window restarts

def _fourier_eval(f, period, s):
    """Trigonometric interpolant of periodic samples ``f[..., nx]`` at points ``s``."""
    f = np.asarray(f, dtype=float)
    nx = f.shape[-1]
    fh = np.fft.fft(f, axis=-1) / nx
    k = 2.0 * np.pi * np.fft.fftfreq(nx, d=period / nx)
    E = np.exp(1j * np.outer(np.ravel(s), k))
    return np.real(fh @ E.T)


def _lagrange_rows(F, r, dr, nz):
    """Cubic interpolation across rows: ``F[..., nz, npts]`` at per-point ``r``."""
    j0 = np.clip(np.floor(r / dr).astype(int) - 1, 0, nz - 4)
    out = 0.0
    for l in range(4):
        w = np.ones_like(r)
        for mm in range(4):
            if mm != l:
                w *= (r - (j0 + mm) * dr) / ((l - mm) * dr)
        vals = np.take_along_axis(F, (j0 + l)[None, :].repeat(F.shape[0], 0)[:, None, :], axis=-2)
        out = out + w * vals[:, 0, :]
    return out


def _eval_at_labels(field, mesh, s, r):
    """Field (c, nz, nx) at logical labels (s, r), spectral in s and cubic in r."""
    F = _fourier_eval(field, mesh.profile.period, s)      # (c, nz, npts)
    return _lagrange_rows(F, np.asarray(r, dtype=float), mesh.dr, mesh.nz)


def _invert_labels(eta, mesh, x, y, r_guess, fixed_r=False, tol=1e-13, max_iter=200):
    prof = mesh.profile
    s = np.array(x, dtype=float)
    r = np.array(r_guess, dtype=float)
    for _ in range(max_iter):
        e = _eval_at_labels(eta, mesh, s, r)
        s_new = x - e[0]
        if fixed_r:
            r_new = r
        else:
            b = _fourier_eval(prof.bottom, prof.period, s_new)
            H = _fourier_eval(prof.height, prof.period, s_new)
            r_new = np.clip((y - e[1] + b) / H, 0.0, 1.0)
        done = max(np.max(np.abs(s_new - s)), np.max(np.abs(r_new - r))) < tol
        s, r = s_new, r_new
        if done:
            break
    return s, r


def restart_window(sol: FullSolution):
    """Remap the end state of a window onto a fresh reference domain.

    The deformed surface becomes the new profile; velocity and stress are
    carried along particle labels. Returns ``(mesh, u0, sigma0)``.
    """
    from .geometry import DomainProfile, build_mesh
    m = sol.problem.mesh
    prof = m.profile
    eta = sol.geoms[-1].eta
    x = prof.x
    s, _ = _invert_labels(eta, m, x, None, np.ones_like(x), fixed_r=True)
    e = _eval_at_labels(eta, m, s, np.ones_like(x))
    zeta_new = _fourier_eval(prof.zeta, prof.period, s) + e[1]
    new_prof = DomainProfile(zeta_new, prof.bottom, prof.period, prof.spectral)
    new_mesh = build_mesh(new_prof, m.nx, m.nz)
    X, Y = new_mesh.X1.ravel(), new_mesh.X2.ravel()
    r0 = np.broadcast_to(new_mesh.r[:, None], new_mesh.shape).ravel()
    s, r = _invert_labels(eta, m, X, Y, r0)
    u = _eval_at_labels(sol.state.u[-1], m, s, r).reshape((2,) + new_mesh.shape)
    sig = _eval_at_labels(sol.state.sigma[-1], m, s, r).reshape((3,) + new_mesh.shape)
    u[:, 0, :] = 0.0
    return new_mesh, u, sig


def march_windows(u0, sigma0, prob: Problem, n_windows: int, on_window=None):
    """Solve ``n_windows`` consecutive windows, restarting from the deformed domain each time."""
    sols = []
    for w in range(n_windows):
        if w > 0:
            mesh, u0, sigma0 = restart_window(sols[-1])
            prob = replace(prob, mesh=mesh, settings=replace(prob.settings, force=True))
        sol = solve_full_auto(u0, sigma0, prob)
        sols.append(sol)
        if on_window is not None:
            on_window(w, sol)
        if not sol.report.converged:
            break
    return sols
