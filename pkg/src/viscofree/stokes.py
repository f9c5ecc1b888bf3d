"""One backward-Euler step of the linear free-boundary Stokes problem.

Velocity lives at mesh nodes (bottom row fixed to zero), pressure at cell
centres staggered half a cell in r. The surface unknown phi is eliminated
through its own backward-Euler update, so each step is a single sparse
solve in (u, q) followed by an explicit phi update.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import Mesh, surface_normal
from .scaling import DimensionlessParams


class StokesSolverError(RuntimeError):
    pass


@dataclass
class StokesRHS:
    f: np.ndarray       # (2, nz, nx) momentum source
    a_div: np.ndarray   # (nz-1, nx) divergence data at cell centres
    g: np.ndarray       # (2, nx) traction data
    k: np.ndarray       # (nx,) phi-equation source

    @classmethod
    def zeros(cls, mesh: Mesh):
        return cls(np.zeros((2,) + mesh.shape), np.zeros(mesh.center_shape),
                   np.zeros((2, mesh.nx)), np.zeros(mesh.nx))


@dataclass
class StokesSolution:
    u: np.ndarray       # (2, nz, nx)
    q: np.ndarray       # (nz-1, nx)
    phi: np.ndarray     # (nx,)
    info: dict = field(default_factory=dict)

    @classmethod
    def zeros(cls, mesh: Mesh):
        return cls(np.zeros((2,) + mesh.shape), np.zeros(mesh.center_shape), np.zeros(mesh.nx))


def div_sym(mesh: Mesh, sigma):
    """Nodal divergence (d_j s_ij) of a symmetric field ``(..., 3, nz, nx)``."""
    s = np.asarray(sigma, dtype=float)
    g = mesh.grad(s)  # (..., 3, 2, nz, nx)
    d1 = g[..., 0, 0, :, :] + g[..., 1, 1, :, :]
    d2 = g[..., 1, 0, :, :] + g[..., 2, 1, :, :]
    return np.stack([d1, d2], axis=-3)


def sym_dot_normal(sigma_s, N):
    """s . N for a symmetric surface field ``(3, nx)``."""
    return np.stack([sigma_s[0] * N[0] + sigma_s[1] * N[1], sigma_s[1] * N[0] + sigma_s[2] * N[1]])


def viscous_traction(mesh: Mesh, u, N):
    """(du_i/dX_j + du_j/dX_i) N_j at the surface for nodal u."""
    G = mesh.grad(u)[..., -1, :]   # (2, 2, nx)
    t1 = 2.0 * G[0, 0] * N[0] + (G[0, 1] + G[1, 0]) * N[1]
    t2 = (G[1, 0] + G[0, 1]) * N[0] + 2.0 * G[1, 1] * N[1]
    return np.stack([t1, t2])


class StokesOperator:
    """Assembled and factorised step operator for fixed (mesh, params, dt)."""

    def __init__(self, mesh: Mesh, params: DimensionlessParams, dt: float, solver: str = "direct",
                 lin_tol: float = 1e-10):
        if dt <= 0:
            raise ValueError("dt must be positive")
        if not 0.0 <= params.eps < 1.0:
            raise ValueError("eps must lie in [0, 1)")
        if np.any(mesh.jacobian <= 0):
            raise StokesSolverError("tangled mesh: non-positive cell Jacobian")
        self.mesh, self.params, self.dt = mesh, params, dt
        self.solver, self.lin_tol = solver, lin_tol
        self.N = surface_normal(mesh.profile)
        self.gauge_added = False
        self._assemble()
        self._factorize()

    # -- assembly -----------------------------------------------------------
    def _assemble(self):
        m, p, dt = self.mesh, self.params, self.dt
        o = m.ops
        nx, nz = m.nx, m.nz
        Nn = nx * nz
        nf = nx * (nz - 1)          # free velocity nodes per component (rows 1..M)
        nc = nx * (nz - 1)
        self.nf, self.nc = nf, nc
        free = np.arange(nx, Nn)
        interior = np.arange(nx, Nn - nx)
        surf = np.arange(Nn - nx, Nn)
        P = sp.csr_matrix((np.ones(nf), (free, np.arange(nf))), shape=(Nn, nf))
        lap = (o.dx_cn @ o.dx_nc + o.dy_cn @ o.dy_nc)
        mu = 1.0 - p.eps
        mass = p.Re / dt

        # momentum at interior nodes
        A = (mass * sp.identity(Nn) - mu * lap)[interior] @ P
        Gx = o.dx_cn[interior]
        Gy = o.dy_cn[interior]
        Z = sp.csr_matrix(A.shape)
        mom1 = sp.hstack([A, Z, Gx])
        mom2 = sp.hstack([Z, A, Gy])

        # traction at surface nodes
        N1, N2 = (sp.diags(self.N[0]), sp.diags(self.N[1]))
        Dx = o.dx_n[surf] @ P
        Dy = o.dy_n[surf] @ P
        Eq = o.surf_q
        DT = sp.csr_matrix(np.diag(1.0 / m.profile.metric) @ o.ds_surface)
        S = sp.csr_matrix((np.ones(nx), (np.arange(nx), surf - nx)), shape=(nx, nf))
        DTu = DT @ S
        # -alpha dt D_T( N_c (N_1 D_T u1 + N_2 D_T u2) )
        st = lambda Nc, Nd: -p.alpha * dt * (DT @ Nc @ Nd @ DTu)
        tr1 = sp.hstack([mu * (2.0 * N1 @ Dx + N2 @ Dy) + st(N1, N1),
                         mu * (N2 @ Dx) + st(N1, N2),
                         -N1 @ Eq])
        tr2 = sp.hstack([mu * (N1 @ Dy) + st(N2, N1),
                         mu * (N1 @ Dx + 2.0 * N2 @ Dy) + st(N2, N2),
                         -N2 @ Eq])

        div = sp.hstack([o.dx_nc @ P, o.dy_nc @ P, sp.csr_matrix((nc, nc))])

        # order rows as (u1 rows, u2 rows, centre rows); each velocity block
        # is [interior nodes, surface nodes] matching the free-node ordering
        self.K = sp.vstack([mom1, tr1, mom2, tr2, div]).tocsc()
        self._DT = DT
        self._interior, self._surf = interior, surf

    def _factorize(self):
        K = self.K
        if self.solver == "direct":
            try:
                self._lu = spla.splu(K)
            except RuntimeError:
                self._add_gauge()
                self._lu = spla.splu(self.K)
        elif self.solver == "gmres":
            self._ilu = spla.spilu(K, drop_tol=1e-6, fill_factor=20)
        else:
            raise ValueError(f"unknown linear solver {self.solver!r}")

    def _add_gauge(self):
        # mean-pressure constraint with a multiplier in the divergence rows
        m = self.mesh
        w = np.concatenate([np.zeros(2 * self.nf), m.center_weights.ravel()])
        col = sp.csr_matrix(w.reshape(-1, 1))
        row = sp.csr_matrix(w.reshape(1, -1))
        self.K = sp.bmat([[self.K, col], [row, None]]).tocsc()
        self.gauge_added = True

    # -- right-hand side ----------------------------------------------------
    def _rhs(self, prev: StokesSolution, rhs: StokesRHS, sigma):
        m, p, dt = self.mesh, self.params, self.dt
        nx = m.nx
        mom = p.Re / dt * prev.u + rhs.f
        if sigma is not None:
            mom = mom + div_sym(m, sigma)
        g = np.array(rhs.g, dtype=float)
        N = self.N
        if sigma is not None:
            g = g - sym_dot_normal(np.asarray(sigma)[:, -1, :], N)
        base = prev.phi + dt * rhs.k
        g = g + p.alpha * np.stack([self._DT @ (N[0] * base), self._DT @ (N[1] * base)])
        parts = []
        for c in range(2):
            parts.append(mom[c, 1:-1, :].ravel())
            parts.append(g[c])
        parts.append(np.asarray(rhs.a_div, dtype=float).ravel())
        b = np.concatenate(parts)
        if self.gauge_added:
            b = np.append(b, 0.0)
        return b

    def _unpack(self, x, prev, rhs):
        m = self.mesh
        nf = self.nf
        u = np.zeros((2,) + m.shape)
        u[0, 1:, :] = x[:nf].reshape(m.nz - 1, m.nx)
        u[1, 1:, :] = x[nf:2 * nf].reshape(m.nz - 1, m.nx)
        q = x[2 * nf:2 * nf + self.nc].reshape(m.center_shape)
        us = u[:, -1, :]
        rate = self._DT @ us[0] * self.N[0] + self._DT @ us[1] * self.N[1]
        phi = prev.phi + self.dt * (rate + rhs.k)
        return u, q, phi

    def solve(self, prev: StokesSolution, rhs: StokesRHS, sigma=None, check=True) -> StokesSolution:
        b = self._rhs(prev, rhs, sigma)
        info = {"gauge_constraint": self.gauge_added}
        if self.solver == "direct":
            x = self._lu.solve(b)
            info["iterations"] = 1
        else:
            M = spla.LinearOperator(self.K.shape, self._ilu.solve)
            count = [0]

            def cb(_):
                count[0] += 1
            x, flag = spla.gmres(self.K, b, M=M, rtol=1e-13, atol=0.0, restart=200, maxiter=50,
                                 callback=cb, callback_type="pr_norm")
            info["iterations"] = count[0]
            if flag != 0:
                res = np.linalg.norm(self.K @ x - b) / max(np.linalg.norm(b), 1e-300)
                raise StokesSolverError(
                    f"gmres did not converge after {count[0]} iterations, residual {res:.3e}")
        if not np.all(np.isfinite(x)):
            raise StokesSolverError("linear solve produced non-finite values")
        bn = np.linalg.norm(b)
        res = np.linalg.norm(self.K @ x - b) / bn if bn > 0 else np.linalg.norm(self.K @ x)
        info["relative_residual"] = float(res)
        if check and res > self.lin_tol:
            raise StokesSolverError(f"linear residual {res:.3e} exceeds lin_tol {self.lin_tol:.1e}")
        u, q, phi = self._unpack(x, prev, rhs)
        return StokesSolution(u, q, phi, info)

    def march(self, u_init, f, a_div, g, k, sigma=None, phi_init=None):
        """Step through a whole time grid; inputs are trajectories indexed 0..nt.

        Returns (u, q, phi) trajectories; q at level 0 is left at zero.
        """
        m = self.mesh
        nt = len(f) - 1
        u = np.zeros((nt + 1, 2) + m.shape)
        q = np.zeros((nt + 1,) + m.center_shape)
        phi = np.zeros((nt + 1, m.nx))
        u[0] = u_init
        if phi_init is not None:
            phi[0] = phi_init
        prev = StokesSolution(u[0], q[0], phi[0])
        for n in range(1, nt + 1):
            rhs = StokesRHS(f[n], a_div[n], g[n], k[n])
            sol = self.solve(prev, rhs, None if sigma is None else sigma[n])
            u[n], q[n], phi[n] = sol.u, sol.q, sol.phi
            prev = sol
        return u, q, phi


_CACHE: dict = {}


def get_operator(mesh: Mesh, params: DimensionlessParams, dt: float, solver: str = "direct",
                 lin_tol: float = 1e-10) -> StokesOperator:
    key = (id(mesh), params, float(dt), solver, lin_tol)
    op = _CACHE.get(key)
    if op is None or op.mesh is not mesh:
        if len(_CACHE) > 32:
            _CACHE.clear()
        op = StokesOperator(mesh, params, dt, solver, lin_tol)
        _CACHE[key] = op
    return op


def solve_step(prev: StokesSolution, rhs: StokesRHS, sigma, dt: float, params: DimensionlessParams,
               mesh: Mesh, solver: str = "direct", lin_tol: float = 1e-10) -> StokesSolution:
    """Advance (u, q, phi) by one backward-Euler step."""
    return get_operator(mesh, params, dt, solver, lin_tol).solve(prev, rhs, sigma)


def residual_report(sol: StokesSolution, rhs: StokesRHS, sigma, dt: float,
                    params: DimensionlessParams, mesh: Mesh, prev: StokesSolution | None = None,
                    relative: bool = False) -> dict:
    """Discrete L2 residuals of the momentum, divergence, traction and phi equations.

    Evaluated from the mesh operators directly, not from the assembled matrix.
    """
    if prev is None:
        prev = StokesSolution.zeros(mesh)
    p = params
    N = surface_normal(mesh.profile)
    prof = mesh.profile
    u, q, phi = sol.u, sol.q, sol.phi
    gu = mesh.grad_nc(u)                       # (2, 2, M, nx)
    lap = mesh.grad_cn(gu[:, 0])[:, 0] + mesh.grad_cn(gu[:, 1])[:, 1]
    gq = mesh.grad_cn(q)
    src = np.array(rhs.f, dtype=float)
    if sigma is not None:
        src = src + div_sym(mesh, sigma)
    mom = p.Re * (u - prev.u) / dt - (1 - p.eps) * lap + gq - src
    mom = mom[:, 1:-1, :]
    div = gu[0, 0] + gu[1, 1] - rhs.a_div
    qs = mesh.center_to_surface(q)
    DT = lambda f: prof.d(f) / prof.metric
    trac = -qs * N + (1 - p.eps) * viscous_traction(mesh, u, N) - p.alpha * DT(phi * N) - rhs.g
    if sigma is not None:
        trac = trac + sym_dot_normal(np.asarray(sigma)[:, -1, :], N)
    us = u[:, -1, :]
    dTu = DT(us)
    phi_res = (phi - prev.phi) / dt - (dTu[0] * N[0] + dTu[1] * N[1]) - rhs.k
    wn = mesh.node_weights[1:-1]
    wc = mesh.center_weights
    ws = mesh.surface_weights
    l2 = lambda r, w: float(np.sqrt(np.sum(w * r ** 2)))
    out = {
        "momentum": l2(mom, wn),
        "divergence": l2(div, wc),
        "traction": l2(trac, ws),
        "phi": l2(phi_res, ws),
        "bottom_velocity": float(np.max(np.abs(u[:, 0, :]))),
    }
    if relative:
        scale = {
            "momentum": l2(src[:, 1:-1], wn) + l2(p.Re * prev.u[:, 1:-1] / dt, wn),
            "divergence": l2(np.asarray(rhs.a_div), wc) + l2(gu[0, 0], wc) + l2(gu[1, 1], wc),
            "traction": l2(np.asarray(rhs.g), ws) + l2(qs * N, ws),
            "phi": l2(np.asarray(rhs.k), ws) + l2(prev.phi / dt, ws),
        }
        for k_, s in scale.items():
            out[k_] = out[k_] / s if s > 0 else out[k_]
    return out
