"""Reference domain, boundary-fitted mesh and Lagrangian free-surface geometry.

The reference domain is one period [0, Lx) of a strip bounded below by
X2 = -b(X1) and above by X2 = zeta(X1). Nodes are laid out on a logical
(s, r) grid with X1 = s and X2 = -b(s) + r * (zeta(s) + b(s)), r in [0, 1].
Pressure-like quantities live at cell centres staggered half a cell in r.

Array conventions used across the package:

* nodal scalar: ``(nz, nx)``; row 0 is the bottom, row ``nz - 1`` the surface
* nodal vector: ``(2, nz, nx)``
* general 2x2 tensor: ``(2, 2, nz, nx)`` with ``T[i, j] = d v_i / d X_j``
* symmetric tensor: ``(3, nz, nx)`` holding ``(s11, s12, s22)``
* surface fields drop the ``nz`` axis.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.signal import resample

DET_TOL = 1e-12
FOLD_TOL = 1e-10
OVERTURN_TOL = 1e-10


class GeometryError(ValueError):
    """Base class for geometric failures."""


class CollapsedDomainError(GeometryError):
    pass


class SingularMapError(GeometryError):
    pass


class FoldingError(GeometryError):
    pass


class OverturnedSurfaceError(GeometryError):
    pass


# ---------------------------------------------------------------------------
# periodic derivatives

def wavenumbers(n: int, period: float) -> np.ndarray:
    k = 2.0 * np.pi / period * np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0:
        k[n // 2] = 0.0  # odd derivatives of the Nyquist mode are not representable
    return k


def periodic_derivative(f, period: float, spectral: bool = True, axis: int = -1):
    """First derivative of periodic samples along ``axis``."""
    f = np.asarray(f, dtype=float)
    n = f.shape[axis]
    if spectral:
        shape = [1] * f.ndim
        shape[axis] = n
        k = wavenumbers(n, period).reshape(shape)
        return np.real(np.fft.ifft(1j * k * np.fft.fft(f, axis=axis), axis=axis))
    h = period / n
    return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) / (2.0 * h)


def derivative_matrix(n: int, period: float, spectral: bool = True) -> np.ndarray:
    """Dense matrix of :func:`periodic_derivative` acting on length-n vectors."""
    return periodic_derivative(np.eye(n), period, spectral, axis=0)


# ---------------------------------------------------------------------------
# domain

@dataclass(frozen=True, eq=False)
class DomainProfile:
    """Sampled free-surface height ``zeta`` and bottom depth ``bottom`` over one period."""

    zeta: np.ndarray
    bottom: np.ndarray
    period: float = 2.0 * np.pi
    spectral: bool = True

    def __post_init__(self):
        z = np.asarray(self.zeta, dtype=float).copy()
        b = np.asarray(self.bottom, dtype=float).copy()
        if b.ndim == 0:
            b = np.full_like(z, float(b))
        if z.ndim != 1 or z.shape != b.shape:
            raise ValueError("zeta and bottom must be 1-D arrays of equal length")
        if z.size < 4:
            raise ValueError("at least 4 surface samples are required")
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(b))):
            raise ValueError("profile samples must be finite")
        if self.period <= 0:
            raise ValueError("period must be positive")
        z.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "zeta", z)
        object.__setattr__(self, "bottom", b)

    @classmethod
    def from_functions(cls, zeta, bottom, period=2.0 * np.pi, n=32, spectral=True):
        x = period * np.arange(n) / n
        z = np.broadcast_to(np.asarray(zeta(x), dtype=float), x.shape)
        b = np.broadcast_to(np.asarray(bottom(x), dtype=float), x.shape)
        return cls(z, b, period, spectral)

    @classmethod
    def flat(cls, n=32, depth=1.0, period=2.0 * np.pi, spectral=True):
        return cls(np.zeros(n), np.full(n, depth), period, spectral)

    @classmethod
    def sinusoidal(cls, amplitude, n=32, depth=1.0, period=2.0 * np.pi, wavenumber=1,
                   spectral=True):
        x = period * np.arange(n) / n
        z = amplitude * np.sin(2.0 * np.pi * wavenumber * x / period)
        return cls(z, np.full(n, depth), period, spectral)

    @property
    def n_surface(self) -> int:
        return self.zeta.size

    @property
    def x(self) -> np.ndarray:
        return self.period * np.arange(self.n_surface) / self.n_surface

    @property
    def height(self) -> np.ndarray:
        return self.zeta + self.bottom

    def d(self, f, axis=-1):
        """X1-derivative of surface-sampled data."""
        return periodic_derivative(f, self.period, self.spectral, axis=axis)

    @cached_property
    def zeta_prime(self) -> np.ndarray:
        return self.d(self.zeta)

    @cached_property
    def bottom_prime(self) -> np.ndarray:
        return self.d(self.bottom)

    @cached_property
    def metric(self) -> np.ndarray:
        """sqrt(1 + zeta'^2), the arclength density of the surface."""
        return np.sqrt(1.0 + self.zeta_prime ** 2)

    def validate(self):
        gap = self.height
        if np.any(gap <= 0.0):
            i = int(np.argmin(gap))
            raise CollapsedDomainError(
                f"zeta <= -b at surface sample {i} (zeta={self.zeta[i]:g}, b={self.bottom[i]:g})")

    def resampled(self, n: int) -> "DomainProfile":
        if n == self.n_surface:
            return self
        return DomainProfile(resample(self.zeta, n), resample(self.bottom, n),
                             self.period, self.spectral)


def _row_ops(nz: int, dr: float):
    """1-D operators in r between node rows (nz) and centre rows (nz - 1)."""
    m = nz - 1
    # node -> node, second order everywhere
    dnn = sp.lil_matrix((nz, nz))
    for j in range(1, m):
        dnn[j, j - 1] = -0.5 / dr
        dnn[j, j + 1] = 0.5 / dr
    dnn[0, 0:3] = np.array([-3.0, 4.0, -1.0]) / (2.0 * dr)
    dnn[m, m - 2:m + 1] = np.array([1.0, -4.0, 3.0]) / (2.0 * dr)
    # node -> centre
    a_nc = sp.diags([0.5, 0.5], [0, 1], shape=(m, nz))
    d_nc = sp.diags([-1.0 / dr, 1.0 / dr], [0, 1], shape=(m, nz))
    # centre -> node, interior rows only
    a_cn = sp.lil_matrix((nz, m))
    d_cn = sp.lil_matrix((nz, m))
    for j in range(1, m):
        a_cn[j, j - 1] = a_cn[j, j] = 0.5
        d_cn[j, j - 1] = -1.0 / dr
        d_cn[j, j] = 1.0 / dr
    ext = sp.lil_matrix((1, m))
    ext[0, m - 1] = 1.5
    ext[0, m - 2] = -0.5
    return dnn.tocsr(), a_nc.tocsr(), d_nc.tocsr(), a_cn.tocsr(), d_cn.tocsr(), ext.tocsr()


@dataclass(eq=False)
class MeshOperators:
    """Sparse derivative operators on flattened fields (index ``j * nx + i``).

    ``*_n``: node to node, ``*_nc``: node to centre, ``*_cn``: centre to node
    (rows of bottom and surface nodes are empty), ``surf_q``: centre values
    extrapolated to surface nodes.
    """

    dx_n: sp.csr_matrix
    dy_n: sp.csr_matrix
    dx_nc: sp.csr_matrix
    dy_nc: sp.csr_matrix
    dx_cn: sp.csr_matrix
    dy_cn: sp.csr_matrix
    avg_nc: sp.csr_matrix
    surf_q: sp.csr_matrix
    ds_surface: np.ndarray


@dataclass(eq=False)
class Mesh:
    profile: DomainProfile
    nx: int
    nz: int
    X1: np.ndarray
    X2: np.ndarray

    @property
    def surface_index(self) -> int:
        return self.nz - 1

    @property
    def bottom_index(self) -> int:
        return 0

    @property
    def dr(self) -> float:
        return 1.0 / (self.nz - 1)

    @property
    def ds(self) -> float:
        return self.profile.period / self.nx

    @property
    def r(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.nz)

    @property
    def r_c(self) -> np.ndarray:
        return (np.arange(self.nz - 1) + 0.5) * self.dr

    @property
    def shape(self):
        return (self.nz, self.nx)

    @property
    def center_shape(self):
        return (self.nz - 1, self.nx)

    @cached_property
    def X2_c(self) -> np.ndarray:
        p = self.profile
        return -p.bottom[None, :] + self.r_c[:, None] * p.height[None, :]

    @cached_property
    def jacobian(self) -> np.ndarray:
        """dX2/dr at cell centres; positive for a valid mesh."""
        return np.broadcast_to(self.profile.height, self.center_shape).copy()

    def _metric(self, r):
        # d/dX1 = d/ds + c1 d/dr,  d/dX2 = c2 d/dr
        p = self.profile
        H = p.height
        c1 = (p.bottom_prime[None, :] - r[:, None] * (p.d(H))[None, :]) / H[None, :]
        c2 = np.broadcast_to(1.0 / H, (r.size, self.nx))
        return c1, c2

    @cached_property
    def node_weights(self) -> np.ndarray:
        """Trapezoid quadrature weights (area) at nodes."""
        w = np.full(self.nz, self.dr)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w[:, None] * self.profile.height[None, :] * self.ds

    @cached_property
    def center_weights(self) -> np.ndarray:
        return np.full(self.center_shape, self.dr) * self.profile.height[None, :] * self.ds

    @cached_property
    def surface_weights(self) -> np.ndarray:
        """Arclength weights along the surface."""
        return self.profile.metric * self.ds

    @cached_property
    def ops(self) -> MeshOperators:
        nx, nz = self.nx, self.nz
        p = self.profile
        ds = derivative_matrix(nx, p.period, p.spectral)
        ds[np.abs(ds) < 1e-15 * np.abs(ds).max()] = 0.0
        dnn, a_nc, d_nc, a_cn, d_cn, ext = _row_ops(nz, self.dr)
        Ix = sp.identity(nx, format="csr")
        Iz = sp.identity(nz, format="csr")
        Ds = sp.csr_matrix(ds)
        c1, c2 = self._metric(self.r)
        c1c, c2c = self._metric(self.r_c)
        diag = lambda a: sp.diags(np.ravel(a))
        dx_n = sp.kron(Iz, Ds) + diag(c1) @ sp.kron(dnn, Ix)
        dy_n = diag(c2) @ sp.kron(dnn, Ix)
        dx_nc = sp.kron(a_nc, Ds) + diag(c1c) @ sp.kron(d_nc, Ix)
        dy_nc = diag(c2c) @ sp.kron(d_nc, Ix)
        dx_cn = sp.kron(a_cn, Ds) + diag(c1) @ sp.kron(d_cn, Ix)
        dy_cn = diag(c2) @ sp.kron(d_cn, Ix)
        return MeshOperators(
            dx_n=dx_n.tocsr(), dy_n=dy_n.tocsr(),
            dx_nc=dx_nc.tocsr(), dy_nc=dy_nc.tocsr(),
            dx_cn=dx_cn.tocsr(), dy_cn=dy_cn.tocsr(),
            avg_nc=sp.kron(a_nc, Ix).tocsr(),
            surf_q=sp.kron(ext, Ix).tocsr(),
            ds_surface=ds,
        )

    # -- convenience wrappers on (nz, nx) arrays -------------------------
    def _apply(self, op, f, out_shape):
        f = np.asarray(f, dtype=float)
        lead = f.shape[:-2]
        flat = f.reshape(-1, f.shape[-2] * f.shape[-1]).T
        return np.asarray(op @ flat).T.reshape(lead + out_shape)

    def grad(self, f):
        """Nodal gradient; appends an axis of length 2 before the grid axes."""
        o = self.ops
        gx = self._apply(o.dx_n, f, self.shape)
        gy = self._apply(o.dy_n, f, self.shape)
        return np.stack([gx, gy], axis=-3)

    def grad_nc(self, f):
        o = self.ops
        gx = self._apply(o.dx_nc, f, self.center_shape)
        gy = self._apply(o.dy_nc, f, self.center_shape)
        return np.stack([gx, gy], axis=-3)

    def grad_cn(self, w):
        o = self.ops
        gx = self._apply(o.dx_cn, w, self.shape)
        gy = self._apply(o.dy_cn, w, self.shape)
        return np.stack([gx, gy], axis=-3)

    def to_centers(self, f):
        return self._apply(self.ops.avg_nc, f, self.center_shape)

    def center_to_surface(self, w):
        w = np.asarray(w, dtype=float)
        return 1.5 * w[..., -1, :] - 0.5 * w[..., -2, :]

    def tensor_grad(self, v):
        """(dv_i/dX_j) at nodes for a vector field ``(..., 2, nz, nx)``."""
        return self.grad(v)

    def tensor_grad_nc(self, v):
        return self.grad_nc(v)


def build_mesh(profile: DomainProfile, nx: int, nz: int) -> Mesh:
    """Boundary-fitted structured mesh with ``nx`` equispaced columns and ``nz`` rows."""
    if nx < 4 or nz < 3:
        raise ValueError("mesh needs nx >= 4 and nz >= 3")
    profile.validate()
    p = profile.resampled(nx)
    p.validate()
    r = np.linspace(0.0, 1.0, nz)
    X1 = np.broadcast_to(p.x, (nz, nx)).copy()
    X2 = -p.bottom[None, :] + r[:, None] * p.height[None, :]
    return Mesh(p, nx, nz, X1, X2)


# ---------------------------------------------------------------------------
# Lagrangian geometry

def xi_from_eta(d_eta):
    """xi = (Id + d_eta)^-1 - Id by exact nodewise 2x2 inversion."""
    d = np.asarray(d_eta, dtype=float)
    a = 1.0 + d[0, 0]
    b = d[0, 1]
    c = d[1, 0]
    e = 1.0 + d[1, 1]
    det = a * e - b * c
    bad = np.abs(det) < DET_TOL
    if np.any(bad):
        idx = tuple(int(i[0]) for i in np.nonzero(bad))
        raise SingularMapError(f"det(Id + d_eta) = {det[idx]:.3e} at node {idx}")
    xi = np.empty_like(d)
    xi[0, 0] = e / det - 1.0
    xi[0, 1] = -b / det
    xi[1, 0] = -c / det
    xi[1, 1] = a / det - 1.0
    return xi


def tangential_derivative(f, profile: DomainProfile):
    return profile.d(f) / profile.metric


def surface_normal(profile: DomainProfile) -> np.ndarray:
    zp = profile.zeta_prime
    return np.stack([-zp, np.ones_like(zp)]) / profile.metric


def surface_tangent(profile: DomainProfile) -> np.ndarray:
    zp = profile.zeta_prime
    return np.stack([np.ones_like(zp), zp]) / profile.metric


def calN_from_eta(eta_s, profile: DomainProfile) -> np.ndarray:
    N = surface_normal(profile)
    dT = tangential_derivative(eta_s, profile)
    return np.stack([N[0] - dT[1], N[1] + dT[0]])


def _check_folding(e1x):
    gap = 1.0 + e1x
    if np.any(np.abs(gap) < FOLD_TOL):
        i = int(np.argmin(np.abs(gap)))
        raise FoldingError(f"1 + d(eta_1)/dX1 = {gap[i]:.3e} at surface node {i}")


def phi_from_eta(eta_s, profile: DomainProfile) -> np.ndarray:
    e1x = profile.d(eta_s[0])
    e2x = profile.d(eta_s[1])
    _check_folding(e1x)
    zp = profile.zeta_prime
    return (zp + e2x) / (1.0 + e1x) - zp


def unit_slope_vector(slope) -> np.ndarray:
    """(1, s) / sqrt(1 + s^2)."""
    s = np.asarray(slope, dtype=float)
    w = 1.0 / np.sqrt(1.0 + s * s)
    return np.stack([w, s * w])


def curvature_term(Phi, profile: DomainProfile, eta_s) -> np.ndarray:
    """H n on the moving surface, written through Phi."""
    e1x = profile.d(eta_s[0])
    e2x = profile.d(eta_s[1])
    _check_folding(e1x)
    zp = profile.zeta_prime
    pre = profile.metric / np.sqrt((1.0 + e1x) ** 2 + (zp + e2x) ** 2)
    W = unit_slope_vector(np.asarray(Phi) + zp)
    return pre * tangential_derivative(W, profile)


def phi_rate(u_s, calN, profile: DomainProfile) -> np.ndarray:
    """Time derivative of Phi from the surface velocity trace."""
    calN = np.asarray(calN)
    if np.any(np.abs(calN[1]) < OVERTURN_TOL):
        i = int(np.argmin(np.abs(calN[1])))
        raise OverturnedSurfaceError(f"|calN_2| = {abs(calN[1][i]):.3e} at surface node {i}")
    dTu = tangential_derivative(u_s, profile)
    return (dTu[0] * calN[0] + dTu[1] * calN[1]) / calN[1] ** 2


def phi_rate_linear(u_s, profile: DomainProfile) -> np.ndarray:
    """d_T u . N, the rate of the linearised surface unknown phi."""
    N = surface_normal(profile)
    dTu = tangential_derivative(u_s, profile)
    return dTu[0] * N[0] + dTu[1] * N[1]


@dataclass(eq=False)
class GeometryState:
    mesh: Mesh
    eta: np.ndarray      # (2, nz, nx)
    d_eta: np.ndarray    # (2, 2, nz, nx)
    xi: np.ndarray       # (2, 2, nz, nx)
    xi_c: np.ndarray     # (2, 2, nz-1, nx)
    N: np.ndarray        # (2, nx)
    calN: np.ndarray     # (2, nx)
    Phi: np.ndarray      # (nx,)

    @property
    def eta_s(self):
        return self.eta[:, -1, :]

    @property
    def xibar(self):
        return self.xi + np.eye(2)[:, :, None, None]

    @property
    def xibar_c(self):
        return self.xi_c + np.eye(2)[:, :, None, None]


def geometry_from_eta(eta, mesh: Mesh) -> GeometryState:
    eta = np.asarray(eta, dtype=float)
    d_eta = mesh.grad(eta)
    xi = xi_from_eta(d_eta)
    xi_c = xi_from_eta(mesh.grad_nc(eta))
    p = mesh.profile
    eta_s = eta[:, -1, :]
    return GeometryState(mesh, eta, d_eta, xi, xi_c, surface_normal(p),
                         calN_from_eta(eta_s, p), phi_from_eta(eta_s, p))


def initial_geometry(mesh: Mesh) -> GeometryState:
    return geometry_from_eta(np.zeros((2,) + mesh.shape), mesh)


def advance_eta(geom: GeometryState, u, dt: float) -> GeometryState:
    """Explicit Euler on d(eta)/dt = u, then rebuild every derived quantity."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return geometry_from_eta(geom.eta + dt * np.asarray(u, dtype=float), geom.mesh)


def geometry_trajectory(u_traj, dt: float, mesh: Mesh):
    """Geometry at every time level of a velocity trajectory (eta(0) = 0)."""
    geoms = [initial_geometry(mesh)]
    for n in range(1, len(u_traj)):
        geoms.append(advance_eta(geoms[-1], u_traj[n - 1], dt))
    return geoms
