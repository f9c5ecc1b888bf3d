"""Physical to dimensionless parameters and fields."""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np


@dataclass(frozen=True)
class PhysicalParams:
    rho: float
    mu_sol: float
    mu_pol: float
    lam: float
    g_tilde: float
    alpha_tilde: float
    P_atm: float
    L: float
    U0: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not np.isfinite(v):
                raise ValueError(f"{f.name} must be finite")
        for name in ("mu_pol", "lam"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("rho", "mu_sol", "g_tilde", "alpha_tilde", "P_atm", "L", "U0"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")

    @property
    def mu_total(self) -> float:
        return self.mu_sol + self.mu_pol

    @property
    def stress_scale(self) -> float:
        return self.mu_total * self.U0 / self.L


@dataclass(frozen=True)
class DimensionlessParams:
    Re: float = 1.0
    We: float = 1.0
    eps: float = 0.5
    alpha: float = 0.0
    g0: float = 0.0
    a: float = 1.0

    def __post_init__(self):
        if not self.Re > 0:
            raise ValueError("Re must be > 0")
        if not self.We >= 0:
            raise ValueError("We must be >= 0")
        if not 0.0 <= self.eps < 1.0:
            raise ValueError("eps must lie in [0, 1); eps = 1 removes the solvent viscosity")
        if not -1.0 <= self.a <= 1.0:
            raise ValueError("slip parameter a must lie in [-1, 1]")
        if self.alpha < 0 or self.g0 < 0:
            raise ValueError("alpha and g0 must be >= 0")

    def replace(self, **kw) -> "DimensionlessParams":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(kw)
        return DimensionlessParams(**d)


def nondimensionalize(p: PhysicalParams, a: float = 1.0) -> DimensionlessParams:
    mu = p.mu_sol + p.mu_pol
    if mu <= 0:
        raise ValueError("mu_sol + mu_pol must be positive")
    return DimensionlessParams(
        Re=p.rho * p.L * p.U0 / mu,
        We=p.lam * p.U0 / p.L,
        eps=p.mu_pol / mu,
        alpha=p.alpha_tilde / (p.U0 * mu),
        g0=p.rho * p.g_tilde * p.L ** 2 / (mu * p.U0),
        a=a,
    )


def scale_fields(v_phys, p_phys, tau_phys, x2_phys, params: PhysicalParams):
    """Dimensionless (v, p, tau); ``x2_phys`` is the physical vertical coordinate.

    The pressure has the atmospheric level and the hydrostatic head removed,
    so a fluid at rest under gravity maps to p = 0.
    """
    s = params.stress_scale
    x2 = np.asarray(x2_phys, dtype=float) / params.L
    v = np.asarray(v_phys, dtype=float) / params.U0
    p = (np.asarray(p_phys, dtype=float) - params.P_atm
         + params.rho * params.g_tilde * params.L * x2) / s
    tau = np.asarray(tau_phys, dtype=float) / s
    return v, p, tau


def unscale_fields(v, p, tau, x2_phys, params: PhysicalParams):
    s = params.stress_scale
    x2 = np.asarray(x2_phys, dtype=float) / params.L
    v_phys = np.asarray(v, dtype=float) * params.U0
    p_phys = np.asarray(p, dtype=float) * s + params.P_atm - params.rho * params.g_tilde * params.L * x2
    tau_phys = np.asarray(tau, dtype=float) * s
    return v_phys, p_phys, tau_phys
