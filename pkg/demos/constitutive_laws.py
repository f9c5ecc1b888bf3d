"""Same relaxing surface, four stress laws.

Johnson-Segalman, Giesekus and the two Phan-Thien-Tanner variants differ
only through their nonlinear terms, which are tiny for this gentle flow.
The Giesekus and PTT smallness conditions are printed for the measured
stress bound.
"""
import numpy as np

from viscofree import (DimensionlessParams, DomainProfile, Problem, SolverSettings,
                       build_mesh, make_law, solve_full)
from viscofree.constitutive import giesekus_bound_condition, ptt_bound_condition

mesh = build_mesh(DomainProfile.sinusoidal(0.1, 16), 16, 9)
params = DimensionlessParams(Re=1.0, We=0.5, eps=0.5, alpha=1.0, g0=1.0, a=1.0)
u0, s0 = np.zeros((2,) + mesh.shape), np.zeros((3,) + mesh.shape)
s0[0] = s0[2] = 0.2          # isotropic prestress: compatible, and it makes the laws differ

for kind, kw in [("johnson_segalman", {}), ("giesekus", {"c_giesekus": 0.3}),
                 ("ptt_exponential", {"eps_ptt": 0.2}), ("ptt_linear", {"eps_ptt": 0.2})]:
    prob = Problem(mesh, params, make_law(kind, **kw), 0.02, 10, SolverSettings())
    sol = solve_full(u0, s0, prob)
    S = float(np.max(sol.report.sigma_sup))
    line = (f"{kind:<17} outer={sol.report.iterations} kappa={sol.report.kappa:.2e} "
            f"sup sigma={S:.4f} trace(T)={np.mean(sol.state.sigma[-1][[0, 2]]):.5f}")
    if kind == "giesekus":
        line += f"  2cST/We={giesekus_bound_condition(0.3, S, prob.T, params.We)[0]:.3f}"
    elif kind.startswith("ptt"):
        line += f"  ptt condition={ptt_bound_condition(0.2, S, prob.T)[0]:.3f}"
    print(line)
