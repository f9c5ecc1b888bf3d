"""Acceptance criteria 1-11, each at its stated tolerance.

Every test writes one ``criterion N: PASS|FAIL`` line to the terminal
before asserting, so ``pytest -v`` output doubles as the acceptance report.
"""
import numpy as np
import pytest

from conftest import make_problem, zero_initial
from viscofree import stokes
from viscofree.constitutive import (g_a, g_a_tensor, giesekus_bound_condition, integrate_stress, make_law,
                                    ptt_bound_condition)
from viscofree.fixed_point import (FlowState, Q1, Q2, error_terms, full_residual, march_windows,
                                   residual_norms, solve_full, state_norm)
from viscofree.geometry import DomainProfile, build_mesh, geometry_trajectory
from viscofree.harness import manufactured_step
from viscofree.norms import fit_slope, run_lemma_suite
from viscofree.scaling import DimensionlessParams

P = DimensionlessParams(Re=1.0, We=0.5, eps=0.5, alpha=1.0, g0=1.0, a=1.0)


@pytest.fixture
def report(request):
    tr = request.config.pluginmanager.getplugin("terminalreporter")

    def emit(n, ok, detail):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
        if tr is not None:
            tr.write_line("")
            tr.write_line(line)
        else:
            print(line)
        return ok
    return emit


def bump(amp=0.05, nx=16, nz=9):
    return build_mesh(DomainProfile.sinusoidal(amp, nx), nx, nz)


def test_c01_flat_equilibrium(report):
    mesh = build_mesh(DomainProfile.flat(16, depth=1.0), 16, 9)
    prob = make_problem(mesh, P, nt=10, dt=0.02)
    sols = march_windows(*zero_initial(mesh), prob, 10)
    steps = sum(s.problem.nt for s in sols)
    worst = 0.0
    for s in sols:
        st = s.state
        worst = max(worst, *(float(np.max(np.abs(a))) for a in (st.u, st.q, st.phi, st.sigma)),
                    float(np.max(np.abs(s.eta))))
    ok = steps == 100 and worst <= 1e-12
    report(1, ok, f"steps={steps} max|field|={worst:.2e} (<= 1e-12)")
    assert ok


def test_c02_stress_relaxation_order(report):
    We, T = 0.5, 1.0
    p = DimensionlessParams(We=We, eps=0.4)
    s0 = np.array([0.7, -0.2, 1.1])[:, None, None]
    errs = []
    for nt in (20, 40, 80):
        G = np.zeros((nt + 1, 2, 2, 3, 4))
        out = integrate_stress(np.broadcast_to(s0, (3, 3, 4)), G, T / nt, p,
                               make_law("johnson_segalman"))
        t = np.linspace(0, T, nt + 1)
        exact = s0[None] * np.exp(-t / We)[:, None, None, None]
        errs.append(float(np.max(np.abs(out - exact))))
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    ok = bool(np.all(np.abs(orders - 1.0) <= 0.1))
    report(2, ok, f"errors={['%.2e' % e for e in errs]} orders={np.round(orders, 3).tolist()}")
    assert ok


def test_c03_g_a_algebra(report):
    rng = np.random.default_rng(2024)
    worst_sym = worst_lin = worst_aff = 0.0
    for _ in range(1000):
        G1, G2 = rng.normal(size=(2, 2, 2))
        S1, S2 = rng.normal(size=(2, 3))
        a, b, c, d = rng.uniform(-1, 1, 4)
        Sf = np.array([[S1[0], S1[1]], [S1[1], S1[2]]])
        full = g_a_tensor(G1, Sf, a)
        r = g_a(G1, S1, a)
        worst_sym = max(worst_sym, float(np.max(np.abs(full - full.T))),
                        float(np.max(np.abs(r - full[[0, 0, 1], [0, 1, 1]]))))
        lin_u = g_a(b * G1 + c * G2, S1, a) - b * g_a(G1, S1, a) - c * g_a(G2, S1, a)
        lin_s = g_a(G1, b * S1 + c * S2, a) - b * g_a(G1, S1, a) - c * g_a(G1, S2, a)
        scale = 1 + np.max(np.abs(G1)) * np.max(np.abs(S1)) * 4
        worst_lin = max(worst_lin, float(np.max(np.abs(lin_u)) + np.max(np.abs(lin_s))) / scale)
        aff = g_a(G1, S1, d * a + (1 - d) * b) - (d * g_a(G1, S1, a) + (1 - d) * g_a(G1, S1, b))
        worst_aff = max(worst_aff, float(np.max(np.abs(aff))) / scale)
    ok = worst_sym == 0 and worst_lin <= 1e-13 and worst_aff <= 1e-13
    report(3, ok, f"symmetry={worst_sym:.1e} bilinearity={worst_lin:.1e} affinity={worst_aff:.1e}")
    assert ok


def test_c04_incompressibility_every_solve(report, monkeypatch):
    seen = []
    orig = stokes.StokesOperator.solve

    def checked(self, prev, rhs, sigma=None, check=True):
        sol = orig(self, prev, rhs, sigma, check)
        rr = stokes.residual_report(sol, rhs, sigma, self.dt, self.params, self.mesh, prev=prev,
                                    relative=True)
        seen.append(rr["divergence"])
        return sol

    monkeypatch.setattr(stokes.StokesOperator, "solve", checked)
    mesh = bump()
    solve_full(*zero_initial(mesh), make_problem(mesh, P, nt=5, dt=0.04))
    for n in (8, 16):
        manufactured_step(n)
    worst = max(seen)
    ok = len(seen) > 50 and worst <= 1e-10
    report(4, ok, f"solves={len(seen)} max relative |div u - a|={worst:.2e}")
    assert ok


def test_c05_manufactured(report):
    levels = (8, 16, 32)
    res = [manufactured_step(n) for n in levels]
    errs = np.array([r[0] for r in res])
    orders = np.log2(errs[:-1] / errs[1:])
    trac = res[-1][1]
    ok = bool(np.all(orders >= 1.0)) and trac <= 1e-8
    report(5, ok, f"orders={np.round(orders, 3).tolist()} traction_finest={trac:.1e}")
    assert ok


def test_c06_contraction_scaling(report):
    mesh = bump()
    Ts = (0.8, 0.4, 0.2, 0.1)
    ks = []
    for T in Ts:
        prob = make_problem(mesh, P, nt=8, dt=T / 8, tol=1e-14, inner_tol=1e-14, max_iter=6)
        ks.append(solve_full(*zero_initial(mesh), prob).report.kappa)
    slope = fit_slope(Ts, ks)
    ok = all(a > b for a, b in zip(ks, ks[1:])) and slope > 0
    report(6, ok, f"kappa={['%.2e' % k for k in ks]} slope={slope:.3f}")
    assert ok


@pytest.mark.parametrize("law", ["johnson_segalman", "giesekus", "ptt_exponential"])
def test_c07_uniform_stress_bound(report, law):
    mesh = bump(0.1)
    kw = {"c_giesekus": 0.2} if law == "giesekus" else {"eps_ptt": 0.1}
    L = make_law(law, a=P.a, **kw)
    prob = make_problem(mesh, P, law=L, nt=10, dt=0.02, tol=0.0, inner_tol=1e-13, max_iter=50)
    rep = solve_full(*zero_initial(mesh), prob).report
    sup = np.array(rep.sigma_sup)
    S = 2 * sup[9]
    extra = ""
    cond = True
    if law == "giesekus":
        v, cond = giesekus_bound_condition(0.2, S, prob.T, P.We)
        extra = f" 2cST/We={v:.2e}"
    elif law == "ptt_exponential":
        v, cond = ptt_bound_condition(0.1, S, prob.T)
        extra = f" ptt_condition={v:.2e}"
    ok = rep.iterations == 50 and cond and bool(np.all(sup <= S))
    report(7, ok, f"[{law}] iterations={rep.iterations} sup(it10)={sup[9]:.4e} "
                  f"max sup={sup.max():.4e} <= {S:.4e}{extra}")
    assert ok


def test_c08_zeroth_order_cancellation(report):
    mesh = bump()
    prob = make_problem(mesh, P, nt=3)
    x = FlowState.zeros(mesh, 3)
    x.sigma[:] = 0.3                       # stress and pressure alone do not generate E
    x.q[:] = 0.7
    E = error_terms(x, geometry_trajectory(x.u, prob.dt, mesh), prob)
    worst = max(float(np.max(np.abs(a))) for a in E.slots().values())
    zp = mesh.profile.zeta_prime
    q = float(np.max(np.abs(Q1(0 * zp, zp))) + np.max(np.abs(Q2(0 * zp, zp))))
    ok = worst == 0 and q == 0
    report(8, ok, f"max|E|={worst:.1e} max|Q(0)|={q:.1e}")
    assert ok


def test_c09_full_residual(report):
    mesh = bump()
    prob = make_problem(mesh, P, nt=10, dt=0.02)
    sol = solve_full(*zero_initial(mesh), prob)
    norms = residual_norms(full_residual(sol.state, sol.geoms, prob), mesh, prob.dt)
    worst = max(norms.values())
    ok = sol.report.converged and worst <= 10 * prob.settings.tol
    report(9, ok, f"converged={sol.report.converged} outer={sol.report.iterations} "
                  f"max residual={worst:.2e} (<= {10 * prob.settings.tol:.0e})")
    assert ok


def test_c10_lemma_suite(report):
    rows, neg = run_lemma_suite()
    failed = [f"{name}:{k}" for name, rep in rows for k, v in rep.items() if not v.passed]
    ok = not failed and neg.passed
    report(10, ok, f"samples={len(rows)} failed={failed or 'none'} control {neg.detail}")
    assert ok


def test_c11_newtonian_reduction(report):
    mesh = bump()
    p = P.replace(eps=0.0)
    a = solve_full(*zero_initial(mesh), make_problem(mesh, p, nt=10, dt=0.02))
    b = solve_full(*zero_initial(mesh), make_problem(mesh, p, nt=10, dt=0.02, stub_stress=True))
    diff = max(float(np.max(np.abs(x - y))) for x, y in
               ((a.state.u, b.state.u), (a.state.q, b.state.q), (a.state.phi, b.state.phi)))
    smax = float(np.max(np.abs(a.state.sigma)))
    ok = diff <= 1e-10 and smax == 0
    report(11, ok, f"max nodal difference={diff:.1e} max|sigma|={smax:.1e}")
    assert ok
