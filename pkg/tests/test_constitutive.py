import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from viscofree import constitutive as cst
from viscofree.constitutive import (ConstitutiveError, Giesekus, JohnsonSegalman, PTTExponential,
                                    PTTLinear, full_lagrangian_stress_residual, g_a,
                                    integrate_stress, lift_sigma1, make_law, picard_sigma_step)
from viscofree.scaling import DimensionlessParams


def oracle_g(G, S, a):
    return 0.5 * (a - 1) * (G.T @ S + S @ G) + 0.5 * (a + 1) * (S @ G.T + G @ S)


def sym(S):
    return np.array([S[0, 0], S[0, 1], S[1, 1]])


def test_g_a_zero_gradient():
    s = np.random.default_rng(0).normal(size=(3, 4))
    assert np.all(g_a(np.zeros((2, 2, 4)), s, 0.3) == 0)


def test_g_a_upper_convected_limit():
    rng = np.random.default_rng(1)
    G = rng.normal(size=(2, 2))
    S = rng.normal(size=(2, 2))
    S = S + S.T
    np.testing.assert_allclose(g_a(G, sym(S), 1.0), sym(S @ G.T + G @ S), atol=1e-14)


def test_g_a_worked_example():
    G = np.array([[0.0, 1.0], [0.0, 0.0]])
    S = np.diag([1.0, 2.0])
    want = 0.5 * ((G.T @ S + S @ G) * -1 + (S @ G.T + G @ S))
    # entries by hand: G^T S + S G = [[0,1],[1,0]], S G^T + G S = [[0,2],[2,0]]
    np.testing.assert_allclose(want, [[0, 0.5], [0.5, 0]])
    np.testing.assert_allclose(g_a(G, sym(S), 0.0), sym(want), atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(-1, 1))
def test_g_a_matches_matrix_oracle(seed, a):
    rng = np.random.default_rng(seed)
    G = rng.normal(size=(2, 2))
    S = rng.normal(size=(2, 2))
    S = S + S.T
    np.testing.assert_allclose(g_a(G, sym(S), a), sym(oracle_g(G, S, a)), atol=1e-12)
    full = cst.g_a_tensor(G, S, a)
    np.testing.assert_allclose(full, full.T, atol=1e-14)


def test_g_a_matrix_is_linear_map():
    rng = np.random.default_rng(2)
    G = rng.normal(size=(2, 2, 5))
    s = rng.normal(size=(3, 5))
    M = cst.g_a_matrix(G, 0.4)
    np.testing.assert_allclose(np.einsum("nij,jn->in", M, s), g_a(G, s, 0.4), atol=1e-13)


def test_zero_data_gives_zero_stress():
    p = DimensionlessParams(We=0.7, eps=0.4)
    G = np.zeros((6, 2, 2, 3, 4))
    out = picard_sigma_step(np.zeros((6, 3, 3, 4)), G, None, None, None, 0.1, p,
                            JohnsonSegalman())
    assert np.all(out == 0)


def test_constant_source_first_order():
    We, m0 = 0.5, np.array([1.0, -0.5, 2.0])
    p = DimensionlessParams(We=We, eps=0.3)
    errs = []
    for nt in (20, 40, 80):
        dt = 1.0 / nt
        m = np.broadcast_to(m0[:, None], (nt + 1, 3, 1)).copy()
        out = picard_sigma_step(np.zeros((nt + 1, 3, 1)), np.zeros((nt + 1, 2, 2, 1)), None, None,
                                m, dt, p, JohnsonSegalman())
        t = dt * np.arange(nt + 1)
        ex = m0[None, :, None] * (1 - np.exp(-t / We))[:, None, None]
        errs.append(np.max(np.abs(out - ex)))
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all((orders > 0.9) & (orders < 1.1))


def test_lift_examples():
    s0 = np.array([1.0, 0.3, -2.0])[:, None]
    We, dt, nt = 0.4, 0.05, 20
    out = lift_sigma1(s0, None, We, dt, nt)
    t = dt * np.arange(nt + 1)
    np.testing.assert_allclose(out, np.exp(-t / We)[:, None, None] * s0, rtol=1e-13)
    assert np.array_equal(out[0], s0)
    c = 0.8
    errs = []
    for k in (1, 2, 4):
        n = nt * k
        tt = (dt / k) * np.arange(n + 1)
        out = lift_sigma1(np.zeros((3, 1)), np.full((n + 1, 3, 1), c), We, dt / k)
        errs.append(np.max(np.abs(out - c * (1 - np.exp(-tt / We))[:, None, None])))
    assert errs[0] < 1e-3
    # trapezoidal convolution: second order
    assert errs[0] / errs[1] > 3.8 and errs[1] / errs[2] > 3.8
    m1 = np.random.default_rng(0).normal(size=(nt + 1, 3, 1))
    np.testing.assert_array_equal(lift_sigma1(s0, m1, 0.0, dt), m1)
    with pytest.raises(ValueError):
        lift_sigma1(s0, None, We, dt)


def test_we_zero_is_algebraic():
    p = DimensionlessParams(We=0.0, eps=0.4)
    rng = np.random.default_rng(3)
    G = rng.normal(size=(3, 2, 2, 4))
    out = integrate_stress(np.zeros((3, 4)), G, 0.1, p, JohnsonSegalman())
    np.testing.assert_allclose(out, np.stack([2 * 0.4 * cst.rate_of_strain(g) for g in G]))


def test_nan_and_singular_inputs():
    p = DimensionlessParams(We=1.0, eps=0.4)
    G = np.zeros((3, 2, 2, 2))
    G[1, 0, 0, 1] = np.nan
    with pytest.raises(ConstitutiveError):
        integrate_stress(np.zeros((3, 2)), G, 0.1, p, JohnsonSegalman())
    # 1 + We/dt - 2 We g11 = 0 makes the 11 row singular for a = 1
    G = np.zeros((2, 2, 2, 1))
    G[1, 0, 0] = (1 + 1 / 0.1) / 2
    with pytest.raises(ConstitutiveError, match="node"):
        integrate_stress(np.zeros((3, 1)), G, 0.1, p, JohnsonSegalman())


@pytest.mark.parametrize("law", [JohnsonSegalman(0.3), Giesekus(0.3, 0.2),
                                 PTTExponential(0.3, 0.15), PTTLinear(0.3, 0.15),
                                 PTTExponential(0.3, 0.15, we_in_exponent=True)])
def test_lagged_terms_consistent_at_fixed_point(law):
    rng = np.random.default_rng(5)
    lift = rng.normal(size=(3, 6))
    s = rng.normal(size=(3, 6))
    We = 0.6
    mat, src = law.picard_terms(s, lift, We)
    lhs = np.zeros_like(s) if mat is None else np.einsum("nij,jn->in", mat, s)
    if src is not None:
        lhs = lhs - src
    want = law.nonlinear(lift + s, We) - law.nonlinear(lift, We)
    np.testing.assert_allclose(lhs, want, atol=1e-12)


def test_ptt_small_trace_is_accurate():
    law = PTTExponential(1.0, 1e-3)
    s = np.array([1e-9, 0.0, 1e-9])
    np.testing.assert_allclose(law.nonlinear(s, 1.0), 2e-12 * s, rtol=1e-6)
    assert PTTExponential(1.0, 0.1, True)._k(2.0) == pytest.approx(0.2)


def test_make_law_and_validation():
    assert isinstance(make_law("oldroyd_b"), JohnsonSegalman)
    assert isinstance(make_law("giesekus", c_giesekus=0.3), Giesekus)
    assert isinstance(make_law("ptt_linear"), PTTLinear)
    with pytest.raises(ValueError):
        make_law("maxwell")
    with pytest.raises(ValueError):
        Giesekus(1.0, 0.0)
    with pytest.raises(ValueError):
        JohnsonSegalman(2.0)


def _p1_residual(sig, G, dt, p, law):
    out = []
    for n in range(1, sig.shape[0]):
        out.append(sig[n] + p.We * ((sig[n] - sig[n - 1]) / dt - g_a(G[n], sig[n], p.a))
                   - 2 * p.eps * cst.rate_of_strain(G[n]) + law.nonlinear(sig[n], p.We))
    return np.stack(out)


def test_full_residual_examples():
    p = DimensionlessParams(We=0.5, eps=0.3, a=0.2)
    law = Giesekus(0.2, 0.1)
    nt, dt = 5, 0.1
    eye = np.broadcast_to(np.eye(2)[None, :, :, None], (nt + 1, 2, 2, 4))
    z = full_lagrangian_stress_residual(np.zeros((nt + 1, 3, 4)), np.zeros((nt + 1, 2, 2, 4)),
                                        eye, dt, p, law)
    assert np.all(z == 0)
    rng = np.random.default_rng(7)
    sig = rng.normal(size=(nt + 1, 3, 4))
    G = rng.normal(size=(nt + 1, 2, 2, 4))
    r = full_lagrangian_stress_residual(sig, G, eye, dt, p, law)
    np.testing.assert_allclose(r, _p1_residual(sig, G, dt, p, law), atol=1e-12)


def test_full_residual_relaxation_is_first_order():
    p = DimensionlessParams(We=0.5, eps=0.3)
    s0 = np.array([1.0, 0.5, -1.0])
    errs = []
    for nt in (10, 20, 40):
        dt = 1.0 / nt
        t = dt * np.arange(nt + 1)
        sig = np.exp(-t / p.We)[:, None, None] * s0[None, :, None]
        eye = np.broadcast_to(np.eye(2)[None, :, :, None], (nt + 1, 2, 2, 1))
        r = full_lagrangian_stress_residual(sig, np.zeros((nt + 1, 2, 2, 1)), eye, dt, p,
                                            JohnsonSegalman())
        errs.append(np.max(np.abs(r)))
    assert 1.8 < errs[0] / errs[1] < 2.2 and 1.8 < errs[1] / errs[2] < 2.2


def test_bound_conditions():
    v, ok = cst.giesekus_bound_condition(0.1, 1.0, 1.0, 1.0)
    assert v == pytest.approx(0.2) and ok
    v, ok = cst.giesekus_bound_condition(0.1, 10.0, 5.0, 1.0)
    assert not ok
    v, ok = cst.ptt_bound_condition(0.1, 1.0, 1.0)
    assert v == pytest.approx(np.expm1(0.1)) and ok
