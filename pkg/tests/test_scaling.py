import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from viscofree.scaling import (DimensionlessParams, PhysicalParams, nondimensionalize,
                               scale_fields, unscale_fields)


def phys(**kw):
    base = dict(rho=1000.0, mu_sol=0.5, mu_pol=0.5, lam=2.0, g_tilde=9.81, alpha_tilde=0.07,
                P_atm=1e5, L=1.0, U0=1.0)
    base.update(kw)
    return PhysicalParams(**base)


def test_newtonian_limit():
    assert nondimensionalize(phys(mu_pol=0.0)).eps == 0.0


def test_numbers():
    d = nondimensionalize(phys())
    assert d.Re == pytest.approx(1000.0)
    assert d.eps == pytest.approx(0.5)
    assert d.We == pytest.approx(2.0)
    assert d.alpha == pytest.approx(0.07)
    assert d.g0 == pytest.approx(1000 * 9.81)


def test_hydrostatic_rest_maps_to_zero():
    p = phys(L=0.3)
    x2 = np.linspace(-0.3, 0.0, 7)
    pres = p.P_atm - p.rho * p.g_tilde * x2
    v, q, tau = scale_fields(np.zeros(7), pres, np.zeros(7), x2, p)
    assert np.all(v == 0)
    np.testing.assert_allclose(q, 0.0, atol=1e-9)


def test_stress_scale():
    p = phys(mu_sol=0.6, mu_pol=0.4, U0=1.0, L=1.0)
    _, _, tau = scale_fields(0.0, p.P_atm, 2.0, 0.0, p)
    assert tau == pytest.approx(2.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 10), st.floats(0.01, 5), st.integers(0, 2 ** 31))
def test_round_trip(L, U0, seed):
    p = phys(L=L, U0=U0)
    rng = np.random.default_rng(seed)
    v, pr, tau, x2 = rng.normal(size=(4, 10))
    pr = pr * 1e3 + p.P_atm
    out = unscale_fields(*scale_fields(v, pr, tau, x2, p), x2, p)
    np.testing.assert_allclose(out[0], v, rtol=1e-14, atol=1e-14)
    np.testing.assert_allclose(out[1], pr, rtol=1e-14)
    np.testing.assert_allclose(out[2], tau, rtol=1e-14, atol=1e-14)


def test_invalid_parameters():
    with pytest.raises(ValueError):
        DimensionlessParams(eps=1.0)
    with pytest.raises(ValueError):
        DimensionlessParams(a=1.5)
    with pytest.raises(ValueError):
        DimensionlessParams(Re=0.0)
    with pytest.raises(ValueError):
        phys(mu_sol=0.0)
    with pytest.raises(ValueError):
        phys(lam=-1.0)
    assert DimensionlessParams().replace(We=3.0).We == 3.0
