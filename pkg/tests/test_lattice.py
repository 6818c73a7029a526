import math

import pytest
from hypothesis import given, strategies as st

from qising.lattice import (ParameterError, build_domain, couplings_lattice, critical_params,
                            dual_params, flatten, make_params)

pos = st.floats(min_value=1e-6, max_value=1e6, allow_nan=False, allow_infinity=False)


def test_make_params_examples():
    assert make_params(0.5, 0.5, 1.0).critical
    p = make_params(1.0, 0.25, 1.0)
    assert not p.critical and p.theta_star == 0.5


@pytest.mark.parametrize("bad", [(1.0, -1, 1), (0, 1, 1), (1, float("nan"), 1), (1, 1, float("inf"))])
def test_make_params_rejects(bad):
    with pytest.raises(ParameterError):
        make_params(*bad)


def test_dual_example():
    d = dual_params(make_params(1.0, 0.25, 1.0))
    assert (d.tau, d.theta) == (0.5, 0.5)


@given(pos, pos, pos)
def test_dual_is_involution(delta, tau, theta):
    p = make_params(delta, tau, theta)
    assert dual_params(dual_params(p)) == p


@given(pos, pos)
def test_critical_is_self_dual(delta, tau):
    p = make_params(delta, tau, 2 * tau)
    assert p.critical and dual_params(p) == p


def test_domain_columns():
    d = build_domain(2, 1.0, "plus")
    assert len(d.primal_x) == 2 and len(d.dual_x) == 3 and len(d.xs) == 5
    d = build_domain(1, 1.0, "free")
    assert len(d.primal_x) == 1 and len(d.dual_x) == 2
    d = build_domain(4, 1.0, "periodic")
    assert len(d.primal_x) == 4 and d.n_dual == 4


def test_domain_alternates_with_spacing_delta():
    d = build_domain(5, 2.0, "plus", delta=0.25)
    assert all(abs(b - a - 0.25) < 1e-15 for a, b in zip(d.xs[:-1], d.xs[1:]))
    assert all(k1 != k2 for k1, k2 in zip(d.kinds[:-1], d.kinds[1:]))
    assert d.primal_x[0] == 0.0


@pytest.mark.parametrize("args", [(0, 1.0), (2, 0.0), (1.5, 1.0), (2, -1.0)])
def test_domain_rejects(args):
    with pytest.raises(ParameterError):
        build_domain(*args)


def test_flatten_couplings():
    dom = build_domain(3, 1.0)
    lat = flatten(dom, make_params(0.5, 0.5, 1.0), 0.01)
    assert lat.J_h == pytest.approx(0.0050252, abs=1e-7)
    assert lat.J_v == pytest.approx(2.6492, abs=1e-4)
    assert lat.rows == 100
    assert math.exp(-2 * lat.J_h) == pytest.approx(1 - 0.01, rel=1e-15)
    assert math.exp(-2 * lat.J_v) == pytest.approx(0.5 * 0.01, rel=1e-15)
    with pytest.raises(ParameterError):
        flatten(dom, make_params(0.5, 0.5, 1.0), 1.5)


@given(st.floats(0.1, 3.0), st.floats(0.1, 3.0), st.floats(1e-4, 0.05))
def test_flatten_identities(tau, theta, eps):
    lat = flatten(build_domain(2, 1.0), make_params(0.5, tau, theta), eps)
    assert math.exp(-2 * lat.J_h) == pytest.approx(1 - theta * eps, rel=1e-13)
    assert math.exp(-2 * lat.J_v) == pytest.approx(tau * eps, rel=1e-13)


def test_flatten_first_order_limit():
    p = make_params(0.5, 0.7, 1.3)
    dom = build_domain(2, 1.0)
    errs_h, errs_v = [], []
    for eps in (1e-2, 1e-3, 1e-4):
        lat = flatten(dom, p, eps)
        errs_h.append(abs(math.tanh(lat.J_h) / eps - p.theta / 2))
        errs_v.append(abs((1 - math.tanh(lat.J_v)) / eps - 2 * p.tau))
    for errs in (errs_h, errs_v):
        assert 8 < errs[0] / errs[1] < 12 and 8 < errs[1] / errs[2] < 12


def test_critical_params_isotropic():
    p = critical_params(0.25)
    assert p.theta == p.theta_star == 2.0


def test_couplings_lattice_bc():
    with pytest.raises(ParameterError):
        couplings_lattice(0.1, 0.1, 2, 2, "mixed")
