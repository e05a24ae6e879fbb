from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from subfrac.orlicz import (
    NotOrliczError,
    OrliczFunction,
    conjugate_eval,
    growth_indices,
    make_orlicz,
    minkowski_check,
    parse_orlicz,
    phi_eval,
    phi_inverse,
    phi_tilde,
)
from subfrac.quadrature import QuadratureSpec, ball_volume, sphere_integral


def test_power_indices_exact():
    assert growth_indices(make_orlicz("power", 3.0)) == (3.0, 3.0, 8.0)


def test_power_log_indices_bracket_grid_estimates(plog):
    grid = np.logspace(-6, 6, 2048)
    ratio = grid * plog.deriv(grid) / plog(grid)
    pm, pp, C = growth_indices(plog)
    assert (pm, pp) == (2.0, 3.0)
    assert pm <= ratio.min() and ratio.max() <= pp
    assert 2.0 < C <= 2.0**pp
    assert np.max(plog(2 * grid) / plog(grid)) <= C


def test_bad_functions_rejected():
    with pytest.raises(ValueError):
        make_orlicz("power", 1.0)
    with pytest.raises(ValueError):
        parse_orlicz("cubic:2")
    with pytest.raises(NotOrliczError):
        growth_indices(OrliczFunction("power", 2.0, 2.5, 3.0, 8.0))
    with pytest.raises(ValueError):
        phi_eval(make_orlicz("power", 2.0), [-1.0])


@pytest.mark.parametrize("label", ["power:1.5", "power:2", "power_log:2", "power_log:1.3"])
def test_phi1_phi2_on_pairs(label):
    phi = parse_orlicz(label)
    rng = np.random.default_rng(0)
    s, t = np.exp(rng.uniform(-5, 5, (2, 10_000)))
    lo = np.minimum(s**phi.p_minus, s**phi.p_plus) * phi(t)
    hi = np.maximum(s**phi.p_minus, s**phi.p_plus) * phi(t)
    mid = phi(s * t)
    assert np.all(lo <= mid * (1 + 1e-10)) and np.all(mid <= hi * (1 + 1e-10))
    assert np.all(phi(s + t) <= 2**phi.p_plus / 2 * (phi(s) + phi(t)) * (1 + 1e-10))


def test_split_bound_constant_exists(plog):
    # phi(s + t) <= C_1 phi(s) + 2^p+ phi(t) for some finite C_1: find it and check it is finite.
    rng = np.random.default_rng(5)
    s, t = np.exp(rng.uniform(-6, 6, (2, 10_000)))
    excess = plog(s + t) - 2**plog.p_plus * plog(t)
    c = float(np.max(np.where(excess > 0, excess / plog(s), 0.0)))
    assert math.isfinite(c) and c < 1e3


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-8, 1e8), st.sampled_from(["power:2", "power:1.5", "power_log:2"]))
def test_inverse_round_trip(y, label):
    phi = parse_orlicz(label)
    t = phi_inverse(phi, y)
    assert math.isclose(float(phi(t)), y, rel_tol=1e-11)


def test_inverse_monotone(plog):
    y = np.logspace(-6, 6, 500)
    assert np.all(np.diff(phi_inverse(plog, y)) > 0)


@pytest.mark.parametrize("label", ["power:2", "power_log:2", "power_log:1.5"])
def test_psi_against_quad(label):
    phi = parse_orlicz(label)
    for T in (1e-3, 0.5, 1.0, 7.0, 300.0):
        # In tau = log t the integrand phi(e^tau) is smooth and decays at -inf.
        ref = integrate.quad(lambda tau: float(phi(math.exp(tau))), -80.0, math.log(T), limit=200, epsrel=1e-13, epsabs=0)[0]
        assert math.isclose(float(phi.psi(T)), ref, rel_tol=1e-9)


def test_conjugate_power_closed_form():
    # Young conjugate of t^p is (p-1) (s/p)^(p/(p-1)).
    for p in (1.5, 2.0, 3.0):
        phi = make_orlicz("power", p)
        for s in (0.1, 1.0, 5.0):
            exact = (p - 1) * (s / p) ** (p / (p - 1))
            assert math.isclose(conjugate_eval(phi, s), exact, rel_tol=1e-8)


def test_phi_tilde_r1_is_t_squared(r1, sq):
    g, ng = r1
    for t in (0.5, 1.0, 2.0):
        pt = phi_tilde(sq, g, ng, t, spec=QuadratureSpec(samples=2**12))
        assert math.isclose(pt.value, t * t, rel_tol=1e-4)


@pytest.mark.parametrize("label", ["power:2", "power:1.5", "power_log:2"])
def test_phi_tilde_sweep_matches_closed_form(h1, label):
    g, ng = h1
    phi = parse_orlicz(label)
    pt = phi_tilde(phi, g, ng, 1.3, spec=QuadratureSpec(samples=2**12))
    assert abs(pt.sweep_value - pt.closed_form) <= 0.01 * pt.closed_form


def test_phi_tilde_h1_power_uses_sphere_oracle(h1, sq):
    g, ng = h1
    spec = QuadratureSpec(samples=2**14)
    pt = phi_tilde(sq, g, ng, 2.0, spec=spec)
    moment = sphere_integral(lambda z: np.sum(z[:, :2] ** 2, axis=1), g, ng, spec)
    assert math.isclose(pt.value, 4.0 / 2.0 * moment.value, rel_tol=1e-12)


def test_phi_tilde_directional_r2(r2, sq):
    # (1/2) int_{S^1} |v . z|^2 dsigma = pi/2 |v|^2: the classical K(2,2) = pi/2.
    g, ng = r2
    pt = phi_tilde(sq, g, ng, 0.0, directional=True, v=[0.6, 0.8], spec=QuadratureSpec(samples=2**14))
    assert abs(pt.value - math.pi / 2) <= 3 * pt.stderr + 1e-3


def test_phi_tilde_validation(r1, sq):
    g, ng = r1
    with pytest.raises(ValueError):
        phi_tilde(sq, g, ng, 1.0, s_grid=(0.99, 0.9, 0.95))
    with pytest.raises(ValueError):
        phi_tilde(sq, g, ng, 1.0, directional=True)


def test_phi_tilde_sandwich_r1(r1):
    g, ng = r1
    qcb = g.Q * ball_volume(g, ng).value
    for label in ("power:2", "power_log:2"):
        phi = parse_orlicz(label)
        for t in (0.5, 1.0, 2.0):
            val = phi_tilde(phi, g, ng, t, spec=QuadratureSpec(samples=2**12)).value
            assert qcb / phi.p_plus * phi(t) * (1 - 1e-6) <= val <= qcb / phi.p_minus * phi(t) * (1 + 1e-6)


def test_minkowski_power_holds_power_log_reported():
    assert minkowski_check(make_orlicz("power", 2.0)).holds
    assert minkowski_check(make_orlicz("power", 1.5)).holds
    res = minkowski_check(make_orlicz("power_log", 2.0))
    assert res.trials == 2000 and math.isfinite(res.worst)
