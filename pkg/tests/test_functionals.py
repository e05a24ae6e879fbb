from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate

from subfrac.functionals import (
    bump,
    constant,
    fkt_constant,
    gagliardo_energy,
    gagliardo_sweep,
    gauss,
    horizontal_gradient,
    indicator,
    local_energy,
    luxemburg_norm,
    make_field,
    mollifier_mass,
    mollify,
    phi_energy,
    translation_gap,
    truncate,
    zero,
)
from subfrac.orlicz import make_orlicz
from subfrac.quadrature import QuadratureSpec


def indicator_energy_r1(s: float) -> float:
    # 2 int_{-1}^{1} int_{|y|>1} |x-y|^(-1-2s) dy dx for phi = t^2.
    return 2.0 / s * 2.0 ** (1 - 2 * s) / (1 - 2 * s)


def test_indicator_closed_form_r1(r1, sq):
    g, ng = r1
    u = indicator(g, ng, 1.0)
    spec = QuadratureSpec(samples=2**16)
    for s in (0.1, 0.25, 0.4):
        e = gagliardo_energy(u, sq, s, g, ng, spec)
        assert abs(e.total - indicator_energy_r1(s)) <= max(3 * e.stderr, 0.01 * indicator_energy_r1(s))


def test_indicator_brute_force_mc(r1, sq):
    # Independent path: plain importance-sampled pairs with the singular kernel
    # integrated out exactly in the distance to the boundary.
    g, ng = r1
    s = 0.25
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, 400_000)
    inner = ((1 - x) ** (-2 * s) + (1 + x) ** (-2 * s)) / (2 * s)
    brute = 2 * 2.0 * float(inner.mean())
    ref = indicator_energy_r1(s)
    assert abs(brute - ref) < 0.02 * ref
    e = gagliardo_energy(indicator(g, ng), sq, s, g, ng, QuadratureSpec(samples=2**14))
    assert abs(e.total - brute) < 0.02 * ref


def test_zero_field_and_breakdown(h1, sq, small):
    g, ng = h1
    e = gagliardo_energy(zero(g, ng), sq, 0.5, g, ng, small)
    assert (e.total, e.stderr) == (0.0, 0.0)
    e = gagliardo_energy(bump(g, ng), sq, 0.5, g, ng, small)
    assert math.isclose(e.near_field + e.far_field + e.tail_analytic, e.total, rel_tol=1e-12)
    assert e.total > 0 and e.stderr > 0


def test_constant_field_rejected(h1, sq, small):
    g, ng = h1
    with pytest.raises(ValueError, match="infinite support"):
        gagliardo_energy(constant(g, ng, 1.0), sq, 0.5, g, ng, small)
    with pytest.raises(ValueError):
        gagliardo_energy(bump(g, ng), sq, 1.0, g, ng, small)
    with pytest.raises(ValueError):
        make_field("hat", g, ng)


def test_power_homogeneity(h1, small):
    g, ng = h1
    phi = make_orlicz("power", 1.5)
    u = bump(g, ng)
    a = gagliardo_energy(u, phi, 0.6, g, ng, small).total
    b = gagliardo_energy(u.scaled(3.0), phi, 0.6, g, ng, small).total
    assert math.isclose(b, 3.0**1.5 * a, rel_tol=1e-9)


def test_left_translation_invariance(h1, sq):
    # Phi_s(u(h . x)) = Phi_s(u) since the kernel is left invariant.
    g, ng = h1
    spec = QuadratureSpec(samples=2**15)
    u = bump(g, ng)
    h = np.array([0.3, -0.2, 0.1])
    v = u.__class__(u.name, lambda x: u.func(g.law(np.broadcast_to(h, x.shape).copy(), x)), g, ng, 1.0 + float(ng(h)))
    a = gagliardo_energy(u, sq, 0.5, g, ng, spec)
    b = gagliardo_energy(v, sq, 0.5, g, ng, spec)
    assert abs(a.total - b.total) <= 3 * math.hypot(a.stderr, b.stderr) + 0.01 * a.total


def test_sweep_matches_single_energy(r1, sq, small):
    g, ng = r1
    u = gauss(g, ng, 4.0)
    sweep = gagliardo_sweep(u, sq, [0.3, 0.6], g, ng, small)
    single = gagliardo_energy(u, sq, 0.6, g, ng, small)
    assert sweep[1] == single


def test_gradient_and_local_energy_r1(r1, sq):
    g, ng = r1
    u = gauss(g, ng, 8.0)
    x = np.array([[0.3], [-1.2]])
    np.testing.assert_allclose(horizontal_gradient(u, x)[:, 0], -2 * x[:, 0] * np.exp(-x[:, 0] ** 2), rtol=1e-7)
    loc = local_energy(u, sq, g, ng, QuadratureSpec(samples=2**16))
    assert abs(loc.value - math.sqrt(math.pi / 2)) <= 3 * loc.stderr + 1e-6


def test_phi_energy_gauss_r1(r1, sq):
    g, ng = r1
    val = phi_energy(gauss(g, ng, 8.0), sq, g, ng, QuadratureSpec(samples=2**16))
    assert abs(val.value - math.sqrt(math.pi / 2)) <= 3 * val.stderr + 1e-6


def test_heisenberg_gradient_left_invariant_fields(h1):
    g, ng = h1
    u = make_field("gauss", g, ng, 8.0)
    x = np.array([[0.2, 0.5, -0.3]])
    # X = d_x - y/2 d_t, Y = d_y + x/2 d_t on exp(-|x|^2).
    f = float(u(x[0]))
    X = -2 * 0.2 * f - 0.5 / 2 * (-2 * -0.3) * f
    Y = -2 * 0.5 * f + 0.2 / 2 * (-2 * -0.3) * f
    np.testing.assert_allclose(horizontal_gradient(u, x)[0], [X, Y], rtol=1e-7)


def test_mollifier_mass_and_contraction(h1, sq):
    g, ng = h1
    spec = QuadratureSpec(samples=2**14)
    for eps in (0.5, 1.0):
        m = mollifier_mass(g, ng, eps, spec)
        assert abs(m.value - 1.0) <= 3 * m.stderr + 1e-3
    u = bump(g, ng)
    ue = mollify(u, 0.5, spec, nodes=32)
    assert ue.support_radius == pytest.approx(1.5)
    a = gagliardo_energy(u, sq, 0.5, g, ng, spec)
    b = gagliardo_energy(ue, sq, 0.5, g, ng, spec)
    assert b.total <= a.total + 3 * math.hypot(a.stderr, b.stderr)
    with pytest.raises(ValueError):
        mollify(u, 0.0)


def test_truncation(r1, sq, small):
    g, ng = r1
    u = gauss(g, ng, 8.0)
    u2 = truncate(u, 2)
    assert u2.support_radius == 4.0
    x = np.array([[0.5], [1.9], [3.0], [4.5]])
    vals = u2(x)
    np.testing.assert_allclose(vals[:2], u(x[:2]))
    assert 0 < vals[2] < u(x[2:3])[0] and vals[3] == 0
    with pytest.raises(ValueError):
        truncate(u, 0)


def test_luxemburg_power_closed_form(r1, small):
    # For t^p the Luxemburg norm is Phi(u)^(1/p).
    g, ng = r1
    phi = make_orlicz("power", 2.0)
    u = bump(g, ng)
    lux = luxemburg_norm(u, phi, g, ng, small)
    mod = phi_energy(u, phi, g, ng, small).value
    assert math.isclose(lux, math.sqrt(mod), rel_tol=1e-6)
    semi = luxemburg_norm(u, phi, g, ng, small, seminorm_s=0.5)
    e = gagliardo_energy(u, phi, 0.5, g, ng, small).total
    assert math.isclose(semi, math.sqrt(e), rel_tol=1e-6)


def test_translation_gap_and_constant(r1, sq):
    g, ng = r1
    spec = QuadratureSpec(samples=2**16)
    u = gauss(g, ng, 8.0)
    h = np.array([0.3])
    gap = translation_gap(u, sq, h, spec)
    # int (e^{-(x+h)^2} - e^{-x^2})^2 dx = 2 sqrt(pi/2) (1 - e^{-h^2/2}).
    exact = 2 * math.sqrt(math.pi / 2) * (1 - math.exp(-0.09 / 2))
    assert abs(gap.value - exact) <= 3 * gap.stderr + 1e-6
    assert fkt_constant(sq, g, 2.0, 0.5) == pytest.approx(4 / 4 * (2 ** (1 + 1) + 1))


def test_remainder_small_r_min_insensitive(r1, sq):
    g, ng = r1
    u = gauss(g, ng, 8.0)
    a = gagliardo_energy(u, sq, 0.9, g, ng, QuadratureSpec(samples=2**14, r_min=1e-4)).total
    b = gagliardo_energy(u, sq, 0.9, g, ng, QuadratureSpec(samples=2**14, r_min=1e-6)).total
    assert abs(a - b) < 0.01 * a


def test_gauss_energy_matches_translation_oracle(r1, sq):
    # Independent path: integrate the closed-form L^2 translation gap against |h|^(-1-2s).
    g, ng = r1
    u = gauss(g, ng, 8.0)
    s = 0.5

    def inner(h: float) -> float:
        # int (u(x+h) - u(x))^2 dx for the Gaussian, in closed form.
        return 2 * math.sqrt(math.pi / 2) * (1 - math.exp(-h * h / 2))

    ref = 2 * integrate.quad(lambda h: inner(h) / h ** (1 + 2 * s), 0, np.inf, limit=200)[0]
    e = gagliardo_energy(u, sq, s, g, ng, QuadratureSpec(samples=2**16))
    assert abs(e.total - ref) <= 3 * e.stderr + 2e-3 * ref
