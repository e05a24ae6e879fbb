"""Scalar fields on groups and the modular functionals built on them.

The double integral ``Phi_{s,phi}`` is evaluated after the substitution
``y = x . h`` and a polar decomposition of ``h = delta_r z`` with ``z`` on the
unit gauge sphere::

    Phi_{s,phi}(u) = int_x int_S int_0^inf phi(|u(x.delta_r z) - u(x)| r^-s) dr/r dsigma(z) dx

Only ``x`` in the support ball ``A`` is sampled. Pairs with ``x`` outside
``A`` and ``x.h`` inside are folded in by the symmetry of the integrand,
which doubles the weight of every node with ``x.h`` outside ``A``. The
radial integral is split into

* near field, ``r_min <= r < 1``: stratified nodes on dyadic shells, plus the
  part below ``r_min`` from the linearization ``|u(x.delta_r z)-u(x)| ~ D r``;
* far field, ``1 <= r < R_split``: stratified nodes on dyadic shells;
* analytic tail, ``r >= R_split = 2 R_u``: there ``u(x.h) = 0`` exactly, and
  the radial integral is ``psi(|u(x)| R_split^-s) / s`` with
  ``psi(T) = int_0^T phi(t)/t dt``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .group import CarnotGroup, HomogeneousGauge, compose, dilate, invert
from .orlicz import OrliczFunction
from .quadrature import (
    Ball,
    IntegralValue,
    QuadratureSpec,
    _annulus_samples,
    ball_volume,
    batch_map,
    qmc_batch,
    region_integral,
    worker_count,
)

__all__ = [
    "ScalarField",
    "EnergyBreakdown",
    "make_field",
    "bump",
    "gauss",
    "indicator",
    "zero",
    "constant",
    "phi_energy",
    "gagliardo_energy",
    "gagliardo_sweep",
    "horizontal_gradient",
    "local_energy",
    "mollify",
    "mollifier_mass",
    "truncate",
    "luxemburg_norm",
    "translation_gap",
    "fkt_constant",
]

Array = NDArray[np.float64]
SMOOTHNESS = ("c2", "lipschitz", "measurable")


@dataclass(frozen=True)
class ScalarField:
    """A real function on ``group`` that vanishes outside the gauge ball of ``support_radius``.

    ``func`` maps an ``(N, n)`` array of points to ``N`` values. Fields with
    infinite support must carry ``decay``, an exponent d with |u| = O(|x|^-d).
    """

    name: str
    func: Callable[[Array], Array]
    group: CarnotGroup
    gauge: HomogeneousGauge
    support_radius: float
    smoothness: str = "c2"
    decay: float | None = None

    def __post_init__(self) -> None:
        if self.smoothness not in SMOOTHNESS:
            raise ValueError(f"unknown smoothness class {self.smoothness!r}")
        if self.gauge.group != self.group:
            raise ValueError("gauge belongs to a different group")

    def __call__(self, x: ArrayLike) -> Array:
        x = self.group.check(x)
        flat = x.reshape(-1, self.group.n)
        return np.asarray(self.func(flat), dtype=float).reshape(x.shape[:-1])

    @property
    def bounded_support(self) -> bool:
        return math.isfinite(self.support_radius)

    def scaled(self, lam: float) -> ScalarField:
        f = self.func
        return replace(self, name=f"{lam:g}*{self.name}", func=lambda x: lam * f(x))

    def translated(self, h: ArrayLike) -> ScalarField:
        """Right translate ``x -> u(x . h)``."""
        h = self.group.check(h)
        f, g = self.func, self.group
        radius = self.support_radius + float(self.gauge(h))
        return replace(
            self, name=f"tau[{self.name}]", func=lambda x: f(compose(g, x, h)), support_radius=radius
        )


@dataclass(frozen=True)
class EnergyBreakdown:
    total: float
    near_field: float
    far_field: float
    tail_analytic: float
    stderr: float

    def __post_init__(self) -> None:
        parts = self.near_field + self.far_field + self.tail_analytic
        if abs(parts - self.total) > 1e-12 * max(1.0, abs(self.total)):
            raise ValueError("breakdown parts do not sum to the total")

    def as_integral(self) -> IntegralValue:
        return IntegralValue(
            self.total,
            self.stderr,
            dict(near_field=self.near_field, far_field=self.far_field, tail_analytic=self.tail_analytic),
        )


# Built-in fields ------------------------------------------------------------


def bump(g: CarnotGroup, ng: HomogeneousGauge, radius: float = 1.0) -> ScalarField:
    """exp(1 - 1/(1 - rho^2)) with rho = gauge(x)/radius, zero for rho >= 1."""

    def f(x: Array) -> Array:
        rho2 = (ng(x) / radius) ** 2
        inside = rho2 < 1.0
        out = np.zeros(len(x))
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - rho2[inside]))
        return out

    return ScalarField(f"bump:{radius:g}", f, g, ng, radius, "c2")


def gauss(g: CarnotGroup, ng: HomogeneousGauge, radius: float = 8.0) -> ScalarField:
    """exp(-|x|^2) in coordinates, cut off outside the gauge ball of ``radius``.

    The jump at the cut is exp(-radius^2) for the Euclidean gauge and far
    below double precision for the default radius.
    """

    def f(x: Array) -> Array:
        return np.where(ng(x) <= radius, np.exp(-np.sum(x * x, axis=1)), 0.0)

    return ScalarField(f"gauss:{radius:g}", f, g, ng, radius, "c2")


def indicator(g: CarnotGroup, ng: HomogeneousGauge, radius: float = 1.0) -> ScalarField:
    def f(x: Array) -> Array:
        return (ng(x) <= radius).astype(float)

    return ScalarField(f"indicator:{radius:g}", f, g, ng, radius, "measurable")


def zero(g: CarnotGroup, ng: HomogeneousGauge) -> ScalarField:
    return ScalarField("zero", lambda x: np.zeros(len(x)), g, ng, 0.0, "c2")


def constant(g: CarnotGroup, ng: HomogeneousGauge, c: float) -> ScalarField:
    return ScalarField(f"const:{c:g}", lambda x: np.full(len(x), float(c)), g, ng, math.inf, "c2")


FIELDS = {"bump": bump, "gauss": gauss, "indicator": indicator}


def make_field(name: str, g: CarnotGroup, ng: HomogeneousGauge, radius: float | None = None) -> ScalarField:
    try:
        factory = FIELDS[name]
    except KeyError:
        raise ValueError(f"unknown field {name!r}; expected one of {sorted(FIELDS)}") from None
    return factory(g, ng) if radius is None else factory(g, ng, radius)


# Modular Phi_phi ------------------------------------------------------------


def _require_support(u: ScalarField) -> float:
    if not u.bounded_support:
        raise ValueError(f"field {u.name} has infinite support; integrals need a bounded support")
    return u.support_radius


def phi_energy(
    u: ScalarField, phi: OrliczFunction, g: CarnotGroup, ng: HomogeneousGauge, spec: QuadratureSpec
) -> IntegralValue:
    """int_G phi(|u(x)|) dx over the support ball of ``u``."""
    radius = _require_support(u)
    if radius == 0:
        return IntegralValue(0.0, 0.0)
    return region_integral(lambda x: phi(np.abs(u(x))), g, Ball(radius), spec, ng, stream=11)


# Gagliardo modular Phi_{s,phi} --------------------------------------------


def _radial_nodes(r_min: float, r_split: float, spec: QuadratureSpec, shift: Array) -> tuple[Array, float, Array]:
    """Stratified log-radius nodes on dyadic shells covering [r_min, r_split].

    Returns ``(log_r, d_log_r, is_far)``, with ``log_r`` of shape ``(P, K)``
    for the per-pair offsets ``shift`` in [0, 1). Shell edges include r = 1
    when it lies inside the range so the near/far split is exact.
    """
    lo, hi = math.log(r_min), math.log(r_split)
    # Shells of log-width <= log 2 (at least spec.annuli of them) on each side of r = 1.
    n_total = max(spec.annuli, math.ceil((hi - lo) / math.log(2.0)))
    starts, widths = [], []
    for a, b in ((lo, min(hi, 0.0)), (max(lo, 0.0), hi)):
        if b > a:
            k = max(1, math.ceil(n_total * (b - a) / (hi - lo)))
            starts.append(np.linspace(a, b, k + 1)[:-1])
            widths.append(np.full(k, (b - a) / k))
    starts, widths = np.concatenate(starts), np.concatenate(widths)
    m = spec.nodes_per_shell
    offs = (np.arange(m)[None, :] + shift[:, None]) / m  # (P, m)
    log_r = starts[None, :, None] + widths[None, :, None] * offs[:, None, :]  # (P, S, m)
    dlog = np.repeat(widths / m, m)
    is_far = np.repeat(starts >= 0.0, m)
    return log_r.reshape(len(shift), -1), dlog, is_far


@dataclass(frozen=True)
class _Pass:
    """Per-batch component sums, shape ``(batches, len(s), len(scales), 4)``.

    Components: near, far, tail, linearized remainder below ``r_min``.
    """

    parts: Array
    s_values: tuple[float, ...]
    scales: tuple[float, ...]


def _gagliardo_pass(
    u: ScalarField,
    phi: OrliczFunction,
    g: CarnotGroup,
    ng: HomogeneousGauge,
    spec: QuadratureSpec,
    s_values: Sequence[float],
    scales: Sequence[float] = (1.0,),
    r_split: float | None = None,
    stream: int = 23,
) -> _Pass:
    radius = _require_support(u)
    s_arr = np.asarray(s_values, dtype=float)
    if np.any((s_arr <= 0) | (s_arr >= 1)):
        raise ValueError("s must lie in (0, 1)")
    inv_scales = 1.0 / np.asarray(scales, dtype=float)
    if radius == 0:
        return _Pass(np.zeros((spec.batches, len(s_arr), len(inv_scales), 4)), tuple(s_arr), tuple(scales))
    r_split = 2.0 * radius if r_split is None else float(r_split)
    if r_split < 2.0 * radius:
        raise ValueError("split radius below 2*support radius breaks the disjoint-support identity")
    r_min = min(spec.r_min, 0.5 * r_split)
    qcb = g.Q * ball_volume(g, ng).value
    hw = ng.box_halfwidths(radius)
    vol_x = float(np.prod(2.0 * hw))
    n = g.n

    def run(b: int) -> Array:
        pts = qmc_batch(2 * n + 1, spec, b, stream)
        N = len(pts)
        x = -hw + 2.0 * hw * pts[:, :n]
        in_a = ng(x) <= radius
        x = x[in_a]
        ux = u(x)
        out = np.zeros((len(s_arr), len(inv_scales), 4))
        # Tail, r >= r_split: u(x.h) = 0 and both orderings of the pair contribute.
        abs_ux = np.abs(ux)
        for i, s in enumerate(s_arr):
            arg = abs_ux[None, :] * inv_scales[:, None] * r_split ** (-s)
            out[i, :, 2] = (vol_x / N) * 2.0 * qcb * phi.psi(arg).sum(axis=1) / s
        z, wz = _annulus_samples(g, ng, pts[in_a, n : 2 * n])
        keep = wz > 0
        x, z, ux, shift = x[keep], z[keep], ux[keep], pts[in_a, 2 * n][keep]
        c = (vol_x / N) * wz[keep]
        if len(x) == 0:
            return out
        log_r, dlog, is_far = _radial_nodes(r_min, r_split, spec, shift)
        P, K = log_r.shape
        r = np.exp(log_r)
        h = dilate(g, r.reshape(-1), np.repeat(z, K, axis=0))
        y = compose(g, np.repeat(x, K, axis=0), h)
        delta = np.abs(u(y) - np.repeat(ux, K)).reshape(P, K)
        mult = 1.0 + (ng(y) > radius).reshape(P, K)
        wnode = c[:, None] * mult * dlog[None, :]
        # Below r_min: |u(x.delta_r z) - u(x)| ~ D r, and
        # int_0^r_min phi(D r^(1-s)) dr/r = psi(D r_min^(1-s)) / (1-s).
        y0 = compose(g, x, dilate(g, r_min, z))
        slope = np.abs(u(y0) - ux) / r_min
        w0 = c * (1.0 + (ng(y0) > radius))
        for i, s in enumerate(s_arr):
            rs = r ** (-s)
            for j, k in enumerate(inv_scales):
                vals = phi(delta * (k * rs)) * wnode
                far = float(vals[:, is_far].sum())
                out[i, j, 0] = float(vals.sum()) - far
                out[i, j, 1] = far
                out[i, j, 3] = float(w0 @ phi.psi(k * slope * r_min ** (1.0 - s))) / (1.0 - s)
        return out

    parts = np.stack(batch_map(run, spec.batches, worker_count(spec)))
    return _Pass(parts, tuple(s_arr), tuple(scales))


def _breakdowns(p: _Pass, u: ScalarField, scale_index: int = 0) -> list[EnergyBreakdown]:
    out = []
    smooth = u.smoothness == "c2"
    for i, s in enumerate(p.s_values):
        comp = p.parts[:, i, scale_index, :]  # (batches, 4)
        near_b = comp[:, 0] + (comp[:, 3] if smooth else 0.0)
        total_b = near_b + comp[:, 1] + comp[:, 2]
        nb = len(total_b)
        stderr = float(total_b.std(ddof=1) / math.sqrt(nb))
        if not smooth:
            # The linearization below r_min is not justified; carry it as an error bar.
            stderr += float(comp[:, 3].mean())
        near, far, tail = float(near_b.mean()), float(comp[:, 1].mean()), float(comp[:, 2].mean())
        out.append(EnergyBreakdown(near + far + tail, near, far, tail, stderr))
    return out


def gagliardo_sweep(
    u: ScalarField,
    phi: OrliczFunction,
    s_values: Sequence[float],
    g: CarnotGroup,
    ng: HomogeneousGauge,
    spec: QuadratureSpec,
    r_split: float | None = None,
) -> list[EnergyBreakdown]:
    """``gagliardo_energy`` at several ``s`` from one shared set of samples."""
    return _breakdowns(_gagliardo_pass(u, phi, g, ng, spec, s_values, r_split=r_split), u)


def gagliardo_energy(
    u: ScalarField,
    phi: OrliczFunction,
    s: float,
    g: CarnotGroup,
    ng: HomogeneousGauge,
    spec: QuadratureSpec,
    r_split: float | None = None,
) -> EnergyBreakdown:
    """Phi_{s,phi}(u) with its near/far/tail breakdown and batch stderr."""
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    return gagliardo_sweep(u, phi, [s], g, ng, spec, r_split)[0]


# Horizontal gradient and the local functional ---------------------------


def horizontal_gradient(u: ScalarField, x: ArrayLike, step: float = 1e-4) -> Array:
    """Central differences along the left-invariant horizontal directions.

    Component j is [u(x . step e_j) - u(x . (-step) e_j)] / (2 step).
    Accepts one point ``(n,)`` or a batch ``(N, n)``.
    """
    g = u.group
    x = g.check(x)
    out = np.empty(x.shape[:-1] + (g.m,))
    for j in range(g.m):
        e = np.zeros(g.n)
        e[j] = step
        out[..., j] = (u(compose(g, x, e)) - u(compose(g, x, -e))) / (2.0 * step)
    return out


def gradient_field(u: ScalarField, step: float = 1e-4) -> ScalarField:
    """The field ``x -> |grad_G u(x)|`` (Euclidean norm in R^m)."""
    radius = u.support_radius + step

    def f(x: Array) -> Array:
        return np.sqrt(np.sum(horizontal_gradient(u, x, step) ** 2, axis=-1))

    return replace(u, name=f"|grad {u.name}|", func=f, support_radius=radius, smoothness="lipschitz")


def local_energy(
    u: ScalarField,
    phi: OrliczFunction,
    g: CarnotGroup,
    ng: HomogeneousGauge,
    spec: QuadratureSpec,
    step: float = 1e-4,
) -> IntegralValue:
    """Phi_phi(|grad_G u|), the s = 1 endpoint."""
    if u.support_radius == 0:
        return IntegralValue(0.0, 0.0)
    return phi_energy(gradient_field(u, step), phi, g, ng, spec)


# Mollification and truncation -----------------------------------------------


def _rho_unnormalized(ng: HomogeneousGauge) -> Callable[[Array], Array]:
    def rho(z: Array) -> Array:
        r2 = ng(z) ** 2
        out = np.zeros(len(z))
        inside = r2 < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
        return out

    return rho


_MOLLIFIER_SPEC = QuadratureSpec(samples=2**20, seed=4242)


@lru_cache(maxsize=None)
def _mollifier_norm(g: CarnotGroup, ng_kind: str) -> IntegralValue:
    from .group import get_gauge

    ng = get_gauge(g, ng_kind)
    return region_integral(_rho_unnormalized(ng), g, Ball(1.0), _MOLLIFIER_SPEC, ng, stream=31)


def mollifier_mass(g: CarnotGroup, ng: HomogeneousGauge, eps: float, spec: QuadratureSpec) -> IntegralValue:
    """int rho_eps for the shipped mollifier rho_eps(x) = eps^-Q rho(delta_{1/eps} x)."""
    norm = _mollifier_norm(g, ng.kind).value
    rho = _rho_unnormalized(ng)

    def rho_eps(x: Array) -> Array:
        return eps ** (-g.Q) * rho(dilate(g, 1.0 / eps, x)) / norm

    return region_integral(rho_eps, g, Ball(eps), spec, ng, stream=37)


def mollify(u: ScalarField, eps: float, spec: QuadratureSpec | None = None, nodes: int = 256) -> ScalarField:
    """u_eps(x) = int_{B(0,1)} u((delta_eps z)^-1 . x) rho(z) dz on a fixed node set.

    The nodes are the first ``nodes`` in-ball points of a scrambled Sobol
    sequence; their weights rho(z_i) are rescaled to sum to one, so u_eps is
    an exact convex combination of left translates of u.
    """
    if eps <= 0:
        raise ValueError("mollification radius must be positive")
    spec = spec or QuadratureSpec()
    g, ng = u.group, u.gauge
    hw = ng.box_halfwidths(1.0)
    cand = -hw + 2.0 * hw * qmc_batch(g.n, replace(spec, samples=8 * nodes * spec.batches), 0, stream=41)
    rho = _rho_unnormalized(ng)(cand)
    keep = np.flatnonzero(rho > 0)[:nodes]
    z, w = cand[keep], rho[keep] / rho[keep].sum()
    shifts = invert(g, dilate(g, eps, z))  # (delta_eps z)^-1
    f = u.func

    def f_eps(x: Array) -> Array:
        out = np.zeros(len(x))
        for sh, wi in zip(shifts, w):
            out += wi * f(compose(g, sh, x))
        return out

    return replace(
        u,
        name=f"moll[{u.name},{eps:g}]",
        func=f_eps,
        support_radius=u.support_radius + eps,
        smoothness="c2" if u.smoothness == "c2" else "lipschitz",
    )


def _smooth_step(t: Array) -> Array:
    """C-infinity step from 1 (t <= 0) to 0 (t >= 1); max slope exactly 2 at t = 1/2."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t < 1.0, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
        b = np.where(t > 0.0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
    return a / (a + b)


def cutoff(g: CarnotGroup, ng: HomogeneousGauge, k: float = 1.0) -> Callable[[Array], Array]:
    """eta_k(x) = eta(delta_{1/k} x): 1 on B(0,k), 0 outside B(0,2k)."""

    def eta_k(x: Array) -> Array:
        return _smooth_step(ng(x) / k - 1.0)

    return eta_k


def truncate(u: ScalarField, k: int) -> ScalarField:
    """u_k = eta_k u with support in B(0, min(R_u, 2k))."""
    if k <= 0:
        raise ValueError("truncation index must be positive")
    eta_k = cutoff(u.group, u.gauge, k)
    f = u.func
    return replace(
        u,
        name=f"trunc[{u.name},{k}]",
        func=lambda x: eta_k(x) * f(x),
        support_radius=min(u.support_radius, 2.0 * k),
        decay=None,
    )


# Luxemburg norms ------------------------------------------------------------


def _bisect_scale(modular: Callable[[Array], Array], lo: float = 1e-3, hi: float = 1e3, rtol: float = 1e-10) -> float:
    """Smallest lam with modular(lam) <= 1, for a decreasing vectorized ``modular``."""
    for _ in range(60):
        vals = modular(np.array([lo, hi]))
        if vals[0] > 1.0 and vals[1] <= 1.0:
            break
        if vals[1] > 1.0:
            hi *= 2.0
        if vals[0] <= 1.0:
            lo /= 2.0
    else:
        raise ArithmeticError("bracket expansion exceeded 60 doublings; the modular looks infinite")
    while hi - lo > rtol * hi:
        grid = np.geomspace(lo, hi, 33)
        vals = modular(grid)
        idx = int(np.argmax(vals <= 1.0))
        lo, hi = grid[idx - 1], grid[idx]
    return float(hi)


def luxemburg_norm(
    u: ScalarField,
    phi: OrliczFunction,
    g: CarnotGroup,
    ng: HomogeneousGauge,
    spec: QuadratureSpec,
    seminorm_s: float | None = None,
) -> float:
    """inf{lam > 0 : modular(u/lam) <= 1} for Phi_phi, or Phi_{s,phi} when ``seminorm_s`` is set.

    The modular is evaluated on one fixed sample set, so it is an exactly
    monotone function of lam and bisection converges to its crossing.
    """
    radius = _require_support(u)
    if radius == 0:
        return 0.0
    if seminorm_s is None:
        hw = ng.box_halfwidths(radius)
        vol = float(np.prod(2.0 * hw))
        vals = []
        for b in range(spec.batches):
            x = -hw + 2.0 * hw * qmc_batch(g.n, spec, b, stream=11)
            vals.append(np.where(ng(x) <= radius, np.abs(u(x)), 0.0))
        absu = np.concatenate(vals)

        def modular(lams: Array) -> Array:
            return np.array([vol * float(phi(absu / lam).mean()) for lam in lams])

    else:
        def modular(lams: Array) -> Array:
            p = _gagliardo_pass(u, phi, g, ng, spec, [seminorm_s], scales=tuple(lams))
            return np.array([_breakdowns(_Pass(p.parts, p.s_values, p.scales), u, j)[0].total for j in range(len(lams))])

    return _bisect_scale(modular)


# Translation estimate ---------------------------------------------------------


def translation_gap(
    u: ScalarField,
    phi: OrliczFunction,
    h: ArrayLike,
    spec: QuadratureSpec,
) -> IntegralValue:
    """Phi_phi(tau_h u - u) with tau_h u(x) = u(x . h)."""
    g, ng = u.group, u.gauge
    h = g.check(h)
    radius = _require_support(u) + float(ng(h))
    if radius == 0:
        return IntegralValue(0.0, 0.0)
    f = u.func
    return region_integral(
        lambda x: phi(np.abs(f(compose(g, x, h)) - f(x))), g, Ball(radius), spec, ng, stream=13
    )


def fkt_constant(phi: OrliczFunction, g: CarnotGroup, c_b: float, s: float) -> float:
    """M = (C / (2 C_b)) (2^(s p-  + Q) + 1) of the translation estimate."""
    return phi.delta2 / (2.0 * c_b) * (2.0 ** (s * phi.p_minus + g.Q) + 1.0)
