"""Orlicz (nice Young) functions.

Two families ship: the pure power ``t**p`` and the normalized
``t**p * log(1 + t) / log(2)``, whose growth indices differ
(``p_minus = p``, ``p_plus = p + 1``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special

if TYPE_CHECKING:
    from .group import CarnotGroup, HomogeneousGauge
    from .quadrature import QuadratureSpec

__all__ = [
    "OrliczFunction",
    "make_orlicz",
    "parse_orlicz",
    "phi_eval",
    "phi_inverse",
    "growth_indices",
    "conjugate_eval",
    "phi_tilde",
    "PhiTilde",
    "MinkowskiCheck",
    "minkowski_check",
]

Array = NDArray[np.float64]
FAMILIES = ("power", "power_log")
INDEX_GRID = np.logspace(-6, 6, 2048)
LN2 = math.log(2.0)


class NotOrliczError(ValueError):
    """Raised when a function violates the growth condition (L)."""


@dataclass(frozen=True)
class OrliczFunction:
    """An immutable Orlicz function with cached growth data.

    Attributes:
        family: "power" or "power_log".
        p: Family exponent.
        p_minus, p_plus: Bounds on t*phi'(t)/phi(t) over t > 0.
        delta2: The Delta_2 constant, sup phi(2t)/phi(t).
    """

    family: str
    p: float
    p_minus: float
    p_plus: float
    delta2: float

    @property
    def label(self) -> str:
        return f"{self.family}:{self.p:g}"

    @property
    def is_power(self) -> bool:
        return self.family == "power"

    def __call__(self, t: ArrayLike) -> Array:
        t = np.asarray(t, dtype=float)
        if self.is_power:
            return t**self.p
        return t**self.p * np.log1p(t) / LN2

    def deriv(self, t: ArrayLike) -> Array:
        t = np.asarray(t, dtype=float)
        p = self.p
        if self.is_power:
            return p * t ** (p - 1.0)
        return (p * t ** (p - 1.0) * np.log1p(t) + t**p / (1.0 + t)) / LN2

    def psi(self, T: ArrayLike) -> Array:
        """Integral of phi(t)/t over [0, T].

        This is the radial profile that appears whenever phi(a r^k) is
        integrated against dr/r, e.g. ``int_0^1 phi(a r^k) dr/r = psi(a)/k``.
        """
        T = np.asarray(T, dtype=float)
        p = self.p
        if self.is_power:
            return T**p / p
        # int_0^T t^(p-1) log(1+t) dt, by parts:
        # (T^p/p) log(1+T) - (1/p) int_0^T t^p/(1+t) dt, the last term via 2F1.
        tail = T ** (p + 1.0) / (p + 1.0) * special.hyp2f1(1.0, p + 1.0, p + 2.0, -T)
        return (T**p * np.log1p(T) - tail) / (p * LN2)

    def inverse(self, y: ArrayLike) -> Array:
        return phi_inverse(self, y)


def make_orlicz(family: str, p: float) -> OrliczFunction:
    """Build a shipped Orlicz function with analytic growth data."""
    p = float(p)
    if p <= 1.0:
        raise ValueError(f"exponent must exceed 1, got {p}")
    if family == "power":
        return OrliczFunction("power", p, p, p, 2.0**p)
    if family == "power_log":
        # t phi'/phi = p + t/((1+t) log(1+t)) decreases from p+1 (t->0) to p (t->inf);
        # phi(2t)/phi(t) = 2^p log(1+2t)/log(1+t) is largest (2^(p+1)) as t->0.
        return OrliczFunction("power_log", p, p, p + 1.0, 2.0 ** (p + 1.0))
    raise ValueError(f"unknown Orlicz family {family!r}; expected one of {FAMILIES}")


def parse_orlicz(text: str) -> OrliczFunction:
    """Parse "family:p", e.g. ``power:2`` or ``power_log:2``."""
    try:
        family, p = text.split(":")
        return make_orlicz(family, float(p))
    except ValueError as exc:
        raise ValueError(f"bad Orlicz spec {text!r}: {exc}") from None


def phi_eval(phi: OrliczFunction, t: ArrayLike) -> Array:
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("phi is defined on [0, inf)")
    return phi(t)


def phi_inverse(phi: OrliczFunction, y: ArrayLike, rtol: float = 1e-12) -> Array:
    """Inverse of phi by vectorized bisection (closed form for the power family)."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("phi^-1 is defined on [0, inf)")
    if phi.is_power:
        return y ** (1.0 / phi.p)
    lo = np.zeros_like(y)
    hi = np.maximum(1.0, 2.0 * y ** (1.0 / phi.p_minus))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        below = phi(mid) < y
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= rtol * hi):
            break
    return 0.5 * (lo + hi)


def growth_indices(phi: OrliczFunction, grid: Array = INDEX_GRID) -> tuple[float, float, float]:
    """Return (p_minus, p_plus, delta2), checked against a log-spaced grid.

    Grid estimates of inf/sup t phi'/phi must lie inside the declared
    analytic interval, and the Delta_2 bound ``2 < C <= 2**p_plus`` must hold.
    """
    ratio = grid * phi.deriv(grid) / phi(grid)
    est_minus, est_plus = float(ratio.min()), float(ratio.max())
    est_delta2 = float(np.max(phi(2.0 * grid) / phi(grid)))
    slack = 1e-9 * phi.p_plus
    if est_minus <= 1.0 or est_minus < phi.p_minus - slack or est_plus > phi.p_plus + slack:
        raise NotOrliczError(
            f"{phi.label}: sampled indices [{est_minus}, {est_plus}] violate "
            f"(L) with [{phi.p_minus}, {phi.p_plus}]"
        )
    delta2 = max(phi.delta2, est_delta2)
    if not 2.0 < delta2 <= 2.0**phi.p_plus * (1 + 1e-12):
        raise NotOrliczError(f"{phi.label}: Delta_2 constant {delta2} outside (2, 2^p+]")
    return phi.p_minus, phi.p_plus, delta2


def conjugate_eval(phi: OrliczFunction, s: float, iters: int = 200) -> float:
    """Legendre transform sup_{t>0} (s t - phi(t)) by ternary search."""
    if s < 0:
        raise ValueError("conjugate evaluated on [0, inf)")
    if s == 0:
        return 0.0
    hi = 1.0
    while float(phi.deriv(hi)) < s:
        hi *= 2.0
    lo = 0.0
    for _ in range(iters):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if s * m1 - float(phi(m1)) < s * m2 - float(phi(m2)):
            lo = m1
        else:
            hi = m2
    t = 0.5 * (lo + hi)
    return max(0.0, s * t - float(phi(t)))


@dataclass(frozen=True)
class PhiTilde:
    """Value of the limit function at one ``t`` plus the numbers behind it.

    ``value`` is the closed form for the power family and the extrapolated
    sweep otherwise; both paths are always computed.
    """

    value: float
    stderr: float
    closed_form: float
    closed_form_stderr: float
    sweep_value: float
    sweep_stderr: float
    points: tuple[tuple[float, float], ...]
    residual: float


def _r_integral(phi: OrliczFunction, a: Array, s: float, nodes: int = 400) -> Array:
    """(1-s) int_0^1 phi(a r^(1-s)) dr/r by Gauss-Legendre in tau = -log r.

    The integrand decays like exp(-(1-s) p_minus tau); the range is cut where
    that factor drops below 1e-16 and the dropped mass is below that level.
    """
    k = 1.0 - s
    tau_max = 37.0 / (k * phi.p_minus)
    x, w = np.polynomial.legendre.leggauss(nodes)
    # Split [0, tau_max] into panels that shrink where the integrand varies fastest.
    edges = tau_max * np.concatenate([[0.0], np.geomspace(1e-4, 1.0, 24)])
    total = np.zeros_like(a)
    for lo, hi in zip(edges[:-1], edges[1:]):
        tau = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        vals = phi(a[..., None] * np.exp(-k * tau))
        total += 0.5 * (hi - lo) * (vals @ w)
    return k * total


def phi_tilde(
    phi: OrliczFunction,
    g: CarnotGroup,
    ng: HomogeneousGauge,
    t: float,
    s_grid: tuple[float, ...] = (0.90, 0.95, 0.975, 0.99),
    directional: bool = False,
    v: ArrayLike | None = None,
    spec: QuadratureSpec | None = None,
) -> PhiTilde:
    """Limit function of the (1-s)-weighted radial-spherical integral.

    The sphere integral uses nodes from :func:`quadrature.sphere_nodes`. At
    each ``s`` the radial integral is done numerically and the (1-s)-weighted
    values are extrapolated linearly to s = 1. The closed form
    ``int_S psi(a(z)) dsigma`` (``psi`` from :meth:`OrliczFunction.psi`)
    reduces to ``t^p/p * int_S |z'|^p dsigma`` for the power family.

    With ``directional`` the argument ``t |z'|`` is replaced by ``|v . z'|``.
    """
    from .asymptotics import extrapolate_limit
    from .quadrature import QuadratureSpec, sphere_nodes

    spec = spec or QuadratureSpec()
    if list(s_grid) != sorted(s_grid) or len(set(s_grid)) != len(s_grid) or not all(0 < s < 1 for s in s_grid):
        raise ValueError("s_grid must increase strictly inside (0, 1)")
    if t < 0:
        raise ValueError("phi_tilde is defined on [0, inf)")
    if directional:
        if v is None:
            raise ValueError("directional phi_tilde needs a horizontal vector v")
        v = np.asarray(v, dtype=float)
        if v.shape != (g.m,):
            raise ValueError(f"v must have length {g.m}")
    nodes = sphere_nodes(g, ng, spec)

    def amplitude(z: Array) -> Array:
        if directional:
            return np.abs(z[:, : g.m] @ v)
        return t * np.sqrt(np.sum(z[:, : g.m] ** 2, axis=1))

    per_s = []
    closed = []
    for z, w in nodes:
        a = amplitude(z)
        per_s.append([float(w @ _r_integral(phi, a, s)) for s in s_grid])
        closed.append(float(w @ phi.psi(a)))
    per_s = np.asarray(per_s)
    means = per_s.mean(axis=0)
    errs = per_s.std(axis=0, ddof=1) / np.sqrt(len(per_s))
    points = tuple(zip(s_grid, means))
    limit, residual = extrapolate_limit(
        [(s, m, e) for s, m, e in zip(s_grid, means, errs)], "bbm_s_to_1"
    )
    sweep_err = float(np.max(errs)) + residual
    closed_arr = np.asarray(closed)
    c_val = float(closed_arr.mean())
    c_err = float(closed_arr.std(ddof=1) / np.sqrt(len(closed_arr)))
    if phi.is_power:
        return PhiTilde(c_val, c_err, c_val, c_err, limit, sweep_err, points, residual)
    return PhiTilde(limit, sweep_err, c_val, c_err, limit, sweep_err, points, residual)


@dataclass(frozen=True)
class MinkowskiCheck:
    """Empirical test of property (M); ``worst`` is the largest relative excess."""

    holds: bool
    worst: float
    trials: int


def minkowski_check(phi: OrliczFunction, trials: int = 2000, atoms: int = 8, seed: int = 0, tol: float = 1e-10) -> MinkowskiCheck:
    """Test phi^-1(Phi(|u|+|v|)) <= phi^-1(Phi(u)) + phi^-1(Phi(v)).

    Simple functions taking ``atoms`` values on disjoint sets of random
    measure realize every finite discrete measure, so random atom values and
    masses over many decades probe (M) on genuine fields.
    """
    rng = np.random.default_rng(seed)
    w = np.exp(rng.uniform(-6, 6, (trials, atoms)))
    u = np.exp(rng.uniform(-6, 6, (trials, atoms))) * rng.integers(0, 2, (trials, atoms))
    v = np.exp(rng.uniform(-6, 6, (trials, atoms))) * rng.integers(0, 2, (trials, atoms))

    def norm(f: Array) -> Array:
        return phi_inverse(phi, np.sum(w * phi(f), axis=1))

    lhs = norm(u + v)
    rhs = norm(u) + norm(v)
    excess = (lhs - rhs) / np.maximum(rhs, 1e-300)
    worst = float(np.max(excess))
    return MinkowskiCheck(worst <= tol, worst, trials)
