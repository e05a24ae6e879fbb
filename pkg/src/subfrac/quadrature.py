"""Haar-measure integration on the shipped groups.

Haar measure in exponential coordinates is Lebesgue measure, so region
integrals are ordinary box integrals of (possibly indicator-weighted)
integrands. Error bars come from independent scramblings of a Sobol
sequence: each batch is a full randomized-QMC estimate, and the stderr is
the spread of the batch means.

Batches are evaluated on a thread pool capped by ``SUBFRAC_THREADS``. Every
batch has its own seed derived from ``(seed, batch)`` and results are reduced
in batch order, so values do not depend on the number of workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy import integrate
from scipy.stats import qmc

from .group import CarnotGroup, HomogeneousGauge, dilate

__all__ = [
    "QuadratureSpec",
    "IntegralValue",
    "Box",
    "Ball",
    "Annulus",
    "worker_count",
    "batch_map",
    "qmc_batch",
    "region_integral",
    "ball_volume",
    "radial_integral",
    "sphere_integral",
    "sphere_nodes",
]

Array = NDArray[np.float64]


@dataclass(frozen=True)
class QuadratureSpec:
    """Sampling controls shared by every integral.

    Attributes:
        method: "qmc" (scrambled Sobol, batch stderr) or "grid" (midpoint
            tensor grid, stderr from a half-resolution rerun).
        samples: Total sample count, split evenly over ``batches``.
        seed: Root seed; batch ``b`` uses the substream ``(seed, b)``.
        r_min: Inner cutoff of the numerically integrated near field.
        annuli: Minimum number of dyadic shells between ``r_min`` and the split radius.
        nodes_per_shell: Stratified radial nodes per shell.
        box_halfwidths: Optional override for box regions.
        batches: Number of independent scramblings.
        workers: Thread count; ``None`` reads ``SUBFRAC_THREADS``.
    """

    method: str = "qmc"
    samples: int = 2**16
    seed: int = 0
    r_min: float = 1e-4
    annuli: int = 1
    nodes_per_shell: int = 4
    box_halfwidths: tuple[float, ...] | None = None
    batches: int = 32
    workers: int | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.method not in ("qmc", "grid"):
            raise ValueError(f"unknown quadrature method {self.method!r}")
        if self.samples < 1 or self.annuli < 1 or self.batches < 2:
            raise ValueError("samples and annuli must be >= 1, batches >= 2")
        if not self.r_min > 0:
            raise ValueError("r_min must be positive")

    @property
    def per_batch(self) -> int:
        """Points per batch, rounded up to a power of two for Sobol balance."""
        return 2 ** max(1, math.ceil(math.log2(max(1, self.samples // self.batches))))


@dataclass(frozen=True)
class IntegralValue:
    value: float
    stderr: float
    breakdown: dict[str, float] | None = None

    def __post_init__(self) -> None:
        if not self.stderr >= 0:
            raise ValueError("stderr must be nonnegative")

    def within(self, target: float, k: float = 3.0, floor: float = 0.0) -> bool:
        return abs(self.value - target) <= k * self.stderr + floor


def worker_count(spec: QuadratureSpec | None = None) -> int:
    if spec is not None and spec.workers is not None:
        return max(1, spec.workers)
    return max(1, int(os.environ.get("SUBFRAC_THREADS", "1")))


def batch_map(fn: Callable[[int], object], n: int, workers: int) -> list:
    """``[fn(0), ..., fn(n-1)]`` evaluated on up to ``workers`` threads, in order."""
    if workers <= 1:
        return [fn(b) for b in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n)))


def qmc_batch(dim: int, spec: QuadratureSpec, batch: int, stream: int = 0) -> Array:
    """Scrambled Sobol points in [0,1)^dim for one batch of ``spec``."""
    ss = np.random.SeedSequence([spec.seed, stream, batch])
    sampler = qmc.Sobol(dim, scramble=True, seed=np.random.default_rng(ss))
    return sampler.random_base2(int(math.log2(spec.per_batch)))


def _reduce(batch_means: Sequence[float]) -> IntegralValue:
    arr = np.asarray(batch_means, dtype=float)
    return IntegralValue(float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(len(arr))))


@dataclass(frozen=True)
class Box:
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    @classmethod
    def centered(cls, halfwidths: Sequence[float], center: Sequence[float] | None = None) -> Box:
        hw = np.asarray(halfwidths, dtype=float)
        c = np.zeros_like(hw) if center is None else np.asarray(center, dtype=float)
        return cls(tuple(c - hw), tuple(c + hw))


@dataclass(frozen=True)
class Ball:
    radius: float


@dataclass(frozen=True)
class Annulus:
    inner: float
    outer: float


Region = Box | Ball | Annulus


def _region_box(region: Region, g: CarnotGroup, ng: HomogeneousGauge | None) -> tuple[Array, Array, Callable[[Array], Array] | None]:
    if isinstance(region, Box):
        lo, hi = np.asarray(region.lo, float), np.asarray(region.hi, float)
        if lo.shape != (g.n,) or hi.shape != (g.n,):
            raise ValueError("box dimension does not match the group")
        if not np.all(np.isfinite(lo) & np.isfinite(hi)):
            raise ValueError("region must be bounded")
        return lo, hi, None
    if ng is None:
        raise ValueError("ball and annulus regions need a gauge")
    if isinstance(region, Ball):
        outer, inner = region.radius, 0.0
    else:
        outer, inner = region.outer, region.inner
    if not math.isfinite(outer):
        raise ValueError("region must be bounded")
    hw = ng.box_halfwidths(outer)

    def mask(x: Array) -> Array:
        r = ng(x)
        return (r <= outer) & (r >= inner)

    return -hw, hw, mask


def _grid_points(n: int, k: int) -> Array:
    axes = [(np.arange(k) + 0.5) / k] * n
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)


def region_integral(
    f: Callable[[Array], Array],
    g: CarnotGroup,
    region: Region,
    spec: QuadratureSpec,
    ng: HomogeneousGauge | None = None,
    stream: int = 0,
) -> IntegralValue:
    """Integral of a vectorized ``f`` over a bounded box, gauge ball or annulus."""
    lo, hi, mask = _region_box(region, g, ng)
    vol = float(np.prod(hi - lo))

    def estimate(u: Array) -> float:
        x = lo + u * (hi - lo)
        vals = np.asarray(f(x), dtype=float)
        if mask is not None:
            vals = np.where(mask(x), vals, 0.0)
        if not np.all(np.isfinite(vals)):
            raise FloatingPointError("integrand is not finite on the region")
        return vol * float(vals.mean())

    if spec.method == "grid":
        k = max(2, round(spec.samples ** (1.0 / g.n)))
        k += k % 2
        fine, coarse = estimate(_grid_points(g.n, k)), estimate(_grid_points(g.n, k // 2))
        return IntegralValue(fine, abs(fine - coarse))

    def run(b: int) -> float:
        return estimate(qmc_batch(g.n, spec, b, stream))

    return _reduce(batch_map(run, spec.batches, worker_count(spec)))


# Volume of the unit gauge ball, keyed by (group, gauge, samples, seed).
_BALL_CACHE: dict[tuple[str, str, int, int], IntegralValue] = {}

BALL_VOLUME_SPEC = QuadratureSpec(samples=2**24, seed=20240611)


def ball_volume(
    g: CarnotGroup, ng: HomogeneousGauge, spec: QuadratureSpec | None = None
) -> IntegralValue:
    """Lebesgue measure C_b of the unit gauge ball by indicator QMC, cached."""
    spec = spec or BALL_VOLUME_SPEC
    key = (g.name, ng.kind, spec.samples, spec.seed)
    if key not in _BALL_CACHE:
        _BALL_CACHE[key] = region_integral(
            lambda x: np.ones(len(x)), g, Ball(1.0), spec, ng, stream=101
        )
    return _BALL_CACHE[key]


def radial_integral(
    f: Callable[[Array], Array],
    a: float,
    b: float,
    g: CarnotGroup,
    ng: HomogeneousGauge,
    decay: float | None = None,
    c_b: float | None = None,
) -> float:
    """QC_b * int_a^b r^(Q-1) f(r) dr for a radial profile ``f``.

    An infinite upper limit requires ``decay``: an exponent d with
    |f(r)| = O(r^-d) at infinity, and d must exceed Q.
    """
    Q = g.Q
    if c_b is None:
        c_b = ball_volume(g, ng).value
    if a < 0 or b <= a:
        raise ValueError("need 0 <= a < b")
    if math.isinf(b) and (decay is None or decay <= Q):
        raise ValueError(f"divergent tail: profile decay {decay} must exceed Q={Q}")

    def in_r(r: float) -> float:
        return float(r ** (Q - 1) * np.asarray(f(np.array([r])))[0])

    def in_tau(tau: float) -> float:
        r = math.exp(tau)
        return r * in_r(r)

    # Panels of unit width in tau = log r resolve profiles over many decades.
    start = a if a > 0 else 1e-8 * (b if math.isfinite(b) else 1.0)
    total = integrate.quad(in_r, 0.0, start, limit=200)[0] if a == 0 else 0.0
    stop = math.log(b) if math.isfinite(b) else max(math.log(start), 0.0) + 1.0
    edges = np.linspace(math.log(start), stop, max(2, math.ceil(stop - math.log(start)) + 1))
    for lo, hi in zip(edges[:-1], edges[1:]):
        total += integrate.quad(in_tau, lo, hi, limit=200, epsabs=0.0, epsrel=1e-11)[0]
    if math.isinf(b):
        total += integrate.quad(in_r, math.exp(stop), np.inf, limit=200, epsabs=0.0, epsrel=1e-11)[0]
    return Q * c_b * total


def _annulus_samples(g: CarnotGroup, ng: HomogeneousGauge, u: Array) -> tuple[Array, Array]:
    """Map unit-cube points to sphere points with annulus-reduction weights.

    Uses int_S h dsigma = (1/ln 2) int_{1<=|w|<=2} h(delta_{1/|w|} w) |w|^-Q dw.
    """
    hw = ng.box_halfwidths(2.0)
    w = -hw + 2.0 * hw * u
    r = ng(w)
    inside = (r >= 1.0) & (r <= 2.0)
    vol = float(np.prod(2.0 * hw))
    weight = np.where(inside, vol / math.log(2.0) * r ** (-g.Q), 0.0)
    z = dilate(g, 1.0 / np.where(r > 0, r, 1.0), w)
    return z, weight


def sphere_nodes(
    g: CarnotGroup, ng: HomogeneousGauge, spec: QuadratureSpec, stream: int = 7
) -> list[tuple[Array, Array]]:
    """Per-batch sphere nodes ``(z, w)`` with ``sum(w * h(z)) ~ int_S h dsigma``.

    Only nodes with nonzero weight are kept. Each node is paired with its
    inverse, since sigma is inversion invariant. On R^1 the two exact point
    masses are returned instead.
    """
    if g.n == 1:
        # S is {-1, 1} with unit point masses; the quadrature is exact.
        node = (np.array([[1.0], [-1.0]]), np.ones(2))
        return [node] * spec.batches
    out = []
    for b in range(spec.batches):
        z, w = _annulus_samples(g, ng, qmc_batch(g.n, spec, b, stream))
        keep = w > 0
        z, w = z[keep], w[keep] / len(keep)
        out.append((np.concatenate([z, -z]), 0.5 * np.concatenate([w, w])))
    return out


def sphere_integral(
    h: Callable[[Array], Array],
    g: CarnotGroup,
    ng: HomogeneousGauge,
    spec: QuadratureSpec,
) -> IntegralValue:
    """Integral over the unit gauge sphere against the polar measure sigma."""
    means = []
    for z, w in sphere_nodes(g, ng, spec):
        vals = np.asarray(h(z), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise FloatingPointError("sphere integrand is not finite")
        means.append(float(w @ vals))
    return _reduce(means)
