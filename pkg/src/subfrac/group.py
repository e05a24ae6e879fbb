"""Carnot groups in exponential coordinates and homogeneous gauges.

Points are plain numpy arrays whose last axis holds the ``n`` exponential
coordinates, so every operation here accepts a single point of shape ``(n,)``
or a batch of shape ``(N, n)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "CarnotGroup",
    "HomogeneousGauge",
    "GROUPS",
    "get_group",
    "get_gauge",
    "compose",
    "invert",
    "dilate",
    "gauge",
    "horizontal_rotate",
    "validate_gauge_axioms",
]

Array = NDArray[np.float64]


def _abelian_law(x: Array, y: Array) -> Array:
    return x + y


def _heisenberg_law(x: Array, y: Array) -> Array:
    out = x + y
    out[..., 2] += 0.5 * (x[..., 0] * y[..., 1] - x[..., 1] * y[..., 0])
    return out


@dataclass(frozen=True)
class CarnotGroup:
    """A stratified group realized on R^n with a polynomial law.

    Attributes:
        name: Identifier used in configs ("r1", "r2", "r3", "h1").
        n: Topological dimension.
        m: Horizontal dimension, the length of the horizontal gradient.
        weights: Dilation weights d_1..d_n; the first ``m`` equal 1.
        law: Vectorized group product on coordinate arrays.
    """

    name: str
    n: int
    m: int
    weights: tuple[int, ...]
    law: Callable[[Array, Array], Array] = field(repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.weights) != self.n or not 1 <= self.m <= self.n:
            raise ValueError(f"inconsistent group descriptor {self.name!r}")
        if any(w != 1 for w in self.weights[: self.m]):
            raise ValueError("horizontal coordinates must have weight 1")

    @property
    def Q(self) -> int:
        """Homogeneous dimension."""
        return int(sum(self.weights))

    @property
    def abelian(self) -> bool:
        return all(w == 1 for w in self.weights)

    @property
    def identity(self) -> Array:
        return np.zeros(self.n)

    def check(self, x: ArrayLike) -> Array:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.n,):
            raise ValueError(
                f"point of shape {x.shape} does not belong to {self.name} (n={self.n})"
            )
        return x


GROUPS: dict[str, CarnotGroup] = {
    "r1": CarnotGroup("r1", 1, 1, (1,), _abelian_law),
    "r2": CarnotGroup("r2", 2, 2, (1, 1), _abelian_law),
    "r3": CarnotGroup("r3", 3, 3, (1, 1, 1), _abelian_law),
    "h1": CarnotGroup("h1", 3, 2, (1, 1, 2), _heisenberg_law),
}


def get_group(name: str) -> CarnotGroup:
    try:
        return GROUPS[name]
    except KeyError:
        raise ValueError(f"unknown group {name!r}; expected one of {sorted(GROUPS)}") from None


def compose(g: CarnotGroup, x: ArrayLike, y: ArrayLike) -> Array:
    """Group product ``x . y``, broadcasting over leading axes."""
    x, y = np.broadcast_arrays(g.check(x), g.check(y))
    return g.law(x, y)


def invert(g: CarnotGroup, x: ArrayLike) -> Array:
    # Both shipped laws have coordinate negation as inverse.
    return -g.check(x)


def dilate(g: CarnotGroup, lam: ArrayLike, x: ArrayLike) -> Array:
    """Anisotropic dilation ``delta_lam``; ``lam`` may be a scalar or per-point array."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("dilation factor must be positive")
    x = g.check(x)
    w = np.asarray(g.weights, dtype=float)
    return x * lam[..., None] ** w


def horizontal_rotate(g: CarnotGroup, theta: float | ArrayLike, x: ArrayLike) -> Array:
    """Rotate the horizontal block of ``x``; other coordinates are untouched.

    ``theta`` is an angle when ``m == 2``, otherwise an ``m x m`` orthogonal matrix.
    """
    x = g.check(x).copy()
    if np.ndim(theta) == 0:
        if g.m != 2:
            raise ValueError(f"angle rotation needs m == 2, group {g.name} has m={g.m}")
        c, s = np.cos(theta), np.sin(theta)
        rot = np.array([[c, -s], [s, c]])
    else:
        rot = np.asarray(theta, dtype=float)
        if rot.shape != (g.m, g.m):
            raise ValueError(f"rotation must be {g.m}x{g.m}, got {rot.shape}")
    x[..., : g.m] = x[..., : g.m] @ rot.T
    return x


FLAG_NAMES = ("symmetric", "homogeneous", "triangle", "horizontally_rotation_invariant")


@dataclass(frozen=True)
class HomogeneousGauge:
    """A homogeneous norm on ``group``.

    ``flags`` maps each axiom name to "declared", "empirically_validated" or
    "unknown". Validation returns a new gauge; instances are never mutated.
    """

    kind: str
    group: CarnotGroup
    flags: dict[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in ("koranyi", "euclidean"):
            raise ValueError(f"unknown gauge kind {self.kind!r}")
        if self.kind == "euclidean" and not self.group.abelian:
            raise ValueError(f"euclidean gauge is not homogeneous on {self.group.name}")

    @property
    def name(self) -> str:
        return self.kind

    def __call__(self, x: ArrayLike) -> Array:
        x = self.group.check(x)
        if self.group.abelian:
            # Korányi reduces to the Euclidean norm when there is no vertical layer.
            return np.sqrt(np.sum(x * x, axis=-1))
        m = self.group.m
        hor2 = np.sum(x[..., :m] ** 2, axis=-1)
        ver2 = np.sum(x[..., m:] ** 2, axis=-1)
        return (hor2 * hor2 + 16.0 * ver2) ** 0.25

    def box_halfwidths(self, r: float = 1.0) -> Array:
        """Per-coordinate half-widths of a box containing the gauge ball of radius ``r``."""
        w = np.asarray(self.group.weights, dtype=float)
        hw = r**w
        if not self.group.abelian:
            # |t| <= r^2/4 on the Korányi ball.
            hw = np.where(w > 1, hw / 4.0, hw)
        return hw


def get_gauge(group: CarnotGroup | str, kind: str) -> HomogeneousGauge:
    if isinstance(group, str):
        group = get_group(group)
    flags = {name: "declared" for name in ("symmetric", "homogeneous")}
    flags.update(triangle="unknown", horizontally_rotation_invariant="declared")
    return HomogeneousGauge(kind, group, flags)


def gauge(ng: HomogeneousGauge, x: ArrayLike) -> Array:
    return ng(x)


def _random_rotation(rng: np.random.Generator, m: int) -> Array:
    q, r = np.linalg.qr(rng.standard_normal((m, m)))
    return q * np.sign(np.diag(r))


def validate_gauge_axioms(
    ng: HomogeneousGauge,
    samples: int = 100_000,
    seed: int = 0,
    tol: float = 1e-12,
    bound: float = 10.0,
) -> tuple[HomogeneousGauge, dict[str, float]]:
    """Check axioms (i)-(v) on random points and return the validated gauge.

    The returned dict holds the worst violation per axiom, measured relative to
    the scale of the quantities compared. An axiom whose violation stays below
    ``tol`` is flagged "empirically_validated", otherwise "unknown".
    """
    g = ng.group
    rng = np.random.default_rng(seed)
    x = rng.uniform(-bound, bound, (samples, g.n))
    y = rng.uniform(-bound, bound, (samples, g.n))
    lam = np.exp(rng.uniform(-3, 3, samples))
    nx, ny = ng(x), ng(y)
    scale = np.maximum(1.0, nx + ny)

    worst: dict[str, float] = {}
    worst["identity"] = float(ng(g.identity))
    worst["symmetric"] = float(np.max(np.abs(ng(invert(g, x)) - nx) / scale))
    worst["homogeneous"] = float(
        np.max(np.abs(ng(dilate(g, lam, x)) - lam * nx) / np.maximum(1.0, lam * nx))
    )
    d = ng(compose(g, invert(g, y), x))
    lower = np.abs(ny - nx) - d
    upper = d - (nx + ny)
    worst["triangle"] = float(max(np.max(lower / scale), np.max(upper / scale), 0.0))
    if g.m >= 2:
        rot = _random_rotation(rng, g.m)
        rotated = horizontal_rotate(g, rot, x)
        worst["horizontally_rotation_invariant"] = float(
            np.max(np.abs(ng(rotated) - nx) / scale)
        )
    else:
        # O(1) on a line is {+1, -1}; the reflection is the inverse.
        worst["horizontally_rotation_invariant"] = worst["symmetric"]

    flags = dict(ng.flags)
    for name in FLAG_NAMES:
        flags[name] = "empirically_validated" if worst[name] <= tol else "unknown"
    return replace(ng, flags=flags), worst
