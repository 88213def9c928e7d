"""Bounded domains with exact boundary distance and closest-point projection.

All query functions accept a single point of shape ``(d,)`` or a batch of
shape ``(n, d)`` and return scalars or arrays accordingly.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    """A point does not have the dimension of the domain."""


def _norm(z: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(z * z, axis=-1))


CLOSURE_SLACK = 4 * 2.0**-52


def _nudge(points: np.ndarray, center: np.ndarray, radius: float, outward: bool) -> np.ndarray:
    # Rescale about ``center`` until rounding puts the points on the requested side of the sphere.
    z = points - center
    for _ in range(8):
        r = _norm(z)
        bad = r < radius if outward else r > radius
        if not np.any(bad):
            break
        factor = 1.0 + 2.0**-51 if outward else 1.0 - 2.0**-51
        z = np.where(bad[..., None], z * factor, z)
    return center + z


@dataclass(frozen=True)
class Domain:
    """Base class; concrete shapes are :class:`Hypercube`, :class:`Ball`, :class:`HalfBall`."""

    dim: int

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 0 or x.shape[-1] != self.dim:
            raise DimensionError(f"expected points of dimension {self.dim}, got shape {x.shape}")
        return x

    def signed_distance(self, x) -> np.ndarray:
        """Distance to the boundary, negative outside the closure."""
        raise NotImplementedError

    def distance_to_boundary(self, x) -> np.ndarray:
        """Euclidean distance to the boundary, clamped to 0 for points outside the domain."""
        return np.maximum(self.signed_distance(x), 0.0)

    def contains(self, x) -> np.ndarray:
        return self.signed_distance(x) > 0.0

    def in_closure(self, x) -> np.ndarray:
        """Closure membership, allowing the few ulps by which a projected point may miss a curved face."""
        return self.signed_distance(x) >= -CLOSURE_SLACK * self._scale()

    def _scale(self) -> float:
        return 1.0

    def project_to_boundary(self, x) -> np.ndarray:
        raise NotImplementedError

    def clamp_to_closure(self, x) -> np.ndarray:
        """Identity on the closure; maps stray points onto the boundary."""
        raise NotImplementedError

    def center(self) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class Hypercube(Domain):
    """Open box ``]lo_0, hi_0[ x ... x ]lo_{d-1}, hi_{d-1}[``."""

    lower: tuple[float, ...] = ()
    upper: tuple[float, ...] = ()

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        lower = self.lower or (0.0,) * self.dim
        upper = self.upper or (1.0,) * self.dim
        if len(lower) != self.dim or len(upper) != self.dim:
            raise ValueError("one interval per axis is required")
        if any(not lo < hi for lo, hi in zip(lower, upper)):
            raise ValueError("each side interval must be non-empty")
        object.__setattr__(self, "lower", tuple(float(v) for v in lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in upper))

    def _faces(self, x: np.ndarray) -> np.ndarray:
        # columns ordered (axis 0 lower, axis 0 upper, axis 1 lower, ...)
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        gaps = np.empty(x.shape[:-1] + (2 * self.dim,))
        gaps[..., 0::2] = x - lo
        gaps[..., 1::2] = hi - x
        return gaps

    def signed_distance(self, x):
        x = self._check(x)
        return np.min(self._faces(x), axis=-1)

    def project_to_boundary(self, x):
        x = self._check(x)
        face = np.argmin(self._faces(x), axis=-1)
        axis = face // 2
        value = np.where(face % 2 == 0, np.asarray(self.lower)[axis], np.asarray(self.upper)[axis])
        y = x.copy()
        np.put_along_axis(y, np.asarray(axis)[..., None], np.asarray(value)[..., None], axis=-1)
        return y

    def clamp_to_closure(self, x):
        x = self._check(x)
        return np.clip(x, self.lower, self.upper)

    def center(self):
        return (np.asarray(self.lower) + np.asarray(self.upper)) / 2.0

    def __str__(self) -> str:
        if all(v == 0.0 for v in self.lower) and all(v == 1.0 for v in self.upper):
            return f"hypercube({self.dim})"
        if len(set(self.lower)) == 1 and len(set(self.upper)) == 1:
            return f"hypercube({self.dim}, {self.lower[0]!r}, {self.upper[0]!r})"
        raise ValueError("only boxes with identical side intervals have a text form")


@dataclass(frozen=True)
class Ball(Domain):
    """Open Euclidean ball. The projection of the centre is ``center - radius * e_0``."""

    radius: float = 1.0
    center_point: tuple[float, ...] = ()

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        c = self.center_point or (0.0,) * self.dim
        if len(c) != self.dim:
            raise ValueError("center has the wrong dimension")
        object.__setattr__(self, "center_point", tuple(float(v) for v in c))
        object.__setattr__(self, "radius", float(self.radius))

    def _scale(self):
        return max(1.0, self.radius)

    def signed_distance(self, x):
        x = self._check(x)
        return self.radius - _norm(x - np.asarray(self.center_point))

    def project_to_boundary(self, x):
        x = self._check(x)
        c = np.asarray(self.center_point)
        z = x - c
        r = _norm(z)
        at_center = r == 0.0
        unit = np.where(at_center[..., None], 0.0, z / np.where(at_center, 1.0, r)[..., None])
        fallback = np.zeros(self.dim)
        fallback[0] = -1.0
        unit = np.where(at_center[..., None], fallback, unit)
        return _nudge(c + self.radius * unit, c, self.radius, outward=True)

    def clamp_to_closure(self, x):
        x = self._check(x)
        c = np.asarray(self.center_point)
        z = x - c
        r = _norm(z)
        out = r > self.radius
        scaled = c + z * (self.radius / np.where(out, r, 1.0))[..., None]
        y = np.where(out[..., None], scaled, x)
        return _nudge(y, c, self.radius, outward=False)

    def center(self):
        return np.asarray(self.center_point, dtype=np.float64)

    def __str__(self) -> str:
        if any(self.center_point):
            raise ValueError("only origin-centred balls have a text form")
        return f"ball({self.dim}, {self.radius!r})"


@dataclass(frozen=True)
class HalfBall(Domain):
    """``{x : |x| < radius, x[axis] > 0}``; ties go to the flat face."""

    radius: float = 1.0
    axis: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if not 0 <= self.axis < self.dim:
            raise ValueError("cut axis out of range")
        object.__setattr__(self, "radius", float(self.radius))

    def _scale(self):
        return max(1.0, self.radius)

    def signed_distance(self, x):
        x = self._check(x)
        return np.minimum(x[..., self.axis], self.radius - _norm(x))

    def project_to_boundary(self, x):
        x = self._check(x)
        flat = x[..., self.axis]
        curved = self.radius - _norm(x)
        flat_proj = x.copy()
        flat_proj[..., self.axis] = 0.0
        origin = np.zeros(self.dim)
        r = _norm(x)
        safe = np.where(r == 0.0, 1.0, r)
        curved_proj = _nudge(x * (self.radius / safe)[..., None], origin, self.radius, outward=True)
        use_flat = flat <= curved
        return np.where(use_flat[..., None], flat_proj, curved_proj)

    def clamp_to_closure(self, x):
        x = self._check(x)
        y = x.copy()
        y[..., self.axis] = np.maximum(y[..., self.axis], 0.0)
        r = _norm(y)
        out = r > self.radius
        scaled = y * (self.radius / np.where(out, r, 1.0))[..., None]
        y = np.where(out[..., None], scaled, y)
        return _nudge(y, np.zeros(self.dim), self.radius, outward=False)

    def center(self):
        c = np.zeros(self.dim)
        c[self.axis] = self.radius / 2.0
        return c

    def __str__(self) -> str:
        if self.axis != 0:
            raise ValueError("only half-balls cut along axis 0 have a text form")
        return f"halfball({self.dim}, {self.radius!r})"


_DOMAIN_RE = re.compile(r"^\s*(hypercube|ball|halfball)\s*\(([^)]*)\)\s*$")


def parse_domain(text: str, dim: int | None = None) -> Domain:
    """Parse ``hypercube(d)``, ``hypercube(d, lo, hi)``, ``ball(d, r)`` or ``halfball(d, r)``.

    A bare shape name (``ball``) takes its dimension from ``dim`` and unit size.
    """
    text = text.strip()
    if text in ("hypercube", "ball", "halfball"):
        if dim is None:
            raise ValueError(f"domain {text!r} needs a dimension")
        text = f"{text}({dim})"
    m = _DOMAIN_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse domain {text!r}; expected hypercube(d), ball(d, r) or halfball(d, r)")
    kind, args = m.group(1), [a.strip() for a in m.group(2).split(",") if a.strip()]
    try:
        d = int(args[0])
        rest = [float(a) for a in args[1:]]
    except (IndexError, ValueError):
        raise ValueError(f"bad arguments in domain {text!r}") from None
    if dim is not None and d != dim:
        raise ValueError(f"domain {text!r} has dimension {d} but dim={dim} was requested")
    if any(not math.isfinite(v) for v in rest):
        raise ValueError(f"non-finite size in domain {text!r}")
    if kind == "hypercube":
        if not rest:
            return Hypercube(d)
        if len(rest) != 2:
            raise ValueError("hypercube takes (d) or (d, lo, hi)")
        return Hypercube(d, (rest[0],) * d, (rest[1],) * d)
    if len(rest) > 1:
        raise ValueError(f"{kind} takes (d) or (d, r)")
    radius = rest[0] if rest else 1.0
    return Ball(d, radius) if kind == "ball" else HalfBall(d, radius)
