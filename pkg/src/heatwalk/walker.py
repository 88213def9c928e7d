"""Random walk on heat balls for the heat equation, and the classical walk on spheres.

The chain runs backwards in time::

    T_{n+1} = T_n - alpha(T_n, X_n) R_{n+1}
    X_{n+1} = X_n + 2 sqrt(alpha(T_n, X_n)) psi_d(R_{n+1}) V_{n+1}

with ``alpha(t, x) = min(t, e/(2d) * dist(x)**2)`` and stops at the first
``n`` with ``alpha <= eps``. Walks are advanced in lockstep batches: every
active walk in a batch has taken the same number of steps, so its random
draws depend only on its own stream index and step number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .geometry import Domain
from .rng import RngStream
from .sampling import psi, sample_radius, sample_unit_vector

MAX_STEPS = 10_000_000


class StopKind(str, Enum):
    BOUNDARY_PROJECTED = "boundary"
    TIME_EXHAUSTED = "time"


class IterationCapError(RuntimeError):
    """A walk exceeded the step cap; the chain is a.s. finite, so this signals a bug."""


class InvalidStartError(ValueError):
    pass


@dataclass
class WalkState:
    t: float
    x: np.ndarray
    n: int = 0
    # radius 2 sqrt(alpha) psi_d(R) of the jump that produced this state
    jump: float = 0.0


@dataclass
class WalkOutcome:
    t_eps: float
    x_eps: np.ndarray
    stop_kind: StopKind
    n_steps: int
    # chain state (T_N, X_N) before projection / time reset
    t_stop: float
    x_stop: np.ndarray
    path: list[tuple[float, np.ndarray]] | None = None

    @property
    def on_boundary(self) -> bool:
        return self.stop_kind is StopKind.BOUNDARY_PROJECTED


@dataclass
class WalkBatch:
    """Terminal data for many walks, row ``k`` belonging to stream index ``start + k``."""

    t_eps: np.ndarray
    x_eps: np.ndarray
    on_boundary: np.ndarray
    n_steps: np.ndarray
    t_stop: np.ndarray
    x_stop: np.ndarray
    start: int = 0

    def __len__(self) -> int:
        return len(self.t_eps)

    def outcome(self, k: int) -> WalkOutcome:
        kind = StopKind.BOUNDARY_PROJECTED if self.on_boundary[k] else StopKind.TIME_EXHAUSTED
        return WalkOutcome(
            float(self.t_eps[k]), self.x_eps[k].copy(), kind, int(self.n_steps[k]),
            float(self.t_stop[k]), self.x_stop[k].copy(),
        )

    @classmethod
    def concatenate(cls, parts: list["WalkBatch"]) -> "WalkBatch":
        parts = sorted(parts, key=lambda b: b.start)
        return cls(
            *(np.concatenate([getattr(p, name) for p in parts]) for name in
              ("t_eps", "x_eps", "on_boundary", "n_steps", "t_stop", "x_stop")),
            start=parts[0].start if parts else 0,
        )


def _space_scale(dim: int, dist):
    return (math.e / (2.0 * dim)) * dist * dist


def alpha(t, x, domain: Domain):
    """Largest admissible heat-ball scale ``min(t, e/(2d) * dist(x)**2)``."""
    dist = domain.distance_to_boundary(x)
    out = np.minimum(t, _space_scale(domain.dim, dist))
    return float(out) if np.ndim(out) == 0 else out


def _advance(state_t, state_x, domain, stream, profile):
    # one lockstep step for arrays of shape (m,) / (m, d); returns new (t, x, displacement norm)
    d = domain.dim
    dist = domain.distance_to_boundary(state_x)
    a = np.minimum(state_t, _space_scale(d, dist))
    r = sample_radius(d, stream)
    v = sample_unit_vector(d, stream)
    # exact arithmetic gives radius <= dist; the min only absorbs rounding
    radius = np.minimum(2.0 * np.sqrt(a) * profile(d, r), dist)
    t_new = np.maximum(state_t - a * r, 0.0)
    x_new = state_x + radius[..., None] * v
    stray = domain.signed_distance(x_new) < 0.0
    if np.any(stray):
        x_new[stray] = domain.clamp_to_closure(x_new[stray])
    return t_new, x_new, radius


def step(state: WalkState, domain: Domain, stream: RngStream, profile: Callable = psi) -> WalkState:
    """Advance one walk (or a lockstep batch held in ``state``) by a single heat-ball jump."""
    x = np.asarray(state.x, dtype=np.float64)
    a = alpha(state.t, x, domain)
    if np.any(np.asarray(a) <= 0.0):
        raise ValueError("step requires alpha > 0; stop the walk first")
    if x.ndim == 1:
        t_new, x_new, jump = _advance(np.array([float(state.t)]), x[None, :], domain, _Row(stream), profile)
        return WalkState(float(t_new[0]), x_new[0], state.n + 1, float(jump[0]))
    t_new, x_new, jump = _advance(np.asarray(state.t, dtype=np.float64), x, domain, stream, profile)
    return WalkState(t_new, x_new, state.n + 1, jump)


def _check_start(t0, x0, domain: Domain, eps):
    x0 = np.asarray(x0, dtype=np.float64)
    domain._check(x0)
    if not t0 > 0:
        raise InvalidStartError(f"start time must be positive, got {t0}")
    if not eps > 0:
        raise InvalidStartError(f"eps must be positive, got {eps}")
    if not bool(np.all(domain.contains(x0))):
        raise InvalidStartError(f"start point {x0} is not inside {domain}")
    return x0


def _classify(t, x, domain, eps):
    # boundary iff the space branch of alpha is <= eps (same expression the stop test uses)
    near = _space_scale(domain.dim, domain.distance_to_boundary(x)) <= eps
    t_eps = np.where(near, t, 0.0)
    x_eps = x.copy()
    if np.any(near):
        x_eps[near] = domain.project_to_boundary(x[near])
    return t_eps, x_eps, near


def simulate(
    t0: float,
    x0,
    domain: Domain,
    eps: float,
    stream: RngStream,
    max_steps: int = MAX_STEPS,
    profile: Callable = psi,
) -> WalkBatch:
    """Run one walk per row of a batched ``stream`` from the common start ``(t0, x0)``."""
    x0 = _check_start(t0, x0, domain, eps)
    if not stream.batched:
        raise ValueError("simulate needs a batched stream; use run_walk for a single walk")
    m, d = len(stream), domain.dim
    t_stop = np.empty(m)
    x_stop = np.empty((m, d))
    n_steps = np.zeros(m, dtype=np.int64)

    ids = np.arange(m)
    t = np.full(m, float(t0))
    x = np.broadcast_to(x0, (m, d)).copy()
    for n in range(max_steps + 1):
        a = np.minimum(t, _space_scale(d, domain.distance_to_boundary(x)))
        done = a <= eps
        if np.any(done):
            t_stop[ids[done]] = t[done]
            x_stop[ids[done]] = x[done]
            n_steps[ids[done]] = n
            keep = ~done
            ids, t, x = ids[keep], t[keep], x[keep]
            stream = stream.subset(keep)
        if not len(ids):
            break
        if n == max_steps:
            raise IterationCapError(f"{len(ids)} walk(s) exceeded {max_steps} steps")
        t, x, _ = _advance(t, x, domain, stream, profile)

    t_eps, x_eps, near = _classify(t_stop, x_stop, domain, eps)
    return WalkBatch(t_eps, x_eps, near, n_steps, t_stop, x_stop)


def run_walks(
    t0: float,
    x0,
    domain: Domain,
    eps: float,
    seed: int,
    start: int,
    count: int,
    max_steps: int = MAX_STEPS,
    profile: Callable = psi,
) -> WalkBatch:
    """Walks with stream indices ``start .. start + count - 1`` under ``seed``."""
    stream = RngStream(seed, np.arange(start, start + count, dtype=np.uint64))
    batch = simulate(t0, x0, domain, eps, stream, max_steps=max_steps, profile=profile)
    batch.start = start
    return batch


def run_walk(
    t0: float,
    x0,
    domain: Domain,
    eps: float,
    stream: RngStream,
    record_path: bool = False,
    max_steps: int = MAX_STEPS,
    profile: Callable = psi,
) -> WalkOutcome:
    """Run a single walk from ``(t0, x0)`` until ``alpha <= eps`` and classify its stop."""
    x0 = _check_start(t0, x0, domain, eps)
    if stream.batched:
        raise ValueError("run_walk takes a single stream; use simulate for batches")
    t, x = float(t0), x0.copy()
    path = [(t, x.copy())] if record_path else None
    for n in range(max_steps + 1):
        if alpha(t, x, domain) <= eps:
            break
        if n == max_steps:
            raise IterationCapError(f"walk exceeded {max_steps} steps")
        t_arr, x, _ = _advance(np.array([t]), x[None, :], domain, _Row(stream), profile)
        t, x = float(t_arr[0]), x[0]
        if path is not None:
            path.append((t, x.copy()))
    t_eps, x_eps, near = _classify(np.array([t]), x[None, :], domain, eps)
    kind = StopKind.BOUNDARY_PROJECTED if near[0] else StopKind.TIME_EXHAUSTED
    return WalkOutcome(float(t_eps[0]), x_eps[0], kind, n, t, x.copy(), path)


class _Row:
    """View a single stream as a batch of one so both paths share ``_advance``."""

    def __init__(self, stream: RngStream):
        self._stream = stream

    def uniforms(self, k):
        return self._stream.uniforms(k)[None, :]

    def normals(self, k):
        return self._stream.normals(k)[None, :]


# -- classical walk on spheres -------------------------------------------------


def run_classical_wos(x0, domain: Domain, eps: float, beta: float, stream: RngStream,
                      max_steps: int = MAX_STEPS) -> np.ndarray:
    """Jump to a uniform point at distance ``beta * dist(X_n)`` while ``dist(X_n) > eps``; project.

    With a batched stream, one boundary point is returned per row.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    domain._check(x0)
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not bool(np.all(domain.contains(x0))):
        raise InvalidStartError(f"start point {x0} is not inside {domain}")
    single = not stream.batched
    m, d = (1 if single else len(stream)), domain.dim
    rows = _Row(stream) if single else stream
    out = np.empty((m, d))
    ids = np.arange(m)
    x = np.broadcast_to(x0, (m, d)).copy()
    for n in range(max_steps + 1):
        dist = domain.distance_to_boundary(x)
        done = dist <= eps
        if np.any(done):
            out[ids[done]] = x[done]
            keep = ~done
            ids, x, dist = ids[keep], x[keep], dist[keep]
            if not single:
                rows = rows.subset(keep)
        if not len(ids):
            break
        if n == max_steps:
            raise IterationCapError(f"{len(ids)} walk(s) exceeded {max_steps} steps")
        x = x + (beta * dist)[:, None] * sample_unit_vector(d, rows)
    y = domain.project_to_boundary(out)
    return y[0] if single else y
