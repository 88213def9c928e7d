"""Monte Carlo estimation of ``u(t, x)`` from many independent walks.

Walk ``k`` always uses stream index ``k`` under the master seed and walks are
simulated in fixed-size chunks, so the per-walk payoff vector (and therefore
every reduction over it) is identical for any number of workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exprlang import Expr
from .geometry import Domain
from .rng import RngStream
from .sampling import psi
from .walker import WalkBatch, WalkOutcome, run_walks

CHUNK = 1 << 15
Z95 = 1.96
WORKERS_ENV = "HEATWALK_WORKERS"


class CompatibilityError(ValueError):
    """Boundary data violates ``f(0, x) == f0(x)`` on the boundary."""


class _AtTimeZero:
    # picklable f0 wrapper around an expression that may mention t
    def __init__(self, expr: Expr):
        self.expr = expr

    def __call__(self, x):
        return self.expr(0.0, x)


@dataclass
class BoundaryData:
    """Boundary values ``f(t, x)`` on the lateral boundary and initial values ``f0(x)``.

    Both callables must accept batched input (``t`` of shape ``(n,)``, ``x`` of
    shape ``(n, d)``) and return arrays.
    """

    f: Callable
    f0: Callable

    @classmethod
    def from_exprs(cls, f: Expr, f0: Expr) -> "BoundaryData":
        return cls(f, _AtTimeZero(f0))

    def check_compatibility(self, domain: Domain, samples: int = 256, tol: float = 1e-9, seed: int = 0):
        """Compare ``f(0, y)`` with ``f0(y)`` at pseudo-random boundary points ``y``."""
        pts = boundary_sample(domain, samples, seed)
        a = np.asarray(self.f(np.zeros(len(pts)), pts), dtype=np.float64)
        b = np.asarray(self.f0(pts), dtype=np.float64)
        gap = np.abs(a - b)
        worst = int(np.argmax(gap))
        if gap[worst] > tol:
            raise CompatibilityError(
                f"f(0, y) = {a[worst]!r} but f0(y) = {b[worst]!r} at boundary point y = {pts[worst].tolist()}"
            )
        return self


def boundary_sample(domain: Domain, n: int, seed: int = 0) -> np.ndarray:
    """Boundary points obtained by projecting pseudo-random interior points."""
    stream = RngStream(seed, np.arange(n, dtype=np.uint64))
    lo, hi = _bounding_box(domain)
    pts = lo + (hi - lo) * stream.uniforms(domain.dim)
    inside = domain.contains(pts)
    pts = np.where(inside[:, None], pts, domain.center())
    return domain.project_to_boundary(pts)


def _bounding_box(domain: Domain):
    from .geometry import Ball, HalfBall, Hypercube

    if isinstance(domain, Hypercube):
        return np.asarray(domain.lower), np.asarray(domain.upper)
    if isinstance(domain, Ball):
        c = np.asarray(domain.center_point)
        return c - domain.radius, c + domain.radius
    if isinstance(domain, HalfBall):
        lo, hi = np.full(domain.dim, -domain.radius), np.full(domain.dim, domain.radius)
        lo[domain.axis] = 0.0
        return lo, hi
    raise TypeError(f"unsupported domain {domain!r}")


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_error: float
    ci95: tuple[float, float]
    n_samples: int
    mean_steps: float
    boundary_stop_fraction: float


@dataclass(frozen=True)
class WalkStatistics:
    step_counts: np.ndarray
    step_edges: np.ndarray
    payoff_counts: np.ndarray
    payoff_edges: np.ndarray
    boundary_stop_fraction: float
    estimate: Estimate


def sample_payoff(outcome: WalkOutcome, data: BoundaryData) -> float:
    """``f(T_eps, X_eps)`` for a boundary stop, ``f0(X_eps)`` for a time stop."""
    x = np.asarray(outcome.x_eps, dtype=np.float64)[None, :]
    if outcome.on_boundary:
        return float(np.asarray(data.f(np.array([outcome.t_eps]), x))[0])
    return float(np.asarray(data.f0(x))[0])


def payoffs(batch: WalkBatch, data: BoundaryData) -> np.ndarray:
    """Vectorised :func:`sample_payoff` over a batch, in walk-index order."""
    out = np.empty(len(batch))
    b = batch.on_boundary
    if np.any(b):
        out[b] = data.f(batch.t_eps[b], batch.x_eps[b])
    if np.any(~b):
        out[~b] = data.f0(batch.x_eps[~b])
    return out


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(value))
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {value!r}") from None


def _chunk_job(args):
    t, x, domain, eps, seed, start, count, profile = args
    return run_walks(t, x, domain, eps, seed, start, count, profile=profile)


def simulate_walks(
    domain: Domain,
    t: float,
    x,
    eps: float,
    n: int,
    seed: int,
    workers: int | None = None,
    profile: Callable = psi,
) -> WalkBatch:
    """Terminal states of walks ``0 .. n-1``; identical for every ``workers`` value."""
    if n < 1:
        raise ValueError(f"number of walks must be positive, got {n}")
    workers = default_workers() if workers is None else workers
    if workers < 1:
        raise ValueError("workers must be at least 1")
    x = np.asarray(x, dtype=np.float64)
    jobs = [(t, x, domain, eps, seed, s, min(CHUNK, n - s), profile) for s in range(0, n, CHUNK)]
    if workers == 1 or len(jobs) == 1:
        parts = [_chunk_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_job, jobs))
    return WalkBatch.concatenate(parts)


def summarize(values: np.ndarray, batch: WalkBatch) -> Estimate:
    n = len(values)
    mean = float(np.mean(values))
    std_error = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return Estimate(
        mean=mean,
        std_error=std_error,
        ci95=(mean - Z95 * std_error, mean + Z95 * std_error),
        n_samples=n,
        mean_steps=float(np.mean(batch.n_steps)),
        boundary_stop_fraction=float(np.mean(batch.on_boundary)),
    )


def _validate_request(n: int):
    if n < 2:
        raise ValueError(f"at least 2 walks are needed for an error estimate, got {n}")


def estimate_solution(
    domain: Domain,
    data: BoundaryData,
    t: float,
    x,
    eps: float,
    n: int,
    seed: int,
    workers: int | None = None,
    profile: Callable = psi,
) -> Estimate:
    """Monte Carlo estimate of ``u(t, x)`` with its standard error and 95% interval."""
    _validate_request(n)
    batch = simulate_walks(domain, t, x, eps, n, seed, workers=workers, profile=profile)
    return summarize(payoffs(batch, data), batch)


def walk_statistics(
    domain: Domain,
    data: BoundaryData,
    t: float,
    x,
    eps: float,
    n: int,
    seed: int,
    bins: int = 50,
    workers: int | None = None,
) -> WalkStatistics:
    """Histograms of step counts and payoffs (uniform bins over the observed range)."""
    _validate_request(n)
    if bins < 1:
        raise ValueError("bins must be positive")
    batch = simulate_walks(domain, t, x, eps, n, seed, workers=workers)
    values = payoffs(batch, data)
    step_counts, step_edges = np.histogram(batch.n_steps, bins=bins)
    payoff_counts, payoff_edges = np.histogram(values, bins=bins)
    est = summarize(values, batch)
    return WalkStatistics(step_counts, step_edges, payoff_counts, payoff_edges, est.boundary_stop_fraction, est)
