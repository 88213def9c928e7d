"""Independent checks for the walk: exact solutions, quadrature of the heat-ball
mean value formula, an explicit finite-difference solver and martingale tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.special import gammaln, roots_genlaguerre

from .estimator import BoundaryData, simulate_walks
from .geometry import Domain
from .rng import RngStream
from .sampling import psi, psi_max, sample_unit_vector


class QuadratureError(RuntimeError):
    pass


class StabilityError(ValueError):
    pass


# -- temperatures -------------------------------------------------------------


@dataclass(frozen=True)
class Temperature:
    """A solution ``h(t, x)`` of ``dh/dt = laplacian(h)``, with derivative bounds.

    ``gradient_bound`` bounds ``|grad_x h|`` and ``time_bound`` bounds
    ``|dh/dt|`` on the region where the temperature is used.
    """

    h: Callable
    dim: int
    gradient_bound: float
    time_bound: float = 0.0
    name: str = ""

    def __call__(self, t, x):
        return self.h(t, x)

    def heat_residual(self, t, x, step: float = 1e-3) -> np.ndarray:
        """Relative ``|dh/dt - laplacian(h)|`` by fourth-order central differences at points ``(t, x)``."""
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        h = self.h
        dt = (-h(t + 2 * step, x) + 8 * h(t + step, x) - 8 * h(t - step, x) + h(t - 2 * step, x)) / (12 * step)
        centre = h(t, x)
        lap = np.zeros_like(dt)
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = step
            lap += (-h(t, x + 2 * e) + 16 * h(t, x + e) - 30 * centre + 16 * h(t, x - e) - h(t, x - 2 * e)) / (
                12 * step**2
            )
        scale = np.maximum(np.maximum(np.abs(dt), np.abs(lap)), 1.0)
        return np.abs(dt - lap) / scale


def coordinate_temperature(dim: int, axis: int = 0) -> Temperature:
    return Temperature(lambda t, x: np.asarray(x)[..., axis] + 0.0 * np.asarray(t), dim, 1.0, 0.0, f"x{axis + 1}")


def paraboloid_temperature(dim: int, radius: float) -> Temperature:
    """``2 d t + |x|**2``; ``radius`` bounds ``|x|`` on the region of use."""

    def h(t, x):
        x = np.asarray(x)
        return 2.0 * dim * np.asarray(t) + np.sum(x * x, axis=-1)

    return Temperature(h, dim, 2.0 * radius, 2.0 * dim, "2dt+|x|^2")


def eigen_temperature(dim: int) -> Temperature:
    return Temperature(
        lambda t, x: exact_eigen_solution(dim, t, x), dim, math.pi * math.sqrt(dim), dim * math.pi**2, "eigen"
    )


def constant_temperature(dim: int, value: float = 1.0) -> Temperature:
    return Temperature(lambda t, x: np.full(np.broadcast_shapes(np.shape(t), np.shape(x)[:-1]), value), dim, 0.0)


def exact_eigen_solution(d: int, t, x):
    """``exp(-d pi^2 t) * prod_i sin(pi x_i)``: the IBVP solution on ``]0,1[^d`` with zero boundary data."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != d:
        raise ValueError(f"expected points of dimension {d}")
    out = np.exp(-d * math.pi**2 * np.asarray(t)) * np.prod(np.sin(math.pi * x), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


# -- mean value formula ----------------------------------------------------------


def radial_rule(d: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``s_i`` in ``(0, 1)`` and weights so that ``sum w_i g(s_i) ~ E[g(R)]``.

    Substituting ``s = exp(-2v/d)`` turns the radial density into
    ``v**(d/2) exp(-v) / Gamma(d/2 + 1)``, which generalized Gauss-Laguerre
    integrates without the endpoint singularity.
    """
    v, w = roots_genlaguerre(n, 0.5 * d)
    return np.exp(-2.0 * v / d), w * np.exp(-gammaln(0.5 * d + 1.0))


def sphere_rule(d: int, n: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Nodes on the unit sphere of ``R^d`` with weights summing to one.

    ``n`` is the trapezoid point count for ``d = 2``, the Lebedev order for
    ``d = 3`` and the Monte Carlo sample size for ``d > 3``.
    """
    if d == 1:
        return np.array([[-1.0], [1.0]]), np.array([0.5, 0.5])
    if d == 2:
        ang = 2.0 * math.pi * np.arange(n) / n
        return np.stack([np.cos(ang), np.sin(ang)], axis=1), np.full(n, 1.0 / n)
    if d == 3:
        from scipy.integrate import lebedev_rule

        nodes, w = lebedev_rule(_lebedev_order(n))
        return nodes.T, w / w.sum()
    y = sample_unit_vector(d, RngStream(seed, np.arange(n, dtype=np.uint64)))
    return y, np.full(n, 1.0 / n)


_LEBEDEV_ORDERS = (3, 5, 7, 9, 11, 13, 15, 17, 19, 21, 23, 25, 27, 29, 31, 35, 41, 47, 53, 59, 65, 71, 77,
                   83, 89, 95, 101, 107, 113, 119, 125, 131)


def _lebedev_order(n: int) -> int:
    for order in _LEBEDEV_ORDERS:
        if order >= n:
            return order
    return _LEBEDEV_ORDERS[-1]


def heat_ball_average(h: Callable, d: int, t: float, x, alpha: float, radial: int, spherical: int) -> float:
    """Quadrature of ``E[h(t - alpha R, x + 2 sqrt(alpha) psi_d(R) V)]``."""
    s, ws = radial_rule(d, radial)
    y, wy = sphere_rule(d, spherical)
    rad = 2.0 * math.sqrt(alpha) * psi(d, s)
    pts = np.asarray(x, dtype=np.float64) + rad[:, None, None] * y[None, :, :]
    times = np.broadcast_to((t - alpha * s)[:, None], pts.shape[:2])
    vals = np.asarray(h(times.reshape(-1), pts.reshape(-1, d)), dtype=np.float64).reshape(pts.shape[:2])
    return float(ws @ (vals @ wy))


def _default_nodes(d: int) -> tuple[int, int]:
    return {1: (64, 2), 2: (64, 64), 3: (64, 41)}.get(d, (64, 100_000))


def mean_value_check(
    h: Temperature | Callable,
    t: float,
    x,
    alpha: float,
    tol: float,
    d: int | None = None,
    radial: int | None = None,
    spherical: int | None = None,
    region: Domain | None = None,
) -> float:
    """Absolute gap between ``h(t, x)`` and its heat-ball average at scale ``alpha``.

    The average is computed twice, the second time with doubled radial and
    spherical resolution; if the two differ by more than ``tol`` a
    :class:`QuadratureError` is raised. Returns the refined residual.
    """
    d = d if d is not None else h.dim
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    x = np.asarray(x, dtype=np.float64)
    if region is not None:
        reach = 2.0 * math.sqrt(alpha) * psi_max(d)
        if not (t - alpha >= 0.0 and float(region.distance_to_boundary(x)) >= reach):
            raise ValueError("heat ball leaves the region where h is a temperature")
    r0, s0 = _default_nodes(d)
    radial = radial or r0
    spherical = spherical or s0
    coarse = heat_ball_average(h, d, t, x, alpha, radial, spherical)
    fine = heat_ball_average(h, d, t, x, alpha, 2 * radial, spherical if d == 1 else 2 * spherical)
    if abs(coarse - fine) > tol:
        raise QuadratureError(f"quadrature did not converge: {coarse!r} vs {fine!r}")
    centre = float(np.asarray(h(np.array([t]), x[None, :])).reshape(-1)[0])
    return abs(centre - fine)


# -- finite differences -----------------------------------------------------------


@dataclass
class FDSolution:
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray
    t: float
    _interp: RegularGridInterpolator = field(init=False, repr=False)

    def __post_init__(self):
        self._interp = RegularGridInterpolator((self.xs, self.ys), self.values)

    def __call__(self, point, t: float | None = None):
        """Bilinear interpolation at ``point``; only the final time ``self.t`` is stored."""
        if t is not None and not math.isclose(t, self.t, rel_tol=1e-12, abs_tol=1e-15):
            raise ValueError(f"only t = {self.t} was simulated, requested t = {t}")
        out = self._interp(np.atleast_2d(point))
        return float(out[0]) if np.ndim(point) == 1 else out


def fd_solve_2d(bounds, data: BoundaryData, t: float, grid: tuple[int, int, int]) -> FDSolution:
    """Forward-Euler, 5-point Laplacian solution on ``[x0, x1] x [y0, y1]`` at time ``t``.

    ``grid = (nx, ny, nt)`` counts grid points per axis (boundary included) and
    time steps.
    """
    (x0, x1), (y0, y1) = bounds
    nx, ny, nt = grid
    if nx < 3 or ny < 3 or nt < 1:
        raise ValueError("need at least 3 points per axis and one time step")
    if not t > 0:
        raise ValueError("t must be positive")
    xs, ys = np.linspace(x0, x1, nx), np.linspace(y0, y1, ny)
    hx, hy, dt = xs[1] - xs[0], ys[1] - ys[0], t / nt
    limit = hx**2 * hy**2 / (2.0 * (hx**2 + hy**2))
    if dt > limit * (1 + 1e-12):
        raise StabilityError(f"time step {dt:.3e} exceeds the explicit stability limit {limit:.3e}")
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X, Y], axis=-1)
    edge = np.zeros((nx, ny), dtype=bool)
    edge[[0, -1], :] = True
    edge[:, [0, -1]] = True
    edge_pts = pts[edge]

    u = np.asarray(data.f0(pts.reshape(-1, 2)), dtype=np.float64).reshape(nx, ny)
    u[edge] = data.f(np.zeros(len(edge_pts)), edge_pts)
    cx, cy = dt / hx**2, dt / hy**2
    nxt = np.empty_like(u)
    for k in range(1, nt + 1):
        c = u[1:-1, 1:-1]
        nxt[1:-1, 1:-1] = c + cx * (u[2:, 1:-1] - 2 * c + u[:-2, 1:-1]) + cy * (u[1:-1, 2:] - 2 * c + u[1:-1, :-2])
        nxt[edge] = data.f(np.full(len(edge_pts), k * dt), edge_pts)
        u, nxt = nxt, u
    return FDSolution(xs, ys, u, t)


# -- martingale check ---------------------------------------------------------------


@dataclass(frozen=True)
class MartingaleResult:
    z: float
    mean: float
    target: float
    std_error: float
    allowance: float

    def passed(self, threshold: float = 3.0) -> bool:
        return abs(self.mean - self.target) <= threshold * self.std_error + self.allowance


def martingale_check(
    domain: Domain,
    h: Temperature,
    t: float,
    x,
    eps: float,
    n: int,
    seed: int,
    at: str = "stop",
    workers: int | None = None,
    profile: Callable = psi,
) -> MartingaleResult:
    """Compare the mean of ``h`` at the end of each walk with ``h(t, x)``.

    With ``at="stop"`` ``h`` is evaluated at the chain state ``(T_N, X_N)``
    where the walk stopped; the stopped chain is a bounded martingale, so no
    bias allowance applies. With ``at="terminal"`` it is evaluated at the
    classified outcome ``(T_eps, X_eps)``; the projection moves ``X`` by at
    most ``sqrt(2 d eps / e)`` and a time stop resets ``T <= eps`` to zero,
    which ``allowance`` bounds.
    """
    if at not in ("stop", "terminal"):
        raise ValueError("at must be 'stop' or 'terminal'")
    batch = simulate_walks(domain, t, x, eps, n, seed, workers=workers, profile=profile)
    if at == "stop":
        vals = h(batch.t_stop, batch.x_stop)
        allowance = 0.0
    else:
        vals = h(batch.t_eps, batch.x_eps)
        reach = math.sqrt(2.0 * domain.dim / math.e) * math.sqrt(eps)
        allowance = reach * h.gradient_bound + eps * h.time_bound
    vals = np.asarray(vals, dtype=np.float64)
    target = float(np.asarray(h(np.array([t]), np.asarray(x, dtype=np.float64)[None, :])).reshape(-1)[0])
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(n))
    diff = mean - target
    if se == 0.0:
        z = 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
    else:
        z = diff / se
    return MartingaleResult(z, mean, target, se, allowance)
