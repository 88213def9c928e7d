"""The release-gate suite behind ``heatwalk validate``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .estimator import BoundaryData, estimate_solution
from .exprlang import parse
from .geometry import Hypercube
from .oracle import (
    coordinate_temperature,
    fd_solve_2d,
    martingale_check,
    mean_value_check,
    paraboloid_temperature,
)
from .rng import RngStream
from .sampling import expected_radius, psi, sample_radius

HYP1 = "exp(t)*prod(i, x[i]*(1-x[i]))"


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


class ScaledProfile:
    """``factor * psi``; a deliberately wrong heat-ball radius used as a mutation hook."""

    def __init__(self, factor: float):
        self.factor = factor

    def __call__(self, d, s):
        return self.factor * psi(d, s)


def _mean_value_checks() -> list[CheckResult]:
    out = []
    rng = np.random.default_rng(11)
    for d in (2, 3):
        for temp in (paraboloid_temperature(d, 2.0), coordinate_temperature(d)):
            worst = 0.0
            for _ in range(5):
                t, a = rng.uniform(0.5, 2.0), rng.uniform(0.01, 0.4)
                x = rng.uniform(-1.0, 1.0, size=d)
                worst = max(worst, mean_value_check(temp, t, x, a, tol=1e-8))
            out.append(CheckResult(f"mean-value d={d} h={temp.name}", worst <= 1e-6, f"max residual {worst:.2e}"))
    return out


def _martingale_checks(walks: int, seed: int, profile: Callable) -> list[CheckResult]:
    out = []
    for d in (2, 3):
        dom = Hypercube(d)
        for temp in (paraboloid_temperature(d, math.sqrt(d)), coordinate_temperature(d)):
            r = martingale_check(dom, temp, 1.0, dom.center(), 1e-3, walks, seed, profile=profile)
            out.append(CheckResult(f"martingale d={d} h={temp.name}", r.passed(3.0), f"z = {r.z:+.2f}"))
    return out


def _sampler_checks(draws: int, seed: int) -> list[CheckResult]:
    out = []
    for d in (1, 2, 3, 4, 5, 10):
        r = sample_radius(d, RngStream(seed, np.arange(draws, dtype=np.uint64)))
        se = float(np.std(r, ddof=1) / math.sqrt(draws))
        gap = abs(float(np.mean(r)) - expected_radius(d))
        out.append(CheckResult(f"radius mean d={d}", gap <= 4 * se, f"|mean - E| = {gap:.2e}, 4 SE = {4 * se:.2e}"))
    return out


def _fd_check(walks: int, seed: int, profile: Callable) -> CheckResult:
    h = parse(HYP1, 2)
    data = BoundaryData.from_exprs(h, h)
    fd = fd_solve_2d(((0.0, 1.0), (0.0, 1.0)), data, 0.1, (201, 201, 16000))([0.5, 0.5])
    est = estimate_solution(Hypercube(2), data, 0.1, [0.5, 0.5], 1e-4, walks, seed, profile=profile)
    gap = abs(est.mean - fd)
    bound = 3 * est.std_error + 0.01 + 0.002
    return CheckResult("finite-difference d=2 hyp1", gap <= bound, f"|MC - FD| = {gap:.2e}, bound {bound:.2e}")


def run_validation(walks: int = 100_000, seed: int = 2024, psi_factor: float | None = None) -> list[CheckResult]:
    """All checks; ``psi_factor`` corrupts the walk's radius profile (test hook)."""
    profile: Callable = psi if psi_factor is None else ScaledProfile(psi_factor)
    results = _mean_value_checks()
    results += _martingale_checks(walks, seed, profile)
    results += _sampler_checks(1_000_000, seed)
    results.append(_fd_check(walks, seed, profile))
    return results
