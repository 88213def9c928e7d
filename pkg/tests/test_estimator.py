import math

import numpy as np
import pytest

from heatwalk.estimator import (
    BoundaryData,
    CompatibilityError,
    estimate_solution,
    sample_payoff,
    simulate_walks,
    walk_statistics,
)
from heatwalk.exprlang import parse
from heatwalk.geometry import HalfBall, Hypercube
from heatwalk.walker import StopKind, WalkOutcome

HYP1 = "exp(t)*prod(i, x[i]*(1-x[i]))"
HYP2 = "(1+cos(2*pi*t))*norm(x)"


def expr_data(src, d, f0=None):
    f = parse(src, d)
    return BoundaryData.from_exprs(f, parse(f0, d) if f0 else f)


def const(c):
    return BoundaryData(lambda t, x: np.full(len(x), c), lambda x: np.full(len(x), c))


def outcome(kind, t, x):
    x = np.asarray(x, dtype=float)
    return WalkOutcome(t, x, kind, 3, t, x)


def test_payoff_examples():
    assert sample_payoff(outcome(StopKind.BOUNDARY_PROJECTED, 0.4, [0, 0.3]), const(2.5)) == 2.5
    assert sample_payoff(outcome(StopKind.TIME_EXHAUSTED, 0.0, [0.2, 0.3]), const(2.5)) == 2.5
    hyp1 = expr_data(HYP1, 3)
    assert sample_payoff(outcome(StopKind.BOUNDARY_PROJECTED, 0.7, [1.0, 0.3, 0.6]), hyp1) == 0.0
    hyp2 = expr_data(HYP2, 3)
    x = [0.3, 0.2, -0.1]
    assert sample_payoff(outcome(StopKind.TIME_EXHAUSTED, 0.0, x), hyp2) == pytest.approx(2 * np.linalg.norm(x), rel=1e-15)


def test_constant_solution_is_exact():
    est = estimate_solution(Hypercube(2), const(1.0), 0.3, [0.5, 0.5], 1e-3, 5000, seed=1)
    assert est.mean == 1.0 and est.std_error == 0.0
    assert est.ci95 == (1.0, 1.0)


def test_eigenfunction_estimate():
    data = expr_data("0", 2, "sin(pi*x[0])*sin(pi*x[1])")
    est = estimate_solution(Hypercube(2), data, 0.05, [0.5, 0.5], 1e-4, 100_000, seed=3)
    assert abs(est.mean - 0.372707838853438) <= 3 * est.std_error + 0.01
    lo, hi = est.ci95
    assert lo == pytest.approx(est.mean - 1.96 * est.std_error) and hi == pytest.approx(est.mean + 1.96 * est.std_error)
    assert 0 <= est.boundary_stop_fraction <= 1


def test_hyp1_payoff_range():
    d, t = 3, 0.02
    stats = walk_statistics(Hypercube(d), expr_data(HYP1, d), t, [0.5] * d, 1e-3, 5000, seed=2)
    assert 0 < stats.boundary_stop_fraction < 1
    edges = stats.payoff_edges
    assert edges[0] >= 0.0 and edges[-1] <= math.exp(t) * 4.0**-d + 1e-15
    assert stats.payoff_counts.sum() == 5000 and stats.step_counts.sum() == 5000
    assert len(stats.payoff_counts) == 50


def test_small_time_stops_on_time():
    stats = walk_statistics(Hypercube(3), expr_data(HYP1, 3), 0.001, [0.5] * 3, 1e-4, 10_000, seed=4, bins=10)
    assert stats.boundary_stop_fraction < 0.05
    assert len(stats.step_counts) == 10


def test_too_few_walks():
    for n in (0, 1):
        with pytest.raises(ValueError):
            estimate_solution(Hypercube(2), const(1.0), 0.3, [0.5, 0.5], 1e-3, n, seed=1)
        with pytest.raises(ValueError):
            walk_statistics(Hypercube(2), const(1.0), 0.3, [0.5, 0.5], 1e-3, n, seed=1)


def test_invalid_start_point():
    with pytest.raises(ValueError):
        estimate_solution(Hypercube(2), const(1.0), 0.3, [1.5, 0.5], 1e-3, 10, seed=1)


def test_deterministic_across_workers():
    data = expr_data(HYP2, 3)
    dom = HalfBall(3, 1.0)
    a = estimate_solution(dom, data, 0.5, [0.5, 0, 0], 1e-3, 70_000, seed=9, workers=1)
    b = estimate_solution(dom, data, 0.5, [0.5, 0, 0], 1e-3, 70_000, seed=9, workers=2)
    assert a == b
    c = estimate_solution(dom, data, 0.5, [0.5, 0, 0], 1e-3, 70_000, seed=10, workers=1)
    assert c != a


def test_walk_batches_are_index_ordered():
    batch = simulate_walks(Hypercube(2), 0.2, [0.5, 0.5], 1e-3, 70_000, seed=1, workers=2)
    assert len(batch) == 70_000
    head = simulate_walks(Hypercube(2), 0.2, [0.5, 0.5], 1e-3, 10, seed=1)
    assert np.array_equal(batch.x_eps[:10], head.x_eps)


def test_std_error_scales_like_inverse_sqrt_n():
    data = expr_data(HYP1, 2)
    small = estimate_solution(Hypercube(2), data, 0.1, [0.5, 0.5], 1e-3, 10_000, seed=5)
    large = estimate_solution(Hypercube(2), data, 0.1, [0.5, 0.5], 1e-3, 1_000_000, seed=6)
    assert small.std_error / large.std_error == pytest.approx(10.0, rel=0.1)


def test_compatibility_checked():
    dom = Hypercube(2)
    expr_data(HYP1, 2).check_compatibility(dom)
    with pytest.raises(CompatibilityError):
        expr_data("1", 2, "0").check_compatibility(dom)
