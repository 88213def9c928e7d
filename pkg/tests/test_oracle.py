import math

import numpy as np
import pytest

from heatwalk.estimator import BoundaryData
from heatwalk.geometry import Hypercube
from heatwalk.oracle import (
    QuadratureError,
    StabilityError,
    Temperature,
    constant_temperature,
    coordinate_temperature,
    eigen_temperature,
    exact_eigen_solution,
    fd_solve_2d,
    martingale_check,
    mean_value_check,
    paraboloid_temperature,
    radial_rule,
    sphere_rule,
)
from heatwalk.sampling import expected_radius

UNIT_SQUARE = ((0.0, 1.0), (0.0, 1.0))
EIGEN_DATA = BoundaryData(
    lambda t, x: np.zeros(len(x)),
    lambda x: np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]),
)


def test_exact_eigen_values():
    # closed forms e^{-2 pi^2 / 20} and e^{-3 pi^2 / 20}, evaluated with mpmath
    assert exact_eigen_solution(2, 0.05, [0.5, 0.5]) == pytest.approx(0.372707838853438, rel=1e-13)
    assert exact_eigen_solution(3, 0.05, [0.5] * 3) == pytest.approx(0.227537399621107, rel=1e-13)
    for d in (1, 4, 7):
        assert exact_eigen_solution(d, 0.0, [0.5] * d) == 1.0
    with pytest.raises(ValueError):
        exact_eigen_solution(2, 0.1, [0.5, 0.5, 0.5])


@pytest.mark.parametrize("temp", [
    coordinate_temperature(2), coordinate_temperature(3, axis=2),
    paraboloid_temperature(2, 1.0), paraboloid_temperature(3, 1.0),
    eigen_temperature(2), eigen_temperature(3),
])
def test_temperatures_solve_the_heat_equation(temp):
    rng = np.random.default_rng(0)
    x = rng.uniform(0.1, 0.9, size=(20, temp.dim))
    t = rng.uniform(0.05, 0.5, size=20)
    assert np.max(temp.heat_residual(t, x)) <= 1e-5


def test_heat_residual_flags_non_temperature():
    bad = Temperature(lambda t, x: np.sum(np.asarray(x) ** 2, axis=-1) + 0 * np.asarray(t), 2, 2.0)
    assert np.min(bad.heat_residual([0.3], [[0.2, 0.4]])) > 0.5


def test_mean_value_coordinate_function():
    rng = np.random.default_rng(1)
    for d in (1, 2, 3):
        for _ in range(5):
            r = mean_value_check(coordinate_temperature(d), rng.uniform(0.5, 2), rng.normal(size=d),
                                 rng.uniform(0.01, 0.5), tol=1e-9)
            assert r <= 1e-8


def test_mean_value_paraboloid_example():
    assert mean_value_check(paraboloid_temperature(2, 1.0), 1.0, [0.0, 0.0], 0.1, tol=1e-8) <= 1e-6


@pytest.mark.parametrize("d", [2, 3])
def test_mean_value_eigenfunction(d):
    x = np.linspace(0.35, 0.65, d)
    assert mean_value_check(eigen_temperature(d), 0.1, x, 0.05, tol=1e-8) <= 1e-5


def test_mean_value_detects_non_temperature():
    # E over the heat ball of |x|^2 exceeds the centre value by 2 d alpha E[R]
    bad = Temperature(lambda t, x: np.sum(np.asarray(x) ** 2, axis=-1) + 0 * np.asarray(t), 2, 2.0)
    r = mean_value_check(bad, 1.0, [0.0, 0.0], 0.1, tol=1e-8)
    assert r == pytest.approx(2 * 2 * 0.1 * expected_radius(2), rel=1e-10)


def test_mean_value_high_dimension_uses_wider_tolerance():
    assert mean_value_check(paraboloid_temperature(5, 1.0), 1.0, [0.1] * 5, 0.1, tol=1e-3) <= 1e-3
    with pytest.raises(QuadratureError):
        mean_value_check(paraboloid_temperature(5, 1.0), 1.0, [0.1] * 5, 0.1, tol=1e-9)


def test_mean_value_region_precondition():
    with pytest.raises(ValueError):
        mean_value_check(eigen_temperature(2), 0.1, [0.05, 0.5], 0.05, tol=1e-8, region=Hypercube(2))
    with pytest.raises(ValueError):
        mean_value_check(eigen_temperature(2), 0.01, [0.5, 0.5], 0.05, tol=1e-8, region=Hypercube(2))
    with pytest.raises(ValueError):
        mean_value_check(eigen_temperature(2), 0.1, [0.5, 0.5], 0.0, tol=1e-8)


def test_quadrature_self_consistency():
    rng = np.random.default_rng(2)
    tol = 1e-8
    for d in (2, 3):
        for temp in (paraboloid_temperature(d, 2.0), coordinate_temperature(d), eigen_temperature(d)):
            t, a, x = 0.6, rng.uniform(0.01, 0.05), rng.uniform(0.4, 0.6, size=d)
            base = mean_value_check(temp, t, x, a, tol)
            doubled = mean_value_check(temp, t, x, a, tol, radial=128, spherical=128 if d == 2 else 83)
            assert abs(base - doubled) < 10 * tol


def test_quadrature_rules_are_normalised():
    for d in (1, 2, 3, 4, 10):
        s, w = radial_rule(d, 64)
        assert np.all((s > 0) & (s < 1))
        assert w.sum() == pytest.approx(1.0, rel=1e-12)
        assert w @ s == pytest.approx(expected_radius(d), rel=1e-12)
    for d, n in ((1, 2), (2, 64), (3, 41), (4, 1000)):
        y, w = sphere_rule(d, n)
        assert w.sum() == pytest.approx(1.0, rel=1e-12)
        np.testing.assert_allclose(np.linalg.norm(y, axis=1), 1.0, rtol=1e-14)


def test_fd_preserves_constants_exactly():
    ones = BoundaryData(lambda t, x: np.ones(len(x)), lambda x: np.ones(len(x)))
    sol = fd_solve_2d(UNIT_SQUARE, ones, 0.1, (21, 21, 200))
    assert np.all(sol.values == 1.0)


def test_fd_eigenfunction():
    sol = fd_solve_2d(UNIT_SQUARE, EIGEN_DATA, 0.05, (201, 201, 8000))
    assert abs(sol([0.5, 0.5]) - 0.3727) <= 0.002
    assert abs(sol([0.5, 0.5], t=0.05) - exact_eigen_solution(2, 0.05, [0.5, 0.5])) <= 1e-4


def test_fd_converges_at_second_order_in_space():
    # lambda = dt / h^2 fixed, so dt shrinks 4x per refinement and the total error should too
    exact = exact_eigen_solution(2, 0.05, [0.5, 0.5])
    errors = []
    for n in (21, 41, 81):
        h = 1.0 / (n - 1)
        nt = round(0.05 / (0.2 * h * h))
        errors.append(abs(fd_solve_2d(UNIT_SQUARE, EIGEN_DATA, 0.05, (n, n, nt))([0.5, 0.5]) - exact))
    for coarse, fine in zip(errors, errors[1:]):
        assert coarse / fine == pytest.approx(4.0, rel=0.2)


def test_fd_first_order_in_time():
    # fine space grid, coarse time steps: halving dt halves the time error
    exact_grid = fd_solve_2d(UNIT_SQUARE, EIGEN_DATA, 0.05, (21, 21, 3200))([0.5, 0.5])
    e1 = abs(fd_solve_2d(UNIT_SQUARE, EIGEN_DATA, 0.05, (21, 21, 100))([0.5, 0.5]) - exact_grid)
    e2 = abs(fd_solve_2d(UNIT_SQUARE, EIGEN_DATA, 0.05, (21, 21, 200))([0.5, 0.5]) - exact_grid)
    assert e1 / e2 == pytest.approx(2.0, rel=0.2)


def test_fd_errors():
    with pytest.raises(StabilityError):
        fd_solve_2d(UNIT_SQUARE, EIGEN_DATA, 0.05, (201, 201, 100))
    sol = fd_solve_2d(UNIT_SQUARE, EIGEN_DATA, 0.01, (11, 11, 40))
    with pytest.raises(ValueError):
        sol([0.5, 0.5], t=0.02)
    with pytest.raises(ValueError):
        fd_solve_2d(UNIT_SQUARE, EIGEN_DATA, 0.0, (11, 11, 40))


@pytest.mark.parametrize("d", [2, 3])
def test_martingale_property(d):
    dom = Hypercube(d)
    for temp in (coordinate_temperature(d), paraboloid_temperature(d, math.sqrt(d))):
        r = martingale_check(dom, temp, 1.0, dom.center(), 1e-3, 20_000, seed=7)
        assert r.allowance == 0.0 and r.passed(3.0)
        r = martingale_check(dom, temp, 1.0, dom.center(), 1e-3, 20_000, seed=7, at="terminal")
        assert r.allowance > 0 and r.passed(3.0)


def test_martingale_constant_guard():
    dom = Hypercube(2)
    r = martingale_check(dom, constant_temperature(2, 3.0), 0.5, dom.center(), 1e-3, 1000, seed=1)
    assert r.z == 0.0 and r.std_error == 0.0 and r.passed()


def test_martingale_rejects_unknown_evaluation_point():
    with pytest.raises(ValueError):
        martingale_check(Hypercube(2), coordinate_temperature(2), 0.5, [0.5, 0.5], 1e-3, 10, seed=1, at="middle")
