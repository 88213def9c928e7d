import math

import numpy as np
import pytest
from scipy import integrate, stats

from heatwalk.rng import RngStream
from heatwalk.sampling import (
    expected_radius,
    psi,
    psi_max,
    radius_cdf,
    radius_pdf,
    sample_radius,
    sample_unit_vector,
)

# E[R] by mpmath quadrature of s * pdf(s) on [0, 1] (30 digits)
QUAD_MEANS = {
    1: 0.192450089729875254836,
    2: 0.25,
    3: 0.278854800926934015733,
    4: 0.296296296296296296296,
    5: 0.308000821694065808130,
    10: 0.334897976680384087791,
}


def draws(d, n=1_000_000, seed=1):
    return sample_radius(d, RngStream(seed, np.arange(n, dtype=np.uint64)))


def quad_cdf(d, s):
    # integrate in u = -log(s), where the density is smooth
    return integrate.quad(lambda u: radius_pdf(d, math.exp(-u)) * math.exp(-u), -math.log(s), np.inf,
                          epsabs=1e-13, limit=200)[0]


def test_psi_examples():
    assert psi(3, 1.0) == 0.0
    assert psi(3, 0.0) == 0.0
    assert psi(2, math.exp(-1)) == pytest.approx(0.606530659712633, rel=1e-14)


def test_psi_rejects_out_of_range():
    for bad in (-0.1, 1.1, float("nan")):
        with pytest.raises(ValueError):
            psi(3, bad)


@pytest.mark.parametrize("d", [1, 2, 3, 5, 10])
def test_psi_maximum(d):
    s = np.linspace(0, 1, 200_001)
    vals = psi(d, s)
    assert vals.max() <= psi_max(d) + 1e-15
    assert psi(d, math.exp(-1)) == pytest.approx(math.sqrt(d / (2 * math.e)), rel=1e-14)
    assert abs(s[np.argmax(vals)] - math.exp(-1)) < 1e-4


def test_radius_pdf_examples():
    # d = 2: the density is log(1/s), unbounded but integrable at 0
    assert radius_pdf(2, 1e-8) == pytest.approx(math.log(1e8), rel=1e-13)
    assert radius_pdf(2, 1e-8) > radius_pdf(2, 0.1)
    for d in (3, 4, 10):
        assert radius_pdf(d, 1e-8) < radius_pdf(d, 0.1)
    for d in (1, 2, 3, 7):
        assert radius_pdf(d, 1.0) == 0.0
        assert radius_pdf(d, 0.0) == 0.0
        assert radius_pdf(d, 1.5) == 0.0


@pytest.mark.parametrize("d", [1, 2, 3, 4, 5, 10])
def test_radius_pdf_normalized(d):
    total = quad_cdf(d, 1.0)
    assert total == pytest.approx(1.0, abs=1e-10)


def test_radius_pdf_matches_psi_form():
    s = np.linspace(0.01, 0.99, 50)
    for d in (2, 3, 6):
        direct = psi(d, s) ** d / (s * math.gamma(d / 2))
        np.testing.assert_allclose(radius_pdf(d, s), direct, rtol=1e-12)


@pytest.mark.parametrize("d", [1, 3, 4])
def test_closed_form_cdf_matches_quadrature(d):
    for s in (0.01, 0.2, 0.5, 0.9):
        assert radius_cdf(d, s) == pytest.approx(quad_cdf(d, s), abs=1e-9)


@pytest.mark.parametrize("d,expected", sorted(QUAD_MEANS.items()))
def test_expected_radius_matches_quadrature(d, expected):
    assert expected_radius(d) == pytest.approx(expected, rel=1e-13)


def test_expected_radius_d2_is_quarter():
    assert expected_radius(2) == 0.25


def test_radius_samples_in_unit_interval():
    for d in (1, 2, 3, 10):
        r = draws(d, 100_000)
        assert np.all((r >= 0) & (r <= 1))


def test_radius_mean_d2():
    assert abs(draws(2).mean() - 0.25) <= 0.001


def test_radius_mean_d3():
    assert abs(draws(3).mean() - 0.27886) <= 0.001


@pytest.mark.parametrize("d", [1, 2, 3, 5, 10])
def test_radius_mean_within_four_standard_errors(d):
    r = draws(d, seed=10 + d)
    se = r.std(ddof=1) / math.sqrt(len(r))
    assert abs(r.mean() - expected_radius(d)) <= 4 * se


@pytest.mark.parametrize("d", [1, 2, 3, 5, 10])
def test_radius_ks_against_quadrature_cdf(d):
    # tabulate the CDF by quadrature of the pdf, interpolate in between
    grid = np.concatenate([np.geomspace(1e-12, 0.05, 200), np.linspace(0.05, 1.0, 400)[1:]])
    table = np.array([quad_cdf(d, s) for s in grid])
    cdf = lambda s: np.interp(s, grid, table, left=0.0, right=1.0)
    r = draws(d, 100_000, seed=77 + d)
    assert stats.kstest(r, cdf).pvalue > 0.001


def test_unit_vectors():
    v = sample_unit_vector(3, RngStream(4, np.arange(1_000_000, dtype=np.uint64)))
    assert np.all(np.abs(np.linalg.norm(v, axis=1) - 1) <= 1e-12)
    assert np.all(np.abs(v.mean(axis=0)) <= 0.003)
    assert abs((v[:, 0] ** 2).mean() - 1 / 3) <= 0.002


def test_unit_vector_d1_is_a_sign():
    v = sample_unit_vector(1, RngStream(4, np.arange(10_000, dtype=np.uint64)))
    assert set(np.unique(v)) == {-1.0, 1.0}
    assert abs(v.mean()) < 0.05


def test_sampler_determinism():
    a = draws(5, 1000, seed=3)
    b = draws(5, 1000, seed=3)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, draws(5, 1000, seed=4))
