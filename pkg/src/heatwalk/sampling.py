"""Random ingredients of one heat-ball step.

The radial variable ``R`` has density ``psi_d(s)**d / (s * Gamma(d/2))`` on
``[0, 1]``; equivalently ``-log R`` is Gamma distributed with shape
``(d + 2)/2`` and rate ``d/2``. It is drawn as a product of
``floor(d/2) + 1`` uniforms raised to ``2/d``, times ``exp(-G**2/d)`` for odd
``d``.
"""

from __future__ import annotations

import math

import numpy as np

from .rng import RngStream


def psi(d: int, s):
    """Radius profile ``sqrt(s * (d/2) * log(1/s))`` of the heat ball, zero at both ends."""
    s_arr = np.asarray(s, dtype=np.float64)
    if np.any((s_arr < 0.0) | (s_arr > 1.0)) or np.any(np.isnan(s_arr)):
        raise ValueError("psi is defined on [0, 1] only")
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = np.where(s_arr > 0.0, s_arr * (0.5 * d) * -np.log(np.where(s_arr > 0.0, s_arr, 1.0)), 0.0)
    out = np.sqrt(np.maximum(inner, 0.0))
    return float(out) if out.ndim == 0 else out


def psi_max(d: int) -> float:
    """Maximum of ``psi`` on ``[0, 1]``, attained at ``s = 1/e``."""
    return math.sqrt(d / (2.0 * math.e))


def radius_pdf(d: int, s):
    """Density of the radial variable; zero outside the open interval ``(0, 1)``."""
    s_arr = np.asarray(s, dtype=np.float64)
    inside = (s_arr > 0.0) & (s_arr < 1.0)
    safe = np.where(inside, s_arr, 0.5)
    # psi**d / s written in log form to stay finite near s = 0
    log_val = (0.5 * d) * (np.log(0.5 * d) + np.log(-np.log(safe))) + (0.5 * d - 1.0) * np.log(safe)
    out = np.where(inside, np.exp(log_val - math.lgamma(0.5 * d)), 0.0)
    return float(out) if out.ndim == 0 else out


def radius_cdf(d: int, s):
    """Closed-form CDF: ``P(R <= s) = Q((d+2)/2, (d/2) log(1/s))`` (regularized upper gamma)."""
    from scipy.special import gammaincc

    s_arr = np.clip(np.asarray(s, dtype=np.float64), 0.0, 1.0)
    with np.errstate(divide="ignore"):
        u = -np.log(s_arr)
    out = np.where(s_arr <= 0.0, 0.0, gammaincc(0.5 * d + 1.0, 0.5 * d * u))
    return float(out) if out.ndim == 0 else out


def sample_radius(d: int, stream: RngStream):
    """Draw the radial variable; one value per stream row."""
    if d < 1:
        raise ValueError("dimension must be positive")
    k = d // 2 + 1
    u = stream.uniforms(k)
    r = np.prod(u, axis=-1) ** (2.0 / d)
    if d % 2:
        g = stream.normals(1)[..., 0]
        r = r * np.exp(-(g * g) / d)
    return r


def sample_unit_vector(d: int, stream: RngStream) -> np.ndarray:
    """Uniform direction on the unit sphere of ``R^d`` (normalized Gaussian vector)."""
    if d < 1:
        raise ValueError("dimension must be positive")
    g = stream.normals(d)
    return g / np.sqrt(np.sum(g * g, axis=-1))[..., None]


def expected_radius(d: int) -> float:
    """Mean of the radial variable, ``(d/(d+2))**((d+2)/2)``.

    Each uniform contributes ``E[U**(2/d)] = d/(d+2)``; for odd ``d`` the
    Gaussian factor contributes ``E[exp(-G**2/d)] = (1 + 2/d)**(-1/2)``, which
    is half a uniform's worth, so the exponent is ``(d+2)/2`` in both cases.
    """
    if d < 1:
        raise ValueError("dimension must be positive")
    base = d / (d + 2.0)
    if d % 2 == 0:
        return base ** ((d + 2) // 2)
    return base ** ((d + 1) // 2) * (1.0 + 2.0 / d) ** -0.5
