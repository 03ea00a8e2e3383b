"""Directional data uncertainties and polar uncertainty regions.

For a zero-mean Gaussian with covariance G and a unit direction
u = (cos theta, sin theta):

    marginal variance     sigma^2 = u^T G u          (shadow of the blob)
    conditional variance  Sigma^2 = 1/(u^T G^-1 u)   (slice through centre)

Conditional never exceeds marginal for the same G, with equality on the
principal axes or for isotropic G.  Scheme pairing used throughout:
homodyne regions are built from the homodyne data covariance
G_W + (1-eta)/(2 eta) I, heterodyne regions from the heterodyne data
covariance G_W + (2-eta)/(2 eta) I (the two coincide with the ideal
Q-function covariance G_W + I/2 at eta = 1).  Confusing the heterodyne
offset with the Q-function one, 1/(2 eta), is the classic mistake here;
each operation states which matrix it uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (Covariance2, DomainError, GaussianStateSpec, SchemeKind,
                   SQRT2, effective_covariance)


class NumericalBracketError(RuntimeError):
    """Root bracketing failed; raised instead of silently extrapolating."""


@dataclass(frozen=True)
class DirectionVariancePair:
    """Marginal (sigma) and conditional (Sigma) standard deviations at one angle."""

    theta: float
    sigma: float
    Sigma: float


@dataclass(frozen=True)
class RegionAreas:
    """Areas enclosed by the polar boundaries r = sigma_theta and r = Sigma_theta."""

    s_sigma: float
    s_Sigma: float


def _direction_terms(cov: Covariance2, theta: float) -> tuple[float, float, float]:
    c, s = math.cos(theta), math.sin(theta)
    q = cov.g3 / SQRT2
    uu = cov.g1 * c * c + cov.g2 * s * s + 2.0 * q * s * c
    vv = cov.trace - uu
    uv = (cov.g2 - cov.g1) * s * c + q * (c * c - s * s)
    return uu, vv, uv


def marginal_std(cov: Covariance2, theta: float) -> float:
    """sigma_theta = sqrt(u^T G u) along the direction at angle theta."""
    if not cov.is_positive_definite():
        raise DomainError(f"covariance is not positive definite: {cov}")
    uu, _, _ = _direction_terms(cov, theta)
    return math.sqrt(uu)


def conditional_std(cov: Covariance2, theta: float) -> float:
    """Sigma_theta = (u^T G^-1 u)^(-1/2), via (G_uu G_vv - G_uv^2)/G_vv."""
    if not cov.is_positive_definite():
        raise DomainError(f"covariance is not positive definite: {cov}")
    uu, vv, uv = _direction_terms(cov, theta)
    return math.sqrt((uu * vv - uv * uv) / vv)


def region_boundaries(spec: GaussianStateSpec, samples: int) -> list[DirectionVariancePair]:
    """Tabulate sigma_theta (homodyne data) and Sigma_theta (heterodyne data).

    sigma comes from the homodyne effective covariance, Sigma from the
    heterodyne one; angles are uniform on [0, 2 pi) for direct polar plotting.
    """
    if samples < 4:
        raise DomainError(f"samples = {samples} must be at least 4")
    g_hom = effective_covariance(spec, SchemeKind.HOMODYNE)
    g_het = effective_covariance(spec, SchemeKind.HETERODYNE)
    out = []
    for k in range(samples):
        theta = 2.0 * math.pi * k / samples
        out.append(DirectionVariancePair(theta=theta,
                                         sigma=marginal_std(g_hom, theta),
                                         Sigma=conditional_std(g_het, theta)))
    return out


def region_areas(spec: GaussianStateSpec) -> RegionAreas:
    """Exact areas of the two uncertainty regions.

    The heterodyne boundary r = Sigma_theta is the ellipse of the
    heterodyne data covariance, area pi sqrt(det).  The homodyne boundary
    r = sigma_theta encloses (1/2) Int sigma_theta^2 dtheta, and only the
    isotropic part of G survives the angle average, so the area is
    (pi/2) Tr(G_hom) for arbitrary orientation and size.
    """
    g_hom = effective_covariance(spec, SchemeKind.HOMODYNE)
    g_het = effective_covariance(spec, SchemeKind.HETERODYNE)
    return RegionAreas(s_sigma=0.5 * math.pi * g_hom.trace,
                       s_Sigma=math.pi * math.sqrt(g_het.det))


def region_area_scan_csv(lambdas, etas) -> str:
    """CSV scan of both region areas over minimum-uncertainty states.

    Header is exactly ``lambda,eta,s_sigma,s_Sigma`` with 17 significant
    digits, one row per (lambda, eta) pair, eta in the outer loop.
    """
    lines = ["lambda,eta,s_sigma,s_Sigma"]
    for eta in etas:
        for lam in lambdas:
            areas = region_areas(GaussianStateSpec(mu=1.0, lam=lam, eta=eta))
            lines.append(",".join(f"{v:.17g}" for v in
                                  (lam, eta, areas.s_sigma, areas.s_Sigma)))
    return "\n".join(lines) + "\n"


def _area_gap(lam: float, eta: float) -> float:
    """s_sigma - s_Sigma at mu = 1, divided by pi."""
    spec = GaussianStateSpec(mu=1.0, lam=lam, eta=eta)
    areas = region_areas(spec)
    return (areas.s_sigma - areas.s_Sigma) / math.pi


LAMBDA_CRIT_BRACKET_LO = 1e-6


def critical_lambda_equal_areas(eta: float, tol: float = 1e-12) -> float:
    """Squeezing at which the two region areas coincide (lambda < 1 branch).

    Solved for minimum-uncertainty states (mu = 1) by bisection on
    [1e-6, 1]; the reciprocal is the lambda > 1 solution of the same
    state rotated by pi/2.  The bracket is checked for exactly one sign
    change before bisecting.
    """
    if not 0.0 < eta <= 1.0:
        raise DomainError(f"eta = {eta} must lie in (0, 1]")
    lo, hi = LAMBDA_CRIT_BRACKET_LO, 1.0
    flo, fhi = _area_gap(lo, eta), _area_gap(hi, eta)
    if not (flo > 0.0 > fhi):
        raise NumericalBracketError(
            f"area gap does not change sign on [{lo}, {hi}] at eta = {eta}")
    # coarse scan guards against multiple crossings (none are expected)
    grid = np.geomspace(lo, hi, 64)
    signs = np.sign([_area_gap(x, eta) for x in grid])
    flips = int(np.sum(signs[:-1] * signs[1:] < 0))
    if flips != 1:
        raise NumericalBracketError(
            f"expected exactly one area crossing on the branch, found {flips}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _area_gap(mid, eta) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
