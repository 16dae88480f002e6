"""Confidence intervals for the common limit and tests on the network.

The unknown factor ``Z_inf (1 - Z_inf)`` is always replaced by the plug-in
estimate built from the same statistic that centres the interval.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Optional

import numpy as np
from scipy import special

from .asymptotics import assemble, projected_nn, sigma_tilde_sq
from .errors import (BadWeightVector, DegenerateState, ThetaOutOfRange,
                     WrongRegime)
from .graph import (DEFAULT_EQ_TOL, EigenStructure, Regime, RegimeTag,
                    classify_regime)

_STD_NORMAL = NormalDist()

BASIS_ZTILDE = "ZTilde"
BASIS_NTILDE = "NTilde"
BASIS_AWEIGHTED = "AWeighted"


def normal_quantile(theta: float) -> float:
    """``z`` with upper standard-normal tail mass ``theta / 2``."""
    if not (0.0 < theta < 1.0):
        raise ThetaOutOfRange(f"theta must lie in (0, 1), got {theta!r}")
    return -_STD_NORMAL.inv_cdf(theta / 2.0)


def chi_square_cdf(x: float, dof: int) -> float:
    """Regularized lower incomplete gamma ``P(dof/2, x/2)``."""
    if dof < 1:
        raise ValueError(f"dof must be >= 1, got {dof!r}")
    if x <= 0:
        return 0.0
    return float(special.gammainc(dof / 2.0, x / 2.0))


def chi_square_sf(x: float, dof: int) -> float:
    if dof < 1:
        raise ValueError(f"dof must be >= 1, got {dof!r}")
    if x <= 0:
        return 1.0
    return float(special.gammaincc(dof / 2.0, x / 2.0))


@dataclass(frozen=True)
class ConfidenceInterval:
    center: float
    half_width: float
    level: float
    basis: str
    regime: Regime
    lower: float
    upper: float
    clipped: bool = False
    degenerate: bool = False

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def _interval(center, half, theta, basis, regime):
    degenerate = half == 0.0
    lo, hi = center - half, center + half
    clipped = lo < 0.0 or hi > 1.0
    return ConfidenceInterval(center, half, 1.0 - theta, basis, regime,
                              max(lo, 0.0), min(hi, 1.0), clipped, degenerate)


def ci_from_ztilde(z_tilde: float, n: int, gamma: float, c: float,
                   es: EigenStructure, theta: float,
                   eq_tol: float = DEFAULT_EQ_TOL) -> ConfidenceInterval:
    """Interval centred at ``Z-tilde_n``; valid for every 1/2 < gamma <= 1.

    A degenerate centre (0 or 1) yields a zero-width interval with
    ``degenerate`` set rather than an exception.
    """
    if not (0.0 <= z_tilde <= 1.0):
        raise ValueError(f"z_tilde must lie in [0, 1], got {z_tilde!r}")
    regime = classify_regime(gamma, c, es, eq_tol)
    z = normal_quantile(theta)
    var = z_tilde * (1.0 - z_tilde) * sigma_tilde_sq(gamma, c, es)
    half = z * n ** -(gamma - 0.5) * math.sqrt(var)
    return _interval(float(z_tilde), half, theta, BASIS_ZTILDE, regime)


def ci_variance_factor(regime: Regime, es: EigenStructure, a,
                       eq_tol: float = DEFAULT_EQ_TOL) -> float:
    """``a^T Sigma_NN a`` for the regime's N-block (without ``Z_inf(1-Z_inf)``)."""
    cov = assemble(regime, regime.gamma, regime.c, es, eq_tol)
    return float(a @ cov.nn @ a)


def ci_from_ntilde(nbar, n: int, regime: Regime, es: EigenStructure, theta: float,
                   a=None, eq_tol: float = DEFAULT_EQ_TOL) -> ConfidenceInterval:
    """Interval for ``Z_inf`` from the empirical means.

    The centre is ``a^T N_n``; by default ``a = v_1 / sqrt(N)`` (the
    ``N-tilde`` statistic) except in the critical regime, where that choice
    has a degenerate limit and ``a = e_1`` is used instead.  The half width
    is ``z_theta / rate(n) * sqrt(centre (1 - centre) a^T Sigma_NN a)``.
    ``nbar`` may also be passed as the scalar ``N-tilde_n`` when ``a`` is
    omitted outside the critical regime.
    """
    if regime.tag is RegimeTag.UNSUPPORTED:
        raise WrongRegime("no CLT (hence no interval) in the unsupported regime")
    size = es.n
    critical = regime.tag is RegimeTag.GAMMA_ONE_CRITICAL
    if a is None:
        basis = BASIS_NTILDE
        if critical:
            a = np.zeros(size)
            a[0] = 1.0
            basis = BASIS_AWEIGHTED
        else:
            a = es.v1 / math.sqrt(size)
    else:
        basis = BASIS_AWEIGHTED
        a = np.asarray(a, dtype=float)
        if a.shape != (size,) or abs(a.sum() - 1.0) > 1e-10:
            raise BadWeightVector("a must have length N and sum to 1")
    if critical and np.max(np.abs(a @ es.U)) <= 1e-10:
        raise BadWeightVector("a^T U = 0: the statistic has a degenerate limit in the critical regime")
    nbar = np.asarray(nbar, dtype=float)
    center = float(nbar) if nbar.ndim == 0 else float(a @ nbar)
    if not (0.0 <= center <= 1.0):
        raise ValueError(f"centre statistic must lie in [0, 1], got {center!r}")
    factor = ci_variance_factor(regime, es, a, eq_tol)
    z = normal_quantile(theta)
    half = z / float(regime.rate(n)) * math.sqrt(max(center * (1.0 - center) * factor, 0.0))
    return _interval(center, half, theta, basis, regime)


@dataclass(frozen=True)
class TestReport:
    __test__ = False

    statistic: float
    dof: int
    p_value: float
    alpha0: float
    theta: float
    regime: Regime
    reject: bool
    alternative: str = "greater"
    noncentral_factor: Optional[float] = None


def _mean_field_regime(alpha0, c, eq_tol):
    if not (0.0 < alpha0 <= 1.0):
        raise WrongRegime(f"alpha0 must lie in (0, 1], got {alpha0!r}")
    gap = 2.0 * c * alpha0 - 1.0
    if abs(gap) <= eq_tol:
        return Regime(RegimeTag.GAMMA_ONE_CRITICAL, 1.0, c)
    if gap > 0:
        return Regime(RegimeTag.GAMMA_ONE_FAST, 1.0, c)
    return Regime(RegimeTag.UNSUPPORTED, 1.0, c)


def scale_under_alternative(alpha0: float, alpha: float, c: float) -> float:
    """Limit law of the fast-regime statistic under ``W_alpha`` is this factor times chi^2."""
    return ((2 * c * alpha0 - 1) / (2 * c * alpha - 1)
            * (1 + 2 * (c - 1) / alpha) / (1 + 2 * (c - 1) / alpha0))


def mean_field_statistic(nbar, n: int, alpha0: float, c: float,
                         eq_tol: float = DEFAULT_EQ_TOL) -> float:
    """Chi-square statistic for ``H0: W = W_alpha0`` in the mean-field family."""
    nbar = np.asarray(nbar, dtype=float)
    regime = _mean_field_regime(alpha0, c, eq_tol)
    nt = float(nbar.mean())
    if nt <= 0.0 or nt >= 1.0:
        raise DegenerateState(f"N-tilde = {nt!r}: plug-in variance vanishes")
    centred = nbar - nt
    quad = float(centred @ centred)
    if regime.tag is RegimeTag.GAMMA_ONE_FAST:
        weight = (2 * c * alpha0 - 1) / (1 + 2 * (c - 1) / alpha0)
        return n / (nt * (1 - nt)) * weight * quad
    if regime.tag is RegimeTag.GAMMA_ONE_CRITICAL:
        if alpha0 == 1.0:
            raise WrongRegime("alpha0 = 1 at criticality gives a vanishing limit covariance")
        weight = alpha0 ** 2 / (1 - alpha0) ** 2
        return n / math.log(n) / (nt * (1 - nt)) * weight * quad
    raise WrongRegime(f"the test needs 2 c alpha0 >= 1, got {2 * c * alpha0!r}")


def mean_field_test(nbar, n: int, alpha0: float, c: float, theta: float,
                    regime: Optional[Regime] = None, alternative: str = "greater",
                    alpha: Optional[float] = None,
                    eq_tol: float = DEFAULT_EQ_TOL) -> TestReport:
    """Chi-square test of ``H0: W = W_alpha0`` from the empirical means.

    ``alternative="greater"`` rejects for large statistics (the p-value is
    the upper chi-square tail); ``"less"`` uses the lower tail and
    ``"two-sided"`` doubles the smaller tail.  ``alpha`` (a hypothetical true
    value) only fills ``noncentral_factor``.
    """
    if not (0.0 < theta < 1.0):
        raise ThetaOutOfRange(f"theta must lie in (0, 1), got {theta!r}")
    expected = _mean_field_regime(alpha0, c, eq_tol)
    if regime is not None and regime.tag is not expected.tag:
        raise WrongRegime(f"(alpha0, c) implies {expected.tag}, caller passed {regime.tag}")
    nbar = np.asarray(nbar, dtype=float)
    dof = nbar.shape[0] - 1
    if dof < 1:
        raise WrongRegime("the test needs N >= 2")
    stat = mean_field_statistic(nbar, n, alpha0, c, eq_tol)
    upper = chi_square_sf(stat, dof)
    if alternative == "greater":
        p = upper
    elif alternative == "less":
        p = chi_square_cdf(stat, dof)
    elif alternative == "two-sided":
        p = min(1.0, 2.0 * min(upper, 1.0 - upper))
    else:
        raise ValueError(f"unknown alternative {alternative!r}")
    factor = None
    if alpha is not None and expected.tag is RegimeTag.GAMMA_ONE_FAST and 2 * c * alpha > 1:
        factor = scale_under_alternative(alpha0, alpha, c)
    return TestReport(stat, dof, p, alpha0, theta, expected, p < theta, alternative, factor)


def projection_statistic(nbar, n: int, es: EigenStructure, regime: Regime,
                         eq_tol: float = DEFAULT_EQ_TOL):
    """``rate(n) U V^T N_n`` and its limit covariance (without ``Z_inf(1-Z_inf)``)."""
    if es.n < 2 or regime.tag not in (RegimeTag.GAMMA_ONE_FAST, RegimeTag.GAMMA_ONE_CRITICAL):
        raise WrongRegime(f"projection statistic needs gamma = 1 and N >= 2, got {regime.tag}")
    cov = projected_nn(regime, es, eq_tol)
    vec = float(regime.rate(n)) * (es.uvt @ np.asarray(nbar, dtype=float))
    return vec, cov


def wald_statistic(vec, cov, plug_in: float, rank: Optional[int] = None) -> float:
    """``vec^T pinv(plug_in * cov) vec``; chi-square with ``rank`` dof under H0."""
    if not (0.0 < plug_in):
        raise DegenerateState("plug-in variance factor must be positive")
    pinv = np.linalg.pinv(plug_in * np.asarray(cov), hermitian=True, rcond=1e-10)
    return float(vec @ pinv @ vec)
