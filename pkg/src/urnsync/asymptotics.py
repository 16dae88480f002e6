"""Closed-form asymptotic covariances of ``(Z_n, N_n)`` for every regime.

All matrices are returned without the random factor ``Z_inf (1 - Z_inf)``.
Index bookkeeping: ``S_NN`` is N x N with index 0 the Perron direction,
``S_ZZ`` is (N-1) x (N-1) and ``S_ZN`` is (N-1) x N.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ComplexResidue, GammaOutOfRange, WrongRegime
from .graph import (DEFAULT_EQ_TOL, EigenStructure, Regime, RegimeTag,
                    check_gamma, classify_regime)

IMAG_TOL = 1e-9


def sigma_tilde_sq(gamma: float, c: float, es: EigenStructure) -> float:
    """``c^2 ||v_1||^2 / (N (2 gamma - 1))``."""
    check_gamma(gamma)
    return c ** 2 * es.v1_norm_sq / (es.n * (2.0 * gamma - 1.0))


def gamma_hat_sq(gamma: float, c: float, es: EigenStructure) -> float:
    """``c^2 ||v_1||^2 / (N (3 - 2 gamma))``, defined for 1/2 < gamma < 1."""
    if not (0.5 < gamma < 1.0):
        raise GammaOutOfRange(f"gamma must lie in (1/2, 1), got {gamma!r}")
    return c ** 2 * es.v1_norm_sq / (es.n * (3.0 - 2.0 * gamma))


def _vtv(es):
    return es.right.T @ es.right


def shat_matrices(c: float, es: EigenStructure, eq_tol: float = DEFAULT_EQ_TOL):
    """Complex matrices ``(S_ZZ, S_NN, S_ZN)`` of the fast gamma = 1 regime."""
    regime = classify_regime(1.0, c, es, eq_tol)
    if regime.tag is not RegimeTag.GAMMA_ONE_FAST:
        raise WrongRegime(f"S-hat matrices need GammaOneFast, regime is {regime.tag}")
    lam = es.eigenvalues
    g = _vtv(es)
    lh = lam[1:, None]
    lj = lam[None, 1:]
    denom = c * (2.0 - lh - lj) - 1.0
    g_rest = g[1:, 1:]

    s_zz = c ** 2 / denom * g_rest

    n = es.n
    s_nn = np.empty((n, n), dtype=complex)
    s_nn[0, 0] = (c - 1.0) ** 2 * es.v1_norm_sq
    edge = (1.0 - c) / (1.0 - lam[1:]) * g[0, 1:]
    s_nn[0, 1:] = edge
    s_nn[1:, 0] = edge
    s_nn[1:, 1:] = (1.0 + (c - 1.0) * (1.0 / (1.0 - lh) + 1.0 / (1.0 - lj))) / denom * g_rest

    s_zn = np.empty((n - 1, n), dtype=complex)
    s_zn[:, 0] = (1.0 - c) / (1.0 - lam[1:]) * g[1:, 0]
    s_zn[:, 1:] = (c + (c - 1.0) / (1.0 - lh)) / denom * g_rest
    return s_zz, s_nn, s_zn


def shat_star_matrices(c: float, es: EigenStructure, eq_tol: float = DEFAULT_EQ_TOL):
    """Complex (N-1) x (N-1) matrices ``(S*_ZZ, S*_NN, S*_ZN)`` of the critical regime.

    The resonance indicator ``c (2 - lambda_h - lambda_j) = 1`` is evaluated
    with tolerance ``eq_tol``.
    """
    regime = classify_regime(1.0, c, es, eq_tol)
    if regime.tag is not RegimeTag.GAMMA_ONE_CRITICAL:
        raise WrongRegime(f"S-star matrices need GammaOneCritical, regime is {regime.tag}")
    lam = es.eigenvalues
    g = _vtv(es)[1:, 1:]
    lh = lam[1:, None]
    lj = lam[None, 1:]
    ind = np.abs(c * (2.0 - lh - lj) - 1.0) <= eq_tol
    s_zz = np.where(ind, c ** 2 * g, 0.0)
    s_nn = np.where(ind, lh * lj / ((1.0 - lh) * (1.0 - lj)) * g, 0.0)
    s_zn = np.where(ind, c * lj / (1.0 - lh) * g, 0.0)
    return s_zz, s_nn, s_zn


def _real(m, what):
    resid = float(np.max(np.abs(np.imag(m)))) if np.size(m) else 0.0
    if resid >= IMAG_TOL:
        raise ComplexResidue(f"{what} has imaginary residue {resid:.3g}")
    return np.real(m).astype(float)


def _blocks(zz, zn, nn):
    return np.block([[zz, zn], [zn.T, nn]])


@dataclass(frozen=True, eq=False)
class AsymptoticCovariance:
    """Regime, rate and the 2N x 2N block matrix ``[[ZZ, ZN], [ZN^T, NN]]``."""

    regime: Regime
    sigma: np.ndarray
    strict_rate_condition: bool = True

    @property
    def rate_label(self) -> str:
        return self.regime.rate_label

    def rate(self, n):
        return self.regime.rate(n)

    @property
    def n_vertices(self) -> int:
        return self.sigma.shape[0] // 2

    @property
    def zz(self):
        k = self.n_vertices
        return self.sigma[:k, :k]

    @property
    def zn(self):
        k = self.n_vertices
        return self.sigma[:k, k:]

    @property
    def nn(self):
        k = self.n_vertices
        return self.sigma[k:, k:]


def hat_blocks(regime: Regime, es: EigenStructure, eq_tol: float = DEFAULT_EQ_TOL):
    """Real ``(Sigma_ZZ, Sigma_ZN, Sigma_NN)`` of the centred pair ``(Z-hat, N-hat)``."""
    c = regime.c
    n = es.n
    tag = regime.tag
    if tag is RegimeTag.GAMMA_LESS_ONE:
        zero = np.zeros((n, n))
        return zero, zero, gamma_hat_sq(regime.gamma, c, es) * np.ones((n, n))
    if tag is RegimeTag.GAMMA_ONE_SCALAR:
        zero = np.zeros((1, 1))
        return zero, zero, np.array([[(c - 1.0) ** 2]])
    U = es.U
    Ut = es.left
    if tag is RegimeTag.GAMMA_ONE_FAST:
        s_zz, s_nn, s_zn = shat_matrices(c, es, eq_tol)
        return (_real(U @ s_zz @ U.T, "Sigma_ZZ"),
                _real(U @ s_zn @ Ut.T, "Sigma_ZN"),
                _real(Ut @ s_nn @ Ut.T, "Sigma_NN"))
    if tag is RegimeTag.GAMMA_ONE_CRITICAL:
        s_zz, s_nn, s_zn = shat_star_matrices(c, es, eq_tol)
        return (_real(U @ s_zz @ U.T, "Sigma*_ZZ"),
                _real(U @ s_zn @ U.T, "Sigma*_ZN"),
                _real(U @ s_nn @ U.T, "Sigma*_NN"))
    raise WrongRegime("no covariance is available in the unsupported regime")


def assemble(regime: Regime, gamma: float, c: float, es: EigenStructure,
             eq_tol: float = DEFAULT_EQ_TOL, strict_rate_condition: bool = True,
             hat: bool = False) -> AsymptoticCovariance:
    """Covariance of ``rate(n) * (Z_n - Z_inf 1, N_n - Z_inf 1)``.

    With ``hat=True`` the matrix is instead the limit covariance of
    ``rate(n) * (Z-hat_n, N-hat_n)``.
    """
    if regime.tag is RegimeTag.UNSUPPORTED:
        raise WrongRegime("no CLT is available in the unsupported regime")
    if abs(regime.c - c) > eq_tol or abs(regime.gamma - gamma) > eq_tol:
        raise WrongRegime("regime was classified for different (gamma, c)")
    n = es.n
    ones = np.ones((n, n))
    tag = regime.tag
    if hat:
        zz, zn, nn = hat_blocks(regime, es, eq_tol)
        return AsymptoticCovariance(regime, _blocks(zz, zn, nn), strict_rate_condition)
    if tag is RegimeTag.GAMMA_LESS_ONE:
        st = sigma_tilde_sq(gamma, c, es) * ones
        gh = gamma_hat_sq(gamma, c, es) * ones
        sigma = _blocks(st, st, st + gh)
    elif tag is RegimeTag.GAMMA_ONE_SCALAR:
        c2 = c ** 2
        sigma = np.array([[c2, c2], [c2, c2 + (c - 1.0) ** 2]])
    elif tag is RegimeTag.GAMMA_ONE_FAST:
        st = sigma_tilde_sq(1.0, c, es) * ones
        zz, zn, nn = hat_blocks(regime, es, eq_tol)
        sigma = _blocks(st + zz, st + zn, st + nn)
    else:
        zz, zn, nn = hat_blocks(regime, es, eq_tol)
        sigma = _blocks(zz, zn, nn)
    return AsymptoticCovariance(regime, sigma, strict_rate_condition)


def covariance_for(gamma: float, c: float, es: EigenStructure,
                   eq_tol: float = DEFAULT_EQ_TOL, hat: bool = False) -> AsymptoticCovariance:
    """Classify the regime and assemble in one call."""
    regime = classify_regime(gamma, c, es, eq_tol)
    return assemble(regime, regime.gamma, c, es, eq_tol, hat=hat)


def projected_nn(regime: Regime, es: EigenStructure, eq_tol: float = DEFAULT_EQ_TOL):
    """Limit covariance of ``rate(n) U V^T N_n``.

    Fast regime: ``U [S_NN]_(-1) U^T``; critical regime: ``Sigma*_NN``.
    """
    if regime.tag is RegimeTag.GAMMA_ONE_FAST:
        _, s_nn, _ = shat_matrices(regime.c, es, eq_tol)
        return _real(es.U @ s_nn[1:, 1:] @ es.U.T, "U S_NN U^T")
    if regime.tag is RegimeTag.GAMMA_ONE_CRITICAL:
        return hat_blocks(regime, es, eq_tol)[2]
    raise WrongRegime(f"projection covariance needs a gamma = 1, N >= 2 regime, got {regime.tag}")
