import numpy as np
import pytest
import scipy.linalg as la

from urnsync.asymptotics import (assemble, covariance_for, gamma_hat_sq, hat_blocks, projected_nn,
                                 shat_matrices, shat_star_matrices, sigma_tilde_sq)
from urnsync.errors import GammaOutOfRange, WrongRegime
from urnsync.graph import (EigenStructure, RegimeTag, classify_regime, eigenstructure,
                           mean_field_eigenstructure, mean_field_network, validate_network)


def random_network(seed, n):
    rng = np.random.default_rng(seed)
    w = rng.random((n, n)) + 0.05
    return w / w.sum(axis=0)


def lyapunov_oracle(w, c):
    """Fast-regime hat blocks from Lyapunov equations, no eigendecomposition.

    With B = c (I - W^T) - I/2, P = I - u1 v1^T and G the group inverse of
    I - W^T, the ZZ block is c^2 X where B X + X B^T = P P^T; the N blocks
    follow by left/right multiplication with G.
    """
    n = w.shape[0]
    eye = np.eye(n)
    u1 = np.full(n, n ** -0.5)
    # right Perron vector of W normalized by u1^T v1 = 1
    a = np.vstack([w - eye, u1])
    rhs = np.concatenate([np.zeros(n), [1.0]])
    v1 = np.linalg.lstsq(a, rhs, rcond=None)[0]
    proj = eye - np.outer(u1, v1)
    b = c * (eye - w.T) - 0.5 * eye
    x = la.solve_continuous_lyapunov(b, proj @ proj.T)
    g = np.linalg.inv(eye - w.T + np.outer(u1, v1)) - np.outer(u1, v1)
    zz = c ** 2 * x
    edge = (1 - c) * np.outer(g @ v1, u1)
    zn = c * x + (c - 1) * g @ x + edge
    nn = (x + (c - 1) * (g @ x + x @ g.T) + (c - 1) ** 2 * (v1 @ v1) * np.outer(u1, u1)
          + edge + edge.T)
    return zz, zn, nn


def test_sigma_tilde_and_gamma_hat_mean_field():
    es = mean_field_eigenstructure(4, 0.5)
    assert sigma_tilde_sq(0.75, 2.0, es) == pytest.approx(4.0 / (4 * 0.5))
    assert gamma_hat_sq(0.75, 2.0, es) == pytest.approx(4.0 / (4 * 1.5))
    with pytest.raises(GammaOutOfRange):
        gamma_hat_sq(1.0, 1.0, es)


def test_mean_field_shat_closed_forms():
    # S_ZZ = c^2/(2 c a - 1) I, S_NN diagonal, S_ZN diagonal on j >= 2
    n, alpha, c = 5, 0.75, 2.0
    es = mean_field_eigenstructure(n, alpha)
    s_zz, s_nn, s_zn = shat_matrices(c, es)
    d = 2 * c * alpha - 1
    np.testing.assert_allclose(s_zz, c ** 2 / d * np.eye(n - 1), atol=1e-12)
    expect_nn = np.diag([(c - 1) ** 2] + [(1 + 2 * (c - 1) / alpha) / d] * (n - 1))
    np.testing.assert_allclose(s_nn, expect_nn, atol=1e-12)
    expect_zn = np.hstack([np.zeros((n - 1, 1)), (c + (c - 1) / alpha) / d * np.eye(n - 1)])
    np.testing.assert_allclose(s_zn, expect_zn, atol=1e-12)


def test_mean_field_shat_star_closed_forms():
    n, c = 4, 2.0
    alpha = 1 / (2 * c)
    es = mean_field_eigenstructure(n, alpha)
    s_zz, s_nn, s_zn = shat_star_matrices(c, es)
    eye = np.eye(n - 1)
    np.testing.assert_allclose(s_zz, c ** 2 * eye, atol=1e-12)
    np.testing.assert_allclose(s_nn, (1 - alpha) ** 2 / alpha ** 2 * eye, atol=1e-12)
    np.testing.assert_allclose(s_zn, c * (1 - alpha) / alpha * eye, atol=1e-12)


def test_regime_mismatch_raises():
    with pytest.raises(WrongRegime):
        shat_matrices(1.0, mean_field_eigenstructure(4, 0.5))
    with pytest.raises(WrongRegime):
        shat_star_matrices(1.0, mean_field_eigenstructure(4, 0.75))
    with pytest.raises(WrongRegime):
        covariance_for(1.0, 1.0, mean_field_eigenstructure(4, 0.25))


@pytest.mark.parametrize("seed,n,c", [(0, 3, 1.0), (1, 5, 2.0), (2, 6, 0.9), (3, 4, 1.5)])
def test_fast_hat_blocks_match_lyapunov_oracle(seed, n, c):
    w = random_network(seed, n)
    es = eigenstructure(validate_network(w))
    regime = classify_regime(1.0, c, es)
    assert regime.tag is RegimeTag.GAMMA_ONE_FAST
    zz, zn, nn = hat_blocks(regime, es)
    o_zz, o_zn, o_nn = lyapunov_oracle(w, c)
    np.testing.assert_allclose(zz, o_zz, atol=1e-9)
    np.testing.assert_allclose(zn, o_zn, atol=1e-9)
    np.testing.assert_allclose(nn, o_nn, atol=1e-9)


def test_complex_spectrum_covariance_is_real_and_symmetric():
    p = np.roll(np.eye(3), 1, axis=0)
    w = 0.5 * np.eye(3) + 0.5 * p
    es = eigenstructure(validate_network(w))
    cov = covariance_for(1.0, 1.0, es, hat=True)
    np.testing.assert_allclose(cov.sigma, cov.sigma.T, atol=1e-12)
    assert np.all(np.linalg.eigvalsh(cov.sigma) > -1e-10)
    o_zz, o_zn, o_nn = lyapunov_oracle(w, 1.0)
    np.testing.assert_allclose(cov.zz, o_zz, atol=1e-9)
    np.testing.assert_allclose(cov.nn, o_nn, atol=1e-9)


def test_basis_phase_invariance():
    w = random_network(7, 5)
    es = eigenstructure(validate_network(w))
    phases = np.exp(1j * np.linspace(0.3, 2.0, 5))
    phases[0] = 1.0
    rotated = EigenStructure.from_left_vectors(es.eigenvalues, es.left * phases)
    a = covariance_for(1.0, 1.3, es, hat=True).sigma
    b = covariance_for(1.0, 1.3, rotated, hat=True).sigma
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_scalar_regime_matrix():
    es = eigenstructure(validate_network([[1.0]]))
    np.testing.assert_allclose(covariance_for(1.0, 1.0, es).sigma, [[1, 1], [1, 1]])
    np.testing.assert_allclose(covariance_for(1.0, 2.0, es).sigma, [[4, 4], [4, 5]])
    np.testing.assert_allclose(covariance_for(1.0, 2.0, es, hat=True).sigma, [[0, 0], [0, 1]])


def test_gamma_less_one_blocks():
    es = mean_field_eigenstructure(3, 0.4)
    cov = covariance_for(0.75, 1.0, es)
    st = 1.0 / (3 * 0.5)
    gh = 1.0 / (3 * 1.5)
    np.testing.assert_allclose(cov.zz, st * np.ones((3, 3)))
    np.testing.assert_allclose(cov.zn, st * np.ones((3, 3)))
    np.testing.assert_allclose(cov.nn, (st + gh) * np.ones((3, 3)))
    assert cov.rate(10 ** 4) == pytest.approx(10.0)
    # e1 - e2 has zero limiting variance
    d = np.array([1.0, -1.0, 0.0])
    assert d @ cov.nn @ d == pytest.approx(0.0, abs=1e-14)


def test_mean_field_fast_full_and_hat():
    n, alpha, c = 4, 0.75, 1.0
    es = mean_field_eigenstructure(n, alpha)
    proj = np.eye(n) - np.ones((n, n)) / n
    hat = covariance_for(1.0, c, es, hat=True)
    k = c ** 2 / (2 * c * alpha - 1)
    np.testing.assert_allclose(hat.zz, k * proj, atol=1e-12)
    np.testing.assert_allclose(hat.nn, (1 + 2 * (c - 1) / alpha) / (2 * c * alpha - 1) * proj, atol=1e-12)
    full = covariance_for(1.0, c, es)
    np.testing.assert_allclose(full.zz, c ** 2 / n + k * proj, atol=1e-12)
    assert full.rate_label == "sqrt(n)"


def test_critical_blocks_and_projected_nn():
    n, c = 4, 1.0
    alpha = 0.5
    es = eigenstructure(mean_field_network(n, alpha))
    cov = covariance_for(1.0, c, es)
    proj = np.eye(n) - np.ones((n, n)) / n
    np.testing.assert_allclose(cov.zz, c ** 2 * proj, atol=1e-10)
    np.testing.assert_allclose(cov.nn, (1 - alpha) ** 2 / alpha ** 2 * proj, atol=1e-10)
    np.testing.assert_allclose(cov.zn, c * (1 - alpha) / alpha * proj, atol=1e-10)
    np.testing.assert_allclose(projected_nn(cov.regime, es), cov.nn, atol=1e-12)
    assert cov.rate(np.e ** 2) == pytest.approx(np.sqrt(np.e ** 2 / 2))


def test_assemble_rejects_inconsistent_inputs():
    es = mean_field_eigenstructure(3, 0.75)
    regime = classify_regime(1.0, 1.0, es)
    with pytest.raises(WrongRegime):
        assemble(regime, 1.0, 2.0, es)
