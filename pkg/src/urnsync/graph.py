"""Weighted influence networks and their biorthogonal eigen-structure.

The influence matrix ``W`` has entry ``W[h, j]`` equal to the weight with
which vertex ``h`` acts on vertex ``j``; columns sum to one.  Left
eigenvectors ``u_j`` (``u_j^T W = lambda_j u_j^T``) are unit-norm, the right
eigenvectors are the columns of ``inv(U_tilde^T)`` so that ``u_h^T v_j`` is
the Kronecker delta (plain transpose, no conjugation).
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as la

from .errors import (GammaOutOfRange, InvalidAlpha, NegativeWeight,
                     NotColumnStochastic, NotDiagonalizable, NotIrreducible,
                     ResidualTooLarge)

COLUMN_SUM_TOL = 1e-12
DEFAULT_TOL = 1e-8
DEFAULT_EQ_TOL = 1e-9
CLUSTER_RADIUS = 1e-8
PERRON_TOL = 1e-10


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class WeightedNetwork:
    """A validated column-stochastic, irreducible influence matrix."""

    weights: np.ndarray

    @property
    def n_vertices(self) -> int:
        return self.weights.shape[0]

    def __repr__(self):
        return f"WeightedNetwork(n_vertices={self.n_vertices})"


def _strongly_connected(support: np.ndarray) -> bool:
    n = support.shape[0]

    def reach(adj):
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        queue = deque([0])
        while queue:
            h = queue.popleft()
            for j in np.flatnonzero(adj[h]):
                if not seen[j]:
                    seen[j] = True
                    queue.append(j)
        return seen.all()

    return reach(support) and reach(support.T)


def validate_network(raw) -> WeightedNetwork:
    """Check ``raw`` and wrap it as a :class:`WeightedNetwork`.

    Raises
    ------
    NegativeWeight, NotColumnStochastic, NotIrreducible
    """
    if isinstance(raw, WeightedNetwork):
        return raw
    w = np.asarray(raw, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] < 1:
        raise ValueError(f"weights must be a non-empty square matrix, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    if np.any(w < 0):
        h, j = np.argwhere(w < 0)[0]
        raise NegativeWeight(f"w[{h},{j}] = {w[h, j]!r} < 0")
    dev = np.abs(w.sum(axis=0) - 1.0)
    if np.any(dev > COLUMN_SUM_TOL):
        j = int(np.argmax(dev))
        raise NotColumnStochastic(
            f"column {j} sums to {w[:, j].sum()!r}, expected 1 within {COLUMN_SUM_TOL}")
    if not _strongly_connected(w > 0):
        raise NotIrreducible("support graph of W is not strongly connected")
    return WeightedNetwork(_frozen(w))


def mean_field_network(n: int, alpha: float) -> WeightedNetwork:
    """``w[h, j] = alpha / n + delta(h, j) * (1 - alpha)``."""
    if not (0.0 < alpha <= 1.0):
        raise InvalidAlpha(f"alpha must lie in (0, 1], got {alpha!r}")
    if n < 2:
        raise ValueError(f"mean-field network needs n >= 2, got {n}")
    w = np.full((n, n), alpha / n)
    w[np.diag_indices(n)] += 1.0 - alpha
    return validate_network(w)


@dataclass(frozen=True, eq=False)
class EigenStructure:
    """Biorthogonal eigen-system of a network.

    Columns of ``left`` are ``u_1 .. u_N`` and columns of ``right`` are
    ``v_1 .. v_N``; index 0 is the Perron pair (``lambda_1 = 1``).
    """

    eigenvalues: np.ndarray
    left: np.ndarray
    right: np.ndarray
    lambda_star: Optional[complex]
    residual_tol: float

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def u1(self):
        return self.left[:, 0].real

    @property
    def v1(self):
        return self.right[:, 0].real

    @property
    def U(self):
        return self.left[:, 1:]

    @property
    def V(self):
        return self.right[:, 1:]

    @property
    def D(self):
        return np.diag(self.eigenvalues[1:])

    @property
    def v1_norm_sq(self) -> float:
        return float(np.sum(self.v1 ** 2))

    @property
    def uvt(self):
        """Real part of ``U V^T`` (the projector onto the non-Perron modes)."""
        return (self.U @ self.V.T).real

    @classmethod
    def from_left_vectors(cls, eigenvalues, left, residual_tol=DEFAULT_TOL):
        """Build the structure from unit-norm left vectors; ``V = inv(U^T)``."""
        eigenvalues = np.asarray(eigenvalues, dtype=complex)
        left = np.asarray(left, dtype=complex)
        right = la.solve(left.T, np.eye(left.shape[0]))
        star = None
        if eigenvalues.shape[0] > 1:
            rest = eigenvalues[1:]
            star = complex(rest[int(np.argmax(rest.real))])
        return cls(_frozen(eigenvalues), _frozen(left), _frozen(right), star, residual_tol)


def _clusters(values, radius):
    """Group indices of ``values`` (already sorted) into chains closer than ``radius``."""
    groups = []
    for i, lam in enumerate(values):
        for g in groups:
            if any(abs(lam - values[k]) <= radius for k in g):
                g.append(i)
                break
        else:
            groups.append([i])
    return groups


def _fix_phase(u):
    """Unit-normalize and rotate so the largest entry is real positive."""
    u = u / np.sqrt(np.vdot(u, u).real)
    k = int(np.argmax(np.abs(u)))
    return u * (abs(u[k]) / u[k])


def check_invariants(es: EigenStructure, w, tol=None):
    """Return a dict of the worst violation of each eigen-structure invariant."""
    tol = es.residual_tol if tol is None else tol
    w = np.asarray(w.weights if isinstance(w, WeightedNetwork) else w)
    lam, u, v = es.eigenvalues, es.left, es.right
    n = es.n
    out = {
        "right_residual": float(np.max(np.linalg.norm(w @ v - v * lam, axis=0))),
        "left_residual": float(np.max(np.linalg.norm(w.T @ u - u * lam, axis=0))),
        "biorthogonality": float(np.max(np.abs(u.T @ v - np.eye(n)))),
        "completeness": float(np.linalg.norm(np.outer(u[:, 0], v[:, 0]) + u[:, 1:] @ v[:, 1:].T - np.eye(n))),
        "uvt_imag": float(np.max(np.abs((u[:, 1:] @ v[:, 1:].T).imag))) if n > 1 else 0.0,
        "unit_norm": float(np.max(np.abs(np.linalg.norm(u, axis=0) - 1.0))),
        "u1": float(np.max(np.abs(u[:, 0] - n ** -0.5))),
        "v1_sum": float(abs(n ** -0.5 * v[:, 0].sum() - 1.0)),
    }
    out["ok"] = (all(val < tol for val in out.values())
                 and bool(np.all(v[:, 0].real > 0))
                 and bool(np.all(lam[1:].real < 1.0)))
    return out


def eigenstructure(net: WeightedNetwork, tol: float = DEFAULT_TOL,
                   cluster_radius: float = CLUSTER_RADIUS) -> EigenStructure:
    """Spectrally decompose ``net`` into a biorthogonal eigen-system.

    Eigenvalues within ``cluster_radius`` of each other are merged into one
    eigenspace whose left vectors are orthonormalized.  Eigenvalues other
    than 1 are ordered by decreasing real part (ties: positive imaginary
    part first).

    Raises
    ------
    NotDiagonalizable
        If an eigenvalue cluster is rank deficient or the left eigenvector
        matrix has condition number above ``1 / tol``.
    ResidualTooLarge
        If the assembled system fails a post-hoc residual check.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    net = validate_network(net)
    w = net.weights
    n = net.n_vertices
    if n == 1:
        return EigenStructure.from_left_vectors([1.0], [[1.0]], tol)

    # left eigenvectors of W are right eigenvectors of W^T
    lam, vecs = la.eig(w.T)
    i1 = int(np.argmin(np.abs(lam - 1.0)))
    if abs(lam[i1] - 1.0) > PERRON_TOL:
        raise ResidualTooLarge(f"Perron eigenvalue computed as {lam[i1]!r}")
    rest = np.delete(np.arange(n), i1)
    if np.any(np.abs(lam[rest] - 1.0) <= cluster_radius):
        raise NotDiagonalizable("eigenvalue 1 is not simple")
    order = sorted(rest, key=lambda k: (-round(lam[k].real, 12), -lam[k].imag))
    lam = lam[order]
    vecs = vecs[:, order]

    new_lam = np.empty(n - 1, dtype=complex)
    new_vecs = np.empty((n, n - 1), dtype=complex)
    groups = _clusters(lam, cluster_radius)
    done = set()
    for gi, g in enumerate(groups):
        if gi in done:
            continue
        mean = lam[g].mean()
        real = abs(mean.imag) <= cluster_radius
        block = vecs[:, g].real if real else vecs[:, g]
        block = block / np.linalg.norm(block, axis=0)
        if len(g) > 1:
            s = np.linalg.svd(block, compute_uv=False)
            if s[-1] < np.sqrt(tol):
                # geev may return a dependent basis for an exactly repeated
                # eigenvalue; recover the eigenspace as a null space instead
                shifted = w.T - (mean.real if real else mean) * np.eye(n)
                block = la.null_space(shifted, rcond=np.sqrt(tol))
                if block.shape[1] < len(g):
                    raise NotDiagonalizable(
                        f"eigenvalue {mean!r} has geometric multiplicity below {len(g)}")
                block = block[:, -len(g):]
            block, _ = np.linalg.qr(block)
        block = np.column_stack([_fix_phase(b) for b in block.T])
        if real:
            mean = complex(mean.real, 0.0)
        new_lam[g] = mean
        new_vecs[:, g] = block
        done.add(gi)
        if not real:
            # the conjugate cluster gets the conjugate vectors, keeping U V^T real
            for gj in range(gi + 1, len(groups)):
                h = groups[gj]
                if gj not in done and len(h) == len(g) and abs(lam[h].mean() - np.conj(mean)) <= cluster_radius * len(g):
                    new_lam[h] = np.conj(mean)
                    new_vecs[:, h] = np.conj(block)
                    done.add(gj)
                    break

    left = np.column_stack([np.full(n, n ** -0.5, dtype=complex), new_vecs])
    eigenvalues = np.concatenate([[1.0 + 0j], new_lam])
    cond = np.linalg.cond(left)
    if not np.isfinite(cond) or cond > 1.0 / tol:
        raise NotDiagonalizable(f"left eigenvector matrix condition number {cond:.3g} exceeds {1.0 / tol:.3g}")
    es = EigenStructure.from_left_vectors(eigenvalues, left, tol)
    report = check_invariants(es, w, tol)
    if not report["ok"]:
        bad = {k: v for k, v in report.items() if k != "ok" and v >= tol}
        raise ResidualTooLarge(f"eigen-structure invariants violated: {bad}")
    return es


def helmert_basis(n: int) -> np.ndarray:
    """Orthonormal basis (columns) of the complement of the all-ones vector."""
    h = np.zeros((n, n - 1))
    for k in range(1, n):
        h[:k, k - 1] = 1.0
        h[k, k - 1] = -k
        h[:, k - 1] /= np.sqrt(k * (k + 1))
    return h


def mean_field_eigenstructure(n: int, alpha: float) -> EigenStructure:
    """Closed-form eigen-system of the mean-field network (symmetric, so U = V)."""
    if not (0.0 < alpha <= 1.0):
        raise InvalidAlpha(f"alpha must lie in (0, 1], got {alpha!r}")
    if n < 2:
        raise ValueError(f"mean-field network needs n >= 2, got {n}")
    left = np.column_stack([np.full(n, n ** -0.5), helmert_basis(n)])
    eigenvalues = np.concatenate([[1.0], np.full(n - 1, 1.0 - alpha)])
    return EigenStructure(_frozen(eigenvalues.astype(complex)), _frozen(left.astype(complex)),
                          _frozen(left.astype(complex)), complex(1.0 - alpha), DEFAULT_TOL)


class RegimeTag(enum.Enum):
    GAMMA_LESS_ONE = "GammaLessOne"
    GAMMA_ONE_SCALAR = "GammaOneScalar"
    GAMMA_ONE_FAST = "GammaOneFast"
    GAMMA_ONE_CRITICAL = "GammaOneCritical"
    UNSUPPORTED = "Unsupported"

    def __str__(self):
        return self.value


RATE_LABELS = {
    RegimeTag.GAMMA_LESS_ONE: "n^(gamma-1/2)",
    RegimeTag.GAMMA_ONE_SCALAR: "sqrt(n)",
    RegimeTag.GAMMA_ONE_FAST: "sqrt(n)",
    RegimeTag.GAMMA_ONE_CRITICAL: "sqrt(n/ln n)",
    RegimeTag.UNSUPPORTED: "none",
}


@dataclass(frozen=True)
class Regime:
    tag: RegimeTag
    gamma: float
    c: float

    @property
    def rate_label(self) -> str:
        return RATE_LABELS[self.tag]

    def rate(self, n):
        """Normalizing rate evaluated at ``n`` (scalar or array)."""
        n = np.asarray(n, dtype=float)
        if self.tag is RegimeTag.GAMMA_LESS_ONE:
            return n ** (self.gamma - 0.5)
        if self.tag in (RegimeTag.GAMMA_ONE_SCALAR, RegimeTag.GAMMA_ONE_FAST):
            return np.sqrt(n)
        if self.tag is RegimeTag.GAMMA_ONE_CRITICAL:
            return np.sqrt(n / np.log(n))
        raise ValueError("no CLT rate in the unsupported regime")


def is_gamma_one(gamma: float, eq_tol: float = DEFAULT_EQ_TOL) -> bool:
    return abs(gamma - 1.0) <= eq_tol


def check_gamma(gamma: float, eq_tol: float = DEFAULT_EQ_TOL):
    if not (0.5 < gamma <= 1.0 + eq_tol):
        raise GammaOutOfRange(f"gamma must lie in (1/2, 1], got {gamma!r}")


def classify_regime(gamma: float, c: float, es: EigenStructure,
                    eq_tol: float = DEFAULT_EQ_TOL) -> Regime:
    check_gamma(gamma, eq_tol)
    if c <= 0:
        raise ValueError(f"c must be positive, got {c!r}")
    if not is_gamma_one(gamma, eq_tol):
        return Regime(RegimeTag.GAMMA_LESS_ONE, gamma, c)
    if es.n == 1:
        return Regime(RegimeTag.GAMMA_ONE_SCALAR, 1.0, c)
    threshold = 1.0 - 1.0 / (2.0 * c)
    gap = es.lambda_star.real - threshold
    if abs(gap) <= eq_tol:
        tag = RegimeTag.GAMMA_ONE_CRITICAL
    elif gap < 0:
        tag = RegimeTag.GAMMA_ONE_FAST
    else:
        tag = RegimeTag.UNSUPPORTED
    return Regime(tag, 1.0, c)
