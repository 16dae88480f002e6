"""Forward simulation of the interacting reinforced system.

One step draws ``X_{n+1, j} ~ Bernoulli((W^T Z_n)_j)`` independently over
vertices, then updates

    Z_{n+1} = (1 - r_n) Z_n + r_n X_{n+1}
    N_{n+1} = (1 - 1/(n+1)) N_n + X_{n+1} / (n+1)

Randomness: each run owns one ``numpy.random.Generator`` (Philox, a
counter-based bit generator) and consumes exactly one uniform per
(step, vertex) in vertex order.  The batched engine draws the same numbers
in blocks, so a replication's trajectory does not depend on how many other
replications share the batch.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (EmptyCheckpoints, HorizonOverflow, ProbabilityOutOfRange,
                     WeightVectorNotNormalized)
from .graph import EigenStructure, WeightedNetwork, validate_network

R_MAX = 1.0 - 1e-12
MAX_HORIZON = 2 ** 53
# elements per uniform block in the batched engine
_BLOCK_ELEMENTS = 1 << 21


@dataclass(frozen=True)
class RateSchedule:
    """Discount sequence ``r_n``.

    ``kind`` is ``"polya"`` (``r_n = 1/(a+b+n+1)``, so ``c = gamma = 1``) or
    ``"power"`` (``r_n = min(c n^-gamma, 1 - 1e-12)``, with ``r_0 = min(c, 1 - 1e-12)``).
    """

    kind: str
    a: float = 1.0
    b: float = 1.0
    c_param: float = 1.0
    gamma_param: float = 1.0

    @classmethod
    def polya(cls, a: float, b: float) -> "RateSchedule":
        if not (a > 0 and b > 0):
            raise ValueError(f"polya schedule needs a, b > 0, got a={a!r}, b={b!r}")
        return cls("polya", a=float(a), b=float(b))

    @classmethod
    def power(cls, c: float, gamma: float) -> "RateSchedule":
        if not c > 0:
            raise ValueError(f"power schedule needs c > 0, got {c!r}")
        if not (0.5 < gamma <= 1.0):
            raise ValueError(f"power schedule needs gamma in (1/2, 1], got {gamma!r}")
        return cls("power", c_param=float(c), gamma_param=float(gamma))

    @property
    def c(self) -> float:
        return 1.0 if self.kind == "polya" else self.c_param

    @property
    def gamma(self) -> float:
        return 1.0 if self.kind == "polya" else self.gamma_param

    @property
    def strict_rate_condition(self) -> bool:
        """Whether ``n r_n = c + O(1/n)`` holds (needed by the gamma = 1 joint CLTs)."""
        if self.kind == "polya":
            return True
        # power schedules with gamma = 1 have n r_n = c exactly once unclamped
        return self.gamma_param == 1.0

    def rates(self, n) -> np.ndarray:
        """Vectorized ``r_n`` for integer ``n >= 0``."""
        n = np.asarray(n, dtype=float)
        if self.kind == "polya":
            return 1.0 / (self.a + self.b + n + 1.0)
        with np.errstate(divide="ignore"):
            r = self.c_param * np.where(n > 0, n, 1.0) ** -self.gamma_param
        return np.minimum(r, R_MAX)

    def rate(self, n: int) -> float:
        return float(self.rates(n))

    def describe(self) -> dict:
        if self.kind == "polya":
            return {"polya": {"a": self.a, "b": self.b}}
        return {"power": {"c": self.c_param, "gamma": self.gamma_param}}


@dataclass(frozen=True, eq=False)
class SystemState:
    n: int
    Z: np.ndarray
    Nbar: np.ndarray
    counts: np.ndarray
    X_last: Optional[np.ndarray] = None

    @classmethod
    def initial(cls, z0) -> "SystemState":
        z0 = np.array(z0, dtype=float)
        if z0.ndim != 1 or np.any(z0 < 0) or np.any(z0 > 1):
            raise ValueError("Z0 must be a vector with entries in [0, 1]")
        size = z0.shape[0]
        return cls(0, z0, np.zeros(size), np.zeros(size, dtype=np.int64), None)


@dataclass(frozen=True, eq=False)
class Projections:
    z_tilde: float
    n_tilde: float
    z_hat: np.ndarray
    n_hat: np.ndarray
    a_weighted: Optional[float] = None


def make_rng(seed) -> np.random.Generator:
    """Philox generator from an int, a ``SeedSequence`` or an existing generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def replication_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent stream for replication ``index`` under ``master_seed``."""
    return make_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))


def _action_probabilities(Z, w):
    # fixed summation order over h keeps results bit-identical for any batch shape
    p = Z[..., 0:1] * w[0]
    for h in range(1, w.shape[0]):
        p = p + Z[..., h:h + 1] * w[h]
    return p


def _check_probabilities(p):
    if np.any(p < -1e-12) or np.any(p > 1.0 + 1e-12) or not np.all(np.isfinite(p)):
        raise ProbabilityOutOfRange("action probabilities W^T Z left [0, 1]")


def step(state: SystemState, net: WeightedNetwork, sched: RateSchedule,
         rng: np.random.Generator) -> SystemState:
    """Advance the system by one time step."""
    w = net.weights
    p = _action_probabilities(state.Z, w)
    _check_probabilities(p)
    x = rng.random(w.shape[0]) < p
    r = sched.rate(state.n)
    Z = state.Z + r * (x - state.Z)
    counts = state.counts + x
    n = state.n + 1
    return SystemState(n, Z, counts / n, counts, x.astype(np.int8))


def _normalize_checkpoints(checkpoints, horizon):
    cps = [int(k) for k in checkpoints]
    if not cps:
        raise EmptyCheckpoints("at least one checkpoint is required")
    if horizon > MAX_HORIZON:
        raise HorizonOverflow(f"horizon {horizon} exceeds 2^53 steps")
    if sorted(set(cps)) != cps:
        raise ValueError("checkpoints must be strictly increasing")
    if cps[0] < 1 or cps[-1] > horizon:
        raise ValueError(f"checkpoints must lie in [1, {horizon}]")
    return cps


def _resolve_z0(z0, n_vertices, rng):
    if z0 is None:
        return np.full(n_vertices, 0.5)
    if isinstance(z0, str):
        if z0 != "uniform":
            raise ValueError(f"unknown Z0 spec {z0!r}")
        return rng.random(n_vertices)
    z = np.asarray(z0, dtype=float)
    if z.ndim == 0:
        z = np.full(n_vertices, float(z))
    if z.shape != (n_vertices,) or np.any(z < 0) or np.any(z > 1):
        raise ValueError(f"Z0 must be a scalar or a length-{n_vertices} vector in [0, 1]")
    return z


@dataclass
class BatchResult:
    """Snapshots of ``R`` replications at ``K`` checkpoints."""

    checkpoints: list
    Z: np.ndarray          # (R, K, N)
    Nbar: np.ndarray       # (R, K, N)
    counts: np.ndarray     # (R, K, N) integer
    proxy_Z: Optional[np.ndarray] = None   # (R, N) at the proxy horizon
    actions: Optional[np.ndarray] = None   # (R, horizon, N) if requested
    z0: Optional[np.ndarray] = None        # (R, N)


def _run_chunk(w, sched, z0, rngs, checkpoints, horizon, proxy_horizon, record_actions):
    R = len(rngs)
    N = w.shape[0]
    Z = np.empty((R, N))
    for i, g in enumerate(rngs):
        Z[i] = _resolve_z0(z0, N, g)
    z_init = Z.copy()
    counts = np.zeros((R, N), dtype=np.int64)
    K = len(checkpoints)
    snap_Z = np.empty((R, K, N))
    snap_counts = np.empty((R, K, N), dtype=np.int64)
    end = horizon if proxy_horizon is None else max(horizon, proxy_horizon)
    actions = np.empty((R, horizon, N), dtype=np.int8) if record_actions else None
    block = max(16, min(4096, _BLOCK_ELEMENTS // max(1, R * N)))
    rates = sched.rates(np.arange(end))
    k = 0
    n = 0
    buf = np.empty((block, R, N))
    while n < end:
        b = min(block, end - n)
        for i, g in enumerate(rngs):
            buf[:b, i, :] = g.random((b, N))
        for t in range(b):
            p = _action_probabilities(Z, w)
            x = buf[t] < p
            counts += x
            Z += rates[n] * (x - Z)
            if actions is not None and n < horizon:
                actions[:, n, :] = x
            n += 1
            if k < K and n == checkpoints[k]:
                snap_Z[:, k, :] = Z
                snap_counts[:, k, :] = counts
                k += 1
        if np.any(Z < 0.0) or np.any(Z > 1.0) or not np.all(np.isfinite(Z)):
            raise ProbabilityOutOfRange("inclinations left [0, 1]")
    proxy = Z.copy() if proxy_horizon is not None else None
    return snap_Z, snap_counts, proxy, actions, z_init


def simulate_batch(net, sched: RateSchedule, z0, horizon: int, checkpoints: Sequence[int],
                   rngs: Sequence[np.random.Generator], proxy_horizon: Optional[int] = None,
                   parallelism: int = 1, record_actions: bool = False) -> BatchResult:
    """Run ``len(rngs)`` independent replications side by side.

    ``z0`` is ``None`` (all 0.5), a scalar, a vector, or ``"uniform"`` (drawn
    from each replication's own stream before the first step).  When
    ``proxy_horizon`` is given the run continues to that step and the final
    inclinations are returned as ``proxy_Z``.  Replications are split into
    ``parallelism`` contiguous chunks run on threads; results do not depend on
    the split.
    """
    net = validate_network(net)
    cps = _normalize_checkpoints(checkpoints, horizon)
    if proxy_horizon is not None:
        if proxy_horizon > MAX_HORIZON:
            raise HorizonOverflow(f"proxy horizon {proxy_horizon} exceeds 2^53 steps")
        if proxy_horizon <= cps[-1]:
            raise ValueError("proxy horizon must exceed the last checkpoint")
    rngs = list(rngs)
    w = np.asarray(net.weights)
    parallelism = max(1, min(int(parallelism), len(rngs)))
    bounds = np.linspace(0, len(rngs), parallelism + 1).astype(int)
    chunks = [rngs[bounds[i]:bounds[i + 1]] for i in range(parallelism)]
    args = (sched, z0)
    tail = (cps, horizon, proxy_horizon, record_actions)
    if parallelism == 1:
        parts = [_run_chunk(w, *args, chunks[0], *tail)]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            parts = list(pool.map(lambda ch: _run_chunk(w, *args, ch, *tail), chunks))
    snap_Z = np.concatenate([p[0] for p in parts])
    snap_counts = np.concatenate([p[1] for p in parts])
    nvec = np.asarray(cps, dtype=float)[None, :, None]
    return BatchResult(
        checkpoints=cps,
        Z=snap_Z,
        Nbar=snap_counts / nvec,
        counts=snap_counts,
        proxy_Z=None if proxy_horizon is None else np.concatenate([p[2] for p in parts]),
        actions=np.concatenate([p[3] for p in parts]) if record_actions else None,
        z0=np.concatenate([p[4] for p in parts]),
    )


def project(state: SystemState, es: EigenStructure, a=None) -> Projections:
    """Split ``Z_n`` and ``N_n`` along the Perron direction and its complement."""
    return project_arrays(state.Z, state.Nbar, es, a)


def _check_weight_vector(a, n):
    a = np.asarray(a, dtype=float)
    if a.shape != (n,):
        raise ValueError(f"weight vector must have length {n}")
    if abs(a.sum() - 1.0) > 1e-10:
        raise WeightVectorNotNormalized(f"weights sum to {a.sum()!r}, expected 1")
    return a


def project_arrays(Z, Nbar, es: EigenStructure, a=None):
    """Projections of (possibly batched, last axis = vertices) arrays."""
    Z = np.asarray(Z, dtype=float)
    Nbar = np.asarray(Nbar, dtype=float)
    n = es.n
    scale = n ** -0.5
    v1 = es.v1
    z_tilde = scale * np.tensordot(Z, v1, axes=([-1], [0]))
    n_tilde = scale * np.tensordot(Nbar, v1, axes=([-1], [0]))
    z_hat = Z - z_tilde[..., None]
    n_hat = Nbar - z_tilde[..., None]
    aw = None
    if a is not None:
        a = _check_weight_vector(a, n)
        aw = np.tensordot(Nbar, a, axes=([-1], [0]))
    if Z.ndim == 1:
        return Projections(float(z_tilde), float(n_tilde), z_hat, n_hat,
                           None if aw is None else float(aw))
    return Projections(z_tilde, n_tilde, z_hat, n_hat, aw)


@dataclass
class Snapshot:
    state: SystemState
    projections: Optional[Projections]


def simulate(net, sched: RateSchedule, z0=None, horizon: int = 1, checkpoints=(1,),
             seed=0, es: Optional[EigenStructure] = None, a=None,
             record_actions: bool = False):
    """Single run; returns a list of :class:`Snapshot` (one per checkpoint).

    With ``record_actions`` the full action matrix ``(horizon, N)`` is returned
    as a second value.
    """
    net = validate_network(net)
    res = simulate_batch(net, sched, z0, horizon, checkpoints, [make_rng(seed)],
                         record_actions=record_actions)
    out = []
    for k, n in enumerate(res.checkpoints):
        st = SystemState(n, res.Z[0, k], res.Nbar[0, k], res.counts[0, k])
        out.append(Snapshot(st, project(st, es, a) if es is not None else None))
    if record_actions:
        return out, res.actions[0]
    return out
