"""Replicated simulations turned into empirical checks of the limit theorems.

The unobservable limit ``Z_inf`` is replaced by the proxy ``Z-tilde_M`` at a
long horizon ``M`` (at least ten times the last checkpoint).  Each
replication ``r`` draws from its own Philox stream derived from
``(master_seed, r)``; results are aggregated in replication order, so
reports are identical for any thread count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .asymptotics import AsymptoticCovariance, assemble
from .dynamics import RateSchedule, project_arrays, replication_rng, simulate_batch
from .errors import DegenerateState, ProxyDegenerate, WrongRegime
from .graph import (DEFAULT_EQ_TOL, RegimeTag, WeightedNetwork, classify_regime,
                    eigenstructure, mean_field_network)
from .inference import ci_from_ntilde, ci_from_ztilde, mean_field_test

KINDS = ("synchronization", "clt_covariance", "ci_coverage", "test_size", "test_power")
DISTRIBUTIONAL = ("clt_covariance", "ci_coverage", "test_size", "test_power")
NEEDS_PROXY = ("clt_covariance", "ci_coverage")
PROXY_BAND = (1e-4, 1.0 - 1e-4)
MAX_EXCLUDED_FRACTION = 0.2
SYNC_THRESHOLD = 0.05


@dataclass
class ExperimentConfig:
    network: WeightedNetwork
    schedule: RateSchedule
    checkpoints: Sequence[int]
    replications: int = 100
    kind: str = "synchronization"
    master_seed: int = 0
    z0: object = None
    proxy_horizon: Optional[int] = None
    theta: float = 0.05
    a: Optional[Sequence[float]] = None
    alpha0: Optional[float] = None
    alpha_true: Optional[float] = None
    basis: str = "NTilde"
    clt_mode: Optional[str] = None
    eq_tol: float = DEFAULT_EQ_TOL

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        self.checkpoints = [int(k) for k in self.checkpoints]
        if self.replications < 1:
            raise ValueError("replications must be positive")
        if self.kind in DISTRIBUTIONAL and self.replications < 100:
            raise ValueError(f"{self.kind} needs at least 100 replications")
        if self.kind in NEEDS_PROXY:
            if self.proxy_horizon is None:
                self.proxy_horizon = 10 * max(self.checkpoints)
            if self.proxy_horizon < 10 * max(self.checkpoints):
                raise ValueError("proxy horizon must be at least 10 x the last checkpoint")

    @property
    def gamma(self) -> float:
        return self.schedule.gamma

    @property
    def c(self) -> float:
        return self.schedule.c

    @property
    def horizon(self) -> int:
        return max(self.checkpoints)


@dataclass
class ReplicationSummary:
    index: int
    seed: str
    checkpoints: list
    Z: np.ndarray            # (K, N)
    Nbar: np.ndarray         # (K, N)
    z_tilde: np.ndarray      # (K,)
    n_tilde: np.ndarray      # (K,)
    z_hat: np.ndarray        # (K, N)
    n_hat: np.ndarray        # (K, N)
    a_weighted: Optional[np.ndarray] = None
    z_infty_proxy: Optional[float] = None

    def at(self, n: int) -> int:
        return self.checkpoints.index(n)


def _simulate(network, cfg: ExperimentConfig, parallelism: int, proxy_horizon):
    rngs = [replication_rng(cfg.master_seed, r) for r in range(cfg.replications)]
    return simulate_batch(network, cfg.schedule, cfg.z0, cfg.horizon, cfg.checkpoints,
                          rngs, proxy_horizon=proxy_horizon, parallelism=parallelism)


def _summaries(res, es, cfg):
    proj = project_arrays(res.Z, res.Nbar, es, cfg.a)
    proxies = None
    if res.proxy_Z is not None:
        proxies = project_arrays(res.proxy_Z, res.proxy_Z, es).z_tilde
    out = []
    for r in range(res.Z.shape[0]):
        out.append(ReplicationSummary(
            index=r,
            seed=f"{cfg.master_seed}:{r}",
            checkpoints=list(res.checkpoints),
            Z=res.Z[r], Nbar=res.Nbar[r],
            z_tilde=proj.z_tilde[r], n_tilde=proj.n_tilde[r],
            z_hat=proj.z_hat[r], n_hat=proj.n_hat[r],
            a_weighted=None if proj.a_weighted is None else proj.a_weighted[r],
            z_infty_proxy=None if proxies is None else float(proxies[r]),
        ))
    return out


def run_replications(cfg: ExperimentConfig, parallelism: int = 1, network=None):
    """Simulate ``cfg.replications`` independent runs; one summary per run."""
    network = cfg.network if network is None else network
    es = eigenstructure(network)
    res = _simulate(network, cfg, parallelism, cfg.proxy_horizon)
    return _summaries(res, es, cfg)


def sync_gaps(summaries, es=None):
    """``max_j |N_{n,j} - N-tilde_n|`` per replication (rows) and checkpoint (columns)."""
    return np.array([np.max(np.abs(s.Nbar - s.n_tilde[:, None]), axis=1) for s in summaries])


@dataclass
class CltReport:
    n: int
    mode: str
    empirical: np.ndarray
    target: np.ndarray
    frobenius_rel_error: float
    z_scores: np.ndarray
    included: int
    excluded: int
    vectors: np.ndarray = field(repr=False)
    included_mask: np.ndarray = field(repr=False)


def standardized_vectors(summaries, cov: AsymptoticCovariance, n: int, mode: str):
    """Per-replication standardized vectors and an inclusion mask."""
    rate = float(cov.rate(n))
    k = summaries[0].at(n)
    vecs = []
    mask = []
    for s in summaries:
        if mode == "full":
            p = s.z_infty_proxy
            if p is None:
                raise ValueError("full-mode CLT check needs a Z_inf proxy")
            ok = PROXY_BAND[0] <= p <= PROXY_BAND[1]
            v = np.concatenate([s.Z[k] - p, s.Nbar[k] - p])
        else:
            p = s.n_tilde[k]
            ok = PROXY_BAND[0] <= p <= PROXY_BAND[1]
            v = np.concatenate([s.z_hat[k], s.n_hat[k]])
        mask.append(ok)
        vecs.append(rate * v / math.sqrt(p * (1.0 - p)) if ok else np.full(v.shape, np.nan))
    return np.array(vecs), np.array(mask)


def _entry_z_scores(emp, target, count):
    d = np.diag(target)
    se = np.sqrt((np.outer(d, d) + target ** 2) / count)
    de = np.diag(emp)
    se_emp = np.sqrt((np.outer(de, de) + emp ** 2) / count)
    se = np.where(se > 0, se, se_emp)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (emp - target) / se
    return np.where(se > 0, z, 0.0)


def clt_covariance_check(summaries, cov: AsymptoticCovariance, n: int,
                         mode: Optional[str] = None) -> CltReport:
    """Compare the empirical covariance of standardized vectors with ``cov.sigma``.

    ``mode="full"`` standardizes ``(Z_n - p 1, N_n - p 1)`` with the proxy
    ``p``; ``mode="hat"`` standardizes ``(Z-hat_n, N-hat_n)`` with
    ``N-tilde_n`` and must be paired with a covariance assembled with
    ``hat=True``.  The default is full for gamma < 1 and N = 1, hat otherwise.
    """
    if len(summaries) < 500:
        raise ValueError("the covariance check needs at least 500 replications")
    tag = cov.regime.tag
    if mode is None:
        mode = "full" if tag in (RegimeTag.GAMMA_LESS_ONE, RegimeTag.GAMMA_ONE_SCALAR) else "hat"
    vecs, mask = standardized_vectors(summaries, cov, n, mode)
    excluded = int((~mask).sum())
    if excluded > MAX_EXCLUDED_FRACTION * len(summaries):
        raise ProxyDegenerate(f"{excluded} of {len(summaries)} replications have a degenerate proxy")
    good = vecs[mask]
    emp = np.cov(good, rowvar=False)
    target = cov.sigma
    rel = float(np.linalg.norm(emp - target) / np.linalg.norm(target))
    return CltReport(n, mode, emp, target, rel, _entry_z_scores(emp, target, good.shape[0]),
                     int(mask.sum()), excluded, vecs, mask)


@dataclass
class RateReport:
    estimate: float
    se: float
    included: int
    excluded: int
    n: int
    outcomes: np.ndarray = field(repr=False)


def _binomial(outcomes, included, excluded, n):
    good = outcomes[included]
    m = good.size
    est = float(good.mean()) if m else float("nan")
    se = math.sqrt(est * (1.0 - est) / m) if m else float("nan")
    return RateReport(est, se, int(m), int(excluded), n, outcomes)


def coverage_from_summaries(summaries, cfg: ExperimentConfig, es, n: Optional[int] = None):
    """Fraction of replications whose interval at ``n`` covers the proxy."""
    n = cfg.horizon if n is None else n
    regime = classify_regime(cfg.gamma, cfg.c, es, cfg.eq_tol)
    k = summaries[0].at(n)
    hits = np.zeros(len(summaries), dtype=bool)
    usable = np.zeros(len(summaries), dtype=bool)
    intervals = []
    for i, s in enumerate(summaries):
        if cfg.basis == "ZTilde":
            ci = ci_from_ztilde(float(np.clip(s.z_tilde[k], 0, 1)), n, cfg.gamma, cfg.c, es, cfg.theta, cfg.eq_tol)
        else:
            ci = ci_from_ntilde(s.Nbar[k], n, regime, es, cfg.theta, a=cfg.a, eq_tol=cfg.eq_tol)
        intervals.append(ci)
        usable[i] = not ci.degenerate
        hits[i] = ci.contains(s.z_infty_proxy)
    report = _binomial(hits, usable, int((~usable).sum()), n)
    return report, intervals


def ci_coverage(cfg: ExperimentConfig, parallelism: int = 1, summaries=None):
    if cfg.kind != "ci_coverage":
        raise ValueError("configuration is not a ci_coverage experiment")
    es = eigenstructure(cfg.network)
    if summaries is None:
        summaries = run_replications(cfg, parallelism)
    return coverage_from_summaries(summaries, cfg, es)[0]


def test_size_power(cfg: ExperimentConfig, alpha0: float, alpha_true: float,
                    parallelism: int = 1, alternative: str = "greater"):
    """Rejection rate of the mean-field test of ``alpha0`` when the truth is ``alpha_true``."""
    report, _ = _test_runs(cfg, alpha0, alpha_true, parallelism, alternative)
    return report


test_size_power.__test__ = False


def _test_runs(cfg, alpha0, alpha_true, parallelism, alternative="greater"):
    c = cfg.c
    if cfg.gamma != 1.0 or 2 * c * alpha0 < 1 - cfg.eq_tol:
        raise WrongRegime("the mean-field test needs gamma = 1 and 2 c alpha0 >= 1")
    size = cfg.network.n_vertices
    network = mean_field_network(size, alpha_true)
    res = _simulate(network, cfg, parallelism, None)
    n = cfg.horizon
    k = res.checkpoints.index(n)
    rejects = np.zeros(res.Z.shape[0], dtype=bool)
    usable = np.ones(res.Z.shape[0], dtype=bool)
    reports = []
    for r in range(res.Z.shape[0]):
        try:
            rep = mean_field_test(res.Nbar[r, k], n, alpha0, c, cfg.theta,
                                  alternative=alternative, alpha=alpha_true, eq_tol=cfg.eq_tol)
        except DegenerateState:
            usable[r] = False
            reports.append(None)
            continue
        rejects[r] = rep.reject
        reports.append(rep)
    return _binomial(rejects, usable, int((~usable).sum()), n), reports


# ---------------------------------------------------------------- reports


@dataclass
class ExperimentResult:
    kind: str
    header: list
    rows: list
    summary: dict


def _base_rows(summaries, n):
    k = summaries[0].at(n)
    return [[s.index, n, s.z_tilde[k], s.n_tilde[k]] for s in summaries]


def run_experiment(cfg: ExperimentConfig, parallelism: int = 1) -> ExperimentResult:
    """Run ``cfg.kind`` and lay the outcome out as CSV rows plus a summary dict."""
    kind = cfg.kind
    es = eigenstructure(cfg.network)
    base = ["row_type", "replication", "n", "z_tilde", "n_tilde"]
    if kind == "synchronization":
        summaries = run_replications(cfg, parallelism)
        gaps = sync_gaps(summaries)
        header = base + ["sync_gap", "median_sync_gap", "fraction_below_0.05"]
        rows = []
        for i, n in enumerate(cfg.checkpoints):
            for row, g in zip(_base_rows(summaries, n), gaps[:, i]):
                rows.append(["replication", *row, g, None, None])
        summary = {}
        for i, n in enumerate(cfg.checkpoints):
            med = float(np.median(gaps[:, i]))
            frac = float(np.mean(gaps[:, i] < SYNC_THRESHOLD))
            rows.append(["summary", None, n, None, None, None, med, frac])
            summary[n] = {"median_sync_gap": med, "fraction_below_0.05": frac}
        return ExperimentResult(kind, header, rows, summary)

    if kind == "clt_covariance":
        summaries = run_replications(cfg, parallelism)
        regime = classify_regime(cfg.gamma, cfg.c, es, cfg.eq_tol)
        mode = cfg.clt_mode or ("full" if regime.tag in (RegimeTag.GAMMA_LESS_ONE, RegimeTag.GAMMA_ONE_SCALAR) else "hat")
        cov = assemble(regime, regime.gamma, cfg.c, es, cfg.eq_tol,
                       strict_rate_condition=cfg.schedule.strict_rate_condition, hat=(mode == "hat"))
        n = cfg.horizon
        rep = clt_covariance_check(summaries, cov, n, mode)
        dim = rep.vectors.shape[1]
        header = base + ["z_infty_proxy", "included"] + [f"xi_{i + 1}" for i in range(dim)] + [
            "frobenius_rel_error", "max_abs_z_score", "n_included", "n_excluded"]
        rows = []
        for row, s, v, ok in zip(_base_rows(summaries, n), summaries, rep.vectors, rep.included_mask):
            rows.append(["replication", *row, s.z_infty_proxy, bool(ok),
                         *(v if ok else [None] * dim), None, None, None, None])
        maxz = float(np.max(np.abs(rep.z_scores)))
        rows.append(["summary", None, n, None, None, None, None, *([None] * dim),
                     rep.frobenius_rel_error, maxz, rep.included, rep.excluded])
        summary = {"regime": str(regime.tag), "mode": mode, "frobenius_rel_error": rep.frobenius_rel_error,
                   "max_abs_z_score": maxz, "included": rep.included, "excluded": rep.excluded}
        return ExperimentResult(kind, header, rows, summary)

    if kind == "ci_coverage":
        summaries = run_replications(cfg, parallelism)
        n = cfg.horizon
        rep, intervals = coverage_from_summaries(summaries, cfg, es, n)
        header = base + ["z_infty_proxy", "center", "lower", "upper", "covered", "degenerate",
                         "coverage", "binomial_se", "n_included", "n_excluded"]
        rows = []
        for row, s, ci, hit in zip(_base_rows(summaries, n), summaries, intervals, rep.outcomes):
            rows.append(["replication", *row, s.z_infty_proxy, ci.center, ci.lower, ci.upper,
                         bool(hit), ci.degenerate, None, None, None, None])
        rows.append(["summary", None, n, None, None, None, None, None, None, None, None,
                     rep.estimate, rep.se, rep.included, rep.excluded])
        summary = {"coverage": rep.estimate, "binomial_se": rep.se,
                   "included": rep.included, "excluded": rep.excluded}
        return ExperimentResult(kind, header, rows, summary)

    # test_size / test_power
    alpha0 = cfg.alpha0
    if alpha0 is None:
        raise ValueError(f"{kind} needs alpha0")
    alpha_true = alpha0 if kind == "test_size" else cfg.alpha_true
    if alpha_true is None:
        raise ValueError("test_power needs alpha_true")
    rep, reports = _test_runs(cfg, alpha0, alpha_true, parallelism)
    n = cfg.horizon
    header = ["row_type", "replication", "n", "statistic", "p_value", "reject",
              "rejection_rate", "binomial_se", "n_included", "n_excluded"]
    rows = []
    for r, t in enumerate(reports):
        if t is None:
            rows.append(["replication", r, n, None, None, None, None, None, None, None])
        else:
            rows.append(["replication", r, n, t.statistic, t.p_value, t.reject, None, None, None, None])
    rows.append(["summary", None, n, None, None, None, rep.estimate, rep.se, rep.included, rep.excluded])
    summary = {"alpha0": alpha0, "alpha_true": alpha_true, "rejection_rate": rep.estimate,
               "binomial_se": rep.se, "included": rep.included, "excluded": rep.excluded}
    return ExperimentResult(kind, header, rows, summary)
