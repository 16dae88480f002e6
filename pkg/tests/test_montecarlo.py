import numpy as np
import pytest

from urnsync.asymptotics import covariance_for
from urnsync.dynamics import RateSchedule
from urnsync.errors import ProxyDegenerate, WrongRegime
from urnsync.graph import eigenstructure, mean_field_network
from urnsync.montecarlo import (ExperimentConfig, clt_covariance_check, coverage_from_summaries,
                                run_experiment, run_replications, sync_gaps, test_size_power)


def mf_config(kind="synchronization", R=100, checkpoints=(1000,), **kw):
    kw.setdefault("network", mean_field_network(4, 0.75))
    kw.setdefault("schedule", RateSchedule.polya(1, 1))
    return ExperimentConfig(checkpoints=list(checkpoints), replications=R, kind=kind, **kw)


def test_config_validation():
    with pytest.raises(ValueError):
        mf_config("ci_coverage", R=50)
    with pytest.raises(ValueError):
        mf_config("ci_coverage", proxy_horizon=5000)
    with pytest.raises(ValueError):
        mf_config("bogus")
    assert mf_config("clt_covariance").proxy_horizon == 10000
    assert mf_config(R=2).replications == 2


def test_replications_deterministic_across_parallelism():
    cfg = mf_config(R=2, proxy_horizon=3000)
    a = run_replications(cfg, parallelism=1)
    b = run_replications(cfg, parallelism=8)
    for x, y in zip(a, b):
        assert x.seed == y.seed
        np.testing.assert_array_equal(x.Z, y.Z)
        np.testing.assert_array_equal(x.n_hat, y.n_hat)
        assert x.z_infty_proxy == y.z_infty_proxy


def test_proxies_inside_unit_interval():
    s = run_replications(mf_config(R=100, proxy_horizon=10000))
    proxies = np.array([r.z_infty_proxy for r in s])
    assert np.all((proxies > 0) & (proxies < 1))


def test_absorbing_start_gives_zero_proxies():
    s = run_replications(mf_config(R=5, z0=0.0, proxy_horizon=2000))
    assert all(r.z_infty_proxy == 0.0 for r in s)


def test_degenerate_proxies_raise():
    cfg = mf_config("clt_covariance", R=500, checkpoints=(100,), z0=0.0)
    s = run_replications(cfg)
    cov = covariance_for(1.0, 1.0, eigenstructure(cfg.network))
    with pytest.raises(ProxyDegenerate):
        clt_covariance_check(s, cov, 100, mode="full")


def test_clt_report_accounting_and_shuffle_control():
    cfg = mf_config("clt_covariance", R=600, checkpoints=(1000,))
    s = run_replications(cfg)
    es = eigenstructure(cfg.network)
    cov = covariance_for(1.0, 1.0, es, hat=True)
    rep = clt_covariance_check(s, cov, 1000)
    assert rep.mode == "hat"
    assert rep.included + rep.excluded == 600
    assert rep.frobenius_rel_error < 0.25
    # pairing Z-hat from one replication with N-hat from the next kills the cross block
    vec = rep.vectors[rep.included_mask]
    shuffled = np.hstack([vec[:, :4], np.roll(vec[:, 4:], 1, axis=0)])
    cross = np.cov(shuffled, rowvar=False)[:4, 4:]
    assert np.max(np.abs(cross)) < 0.25
    assert np.max(np.abs(rep.empirical[:4, 4:])) > 1.0


def test_gamma_less_one_difference_vector_shrinks():
    # the scaled difference decays like n^((gamma - 1) / 2), far too slowly to vanish
    # at desk scale; check the direction over two decades instead
    cps = (100, 10 ** 4)
    cfg = mf_config("clt_covariance", R=500, checkpoints=cps,
                    network=mean_field_network(3, 0.5), schedule=RateSchedule.power(0.5, 0.75))
    s = run_replications(cfg)
    cov = covariance_for(0.75, 0.5, eigenstructure(cfg.network))
    d = np.array([0, 0, 0, 1.0, -1.0, 0])
    ratios = []
    for n in cps:
        rep = clt_covariance_check(s, cov, n)
        assert rep.mode == "full"
        ratios.append(d @ rep.empirical @ d / rep.empirical[3, 3])
    assert ratios[1] < 0.75 * ratios[0]


def test_coverage_at_half_level():
    cfg = mf_config("ci_coverage", R=500, theta=0.5)
    s = run_replications(cfg)
    rep, intervals = coverage_from_summaries(s, cfg, eigenstructure(cfg.network))
    assert abs(rep.estimate - 0.5) < 3.5 * rep.se + 0.03
    assert rep.included + rep.excluded == 500
    assert len(intervals) == 500


def test_size_power_rejects_wrong_regime():
    cfg = mf_config("test_size", alpha0=0.25)
    with pytest.raises(WrongRegime):
        test_size_power(cfg, 0.25, 0.25)


def test_critical_null_collapses_under_fast_truth():
    cfg = mf_config("test_power", R=200, checkpoints=(10 ** 4,), alpha0=0.5, alpha_true=0.75)
    rep = test_size_power(cfg, 0.5, 0.75)
    assert rep.estimate < 0.02


def test_synchronization_decay_gamma_075():
    cfg = mf_config(R=100, checkpoints=(10 ** 3, 10 ** 4, 10 ** 5), network=mean_field_network(5, 0.5),
                    schedule=RateSchedule.power(1.0, 0.75))
    gaps = sync_gaps(run_replications(cfg))
    med = np.median(gaps, axis=0)
    assert med[0] >= med[1] >= med[2]


def test_rate_discrimination_gamma_075():
    cps = (10 ** 2, 10 ** 3, 10 ** 4)
    cfg = mf_config("clt_covariance", R=500, checkpoints=cps, network=mean_field_network(3, 0.5),
                    schedule=RateSchedule.power(1.0, 0.75), proxy_horizon=10 ** 5)
    s = run_replications(cfg)
    proxies = np.array([r.z_infty_proxy for r in s])
    dev = np.array([r.n_tilde for r in s]) - proxies[:, None]
    raw = dev.std(axis=0)
    scaled = raw * np.array(cps, dtype=float) ** 0.25
    assert raw[0] > raw[1] > raw[2]
    assert scaled.max() / scaled.min() < 2.0


def test_run_experiment_layout():
    res = run_experiment(mf_config(R=3, checkpoints=(100, 1000)))
    assert res.header[:3] == ["row_type", "replication", "n"]
    assert sum(r[0] == "summary" for r in res.rows) == 2
    assert all(len(r) == len(res.header) for r in res.rows)
    res = run_experiment(mf_config("test_size", R=100, checkpoints=(500,), alpha0=0.75))
    assert res.rows[-1][0] == "summary"
    assert res.summary["included"] + res.summary["excluded"] == 100
