"""Command-line front end.

Usage::

    urnsync SUBCOMMAND --config run.yaml [--out DIR] [--seed U64] [--threads K] [--dry-run]

Subcommands and the CSV files they write into the output directory:

``analyze``
    ``analysis.csv`` (quantity, value), ``eigenvalues.csv`` (j, eigenvalue)
    and, when a CLT applies, ``covariance.csv`` (row, col, value) holding the
    2N x 2N matrix in the order (Z_1..Z_N, N_1..N_N).
``simulate``
    ``simulate.csv``: one row per (replication, checkpoint) with
    z_tilde, n_tilde, a_weighted, Z_1..Z_N, N_1..N_N.
``mc``
    ``mc_<experiment>.csv``: one row per replication plus summary rows.
``ci``
    ``ci.csv``: one interval per replication at the last checkpoint.
``test``
    ``test.csv``: the mean-field chi-square test per replication.
``lemma-oracle``
    ``lemma_oracle.csv`` with columns e, x, y, n, finite_value,
    closed_form, relative_error.

Every CSV starts with a ``#`` line carrying the tool version, the config
hash and the master seed.

Exit codes: 0 success, 2 usage, 3 config parse error, 4 config semantic
error, 5 I/O failure, 6 model error (graph, dynamics, asymptotics, lemma,
inference or Monte Carlo).
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import assemble
from .config import DEFAULT_LEMMA_CASES, RunConfig, load_config
from .csvio import config_hash, write_csv
from .dynamics import project_arrays, replication_rng, simulate_batch
from .errors import ConfigParse, ConfigSemantic, DegenerateState, IoFailure, UrnsyncError
from .graph import RegimeTag, classify_regime, eigenstructure
from .inference import ci_from_ntilde, ci_from_ztilde, mean_field_test
from .limitlemmas import limit_sum, limit_sum_log, relative_error
from .montecarlo import run_experiment

EXIT_OK = 0
EXIT_PARSE = 3
EXIT_SEMANTIC = 4
EXIT_IO = 5
EXIT_MODEL = 6

COMMANDS = ("analyze", "simulate", "mc", "ci", "test", "lemma-oracle")


def _meta(cfg: RunConfig):
    return {"config_hash": config_hash(cfg.to_dict()), "seed": cfg.seed}


def _write(out, name, header, rows, cfg):
    path = write_csv(Path(out) / name, header, rows, _meta(cfg))
    print(f"wrote {path}")
    return path


def _regime(cfg, es):
    sched = cfg.build_schedule()
    return sched, classify_regime(sched.gamma, sched.c, es, cfg.eq_tol)


def cmd_analyze(cfg: RunConfig, out, threads=1):
    es = eigenstructure(cfg.build_network())
    sched, regime = _regime(cfg, es)
    rows = [["n_vertices", es.n], ["gamma", sched.gamma], ["c", sched.c],
            ["v1_norm_sq", es.v1_norm_sq], ["lambda_star", es.lambda_star],
            ["regime", str(regime.tag)], ["rate_label", regime.rate_label]]
    print(f"eigenvalues: {', '.join(f'{complex(v):.6g}' for v in es.eigenvalues)}")
    print(f"|v1|^2 = {es.v1_norm_sq:.10g}")
    if es.lambda_star is not None:
        print(f"lambda* = {complex(es.lambda_star):.10g}")
    print(f"regime: {regime.tag}  rate: {regime.rate_label}")
    _write(out, "analysis.csv", ["quantity", "value"], rows, cfg)
    _write(out, "eigenvalues.csv", ["j", "eigenvalue"],
           [[j + 1, complex(v)] for j, v in enumerate(es.eigenvalues)], cfg)
    if regime.tag is RegimeTag.UNSUPPORTED:
        print("no central limit theorem is available: Re(lambda*) exceeds 1 - 1/(2c); "
              "no covariance written")
        return EXIT_OK
    cov = assemble(regime, sched.gamma, sched.c, es, cfg.eq_tol,
                   strict_rate_condition=sched.strict_rate_condition)
    np.set_printoptions(precision=6, suppress=True)
    print("Sigma_ZZ =\n", cov.zz, "\nSigma_ZN =\n", cov.zn, "\nSigma_NN =\n", cov.nn, sep="")
    size = cov.sigma.shape[0]
    _write(out, "covariance.csv", ["row", "col", "value"],
           [[i, j, cov.sigma[i, j]] for i in range(size) for j in range(size)], cfg)
    return EXIT_OK


def _batch(cfg, threads):
    net = cfg.build_network()
    rngs = [replication_rng(cfg.seed, r) for r in range(cfg.replications)]
    res = simulate_batch(net, cfg.build_schedule(), cfg.z0, cfg.horizon, cfg.checkpoints,
                         rngs, parallelism=threads)
    return net, res


def cmd_simulate(cfg: RunConfig, out, threads=1):
    net, res = _batch(cfg, threads)
    es = eigenstructure(net)
    proj = project_arrays(res.Z, res.Nbar, es, cfg.a)
    size = net.n_vertices
    header = (["replication", "n", "z_tilde", "n_tilde", "a_weighted"]
              + [f"Z_{j + 1}" for j in range(size)] + [f"N_{j + 1}" for j in range(size)])
    rows = []
    for r in range(res.Z.shape[0]):
        for k, n in enumerate(res.checkpoints):
            aw = None if proj.a_weighted is None else proj.a_weighted[r, k]
            rows.append([r, n, proj.z_tilde[r, k], proj.n_tilde[r, k], aw,
                         *res.Z[r, k], *res.Nbar[r, k]])
    _write(out, "simulate.csv", header, rows, cfg)
    return EXIT_OK


def cmd_mc(cfg: RunConfig, out, threads=1):
    result = run_experiment(cfg.experiment_config(), parallelism=threads)
    _write(out, f"mc_{result.kind}.csv", result.header, result.rows, cfg)
    for key, value in result.summary.items():
        print(f"{key}: {value}")
    return EXIT_OK


def cmd_ci(cfg: RunConfig, out, threads=1):
    net, res = _batch(cfg, threads)
    es = eigenstructure(net)
    sched, regime = _regime(cfg, es)
    n = res.checkpoints[-1]
    proj = project_arrays(res.Z, res.Nbar, es)
    rows = []
    for r in range(res.Z.shape[0]):
        if cfg.basis == "ZTilde":
            ci = ci_from_ztilde(float(np.clip(proj.z_tilde[r, -1], 0, 1)), n, sched.gamma,
                                sched.c, es, cfg.theta, cfg.eq_tol)
        else:
            ci = ci_from_ntilde(res.Nbar[r, -1], n, regime, es, cfg.theta, a=cfg.a, eq_tol=cfg.eq_tol)
        rows.append([r, n, ci.basis, str(regime.tag), ci.level, ci.center, ci.half_width,
                     ci.lower, ci.upper, ci.clipped, ci.degenerate])
    header = ["replication", "n", "basis", "regime", "level", "center", "half_width",
              "lower", "upper", "clipped", "degenerate"]
    _write(out, "ci.csv", header, rows, cfg)
    return EXIT_OK


def cmd_test(cfg: RunConfig, out, threads=1):
    if cfg.alpha0 is None:
        raise ConfigSemantic("required for the test command", "alpha0", None)
    if "mean_field" not in cfg.network:
        raise ConfigSemantic("the test command needs a mean_field network", "network", cfg.network)
    sched = cfg.build_schedule()
    if sched.gamma != 1.0:
        raise ConfigSemantic("the test needs a gamma = 1 schedule", "schedule", cfg.schedule)
    _, res = _batch(cfg, threads)
    n = res.checkpoints[-1]
    rows = []
    for r in range(res.Z.shape[0]):
        try:
            rep = mean_field_test(res.Nbar[r, -1], n, cfg.alpha0, sched.c, cfg.theta, eq_tol=cfg.eq_tol)
        except DegenerateState:
            rows.append([r, n, cfg.alpha0, None, None, None, None])
            continue
        rows.append([r, n, cfg.alpha0, rep.statistic, rep.dof, rep.p_value, rep.reject])
    header = ["replication", "n", "alpha0", "statistic", "dof", "p_value", "reject"]
    _write(out, "test.csv", header, rows, cfg)
    return EXIT_OK


def _lemma_value(x):
    return complex(str(x).replace(" ", "")) if isinstance(x, str) else complex(x)


def cmd_lemma_oracle(cfg: RunConfig, out, threads=1):
    sched = cfg.build_schedule()
    spec = cfg.lemma or {}
    n = spec.get("n", 10 ** 6)
    m0 = spec.get("m0")
    rows = []
    for case in spec.get("cases", DEFAULT_LEMMA_CASES):
        x, y = _lemma_value(case["x"]), _lemma_value(case["y"])
        if case["e"] == "log":
            finite, closed = limit_sum_log(x, y, sched, n, m0, cfg.eq_tol)
        else:
            finite, closed = limit_sum(int(case["e"]), x, y, sched, n, m0)
        err = abs(finite - closed) if closed == 0 else relative_error(finite, closed)
        rows.append([case["e"], x, y, n, finite, closed, err])
        print(f"e={case['e']} x={x} y={y}: finite {finite:.6g} closed {closed:.6g}")
    header = ["e", "x", "y", "n", "finite_value", "closed_form", "relative_error"]
    _write(out, "lemma_oracle.csv", header, rows, cfg)
    return EXIT_OK


HANDLERS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "mc": cmd_mc,
    "ci": cmd_ci,
    "test": cmd_test,
    "lemma-oracle": cmd_lemma_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="urnsync", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"urnsync {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--out", help="output directory (overrides output_path)")
        p.add_argument("--seed", type=int, help="master seed (overrides seed)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for replications")
        p.add_argument("--dry-run", action="store_true", help="validate the config and exit")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigSemantic("must lie in [0, 2^64)", "--seed", args.seed)
            cfg.seed = args.seed
        if args.threads < 1:
            raise ConfigSemantic("must be positive", "--threads", args.threads)
        if args.command == "mc":
            cfg.experiment_config()
        if args.dry_run:
            print("config OK")
            return EXIT_OK
        out = args.out or cfg.output_path
        return HANDLERS[args.command](cfg, out, args.threads)
    except ConfigParse as exc:
        print(f"config parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigSemantic as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SEMANTIC
    except IoFailure as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except UrnsyncError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
