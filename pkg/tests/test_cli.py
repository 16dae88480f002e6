import textwrap

import numpy as np
import pytest

from urnsync import cli
from urnsync.config import loads, parse_text, validate
from urnsync.csvio import fmt, read_csv
from urnsync.errors import ConfigParse, ConfigSemantic

BASE = textwrap.dedent("""\
    network: {mean_field: {N: 4, alpha: 0.75}}
    schedule: {polya: {a: 1, b: 1}}
    horizon: 1000
    checkpoints: [100, 1000]
    seed: 7
    replications: 100
    theta: 0.05
    alpha0: 0.75
    experiment: ci_coverage
    """)


def write(tmp_path, text, name="run.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def run(args):
    return cli.main([str(a) for a in args])


def test_config_roundtrip():
    cfg = loads(BASE + "a: [0.4, 0.2, 0.2, 0.2]\nz0: [0.1, 0.2, 0.3, 0.4]\n")
    again = loads(cfg.dump())
    assert again == cfg
    assert again.to_dict() == cfg.to_dict()


def test_config_defaults():
    cfg = loads("network: {matrix: [[1]]}\nschedule: {power: {c: 1, gamma: 1}}\nhorizon: 50\n")
    assert cfg.checkpoints == [50]
    assert cfg.seed == 0 and cfg.replications == 1 and cfg.z0 == 0.5


@pytest.mark.parametrize("edit,key", [
    ("horizon: -3", "horizon"),
    ("theta: 1.5", "theta"),
    ("checkpoints: [1000, 100]", "checkpoints"),
    ("checkpoints: [5000]", "checkpoints[0]"),
    ("experiment: nonsense", "experiment"),
    ("z0: [0.5, 0.5]", "z0"),
    ("a: [0.5, 0.5, 0.5, 0.5]", "a"),
    ("bogus: 1", "bogus"),
    ("schedule: {polya: {a: 1}}", "schedule.polya.b"),
    ("schedule: {power: {c: 1, gamma: 0.3}}", "schedule.power.gamma"),
    ("network: {mean_field: {N: 4, alpha: 0}}", "network.mean_field.alpha"),
    ("network: {matrix: [[0.5, 0.2], [0.5, 0.2]]}", "network.matrix"),
    ("seed: 1.5", "seed"),
])
def test_semantic_errors_name_the_key(edit, key):
    lines = [ln for ln in BASE.splitlines() if not ln.startswith(edit.split(":")[0] + ":")]
    doc = "\n".join(lines + [edit]) + "\n"
    with pytest.raises(ConfigSemantic) as err:
        loads(doc)
    assert err.value.key == key
    assert key in str(err.value)


def test_parse_errors():
    with pytest.raises(ConfigParse):
        parse_text("network: [unclosed")
    with pytest.raises(ConfigParse):
        parse_text("- just\n- a list\n")
    with pytest.raises(ConfigSemantic):
        validate({"schedule": {"polya": {"a": 1, "b": 1}}, "horizon": 10})


def test_exit_codes(tmp_path):
    good = write(tmp_path, BASE)
    assert run(["mc", "--config", good, "--dry-run"]) == 0
    assert not (tmp_path / "out").exists()
    assert run(["mc", "--config", write(tmp_path, "x: [", "p.yaml")]) == cli.EXIT_PARSE
    assert run(["mc", "--config", write(tmp_path, BASE + "theta: 2\n", "s.yaml")]) == cli.EXIT_SEMANTIC
    assert run(["mc", "--config", tmp_path / "missing.yaml"]) == cli.EXIT_IO
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert run(["simulate", "--config", good, "--out", blocker / "sub"]) == cli.EXIT_IO
    crit = BASE.replace("alpha: 0.75", "alpha: 0.25")
    assert run(["ci", "--config", write(tmp_path, crit, "u.yaml"), "--out", tmp_path / "o"]) == cli.EXIT_MODEL
    with pytest.raises(SystemExit) as e:
        run(["frobnicate", "--config", good])
    assert e.value.code == 2


def test_analyze_mean_field_fast(tmp_path, capsys):
    cfg = write(tmp_path, "network: {mean_field: {N: 3, alpha: 0.75}}\n"
                          "schedule: {power: {c: 1, gamma: 1}}\nhorizon: 10\n")
    assert run(["analyze", "--config", cfg, "--out", tmp_path]) == 0
    _, header, rows = read_csv(tmp_path / "analysis.csv")
    table = dict(rows)
    assert table["regime"] == "GammaOneFast"
    assert complex(table["lambda_star"]) == pytest.approx(0.25)
    _, _, cov = read_csv(tmp_path / "covariance.csv")
    assert len(cov) == 36


def test_analyze_scalar(tmp_path):
    cfg = write(tmp_path, "network: {matrix: [[1]]}\nschedule: {power: {c: 1, gamma: 1}}\nhorizon: 10\n")
    assert run(["analyze", "--config", cfg, "--out", tmp_path]) == 0
    _, _, cov = read_csv(tmp_path / "covariance.csv")
    np.testing.assert_allclose([float(r[2]) for r in cov], [1, 1, 1, 1])


def test_analyze_unsupported(tmp_path, capsys):
    cfg = write(tmp_path, "network: {mean_field: {N: 3, alpha: 0.25}}\n"
                          "schedule: {polya: {a: 1, b: 1}}\nhorizon: 10\n")
    assert run(["analyze", "--config", cfg, "--out", tmp_path]) == 0
    assert "no central limit theorem" in capsys.readouterr().out
    assert not (tmp_path / "covariance.csv").exists()


@pytest.mark.parametrize("command,name", [
    ("simulate", "simulate.csv"), ("mc", "mc_ci_coverage.csv"), ("ci", "ci.csv"),
    ("test", "test.csv"), ("lemma-oracle", "lemma_oracle.csv"),
])
def test_outputs_are_deterministic(tmp_path, command, name):
    cfg = write(tmp_path, BASE + "lemma: {n: 20000}\n")
    assert run([command, "--config", cfg, "--out", tmp_path / "a"]) == 0
    assert run([command, "--config", cfg, "--out", tmp_path / "b", "--threads", 8]) == 0
    a = (tmp_path / "a" / name).read_bytes()
    assert a == (tmp_path / "b" / name).read_bytes()
    comment, header, rows = read_csv(tmp_path / "a" / name)
    assert comment.startswith("# urnsync 0.1.0 config_hash=")
    assert "seed=7" in comment
    assert rows and all(len(r) == len(header) for r in rows)


def test_seed_override_changes_output(tmp_path):
    cfg = write(tmp_path, BASE)
    run(["simulate", "--config", cfg, "--out", tmp_path / "a"])
    run(["simulate", "--config", cfg, "--out", tmp_path / "b", "--seed", 8])
    a = (tmp_path / "a" / "simulate.csv").read_text()
    b = (tmp_path / "b" / "simulate.csv").read_text()
    assert a != b and "seed=8" in b.splitlines()[0]


def test_lemma_oracle_columns(tmp_path):
    cfg = write(tmp_path, BASE + "lemma: {n: 10000, cases: [{e: 0, x: 0.75, y: 0.75}, {e: log, x: '0.5+1j', y: 0.5}]}\n")
    assert run(["lemma-oracle", "--config", cfg, "--out", tmp_path]) == 0
    _, header, rows = read_csv(tmp_path / "lemma_oracle.csv")
    assert header == ["e", "x", "y", "n", "finite_value", "closed_form", "relative_error"]
    assert rows[0][0] == "0" and rows[1][0] == "log"
    assert float(rows[0][6]) < 0.05


def test_fmt_round_trips():
    for v in (0.1, 1 / 3, 1e-300, -2.5e17):
        assert float(fmt(v)) == v
    assert fmt(True) == "1" and fmt(None) == ""
    assert complex(fmt(0.5 - 2j)) == 0.5 - 2j
