import json

import numpy as np
import pytest

from msmix import io
from msmix import prior_model as pm
from msmix.cli import run_cli
from msmix.errors import DataError, DomainError
from msmix.gibbs import ChainConfig


def write(path, text):
    path.write_text(text)
    return str(path)


def test_run_config_round_trip(tmp_path):
    cfg = io.RunConfig(pm.HyperParams(k=5, a_nu=3.0), ChainConfig(iterations=50, seed=4, adapt=True),
                       data="Y.csv", zeta_mu=0.2)
    cfg.save(tmp_path / "c.json")
    assert io.RunConfig.load(tmp_path / "c.json") == cfg
    with pytest.raises(DomainError):
        io.RunConfig.from_dict({"iterations": 10, "bogus": 1})


def test_load_dataset_examples(tmp_path):
    y = write(tmp_path / "Y.csv", "1,2\n3,4\n5,6\n")
    ds = io.load_dataset(y)
    assert (ds.n, ds.p, ds.d) == (3, 2, 1)
    np.testing.assert_array_equal(ds.X, np.ones((3, 1)))
    x = write(tmp_path / "X.csv", "a\n0.5\n-1\n2\n")
    ds = io.load_dataset(y, x)
    assert ds.d == 2 and np.all(ds.X[:, 0] == 1)
    x = write(tmp_path / "X1.csv", "1,0.5\n1,-1\n1,2\n")
    assert io.load_dataset(y, x).d == 2


def test_load_dataset_errors(tmp_path):
    y = write(tmp_path / "Y.csv", "1,2\n3,4\n5,6\n")
    x = write(tmp_path / "X.csv", "1\n2\n")
    with pytest.raises(DataError, match="3.*2"):
        io.load_dataset(y, x)
    bad = write(tmp_path / "bad.csv", "1,2\n3\n")
    with pytest.raises(DataError, match=":2:"):
        io.read_numeric_csv(bad)
    bad = write(tmp_path / "bad2.csv", "h1,h2\n1,2\n3,x\n")
    with pytest.raises(DataError, match=":3:"):
        io.read_numeric_csv(bad)
    with pytest.raises(DataError):
        io.read_numeric_csv(tmp_path / "missing.csv")


def dir_bytes(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def test_simulate_is_deterministic(tmp_path):
    for name in ("a", "b"):
        assert run_cli(["simulate", "--out", str(tmp_path / name), "--seed", "7", "--n", "30"]) == 0
    assert dir_bytes(tmp_path / "a") == dir_bytes(tmp_path / "b")
    truth = json.loads((tmp_path / "a" / "truth.json").read_text())
    assert len(truth["patterns"]) == 30


def test_exit_codes(tmp_path, capsys):
    assert run_cli(["fit", "--out", str(tmp_path)]) == 1
    assert "ERROR 1:" in capsys.readouterr().err
    assert run_cli(["nonsense"]) == 1
    (tmp_path / "chain.jsonl").write_text("")
    assert run_cli(["summarize", "--out", str(tmp_path)]) == 2
    assert "ERROR 2:" in capsys.readouterr().err
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"data": str(tmp_path / "nope.csv"), "iterations": 4, "burn_in": 1}))
    assert run_cli(["fit", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    cfg.write_text(json.dumps({"iterations": 4, "burn_in": 1, "vartheta": 2.0}))
    assert run_cli(["fit", "--config", str(cfg), "--data", "x.csv", "--out", str(tmp_path / "o")]) == 1


def _fit(tmp_path, out, iters, workers=1, resume=False):
    argv = ["fit", "--config", str(tmp_path / "cfg.json"), "--out", str(out), "--iters", str(iters),
            "--workers", str(workers)]
    return run_cli(argv + (["--resume"] if resume else []))


@pytest.fixture
def fit_setup(tmp_path):
    assert run_cli(["simulate", "--out", str(tmp_path / "sim"), "--seed", "3", "--n", "25", "--p", "3"]) == 0
    (tmp_path / "cfg.json").write_text(json.dumps({
        "data": str(tmp_path / "sim" / "Y.csv"), "covariates": str(tmp_path / "sim" / "X.csv"),
        "burn_in": 5, "seed": 11, "k": 3, "adapt": True, "alpha0": -0.5, "alpha1": -0.01}))
    return tmp_path


def test_fit_resume_matches_uninterrupted(fit_setup):
    tmp = fit_setup
    assert _fit(tmp, tmp / "full", 30) == 0
    assert _fit(tmp, tmp / "part", 18) == 0
    assert _fit(tmp, tmp / "part", 30, resume=True) == 0
    full = (tmp / "full" / "chain.jsonl").read_bytes()
    assert (tmp / "part" / "chain.jsonl").read_bytes() == full
    assert len(full.splitlines()) == 25
    meta = json.loads((tmp / "full" / "run-meta.json").read_text())
    assert meta["samples"] == 25


def test_fit_and_summarize_workers_independent(fit_setup):
    tmp = fit_setup
    assert _fit(tmp, tmp / "w1", 20, workers=1) == 0
    assert _fit(tmp, tmp / "w4", 20, workers=4) == 0
    assert dir_bytes(tmp / "w1") == dir_bytes(tmp / "w4")
    assert run_cli(["summarize", "--out", str(tmp / "w1")]) == 0
    psm = io.read_numeric_csv(tmp / "w1" / "cocluster.csv")
    assert psm.shape == (25, 25) and np.allclose(np.diag(psm), 1)
    tree = json.loads((tmp / "w1" / "tree.json").read_text())
    assert "clusters" in tree
    lines = (tmp / "w1" / "partition.csv").read_text().splitlines()
    assert lines[0] == "subject,pattern" and len(lines) == 26


def test_read_chain_drops_truncated_tail(fit_setup):
    tmp = fit_setup
    assert _fit(tmp, tmp / "c", 10) == 0
    path = tmp / "c" / "chain.jsonl"
    good = path.read_text()
    path.write_text(good + good.splitlines()[0][:40])
    assert len(io.read_chain(path)) == 5
    io.read_chain(path, repair=True)
    assert path.read_text() == good


def test_prior_check_writes_report(tmp_path):
    assert run_cli(["prior-check", "--out", str(tmp_path), "--draws", "1000", "--max-k", "12"]) == 0
    rep = json.loads((tmp_path / "prior-check.json").read_text())
    assert rep["normalization"]["max_residual"] <= 1e-12
    assert rep["truncation"]["found"]


def test_geweke_check_writes_table(tmp_path):
    assert run_cli(["geweke-check", "--out", str(tmp_path), "--iters", "600"]) == 0
    lines = (tmp_path / "geweke.csv").read_text().splitlines()
    assert lines[0].startswith("statistic,") and len(lines) >= 11
