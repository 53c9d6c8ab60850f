import json
import math

import numpy as np
import pytest

from mlvr.bench.cli import main
from mlvr.bench.reference import cached_reference, compute_reference
from mlvr.bench.runner import (
    ExperimentConfig,
    load_dataset,
    resolve_count,
    resolve_level_sizes,
    run_experiment,
    sweep,
)
from mlvr.data import SparseDataset, write_libsvm
from mlvr.errors import ConfigError
from mlvr.objective import LogisticObjective
from mlvr.synthetic import make_logistic
from mlvr.trace import CSV_HEADER, Monitor, Trace, parse_csv, read_csv

TOY_TEXT = "+1 1:0.5 3:2.0\n-1 2:1.0\n"


@pytest.fixture
def toy_file(tmp_path):
    path = tmp_path / "toy.txt"
    path.write_text(TOY_TEXT)
    return path


@pytest.fixture(scope="module")
def data_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "syn.txt"
    with open(path, "w") as fh:
        write_libsvm(make_logistic(120, 5, scale_span=20.0, seed=4), fh)
    return path


def dense_newton(ds, lam, iters=60):
    X, y = ds.features.toarray(), ds.labels
    n, d = X.shape
    w = np.zeros(d)
    for _ in range(iters):
        s = 1 / (1 + np.exp(y * (X @ w)))
        g = -(X.T @ (y * s)) / n + lam * w
        H = (X.T * (s * (1 - s))) @ X / n + lam * np.eye(d)
        w = w - np.linalg.solve(H, g)
    return w


class TestReference:
    def test_symmetric_toy(self):
        X = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1], [1, 0]], dtype=float)
        y = np.array([1, 1, -1, -1, -1], dtype=float)
        ref = compute_reference(LogisticObjective(SparseDataset.from_dense(X, y)))
        assert ref.reached_tol
        assert ref.w_star[0] > 0
        assert abs(ref.w_star[1]) < 1e-12

    def test_large_lambda(self, small):
        obj = LogisticObjective(small, lam=1e6)
        ref = compute_reference(obj)
        assert np.abs(ref.w_star).max() < 1e-5
        # F(w*) ~ log 2 - ||grad F(0)||^2 / (2 lam)
        g0 = obj.gradient(np.zeros(6))
        assert ref.f_star == pytest.approx(math.log(2) - g0 @ g0 / 2e6, abs=1e-10)

    @pytest.mark.parametrize("seed", range(5))
    def test_dense_newton_oracle(self, seed):
        rng = np.random.default_rng(seed)
        ds = SparseDataset.from_dense(rng.standard_normal((4, 2)), np.array([1.0, -1, 1, -1]))
        ref = compute_reference(LogisticObjective(ds))
        assert ref.grad_norm < 1e-12
        np.testing.assert_allclose(ref.w_star, dense_newton(ds, 0.25), atol=1e-8)

    def test_ill_conditioned_reaches_tolerance(self):
        ds = make_logistic(300, 20, scale_span=1e3, n_scaled=4, seed=0)
        assert compute_reference(LogisticObjective(ds)).reached_tol

    def test_needs_positive_lambda(self, small):
        with pytest.raises(ConfigError):
            compute_reference(LogisticObjective(small, lam=0.0))

    def test_cache_round_trip(self, small, tmp_path, monkeypatch):
        obj = LogisticObjective(small)
        first = cached_reference(obj, tmp_path)
        assert len(list(tmp_path.glob("*.json"))) == 1
        monkeypatch.setattr("mlvr.bench.reference.compute_reference", None)
        again = cached_reference(obj, tmp_path)
        assert again.f_star == first.f_star
        np.testing.assert_array_equal(again.w_star, first.w_star)


class TestTrace:
    def test_csv_round_trip(self):
        t = Trace(records=[(0.0, 0.6931471805599453), (1.1, 1e-10), (2.2, -3e-13)])
        text = t.to_csv()
        assert text.splitlines()[0] == CSV_HEADER
        assert parse_csv(text) == t.records
        assert "e" not in text.splitlines()[1]

    def test_bad_header(self):
        with pytest.raises(ValueError):
            parse_csv("a,b\n1,2\n")

    def test_monitor_drops_over_budget(self):
        from mlvr.objective import EvalCounter

        c = EvalCounter(10)
        mon = Monitor(lambda w: 1.0, c, budget=1.0)
        assert not mon.record(np.zeros(1))
        c.charge(15)
        assert mon.record(np.zeros(1))
        assert mon.trace.records == [(0.0, 1.0)] and mon.trace.status == "budget"


class TestRunner:
    @pytest.mark.parametrize(
        "token, n, expected",
        [(7, 10, 7), ("n", 10, 10), ("5n", 10, 50), ("0.5n", 10, 5), ("n/2", 10, 5), ("full", 9, 9)],
    )
    def test_resolve_count(self, token, n, expected):
        assert resolve_count(token, n) == expected

    @pytest.mark.parametrize("token", ["abc", "0", "0n"])
    def test_resolve_count_errors(self, token):
        with pytest.raises(ConfigError):
            resolve_count(token, 10)

    @pytest.mark.parametrize(
        "kw, expected",
        [
            ({"level_sizes": ["400", "800", "full"]}, [400, 800, 6000]),
            ({"level_sizes": ["400"], "levels": 3}, [400, 800, 6000]),
            ({"level_sizes": [400]}, [400, 6000]),
            ({"hessian_samples": 400, "levels": 2}, [400, 6000]),
            ({"level_sizes": ["n/4", "n/2"]}, [1500, 3000, 6000]),
        ],
    )
    def test_level_sizes(self, kw, expected):
        assert resolve_level_sizes(ExperimentConfig("x", **kw), 6000) == expected

    def test_level_sizes_missing(self):
        with pytest.raises(ConfigError):
            resolve_level_sizes(ExperimentConfig("x"), 100)

    def test_tol_reached(self, data_file, tmp_path):
        cfg = ExperimentConfig(str(data_file), level_sizes=[30], cache_dir=str(tmp_path))
        trace = run_experiment(cfg)
        assert trace.status == "converged"
        assert trace.records[-1][1] < 1e-9
        f_star = cached_reference(LogisticObjective(load_dataset(cfg)), tmp_path).f_star
        assert trace.records[0] == (0.0, math.log(2) - f_star)

    def test_budget_first(self, data_file, tmp_path):
        cfg = ExperimentConfig(str(data_file), method="sgd", step_size=0.01, budget=3.5,
                               cache_dir=str(tmp_path))
        trace = run_experiment(cfg)
        assert trace.status == "budget"
        assert trace.records[-1][0] <= 3.5

    @pytest.mark.parametrize("method", ["gd", "newton", "sgd", "svrg", "sarah", "ssn", "mlvr"])
    def test_byte_identical_csv(self, data_file, tmp_path, method):
        paths = []
        for k in range(2):
            out = tmp_path / f"{k}.csv"
            cfg = ExperimentConfig(str(data_file), method=method, step_size=0.05 if method in ("sgd", "svrg", "sarah") else None,
                                   hessian_samples=20, budget=8, seed=3, out=str(out), cache_dir=str(tmp_path))
            run_experiment(cfg)
            paths.append(out)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_divergence_recorded(self, data_file, tmp_path):
        out = tmp_path / "div.csv"
        cfg = ExperimentConfig(str(data_file), method="sgd", step_size=1e8, inner_iters=200,
                               budget=1e4, out=str(out), cache_dir=str(tmp_path))
        with np.errstate(all="ignore"):
            trace = run_experiment(cfg)
        assert trace.status == "diverged"
        assert read_csv(out) == trace.records

    def test_sweep(self, data_file, tmp_path):
        base = ExperimentConfig(str(data_file), level_sizes=[20], step_size=0.05, budget=5,
                                cache_dir=str(tmp_path))
        traces = sweep(base, ["svrg", "mlvr"], [0, 1], tmp_path / "out")
        names = sorted(p.name for p in (tmp_path / "out").iterdir())
        assert names == [f"syn.txt_{m}_seed{s}.csv" for m in ("mlvr", "svrg") for s in (0, 1)]
        digests = {(t.method, t.seed): t.config_digest for t in traces}
        assert digests["svrg", 0] == digests["svrg", 1]
        assert digests["svrg", 0] != digests["mlvr", 0]

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_mapping({"dataset": "x", "stepsize": 1})


class TestCli:
    def test_inspect_toy(self, toy_file, capsys):
        assert main(["inspect", "--dataset", str(toy_file)]) == 0
        out = capsys.readouterr().out
        assert "n         2" in out and "d         3" in out

    def test_run_and_exit_codes(self, data_file, tmp_path):
        common = ["--dataset", str(data_file), "--cache-dir", str(tmp_path)]
        out = tmp_path / "r.csv"
        assert main(["run", *common, "--method", "mlvr", "--level-sizes", "30,full", "--out", str(out)]) == 0
        assert read_csv(out)[-1][1] < 1e-9
        assert main(["run", *common, "--method", "svrg", "--step-size", "0.01",
                     "--inner-iters", "n", "--budget", "3"]) == 3

    @pytest.mark.parametrize(
        "argv",
        [
            ["run", "--method", "svrg", "--step-size", "0.1"],
            ["run", "--dataset", "{data}", "--method", "svrg"],
            ["run", "--dataset", "{data}", "--method", "mlvr"],
            ["run", "--dataset", "/nonexistent/file.txt", "--method", "gd"],
        ],
    )
    def test_usage_errors(self, data_file, tmp_path, argv, capsys):
        argv = [a.format(data=data_file) for a in argv] + ["--cache-dir", str(tmp_path)]
        assert main(argv) == 2
        assert "mlvr: error:" in capsys.readouterr().err

    def test_argparse_errors(self):
        with pytest.raises(SystemExit) as info:
            main(["run", "--method", "adam"])
        assert info.value.code == 2
        with pytest.raises(SystemExit):
            main(["run", "--bogus"])

    def test_config_file(self, data_file, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"dataset": str(data_file), "method": "svrg", "step-size": 0.05,
                                   "inner-iters": "n/2", "budget": 2}))
        assert main(["run", "--config", str(cfg), "--cache-dir", str(tmp_path), "--budget", "4"]) == 3
        # the flag overrides the file: 2 passes per epoch, so 4 is reached
        assert "after 4 effective" in capsys.readouterr().out

    def test_reference_command(self, data_file, tmp_path):
        out = tmp_path / "ref.json"
        assert main(["reference", "--dataset", str(data_file), "--cache-dir", str(tmp_path), "--out", str(out)]) == 0
        blob = json.loads(out.read_text())
        assert len(blob["w_star"]) == 5
