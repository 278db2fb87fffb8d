import json
import math

import numpy as np
import pytest

from fibflow.algorithms import TrainConfig
from fibflow.core import RkhsFunction, evaluate
from fibflow.harness import (
    ConfigError,
    DataSpec,
    ExperimentConfig,
    bound_report_from_artifacts,
    dataset_to_csv,
    generate_data,
    read_trace_csv,
    run_experiment,
    sample_from_spec,
)
from fibflow.learners import LossSpec
from fibflow.recursion import RecursionSchedule
from fibflow.reference import (
    five_method_grid,
    kernel_base,
    sinusoid_data,
    sinusoid_experiment,
)
from fibflow.spectral import StepSchedule


def tiny_experiment(tmp_out=None, replications=1, T=4):
    methods = (
        TrainConfig(
            name="fib",
            variant="fibonacci",
            loss=LossSpec("squared"),
            base=kernel_base(),
            iterations=T,
            schedule=RecursionSchedule.fibonacci(
                StepSchedule(kind="golden", eta0=0.8, length=T)
            ),
        ),
        TrainConfig(
            name="static",
            variant="static-weights",
            loss=LossSpec("squared"),
            base=kernel_base(),
            iterations=T,
            static_weights=tuple(1.0 for _ in range(T)),
        ),
    )
    return ExperimentConfig(
        data=DataSpec(target="sinusoid", n=80, d=1, noise=0.1, seed=5),
        methods=methods,
        replications=replications,
        out_dir=tmp_out,
    )


class TestGenerateData:
    def test_noiseless_sinusoid_exact(self):
        spec = DataSpec(target="sinusoid", n=50, d=1, noise=0.0, seed=1)
        train, test = generate_data(spec)
        np.testing.assert_array_equal(train.targets, np.sin(2 * np.pi * train.inputs[:, 0]))
        np.testing.assert_array_equal(test.targets, np.sin(2 * np.pi * test.inputs[:, 0]))

    def test_same_seed_bit_identical(self):
        spec = DataSpec(target="friedman-like", n=40, d=5, noise=0.5, seed=9)
        a_train, a_test = generate_data(spec)
        b_train, b_test = generate_data(spec)
        assert np.array_equal(a_train.inputs, b_train.inputs)
        assert np.array_equal(a_train.targets, b_train.targets)
        assert np.array_equal(a_test.targets, b_test.targets)

    def test_split_sizes(self):
        spec = DataSpec(target="step", n=100, d=2, noise=0.0, seed=3, train_fraction=0.6)
        train, test = generate_data(spec)
        assert (train.n, test.n) == (60, 40)

    def test_noise_variance_matches(self):
        spec = DataSpec(target="sinusoid", n=100_000, d=1, noise=0.3, seed=11)
        train, test = generate_data(spec)
        resid = np.concatenate(
            [
                train.targets - np.sin(2 * np.pi * train.inputs[:, 0]),
                test.targets - np.sin(2 * np.pi * test.inputs[:, 0]),
            ]
        )
        assert abs(resid.var() - 0.09) <= 0.03 * 0.09

    def test_friedman_needs_five_dims(self):
        with pytest.raises(ConfigError):
            generate_data(DataSpec(target="friedman-like", n=10, d=3, noise=0.0, seed=0))

    def test_unknown_target(self):
        with pytest.raises(ConfigError):
            DataSpec(target="mystery", n=10, d=1, noise=0.0, seed=0)

    def test_additive_smooth_value(self):
        spec = DataSpec(target="additive-smooth", n=10, d=3, noise=0.0, seed=2)
        train, _ = generate_data(spec)
        X = train.inputs
        expect = (
            np.sin(2 * np.pi * X[:, 0])
            + np.sin(2 * np.pi * X[:, 1]) / 2
            + np.sin(2 * np.pi * X[:, 2]) / 3
        )
        np.testing.assert_allclose(train.targets, expect, atol=1e-12)


class TestConfigParsing:
    def test_round_trip(self):
        config = tiny_experiment()
        again = ExperimentConfig.from_dict(config.to_dict())
        assert again == config

    def test_unknown_experiment_key(self):
        d = tiny_experiment().to_dict()
        d["workers"] = 4
        with pytest.raises(ConfigError, match="workers"):
            ExperimentConfig.from_dict(d)

    def test_unknown_data_key(self):
        d = tiny_experiment().to_dict()
        d["data"]["sigma"] = 0.1
        with pytest.raises(ConfigError, match="sigma"):
            ExperimentConfig.from_dict(d)

    def test_unknown_nested_method_key(self):
        d = tiny_experiment().to_dict()
        d["methods"][0]["momentum"] = 0.9
        with pytest.raises(ConfigError, match="momentum"):
            ExperimentConfig.from_dict(d)

    def test_unknown_kernel_key(self):
        d = tiny_experiment().to_dict()
        d["methods"][0]["base"]["kernel"]["degree"] = 3
        with pytest.raises(ConfigError, match="degree"):
            ExperimentConfig.from_dict(d)

    def test_duplicate_method_names(self):
        config = tiny_experiment()
        with pytest.raises(ConfigError, match="unique"):
            ExperimentConfig(
                data=config.data, methods=(config.methods[0], config.methods[0])
            )

    def test_from_json_file(self, tmp_path):
        path = tmp_path / "exp.json"
        path.write_text(json.dumps(tiny_experiment().to_dict()), encoding="utf-8")
        assert ExperimentConfig.from_json_file(path) == tiny_experiment()

    def test_bad_json(self, tmp_path):
        path = tmp_path / "exp.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json_file(path)


class TestRunExperiment:
    def test_artifacts_and_summary(self, tmp_path):
        out = tmp_path / "run"
        summary = run_experiment(tiny_experiment(), out_dir=out)
        assert summary.ok
        assert len(summary.cells) == 2
        for cell in summary.cells:
            assert (out / f"{cell.method}_rep0_trace.csv").exists()
            assert (out / f"{cell.method}_rep0_model.json").exists()
            assert (out / f"{cell.method}_rep0_bounds.json").exists()
            assert (out / f"{cell.method}_rep0_config.json").exists()
        assert summary.summary_csv.exists()
        assert summary.summary_json.exists()

    def test_summary_final_risk_equals_trace_exactly(self, tmp_path):
        out = tmp_path / "run"
        summary = run_experiment(tiny_experiment(), out_dir=out)
        text = summary.summary_csv.read_text(encoding="utf-8").strip().splitlines()
        header = text[0].split(",")
        for line, cell in zip(text[1:], summary.cells):
            row = dict(zip(header, line.split(",")))
            trace = read_trace_csv(cell.trace_path)
            assert float(row["final_test_risk"]) == trace[-1]["test_risk"]
            assert float(row["final_train_risk"]) == trace[-1]["train_risk"]
            assert float(row["final_test_rmse"]) == math.sqrt(trace[-1]["test_risk"])

    def test_rerun_byte_identical(self, tmp_path):
        a = run_experiment(tiny_experiment(), out_dir=tmp_path / "a")
        b = run_experiment(tiny_experiment(), out_dir=tmp_path / "b")
        for ca, cb in zip(a.cells, b.cells):
            ta = open(ca.trace_path, "rb").read()
            tb = open(cb.trace_path, "rb").read()
            assert ta == tb
        sa = a.summary_csv.read_text(encoding="utf-8").replace(str(tmp_path / "a"), "@")
        sb = b.summary_csv.read_text(encoding="utf-8").replace(str(tmp_path / "b"), "@")
        assert sa == sb

    def test_threaded_matches_serial(self, tmp_path):
        a = run_experiment(tiny_experiment(replications=2), out_dir=tmp_path / "s", threads=1)
        b = run_experiment(tiny_experiment(replications=2), out_dir=tmp_path / "p", threads=4)
        for ca, cb in zip(a.cells, b.cells):
            assert open(ca.trace_path).read() == open(cb.trace_path).read()

    def test_model_reload_reproduces_predictions(self, tmp_path):
        out = tmp_path / "run"
        summary = run_experiment(tiny_experiment(), out_dir=out)
        cell = summary.cells[0]
        model = RkhsFunction.load(cell.model_path)
        spec = sinusoid_data()
        probe = sample_from_spec(spec, 25, seed=7)
        cfg_doc = json.loads((out / f"{cell.method}_rep0_config.json").read_text())
        cfg = TrainConfig.from_dict(cfg_doc["train"])
        from fibflow.algorithms import train
        from dataclasses import replace as dreplace
        from fibflow.harness import derive_seed

        data_spec = DataSpec.from_dict(cfg_doc["data"])
        regen = dreplace(data_spec, seed=derive_seed(data_spec.seed, 0))
        tr, te = generate_data(regen)
        ens = train(cfg, tr, test=te)
        np.testing.assert_allclose(
            evaluate(model, probe.inputs), evaluate(ens.predictor, probe.inputs), atol=1e-12
        )

    def test_cell_failure_recorded_but_run_continues(self, tmp_path, monkeypatch):
        import fibflow.harness as hz

        real_train = hz.train
        calls = {"n": 0}

        def flaky(config, dataset, test=None):
            calls["n"] += 1
            if config.name == "fib":
                raise RuntimeError("synthetic failure")
            return real_train(config, dataset, test)

        monkeypatch.setattr(hz, "train", flaky)
        summary = run_experiment(tiny_experiment(), out_dir=tmp_path / "run")
        assert not summary.ok
        errors = {c.method: c.error for c in summary.cells}
        assert "synthetic failure" in errors["fib"]
        assert errors["static"] == ""

    def test_five_method_reference_grid_completes(self, tmp_path):
        config = ExperimentConfig(
            data=DataSpec(target="sinusoid", n=60, d=1, noise=0.1, seed=5),
            methods=five_method_grid(T=3, rb_draws=2),
            replications=2,
        )
        summary = run_experiment(config, out_dir=tmp_path / "run")
        assert summary.ok
        assert len(summary.cells) == 10  # 5 methods x 2 replications

    def test_iterations_to_threshold_populated(self, tmp_path):
        config = sinusoid_experiment(T=8)
        summary = run_experiment(config, out_dir=tmp_path / "run")
        fib = next(c for c in summary.cells if c.method == "fibonacci-golden")
        assert fib.iterations_to_threshold is not None
        assert 1 <= fib.iterations_to_threshold <= 8


class TestBoundRecompute:
    def test_matches_in_run_report(self, tmp_path):
        out = tmp_path / "run"
        summary = run_experiment(tiny_experiment(), out_dir=out)
        for cell in summary.cells:
            config_path = out / f"{cell.method}_rep0_config.json"
            report = bound_report_from_artifacts(cell.trace_path, config_path)
            assert np.isclose(report.rademacher_value, cell.bound.rademacher_value, rtol=1e-12)
            assert np.isclose(report.stability_value, cell.bound.stability_value, rtol=1e-9)
            assert np.isclose(report.combined, cell.bound.combined, rtol=1e-9)
            assert np.isclose(report.loss_bound, cell.bound.loss_bound, rtol=1e-9)
            assert report.gap == cell.bound.gap


class TestDatasetCsv:
    def test_round_trip_parse(self):
        spec = DataSpec(target="sinusoid", n=20, d=2, noise=0.1, seed=4)
        train, _ = generate_data(spec)
        text = dataset_to_csv(train)
        lines = text.strip().splitlines()
        assert lines[0] == "x1,x2,y"
        row = [float(v) for v in lines[1].split(",")]
        assert row[0] == train.inputs[0, 0]
        assert row[2] == train.targets[0]
