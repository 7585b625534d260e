"""Flag parsing, config precedence, and in-process end-to-end CLI runs."""

import json

import numpy as np
import pytest

from topotrack.cli import main as cli_main
from topotrack.config import (
    ExperimentConfig,
    load_with_overrides,
    parse_changes,
    parse_checkpoints,
    parse_cov,
    parse_known_edges,
    parse_threshold,
)
from topotrack.graphs import GroundTruth
from topotrack.reporting import file_sha256, load_matrix_csv, read_json


class TestParsers:
    def test_threshold(self):
        assert parse_threshold("rel:0.1") == ("rel", 0.1)
        assert parse_threshold("abs:0.05") == ("abs", 0.05)
        for bad in ("rel", "quantile:0.5", "rel:x", "rel:-1"):
            with pytest.raises(ValueError, match="configuration error"):
                parse_threshold(bad)

    def test_cov(self):
        assert parse_cov("infinite") == {"cov_mode": "infinite"}
        assert parse_cov("ewma=0.98") == {"cov_mode": "ewma", "ewma_beta": 0.98}
        assert parse_cov("ewma:0.98") == {"cov_mode": "ewma", "ewma_beta": 0.98}
        assert parse_cov("window=200") == {"cov_mode": "window", "window": 200}
        assert parse_cov("window:200") == {"cov_mode": "window", "window": 200}
        for bad in ("ewma=x", "window=2.5", "gauss=1", "infinite=3"):
            with pytest.raises(ValueError, match="configuration error"):
                parse_cov(bad)

    def test_known_edges(self):
        assert parse_known_edges("random:5") == ("random", 5)
        assert parse_known_edges("known.edges") == ("file", "known.edges")
        with pytest.raises(ValueError, match="configuration error"):
            parse_known_edges("random:x")
        with pytest.raises(ValueError, match="configuration error"):
            parse_known_edges("random:-1")

    def test_changes(self):
        assert parse_changes("5000:0.1") == [[5000, 0.1, None]]
        assert parse_changes("10:0.2:7,20:0.3") == [[10, 0.2, 7], [20, 0.3, None]]
        for bad in ("10", "a:0.1", "10:0.1:2:3"):
            with pytest.raises(ValueError, match="configuration error"):
                parse_changes(bad)

    def test_checkpoints(self):
        assert parse_checkpoints("none") == ()
        assert parse_checkpoints("all") == "all"
        assert parse_checkpoints("2,4,8") == (2, 4, 8)
        rule = parse_checkpoints("every:5")
        assert rule(1) and rule(5) and rule(10) and not rule(7)
        for bad in ("every:0", "every:x", "2,a"):
            with pytest.raises(ValueError, match="configuration error"):
                parse_checkpoints(bad)


class TestExperimentConfig:
    def test_json_round_trip(self, tmp_path):
        cfg = ExperimentConfig(mu=4.0, n=12, filter_coeffs=[1.0, 0.5], warmup=7)
        path = tmp_path / "config.json"
        cfg.save(path)
        assert ExperimentConfig.load(path) == cfg

    def test_unknown_keys_are_rejected(self):
        with pytest.raises(ValueError, match="unknown config keys"):
            ExperimentConfig.from_dict({"mou": 3.0})
        with pytest.raises(ValueError, match="unknown config keys"):
            ExperimentConfig().apply_overrides({"mou": 3.0})

    def test_none_overrides_are_ignored(self):
        cfg = ExperimentConfig(mu=4.0).apply_overrides({"mu": None, "n": 9})
        assert cfg.mu == 4.0 and cfg.n == 9

    def test_precedence_defaults_file_flags(self, tmp_path):
        path = tmp_path / "config.json"
        ExperimentConfig(mu=5.0, n=6).save(path)
        cfg = load_with_overrides(str(path), {"mu": 9.0, "n": None})
        assert cfg.mu == 9.0          # flag beats file
        assert cfg.n == 6             # file beats default
        assert cfg.t_count == 1000    # untouched default

    def test_solver_views_carry_fields(self):
        cfg = ExperimentConfig(mu=3.0, threshold_kind="abs", threshold_value=0.2,
                               minibatch=4, warmup=11)
        assert cfg.solver_config().mu == 3.0
        online = cfg.online_config()
        assert online.minibatch == 4
        assert online.warmup == 11
        assert online.threshold == ("abs", 0.2)


@pytest.fixture(scope="module")
def generated(tmp_path_factory):
    out = tmp_path_factory.mktemp("gen")
    rc = cli_main(["generate", "--n", "8", "--density", "0.3", "--t-count", "200",
                   "--seed", "3", "--filter-coeffs", "1.0,0.4", "--out", str(out)])
    assert rc == 0
    return out


class TestGenerate:
    def test_writes_manifest_and_artifacts(self, generated):
        for name in ("graph.edges", "filter.json", "signals.csv",
                     "adjacency.png", "manifest.json"):
            assert (generated / name).stat().st_size > 0
        manifest = read_json(generated / "manifest.json")
        assert manifest["command"] == "generate"
        assert manifest["config"]["n"] == 8
        assert str(generated / "graph.edges") in manifest["outputs"]
        assert json.loads((generated / "filter.json").read_text())["coeffs"] == [1.0, 0.4]

    def test_reruns_are_byte_identical(self, generated, tmp_path):
        again = tmp_path / "again"
        rc = cli_main(["generate", "--n", "8", "--density", "0.3", "--t-count", "200",
                       "--seed", "3", "--filter-coeffs", "1.0,0.4", "--out", str(again)])
        assert rc == 0
        for name in ("graph.edges", "signals.csv", "filter.json"):
            assert (again / name).read_bytes() == (generated / name).read_bytes()

    def test_rewiring_schedule_writes_each_version(self, tmp_path):
        out = tmp_path / "drift"
        rc = cli_main(["generate", "--n", "8", "--density", "0.3", "--t-count", "24",
                       "--seed", "1", "--changes", "3:0.2:5", "--signals-per-step", "4",
                       "--no-figures", "--out", str(out)])
        assert rc == 0
        assert (out / "graph_v1.edges").exists()
        base = GroundTruth.from_edge_list(out / "graph.edges")
        moved = GroundTruth.from_edge_list(out / "graph_v1.edges")
        assert not np.array_equal(base.adjacency, moved.adjacency)
        rows = np.loadtxt(out / "signals.csv", delimiter=",", skiprows=1)
        assert rows.shape == (24, 8)

    def test_no_figures_skips_rendering(self, tmp_path):
        out = tmp_path / "plain"
        rc = cli_main(["generate", "--n", "6", "--density", "0.4", "--t-count", "10",
                       "--no-figures", "--out", str(out)])
        assert rc == 0
        assert not list(out.glob("*.png"))

    def test_config_file_feeds_defaults(self, tmp_path):
        cfg_path = tmp_path / "config.json"
        ExperimentConfig(n=6, t_count=15, graph_density=0.4, figures=False).save(cfg_path)
        out = tmp_path / "fromcfg"
        rc = cli_main(["generate", "--config", str(cfg_path), "--out", str(out)])
        assert rc == 0
        manifest = read_json(out / "manifest.json")
        assert manifest["config"]["n"] == 6
        assert manifest["config"]["t_count"] == 15

    def test_unknown_config_key_exits_config_code(self, tmp_path, capsys):
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text('{"mou": 1.0}\n')
        rc = cli_main(["generate", "--config", str(cfg_path), "--out", str(tmp_path / "x")])
        assert rc == 2
        assert capsys.readouterr().err.startswith("error E_CONFIG:")


class TestInferBatch:
    def test_end_to_end_with_scoring(self, generated, tmp_path):
        out = tmp_path / "batch"
        rc = cli_main(["infer-batch", "--signals", str(generated / "signals.csv"),
                       "--graph", str(generated / "graph.edges"),
                       "--known-edges", "random:2", "--mu", "50", "--seed", "3",
                       "--max-iters", "5000", "--out", str(out)])
        assert rc == 0
        for name in ("estimate.csv", "estimate.edges", "trajectory.csv",
                     "report.json", "objective.png", "heatmap.png", "manifest.json"):
            assert (out / name).stat().st_size > 0
        report = read_json(out / "report.json")
        assert "recovery" in report and 0.0 <= report["recovery"]["f_measure"] <= 1.0
        assert report["iterations"] >= 1
        manifest = read_json(out / "manifest.json")
        signals_path = str(generated / "signals.csv")
        assert manifest["inputs"]["signals"]["sha256"] == file_sha256(signals_path)
        estimate = load_matrix_csv(out / "estimate.csv")
        assert estimate.shape == (8, 8)
        assert np.allclose(estimate, estimate.T)

    def test_covariance_input(self, generated, tmp_path):
        from topotrack.covariance import sample_covariance
        from topotrack.diffusion import load_signals_csv
        from topotrack.reporting import save_matrix_csv

        cov_path = tmp_path / "cov.csv"
        save_matrix_csv(cov_path, sample_covariance(
            load_signals_csv(generated / "signals.csv").signals))
        out = tmp_path / "fromcov"
        rc = cli_main(["infer-batch", "--cov", str(cov_path), "--mu", "50",
                       "--max-iters", "2000", "--no-figures", "--out", str(out)])
        assert rc == 0
        assert read_json(out / "report.json")["converged"] in (True, False)

    def test_requires_a_data_source(self, tmp_path, capsys):
        rc = cli_main(["infer-batch", "--out", str(tmp_path / "x")])
        assert rc == 2
        assert capsys.readouterr().err.startswith("error E_CONFIG:")

    def test_missing_signals_file_is_io_error(self, tmp_path, capsys):
        rc = cli_main(["infer-batch", "--signals", str(tmp_path / "nope.csv"),
                       "--out", str(tmp_path / "x")])
        assert rc == 4
        assert capsys.readouterr().err.startswith("error E_IO:")

    def test_corrupt_signals_file_is_io_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("not,numbers\nat,all\n")
        rc = cli_main(["infer-batch", "--signals", str(bad), "--out", str(tmp_path / "x")])
        assert rc == 4
        assert capsys.readouterr().err.startswith("error E_IO:")


class TestInferOnline:
    def test_end_to_end_with_checkpoints(self, generated, tmp_path):
        out = tmp_path / "online"
        rc = cli_main(["infer-online", "--signals", str(generated / "signals.csv"),
                       "--graph", str(generated / "graph.edges"),
                       "--known-edges", "random:2", "--mu", "50", "--seed", "3",
                       "--minibatch", "5", "--warmup", "20",
                       "--checkpoints", "every:12", "--out", str(out)])
        assert rc == 0
        for name in ("trace.csv", "estimate.csv", "estimate.edges", "report.json",
                     "objective.png", "tracking.png", "f_measure.png", "manifest.json"):
            assert (out / name).stat().st_size > 0
        report = read_json(out / "report.json")
        assert report["steps"] == 36          # (200 - 20) / 5
        assert report["checkpoints"] == 4     # steps 1, 12, 24, 36
        assert "final_f_measure" in report

    def test_ewma_memory_flag(self, generated, tmp_path):
        out = tmp_path / "ewma"
        rc = cli_main(["infer-online", "--signals", str(generated / "signals.csv"),
                       "--cov", "ewma=0.98", "--mu", "10", "--minibatch", "10",
                       "--no-figures", "--out", str(out)])
        assert rc == 0
        assert read_json(out / "manifest.json")["config"]["cov_mode"] == "ewma"

    def test_reruns_write_identical_traces(self, generated, tmp_path):
        args = ["infer-online", "--signals", str(generated / "signals.csv"),
                "--mu", "10", "--minibatch", "5", "--warmup", "20", "--no-figures"]
        first, second = tmp_path / "r1", tmp_path / "r2"
        assert cli_main(args + ["--out", str(first)]) == 0
        assert cli_main(args + ["--out", str(second)]) == 0
        assert (first / "trace.csv").read_bytes() == (second / "trace.csv").read_bytes()

    def test_nan_signals_are_rejected_as_data(self, tmp_path, capsys):
        bad = tmp_path / "nan.csv"
        rows = ["y0,y1,y2", "1.0,2.0,3.0", "nan,nan,nan", "1.0,1.0,1.0"]
        bad.write_text("\n".join(rows) + "\n")
        rc = cli_main(["infer-online", "--signals", str(bad), "--mu", "5",
                       "--no-figures", "--out", str(tmp_path / "x")])
        assert rc == 4
        assert capsys.readouterr().err.startswith("error E_IO:")

    def test_overflowing_signals_exit_numeric_code(self, tmp_path, capsys):
        # Finite on disk, but the outer products overflow, so the run aborts
        # with a numeric error rather than writing a garbage estimate.
        bad = tmp_path / "huge.csv"
        rows = ["y0,y1,y2", "1e200,1e200,1e200", "1e200,-1e200,1e200",
                "1.0,1.0,1.0", "2.0,0.0,1.0"]
        bad.write_text("\n".join(rows) + "\n")
        with np.errstate(over="ignore", invalid="ignore"):
            rc = cli_main(["infer-online", "--signals", str(bad), "--mu", "5",
                           "--no-figures", "--out", str(tmp_path / "x")])
        assert rc == 3
        assert capsys.readouterr().err.startswith("error E_NUMERIC:")


class TestAnalyzeAndEval:
    def test_analyze_model_covariance(self, generated, tmp_path):
        out = tmp_path / "analysis"
        rc = cli_main(["analyze", "--graph", str(generated / "graph.edges"),
                       "--filter-coeffs", "1.0,0.4", "--known-edges", "random:2",
                       "--seed", "3", "--mu", "50", "--out", str(out)])
        assert rc == 0
        report = read_json(out / "analysis.json")
        assert report["covariance_source"] == "model"
        feas = report["feasibility"]
        assert feas["rank_wd"] + feas["kernel_dim"] == 8
        assert feas["singleton"] is True
        assert "convexity" in report and report["convexity"]["m"] >= 0
        assert (out / "spectrum.png").stat().st_size > 0

    def test_analyze_requires_a_source(self, tmp_path, capsys):
        rc = cli_main(["analyze", "--out", str(tmp_path / "x")])
        assert rc == 2
        assert capsys.readouterr().err.startswith("error E_CONFIG:")

    def test_eval_scores_saved_estimate(self, generated, tmp_path):
        batch_out = tmp_path / "batch"
        assert cli_main(["infer-batch", "--signals", str(generated / "signals.csv"),
                         "--graph", str(generated / "graph.edges"),
                         "--known-edges", "random:2", "--mu", "50", "--seed", "3",
                         "--max-iters", "5000", "--no-figures",
                         "--out", str(batch_out)]) == 0
        out = tmp_path / "eval"
        rc = cli_main(["eval", "--estimate", str(batch_out / "estimate.csv"),
                       "--graph", str(generated / "graph.edges"),
                       "--sweep-count", "10", "--out", str(out)])
        assert rc == 0
        report = read_json(out / "eval.json")
        assert 0.0 <= report["recovery"]["f_measure"] <= 1.0
        sweep_lines = (out / "sweep.csv").read_text().strip().splitlines()
        assert sweep_lines[0] == "threshold,precision,recall,f_measure"
        assert len(sweep_lines) == 11
        assert (out / "pr_sweep.png").stat().st_size > 0

        # the edge-list form of the same estimate scores identically
        rc = cli_main(["eval", "--estimate", str(batch_out / "estimate.edges"),
                       "--graph", str(generated / "graph.edges"), "--no-figures",
                       "--out", str(tmp_path / "eval2")])
        assert rc == 0
        again = read_json(tmp_path / "eval2" / "eval.json")
        assert again["recovery"]["true_positives"] == report["recovery"]["true_positives"]
