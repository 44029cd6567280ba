import json

import numpy as np
import pytest

from gnnflow import cli
from gnnflow.graphs import build_csr, degree_stats, load_edge_list
from gnnflow.params import gen_features, gen_params
from gnnflow.reference import gcn_forward
from gnnflow.tensorio import load_tensor


def run(argv):
    return cli.main(argv)


@pytest.fixture
def graph_file(tmp_path):
    path = tmp_path / "g.txt"
    assert run(["gen", "--n", "120", "--avg-degree", "3", "--topology",
                "regular", "--seed", "5", "--out", str(path)]) == 0
    return path


class TestGen:
    def test_regular_exact_edges(self, tmp_path):
        out = tmp_path / "g.txt"
        assert run(["gen", "--n", "1000", "--avg-degree", "2",
                    "--topology", "regular", "--seed", "1",
                    "--out", str(out)]) == 0
        g = build_csr(load_edge_list(out))
        s = degree_stats(g)
        assert g.num_edges == 2000
        assert s.max_degree < 50  # far below n

    def test_powerlaw_hubs(self, tmp_path):
        out = tmp_path / "p.txt"
        assert run(["gen", "--n", "1000", "--avg-degree", "7",
                    "--topology", "powerlaw", "--seed", "1",
                    "--out", str(out)]) == 0
        s = degree_stats(build_csr(load_edge_list(out)))
        assert s.max_degree > 10 * s.avg_degree

    def test_single_node_empty(self, tmp_path):
        out = tmp_path / "e.txt"
        assert run(["gen", "--n", "1", "--avg-degree", "0", "--out",
                    str(out)]) == 0
        assert load_edge_list(out).edges == []


class TestModel:
    def test_gcn_mt_prediction(self, tmp_path):
        out = tmp_path / "rep"
        assert run(["model", "--model", "gcn", "--summary", "MT",
                    "--out", str(out)]) == 0
        rep = json.loads((out / "model.json").read_text())
        assert rep["seconds"] == pytest.approx(0.0477, abs=0.0002)
        assert rep["total_cycles"] == 11927638
        csv_text = (out / "model.csv").read_text()
        assert csv_text.startswith("model,dataset,stage,cycles,bottleneck,seconds")
        assert "TOTAL" in csv_text

    def test_summary_path(self, tmp_path):
        summary = tmp_path / "tiny.json"
        summary.write_text(json.dumps(
            {"name": "tiny", "n": 100, "m": 400, "max_degree": 9,
             "avg_degree": 4.0}))
        out = tmp_path / "rep"
        assert run(["model", "--model", "gin", "--summary", str(summary),
                    "--out", str(out)]) == 0
        rep = json.loads((out / "model.json").read_text())
        assert rep["n"] == 100 and rep["m"] == 400

    def test_idempotent_reports(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run(["model", "--model", "gat", "--summary", "MT",
                        "--out", str(out)]) == 0
        assert (a / "model.json").read_bytes() == (b / "model.json").read_bytes()
        assert (a / "model.csv").read_bytes() == (b / "model.csv").read_bytes()


class TestRunAndPipeline:
    def test_run_writes_reference_output(self, graph_file, tmp_path):
        out = tmp_path / "run"
        assert run(["run", "--model", "gcn", "--graph", str(graph_file),
                    "--dims", "8", "--seed", "9", "--out", str(out)]) == 0
        got = load_tensor(out / "output.gnnh")
        g = build_csr(load_edge_list(graph_file))
        p = gen_params("gcn", cli.parse_dims("gcn", "8"), 9)
        H = gen_features(g.num_nodes, 8, 10)
        np.testing.assert_array_equal(got, gcn_forward(g, H, p))

    def test_pipeline_verifies_equivalence(self, graph_file, tmp_path):
        out = tmp_path / "pipe"
        assert run(["pipeline", "--model", "monet", "--graph", str(graph_file),
                    "--dims", "8,2", "--seed", "3", "--out", str(out)]) == 0
        rep = json.loads((out / "report.json").read_text())
        assert rep["pass"] is True
        assert rep["max_rel_err"] <= 1e-4
        assert (out / "pipeline.json").exists()

    def test_pipeline_gatedgcn(self, graph_file, tmp_path):
        out = tmp_path / "pipe2"
        assert run(["pipeline", "--model", "gatedgcn", "--graph",
                    str(graph_file), "--dims", "8", "--out", str(out)]) == 0

    def test_params_manifest_roundtrip(self, graph_file, tmp_path):
        out1 = tmp_path / "first"
        assert run(["run", "--model", "gin", "--graph", str(graph_file),
                    "--dims", "8", "--seed", "77", "--out", str(out1)]) == 0
        out2 = tmp_path / "second"
        assert run(["run", "--model", "gin", "--graph", str(graph_file),
                    "--dims", "8", "--seed", "77", "--params",
                    str(out1 / "params"), "--out", str(out2)]) == 0
        a = load_tensor(out1 / "output.gnnh")
        b = load_tensor(out2 / "output.gnnh")
        np.testing.assert_array_equal(a, b)


class TestSim:
    def test_sim_report(self, graph_file, tmp_path):
        out = tmp_path / "sim"
        assert run(["sim", "--model", "gcn", "--graph", str(graph_file),
                    "--dims", "8", "--cus", "1", "--fifo-capacity",
                    "unbounded", "--out", str(out)]) == 0
        rep = json.loads((out / "sim.json").read_text())
        assert rep["bound_cycles"] <= rep["total_cycles"]
        assert rep["total_cycles"] <= rep["bound_cycles"] + rep["sum_latencies"]

    def test_sim_uses_profile_frequency(self, graph_file, tmp_path):
        out = tmp_path / "sim2"
        assert run(["sim", "--model", "gatedgcn", "--graph", str(graph_file),
                    "--dims", "8", "--out", str(out)]) == 0
        rep = json.loads((out / "sim.json").read_text())
        assert rep["frequency_hz"] == 270e6


class TestCharacterize:
    def test_report_and_scores(self, graph_file, tmp_path):
        out = tmp_path / "char"
        assert run(["characterize", "--model", "gat", "--graph",
                    str(graph_file), "--dims", "8,2,4", "--sample", "30",
                    "--dump-trace", "--out", str(out)]) == 0
        rep = json.loads((out / "report.json").read_text())
        mix = rep["instruction_mix"]
        assert mix["branch"] + mix["memory"] + mix["compute"] == \
            pytest.approx(1.0, abs=1e-9)
        assert 0.0 <= rep["spatial_score"] <= 1.0
        assert 0.0 <= rep["temporal_score"] <= 1.0
        assert (out / "trace.gnnt").exists()
        assert (out / "scores.csv").read_text().count("\n") == 6


class TestCompare:
    def test_shipped_tables(self, tmp_path):
        out = tmp_path / "cmp"
        assert run(["compare", "--out", str(out)]) == 0
        text = (out / "comparison.csv").read_text()
        assert "gcn,MT,cpu_speedup,2.2" in text
        rep = json.loads((out / "report.json").read_text())
        assert rep["headline"]["max_cpu_speedup"] == pytest.approx(50.683, abs=0.001)
        assert len(rep["gpu_oom_rows"]) == 3

    def test_join_with_model_report(self, tmp_path):
        mdl = tmp_path / "mdl"
        assert run(["model", "--model", "gcn", "--summary", "MT",
                    "--out", str(mdl)]) == 0
        out = tmp_path / "cmp"
        assert run(["compare", "--model-reports", str(mdl / "model.json"),
                    "--out", str(out)]) == 0
        text = (out / "comparison.csv").read_text()
        line = next(l for l in text.splitlines()
                    if l.startswith("gcn,MT,cpu_speedup"))
        # 0.11 s CPU over the predicted 0.0477 s
        assert float(line.split(",")[-1]) == pytest.approx(0.11 / 0.047710552,
                                                           rel=1e-4)


class TestConfig:
    def test_config_supplies_defaults_flags_override(self, graph_file, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"model": "gcn", "summary": "MT",
                                   "cus": 1}))
        out = tmp_path / "rep"
        assert run(["model", "--config", str(cfg), "--out", str(out)]) == 0
        rep = json.loads((out / "model.json").read_text())
        assert rep["num_cus"] == 1
        out2 = tmp_path / "rep2"
        assert run(["model", "--config", str(cfg), "--cus", "2",
                    "--out", str(out2)]) == 0
        rep2 = json.loads((out2 / "model.json").read_text())
        assert rep2["num_cus"] == 2
        assert rep2["total_cycles"] == rep["total_cycles"] / 2

    def test_missing_graph_errors(self):
        with pytest.raises(SystemExit):
            run(["run", "--model", "gcn"])

    def test_bad_model_errors(self, graph_file):
        with pytest.raises(SystemExit):
            run(["run", "--model", "mlp", "--graph", str(graph_file)])

    def test_missing_file_exit_code(self, tmp_path):
        assert run(["run", "--model", "gcn", "--graph",
                    str(tmp_path / "nope.txt")]) == 2
