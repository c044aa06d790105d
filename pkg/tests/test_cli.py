"""End-to-end checks of the command line, driving ``cli.main`` directly."""

import json

import numpy as np
import pytest

from hubsel import cli, evaluation, features, neighbors, selector, stats
from hubsel.evaluation import Ranking
from helpers import random_matrix


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A 40-fragment collection with its analyze output, shared read-only."""
    root = tmp_path_factory.mktemp("cli")
    rng = np.random.default_rng(2)
    m = random_matrix(rng, 40, 8)
    feat = root / "features.csv"
    features.save_features(m, feat)
    out = root / "analysis"
    assert cli.main(["analyze", str(feat), "--out", str(out)]) == 0
    return {"root": root, "features": feat, "analysis": out, "matrix": m}


class TestFuse:
    def test_happy_path(self, tmp_path, capsys):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        a.write_text("x,3.0,4.0\ny,1.0,0.0\n")
        b.write_text("x,2.0,0.0\ny,0.0,5.0\n")
        out = tmp_path / "fused.csv"
        assert cli.main(["fuse", str(a), str(b), "--out", str(out)]) == 0
        assert "fused 2" in capsys.readouterr().out
        got = features.load_features(out)
        want = features.fuse([features.load_features(a), features.load_features(b)])
        assert got.ids == want.ids
        assert np.array_equal(got.values, want.values)

    def test_id_mismatch_exits_1(self, tmp_path, capsys):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        a.write_text("x,1.0\ny,2.0\n")
        b.write_text("x,1.0\nz,2.0\n")
        out = tmp_path / "fused.csv"
        assert cli.main(["fuse", str(a), str(b), "--out", str(out)]) == 1
        assert "row 2" in capsys.readouterr().err

    def test_missing_input_exits_2(self, tmp_path, capsys):
        out = tmp_path / "fused.csv"
        code = cli.main(["fuse", str(tmp_path / "absent.csv"), "--out", str(out)])
        assert code == 2
        assert "error:" in capsys.readouterr().err


class TestKnn:
    def test_matches_library_output(self, workspace, tmp_path):
        g_cli = tmp_path / "graph_cli.csv"
        assert cli.main(
            ["knn", str(workspace["features"]), "--k", "5", "--out", str(g_cli)]
        ) == 0
        g_lib = tmp_path / "graph_lib.csv"
        m = workspace["matrix"]
        g = neighbors.knn_graph(m, 5, metric="cosine")
        neighbors.save_graph(g, m.ids, g_lib)
        assert g_cli.read_bytes() == g_lib.read_bytes()

    def test_invalid_k_exits_1(self, workspace, tmp_path, capsys):
        out = tmp_path / "g.csv"
        code = cli.main(["knn", str(workspace["features"]), "--k", "0", "--out", str(out)])
        assert code == 1
        assert "invalid neighbor count" in capsys.readouterr().err


class TestAnalyze:
    def test_outputs_present(self, workspace):
        out = workspace["analysis"]
        assert (out / "profile.csv").exists()
        assert (out / "summary.json").exists()
        assert (out / "scatter.csv").exists()
        assert list(out.glob("graph_*.csv")), "graph cache file missing"

    def test_summary_contents(self, workspace, capsys):
        summary = json.loads((workspace["analysis"] / "summary.json").read_text())
        for key in ("k", "n_nbr", "m_nbr", "skewness", "mean", "stddev",
                    "hubness_exists", "global_id"):
            assert key in summary
        assert summary["k"] == 10
        assert isinstance(summary["hubness_exists"], bool)

    def test_rerun_is_byte_identical(self, workspace, capsys):
        out = workspace["analysis"]
        names = ["profile.csv", "summary.json", "scatter.csv"]
        before = {n: (out / n).read_bytes() for n in names}
        capsys.readouterr()
        assert cli.main(["analyze", str(workspace["features"]), "--out", str(out)]) == 0
        printed = json.loads(capsys.readouterr().out)
        assert printed == json.loads(before["summary.json"].decode())
        for n in names:
            assert (out / n).read_bytes() == before[n], n

    def test_two_fragment_collection(self, tmp_path, capsys):
        feat = tmp_path / "tiny.csv"
        feat.write_text("a,1.0,0.0\nb,0.0,1.0\n")
        out = tmp_path / "tiny_out"
        assert cli.main(["analyze", str(feat), "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["skewness"] == 0.0
        assert summary["global_id"] is None


class TestSelect:
    def select_args(self, workspace, tmp_path, k, extra=()):
        return [
            "select", str(workspace["features"]),
            "--k", str(k), "--out", str(tmp_path / "solution.json"), *extra,
        ]

    def test_matches_library_pipeline(self, tmp_path, capsys):
        rng = np.random.default_rng(3)
        m = random_matrix(rng, 12, 4)
        feat = tmp_path / "small.csv"
        features.save_features(m, feat)
        out = tmp_path / "solution.json"
        capsys.readouterr()
        assert cli.main(["select", str(feat), "--k", "4", "--out", str(out)]) == 0
        cli_ids = capsys.readouterr().out.split()

        g = neighbors.knn_graph(m, 11, metric="cosine")
        profile = stats.compute_profile(m, g, k_hub=10, n_lid=100, m_div=30)
        problem = selector.build_problem(
            profile.hubness, profile.lid, m, metric="cosine", k=4
        )
        y, _ = selector.solve(problem, selector.SolverConfig(init="hub_first"))
        lib_ids = [m.ids[i] for i in selector.round_selection(y, problem)]
        assert cli_ids == lib_ids

        payload = json.loads(out.read_text())
        assert payload["selected"] == lib_ids
        assert payload["k"] == 4
        assert payload["objective"] == pytest.approx(
            selector.objective(problem, y), abs=1e-9
        )

    def test_solution_schema_and_trace(self, workspace, tmp_path, capsys):
        out = tmp_path / "solution.json"
        trace = tmp_path / "trace.csv"
        args = [
            "select", str(workspace["features"]), "--k", "5",
            "--out", str(out), "--trace", str(trace),
        ]
        capsys.readouterr()
        assert cli.main(args) == 0
        printed = capsys.readouterr().out.split()
        payload = json.loads(out.read_text())
        for key in ("k", "init", "iterations", "converged", "kkt_residual",
                    "objective", "selected", "y"):
            assert key in payload
        assert payload["selected"] == printed
        assert len(payload["selected"]) == 5
        assert len(payload["y"]) == 40
        assert trace.read_text().splitlines()[0] == selector.TRACE_HEADER

    def test_iteration_cap_reports_unconverged(self, workspace, tmp_path):
        out = tmp_path / "solution.json"
        args = [
            "select", str(workspace["features"]), "--k", "5", "--out", str(out),
            "--init", "uniform", "--max-iter", "1",
        ]
        assert cli.main(args) == 0
        payload = json.loads(out.read_text())
        assert payload["converged"] is False
        assert payload["iterations"] <= 1

    def test_budget_one_needs_linear(self, workspace, tmp_path, capsys):
        out = tmp_path / "solution.json"
        args = ["select", str(workspace["features"]), "--k", "1", "--out", str(out)]
        assert cli.main(args) == 1
        assert "invalid budget" in capsys.readouterr().err
        capsys.readouterr()
        assert cli.main(args + ["--linear"]) == 0
        assert len(capsys.readouterr().out.split()) == 1

    def test_sparse_affinity(self, workspace, tmp_path, capsys):
        out = tmp_path / "solution.json"
        args = [
            "select", str(workspace["features"]), "--k", "5",
            "--out", str(out), "--mode", "knn-sparse",
        ]
        capsys.readouterr()
        assert cli.main(args) == 0
        assert len(json.loads(out.read_text())["selected"]) == 5

    def test_profiles_input(self, workspace, tmp_path, capsys):
        out = tmp_path / "solution.json"
        args = [
            "select", str(workspace["features"]), "--k", "5", "--out", str(out),
            "--profiles", str(workspace["analysis"] / "profile.csv"),
        ]
        assert cli.main(args) == 0
        assert len(json.loads(out.read_text())["selected"]) == 5


class TestRank:
    def test_hub_baseline_matches_library(self, workspace, tmp_path):
        out = tmp_path / "run.csv"
        args = [
            "rank", "--mode", "hub", "--out", str(out),
            "--profiles", str(workspace["analysis"] / "profile.csv"),
        ]
        assert cli.main(args) == 0
        got = evaluation.load_run(out)[0]
        profile = stats.load_profile_csv(workspace["analysis"] / "profile.csv")
        want = evaluation.baseline_rank(profile, "hub")
        assert got.items == want.items
        assert got.query_id == "all"

    def test_random_seed_determinism(self, workspace, tmp_path):
        prof = str(workspace["analysis"] / "profile.csv")
        a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
        base = ["rank", "--mode", "random", "--profiles", prof]
        assert cli.main(base + ["--seed", "5", "--out", str(a)]) == 0
        assert cli.main(base + ["--seed", "5", "--out", str(b)]) == 0
        assert cli.main(base + ["--seed", "6", "--out", str(c)]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert a.read_bytes() != c.read_bytes()
        assert sorted(evaluation.load_run(c)[0].items) == sorted(
            evaluation.load_run(a)[0].items
        )

    def test_oracle_mode(self, workspace, tmp_path, capsys):
        prof = str(workspace["analysis"] / "profile.csv")
        ids = workspace["matrix"].ids
        scores = tmp_path / "scores.csv"
        rng = np.random.default_rng(8)
        vals = rng.integers(0, 16, size=len(ids))
        scores.write_text(
            "fragment_id,score\n"
            + "".join(f"{i},{v}\n" for i, v in zip(ids, vals))
        )
        out = tmp_path / "run.csv"
        args = [
            "rank", "--mode", "oracle", "--profiles", prof,
            "--scores", str(scores), "--out", str(out),
        ]
        assert cli.main(args) == 0
        items = evaluation.load_run(out)[0].items
        assert items[0] == ids[int(np.argmax(vals))]

        assert cli.main(
            ["rank", "--mode", "oracle", "--profiles", prof, "--out", str(out)]
        ) == 1
        assert "oracle" in capsys.readouterr().err

    def test_unknown_mode_exits_1(self, workspace, tmp_path, capsys):
        args = [
            "rank", "--mode", "pagerank", "--out", str(tmp_path / "r.csv"),
            "--profiles", str(workspace["analysis"] / "profile.csv"),
        ]
        assert cli.main(args) == 1
        assert "unknown mode" in capsys.readouterr().err

    def test_baseline_requires_profiles(self, tmp_path, capsys):
        args = ["rank", "--mode", "hub", "--out", str(tmp_path / "r.csv")]
        assert cli.main(args) == 1
        assert "--profiles" in capsys.readouterr().err

    def test_solver_mode_prefix_matches_select(self, workspace, tmp_path, capsys):
        out_sel = tmp_path / "solution.json"
        capsys.readouterr()
        assert cli.main(
            ["select", str(workspace["features"]), "--k", "4", "--out", str(out_sel)]
        ) == 0
        selected = capsys.readouterr().out.split()

        out_run = tmp_path / "run.csv"
        args = [
            "rank", "--mode", "hub-first", "--features", str(workspace["features"]),
            "--k", "4", "--out", str(out_run),
        ]
        assert cli.main(args) == 0
        items = evaluation.load_run(out_run)[0].items
        assert len(items) == 40
        assert items[:4] == selected

    def test_solver_mode_requires_features(self, tmp_path, capsys):
        args = ["rank", "--mode", "hub-first", "--out", str(tmp_path / "r.csv")]
        assert cli.main(args) == 1
        assert "--features" in capsys.readouterr().err


class TestEval:
    def write_run(self, tmp_path):
        path = tmp_path / "run.csv"
        evaluation.save_run(
            path,
            [
                Ranking(query_id="q1", items=["a", "b", "c"]),
                Ranking(query_id="q2", items=["b", "a"]),
            ],
        )
        return path

    def test_map_report(self, tmp_path, capsys):
        run = self.write_run(tmp_path)
        gt = tmp_path / "gt.csv"
        gt.write_text("query_id,fragment_id\nq1,a\nq1,c\nq2,b\n")
        report = tmp_path / "report.json"
        capsys.readouterr()
        code = cli.main(
            ["eval", "--run", str(run), "--gt", str(gt), "--out", str(report)]
        )
        assert code == 0
        printed = json.loads(capsys.readouterr().out)
        assert printed["map"] == pytest.approx(11.0 / 12.0, abs=1e-12)
        assert printed["per_query"]["q1"] == pytest.approx(5.0 / 6.0, abs=1e-12)
        assert json.loads(report.read_text()) == printed

    def test_subjective_report(self, tmp_path, capsys):
        run = tmp_path / "run.csv"
        evaluation.save_run(run, Ranking(query_id="q1", items=["a", "b"]))
        scores = tmp_path / "scores.csv"
        scores.write_text("fragment_id,score\na,3\nb,9\n")
        capsys.readouterr()
        code = cli.main(
            ["eval", "--run", str(run), "--kind", "subjective", "--scores", str(scores)]
        )
        assert code == 0
        printed = json.loads(capsys.readouterr().out)
        assert printed["mean_subjective"] == pytest.approx(6.0, abs=1e-12)

    def test_missing_query_names_it(self, tmp_path, capsys):
        run = self.write_run(tmp_path)
        gt = tmp_path / "gt.csv"
        gt.write_text("query_id,fragment_id\nq1,a\n")
        assert cli.main(["eval", "--run", str(run), "--gt", str(gt)]) == 1
        assert "q2" in capsys.readouterr().err

    def test_missing_run_exits_2(self, tmp_path, capsys):
        code = cli.main(["eval", "--run", str(tmp_path / "absent.csv")])
        assert code == 2
        assert "error:" in capsys.readouterr().err
