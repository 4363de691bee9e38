import filecmp
import json

import pytest

from skymatch.cli import main
from skymatch.formats import read_pairs, read_stats_json


def run(*argv):
    return main(list(argv))


@pytest.fixture
def block(tmp_path):
    out = tmp_path / "sim"
    assert run("simulate", "--preset", "dual", "--strips", "2", "--stations", "4",
               "--no-serpentine", "--density", "0.002", "--seed", "5",
               "--out", str(out)) == 0
    return out


class TestSimulateCommand:
    def test_row_count_is_strips_stations_cameras(self, tmp_path):
        out = tmp_path / "sim"
        assert run("simulate", "--preset", "dual", "--strips", "2", "--stations", "5",
                   "--out", str(out)) == 0
        lines = (out / "flight_log.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + 2 * 5 * 2

    def test_unknown_preset_is_usage_error(self, tmp_path):
        assert run("simulate", "--preset", "hexa", "--out", str(tmp_path)) == 1


class TestPairsCommand:
    def test_writes_pairs_and_stats(self, block, tmp_path):
        pairs_csv = tmp_path / "pairs.csv"
        stats_json = tmp_path / "stats.json"
        assert run("pairs", "--log", str(block / "flight_log.csv"), "--preset", "dual",
                   "--out", str(pairs_csv), "--stats", str(stats_json)) == 0
        rows = read_pairs(pairs_csv)
        assert rows and all(0 <= r.weight <= 1 for r in rows)
        stats = read_stats_json(stats_json)
        assert stats.pairs_reduced == len(rows)
        assert stats.tests_per_image_mean > 0
        assert stats.wall_ms == {}

    def test_missing_log_is_data_error(self, tmp_path):
        assert run("pairs", "--log", str(tmp_path / "nope.csv"), "--preset", "dual",
                   "--out", str(tmp_path / "p.csv")) == 2

    def test_wrong_preset_for_log_is_data_error(self, block, tmp_path):
        assert run("pairs", "--log", str(block / "flight_log.csv"), "--preset", "penta",
                   "--out", str(tmp_path / "p.csv")) == 2


class TestGraphCommand:
    def test_mst_has_tree_edge_count(self, block, tmp_path):
        log = str(block / "flight_log.csv")
        out = tmp_path / "mst"
        assert run("graph", "--log", log, "--preset", "dual", "--mode", "mst",
                   "--out", str(out)) == 0
        stats = read_stats_json(out / "stats.json")
        assert stats.components == 1
        assert stats.pairs_graph == 2 * 4 * 2 - 1
        assert (out / "graph.dot").exists() and (out / "graph.pgm").exists()

    def test_mode_ordering(self, block, tmp_path):
        log = str(block / "flight_log.csv")
        counts = {}
        for mode in ("full", "reduced", "mst", "mst-expansion"):
            out = tmp_path / mode
            assert run("graph", "--log", log, "--preset", "dual", "--mode", mode,
                       "--out", str(out)) == 0
            counts[mode] = read_stats_json(out / "stats.json").pairs_graph
        assert counts["full"] >= counts["reduced"] >= counts["mst-expansion"] >= counts["mst"]

    def test_accepts_precomputed_pairs(self, block, tmp_path):
        log = str(block / "flight_log.csv")
        pairs_csv = tmp_path / "pairs.csv"
        assert run("pairs", "--log", log, "--preset", "dual", "--out", str(pairs_csv)) == 0
        out = tmp_path / "exp"
        assert run("graph", "--log", log, "--preset", "dual", "--pairs", str(pairs_csv),
                   "--mode", "mst-expansion", "--out", str(out)) == 0
        stats = read_stats_json(out / "stats.json")
        assert stats.pairs_reduced == len(read_pairs(pairs_csv))
        assert stats.reduction_ratio == pytest.approx(stats.pairs_full / stats.pairs_graph)

    def test_unknown_mode_is_usage_error(self, block, tmp_path):
        assert run("graph", "--log", str(block / "flight_log.csv"), "--preset", "dual",
                   "--mode", "centipede", "--out", str(tmp_path / "x")) == 1


class TestBaCommand:
    def _graph(self, block, tmp_path):
        out = tmp_path / "graph"
        assert run("graph", "--log", str(block / "flight_log.csv"), "--preset", "dual",
                   "--mode", "mst-expansion", "--out", str(out)) == 0
        return out

    def test_noiseless_report(self, block, tmp_path):
        gdir = self._graph(block, tmp_path)
        report_path = tmp_path / "report.json"
        assert run("ba", "--log", str(block / "flight_log.csv"), "--preset", "dual",
                   "--graph-pairs", str(gdir / "graph_pairs.csv"),
                   "--scene", str(block / "scene.csv"),
                   "--perturb-pos", "0.5", "--perturb-ang", "0.5",
                   "--seed", "7", "--out", str(report_path)) == 0
        report = json.loads(report_path.read_text())
        assert report["registered_images"] == 16
        assert report["final_rmse_px"] < 1e-6
        assert report["converged"] is True

    def test_gcp_report(self, block, tmp_path):
        gdir = self._graph(block, tmp_path)
        import numpy as np

        from skymatch.formats import GcpRecord, read_scene_points, write_gcp_file

        pts = read_scene_points(block / "scene.csv")
        n = len(pts)
        spread = [n // 5, 2 * n // 5, 3 * n // 5, 4 * n // 5]
        rows = [GcpRecord(f"g{k}", *pts[idx], role="control") for k, idx in enumerate(spread)]
        rows += [GcpRecord(f"c{k}", *pts[idx], role="check")
                 for k, idx in enumerate(range(n // 2 - 10, n // 2 + 10, 4))]
        gcp_path = tmp_path / "gcp.csv"
        write_gcp_file(rows, gcp_path)
        report_path = tmp_path / "report.json"
        assert run("ba", "--log", str(block / "flight_log.csv"), "--preset", "dual",
                   "--graph-pairs", str(gdir / "graph_pairs.csv"),
                   "--scene", str(block / "scene.csv"), "--gcp", str(gcp_path),
                   "--perturb-pos", "0.3", "--perturb-ang", "0.3",
                   "--seed", "7", "--out", str(report_path)) == 0
        report = json.loads(report_path.read_text())
        gcp = report["gcp"]
        assert gcp["control_count"] >= 3
        assert gcp["check_count"] >= 3
        for axis in "xyz":
            assert abs(gcp["check_mean_m"][axis]) < 1e-5
            assert gcp["check_rmse_m"][axis] < 1e-5


class TestDeterminism:
    def test_identical_seeds_identical_bytes(self, tmp_path):
        outputs = []
        for name in ("a", "b"):
            base = tmp_path / name
            sim = base / "sim"
            assert run("simulate", "--preset", "dual", "--strips", "2", "--stations", "4",
                       "--no-serpentine", "--density", "0.002", "--seed", "11",
                       "--out", str(sim)) == 0
            pairs = base / "pairs.csv"
            assert run("pairs", "--log", str(sim / "flight_log.csv"), "--preset", "dual",
                       "--out", str(pairs), "--stats", str(base / "pstats.json")) == 0
            gdir = base / "graph"
            assert run("graph", "--log", str(sim / "flight_log.csv"), "--preset", "dual",
                       "--pairs", str(pairs), "--mode", "mst-expansion",
                       "--out", str(gdir)) == 0
            report = base / "report.json"
            assert run("ba", "--log", str(sim / "flight_log.csv"), "--preset", "dual",
                       "--graph-pairs", str(gdir / "graph_pairs.csv"),
                       "--scene", str(sim / "scene.csv"), "--noise", "0.5",
                       "--perturb-pos", "0.5", "--perturb-ang", "0.5", "--seed", "11",
                       "--out", str(report)) == 0
            outputs.append(base)
        a, b = outputs
        for rel in ("sim/flight_log.csv", "sim/scene.csv", "pairs.csv", "pstats.json",
                    "graph/graph_pairs.csv", "graph/graph.dot", "graph/graph.pgm",
                    "graph/stats.json", "report.json"):
            assert filecmp.cmp(a / rel, b / rel, shallow=False), rel


class TestStatsCommand:
    def test_aggregates_table(self, block, tmp_path, capsys):
        gdir = tmp_path / "graph"
        assert run("graph", "--log", str(block / "flight_log.csv"), "--preset", "dual",
                   "--mode", "mst", "--out", str(gdir)) == 0
        out_csv = tmp_path / "table.csv"
        assert run("stats", str(gdir / "stats.json"), "--out", str(out_csv)) == 0
        printed = capsys.readouterr().out
        assert "pairs_graph" in printed
        assert out_csv.read_text().count("\n") == 2


class TestUsageErrors:
    def test_unknown_subcommand(self, capsys):
        assert run("frobnicate") == 1
        assert "usage error" in capsys.readouterr().err

    def test_no_arguments(self):
        assert run() == 1
