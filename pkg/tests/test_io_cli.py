import json

import numpy as np
import pytest

from binlbm import (
    BinaryDataMatrix,
    CoPartition,
    LBMParameters,
    MatrixParseError,
    VariationalState,
    export_reordered,
    load_matrix,
    write_matrix_csv,
)
from binlbm.cli import main
from binlbm.inference import FitResult, _one_hot


def make_fit_result(params, z, w):
    part = CoPartition(z, w, params.g, params.m)
    state = VariationalState(_one_hot(part.z, params.g), _one_hot(part.w, params.m))
    return FitResult(params=params, state=state, map_part=part, free_energy=-1.0,
                     icl_value=-2.0, iterations=1, restart_index=0,
                     chain_free_energies=(-1.0,))


class TestLoadMatrix:
    def test_plain_matrix(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("0,1\n1,0\n")
        data = load_matrix(path)
        assert data.values.tolist() == [[0, 1], [1, 0]]

    def test_header_is_skipped(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("item1,item2\n1,1\n")
        data = load_matrix(path)
        assert data.values.tolist() == [[1, 1]]

    def test_crlf_endings(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_bytes(b"0,1\r\n1,0\r\n")
        assert load_matrix(path).values.tolist() == [[0, 1], [1, 0]]

    def test_non_binary_cell_location(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("0,2\n1,0\n")
        with pytest.raises(MatrixParseError) as info:
            load_matrix(path)
        assert info.value.line == 1
        assert info.value.column == 2

    def test_non_numeric_after_header(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("a,b\n1,x\n")
        with pytest.raises(MatrixParseError) as info:
            load_matrix(path)
        assert info.value.line == 2
        assert info.value.column == 2

    def test_ragged_rows(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("0,1\n1\n")
        with pytest.raises(MatrixParseError) as info:
            load_matrix(path)
        assert info.value.line == 2

    def test_empty_file(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("")
        with pytest.raises(MatrixParseError):
            load_matrix(path)

    def test_header_only(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("x,y\n")
        with pytest.raises(MatrixParseError):
            load_matrix(path)

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        data = BinaryDataMatrix(rng.integers(0, 2, size=(6, 5)))
        path = tmp_path / "m.csv"
        write_matrix_csv(data, path)
        assert np.array_equal(load_matrix(path).values, data.values)


class TestExportReordered:
    def test_single_block_is_identity(self, tmp_path):
        rng = np.random.default_rng(8)
        data = BinaryDataMatrix(rng.integers(0, 2, size=(4, 3)))
        params = LBMParameters(1, 1, [1.0], [1.0], [[0.5]])
        result = make_fit_result(params, np.zeros(4, dtype=int), np.zeros(3, dtype=int))
        matrix_path, summary_path = export_reordered(data, result, tmp_path / "out")
        assert np.array_equal(load_matrix(matrix_path).values, data.values)
        assert "rho" in (tmp_path / "out_blocks.txt").read_text()

    def test_stable_order_within_groups(self, tmp_path):
        data = BinaryDataMatrix(np.array([
            [1, 1, 0],
            [0, 0, 1],
            [1, 0, 0],
            [0, 1, 1],
        ]))
        params = LBMParameters(2, 1, [0.5, 0.5], [1.0], [[0.4], [0.6]])
        z = np.array([1, 0, 1, 0])
        result = make_fit_result(params, z, np.zeros(3, dtype=int))
        matrix_path, summary_path = export_reordered(data, result, tmp_path / "toy")
        reordered = load_matrix(matrix_path)
        # group 0 rows (1, 3) first in original order, then group 1 rows (0, 2)
        assert np.array_equal(reordered.values, data.values[[1, 3, 0, 2]])
        summary = (tmp_path / "toy_blocks.txt").read_text()
        assert "row-order 2 4 1 3" in summary
        assert "row-group 1: rows 1-2" in summary
        assert "row-group 2: rows 3-4" in summary

    def test_summary_layout(self, tmp_path):
        rng = np.random.default_rng(9)
        data = BinaryDataMatrix(rng.integers(0, 2, size=(5, 4)))
        params = LBMParameters(3, 4, [0.329, 0.342, 0.329], [0.291, 0.264, 0.299, 0.146],
                               rng.uniform(0.2, 0.9, size=(3, 4)))
        z = np.array([0, 1, 2, 0, 1])
        w = np.array([0, 1, 2, 3])
        result = make_fit_result(params, z, w)
        export_reordered(data, result, tmp_path / "jp")
        lines = [line for line in (tmp_path / "jp_blocks.txt").read_text().splitlines()
                 if line and not line.startswith("#")]
        # rho across the top
        head = lines[0].split()
        assert head[0] == "rho"
        assert [float(v) for v in head[1:]] == pytest.approx(params.rho.tolist(), abs=1e-6)
        # pi down the left with the alpha rows beside it
        for k in range(3):
            row = [float(v) for v in lines[1 + k].split()]
            assert row[0] == pytest.approx(params.pi[k], abs=1e-6)
            assert row[1:] == pytest.approx(params.alpha[k].tolist(), abs=1e-6)


class TestCli:
    def run(self, *argv):
        return main([str(a) for a in argv])

    def test_simulate_select_round_trip(self, tmp_path):
        data_path = tmp_path / "data.csv"
        labels_path = tmp_path / "labels.json"
        assert self.run("simulate", "--epsilon", 0.05, "--g", 2, "--m", 2,
                        "--n", 24, "--q", 10, "--seed", 3,
                        "--out", data_path, "--labels-out", labels_path) == 0
        data = load_matrix(data_path)
        assert data.n == 24 and data.q == 10
        labels = json.loads(labels_path.read_text())
        assert len(labels["z"]) == 24 and min(labels["z"]) >= 1

        out = tmp_path / "sel.json"
        assert self.run("select", "--data", data_path, "--g-max", 3, "--m-max", 3,
                        "--restarts", 1, "--seed", 7, "--out", out) == 0
        payload = json.loads(out.read_text())
        assert len(payload["grid"]) == 9
        assert {"best_g", "best_m", "icl", "free_energy", "config", "seed"} <= payload.keys()
        assert payload["config"]["command"] == "select"

    def test_fit_command(self, tmp_path):
        data_path = tmp_path / "d.csv"
        self.run("simulate", "--epsilon", 0.1, "--g", 2, "--m", 2, "--n", 20,
                 "--q", 8, "--seed", 1, "--out", data_path)
        out = tmp_path / "fit.json"
        assert self.run("fit", "--data", data_path, "--g", 2, "--m", 2,
                        "--seed", 5, "--out", out) == 0
        payload = json.loads(out.read_text())
        assert len(payload["z"]) == 20
        assert set(payload["z"]) <= {1, 2}
        assert len(payload["alpha"]) == 2

    def test_payload_determinism_and_threads(self, tmp_path):
        data_path = tmp_path / "d.csv"
        self.run("simulate", "--epsilon", 0.15, "--g", 2, "--m", 2, "--n", 30,
                 "--q", 12, "--seed", 11, "--out", data_path)
        outs = [tmp_path / f"sel{i}.json" for i in range(3)]
        for out, threads in zip(outs, (1, 1, 4)):
            assert self.run("select", "--data", data_path, "--g-max", 3, "--m-max", 3,
                            "--seed", 13, "--threads", threads, "--out", out) == 0
        first = outs[0].read_bytes()
        assert outs[1].read_bytes() == first
        assert outs[2].read_bytes() == first

    def test_tune_t_command(self, tmp_path):
        out = tmp_path / "tune.json"
        assert self.run("tune-t", "--epsilon", 0.05, "--datasets", 2, "--target", "3,4",
                        "--g-max", 4, "--m-max", 5, "--t-cap", 2, "--n", 60, "--q", 24,
                        "--seed", 11, "--out", out) == 0
        payload = json.loads(out.read_text())
        record = payload["records"][0]
        assert record["epsilon"] == 0.05
        assert len(record["stop_t"]) == 2
        assert record["distribution"][0]["t"] == 1

    def test_refmodel_command(self, tmp_path):
        data_path = tmp_path / "d.csv"
        self.run("simulate", "--epsilon", 0.05, "--g", 2, "--m", 2, "--n", 30,
                 "--q", 12, "--seed", 2, "--out", data_path)
        out = tmp_path / "ref.json"
        assert self.run("refmodel", "--data", data_path, "--runs", 3, "--g-max", 2,
                        "--m-max", 2, "--seed", 3, "--out", out) == 0
        payload = json.loads(out.read_text())
        assert payload["runs"] == 3
        assert payload["occurrences"] >= 1
        assert "inter_arrival_summary" in payload

    def test_robustness_command(self, tmp_path):
        out = tmp_path / "rob.json"
        assert self.run("robustness", "--epsilon", 0.1, "--datasets", 1, "--sizes", 20,
                        "--samples-per-size", 2, "--g-max", 3, "--m-max", 4,
                        "--n", 60, "--q", 24, "--seed", 17, "--out", out) == 0
        payload = json.loads(out.read_text())
        cell = payload["cells"][0]
        assert cell["n"] == 20
        assert sum(entry["count"] for entry in cell["pairs"]) == 2

    def test_reorder_command(self, tmp_path):
        data_path = tmp_path / "d.csv"
        self.run("simulate", "--epsilon", 0.1, "--g", 2, "--m", 2, "--n", 18,
                 "--q", 8, "--seed", 23, "--out", data_path)
        assert self.run("reorder", "--data", data_path, "--g", 2, "--m", 2,
                        "--seed", 29, "--out", tmp_path / "re") == 0
        reordered = load_matrix(tmp_path / "re_reordered.csv")
        assert reordered.n == 18 and reordered.q == 8
        assert (tmp_path / "re_blocks.txt").exists()

    def test_missing_file_is_reported(self, tmp_path, capsys):
        code = self.run("select", "--data", tmp_path / "nope.csv", "--out", tmp_path / "o.json")
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_bad_cell_value_is_reported(self, tmp_path, capsys):
        data_path = tmp_path / "bad.csv"
        data_path.write_text("0,2\n1,0\n")
        code = self.run("fit", "--data", data_path, "--g", 1, "--m", 1,
                        "--out", tmp_path / "o.json")
        assert code == 1
        assert "row 1, column 2" in capsys.readouterr().err

    def test_unknown_flag_exits_with_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as info:
            self.run("select", "--data", tmp_path / "d.csv", "--out", tmp_path / "o.json",
                     "--bogus", 1)
        assert info.value.code == 2

    def test_invalid_epsilon_is_reported(self, tmp_path, capsys):
        code = self.run("simulate", "--epsilon", 1.5, "--out", tmp_path / "d.csv")
        assert code == 1
        assert "epsilon" in capsys.readouterr().err
