from __future__ import annotations

import json
import math
import subprocess
import sys

import numpy as np
import pytest

from cspace.cli import main
from cspace.geometry import BallUnion, RigidObjectModel
from cspace.rotations import save_grid, super_fibonacci
from cspace.scene import Scene, load_bundled, scene_to_dict

BOX = ["--scene", "closed_box", "--so2", "36", "--epsilon", "auto", "--delta", "0"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestBuild:
    def test_demo_scene_has_bounded_class(self, capsys, tmp_path):
        stats = tmp_path / "stats.json"
        code, out, _ = run(capsys, "build", *BOX, "--out-stats", str(stats))
        assert code == 0 and "bounded 1" in out
        data = json.loads(stats.read_text())
        assert data["bounded_classes"] >= 1 and data["orientations"] == 36 and data["delta"] == 0.0

    def test_missing_scene(self, capsys, tmp_path):
        code, _, err = run(capsys, "build", "--scene", str(tmp_path / "nope.json"), "--so2", "36",
                           "--epsilon", "auto", "--delta", "0")
        assert code == 2 and "--scene" in err and "nope.json" in err

    def test_workers_give_identical_graph_file(self, capsys, tmp_path):
        files = []
        for w in (1, 8):
            path = tmp_path / f"g{w}.json"
            assert run(capsys, "build", *BOX, "--workers", str(w), "--out-graph", str(path))[0] == 0
            files.append(path.read_bytes())
        assert files[0] == files[1]

    def test_dot_export(self, capsys, tmp_path):
        path = tmp_path / "g.dot"
        assert run(capsys, "build", *BOX, "--out-graph", str(path), "--format", "dot")[0] == 0
        assert path.read_text().startswith("graph cspace {")

    def test_dump_slice(self, capsys):
        code, out, _ = run(capsys, "build", *BOX, "--dump-slice", "3")
        assert code == 0 and "slice 3 dimension 2" in out

    @pytest.mark.parametrize("argv, field", [
        (["--scene", "closed_box", "--so2", "36", "--delta", "0"], "--epsilon"),
        (["--scene", "closed_box", "--so2", "36", "--epsilon", "auto"], "--delta"),
        (BOX[:4] + ["--epsilon", "-1", "--delta", "0"], "--epsilon"),
        (BOX[:4] + ["--epsilon", "wide", "--delta", "0"], "--epsilon"),
        (BOX[:4] + ["--epsilon", "auto", "--delta", "-0.1"], "--delta"),
        (BOX + ["--workers", "0"], "--workers"),
        (BOX + ["--bounds-inflate", "0"], "--bounds-inflate"),
        (BOX + ["--dump-slice", "99"], "--dump-slice"),
        (["--scene", "closed_box", "--so2", "2", "--epsilon", "auto", "--delta", "0"], "--so2"),
        (["--scene", "closed_box", "--epsilon", "auto", "--delta", "0"], "grid"),
        (["--scene", "ring_link", "--so2", "36", "--epsilon", "auto", "--delta", "0"], "--so2"),
        (["--scene", "ring_link", "--grid-gen-dispersion", "2.0", "--epsilon", "auto", "--delta", "0"],
         "--grid-gen-dispersion"),
    ])
    def test_validation_names_field(self, capsys, argv, field):
        code, _, err = run(capsys, "build", *argv)
        assert code == 2 and field in err

    def test_bad_seed(self, capsys, monkeypatch):
        monkeypatch.setenv("CSPACE_SEED", "x")
        code, _, err = run(capsys, "build", *BOX)
        assert code == 2 and "CSPACE_SEED" in err

    def test_grid_file_errors(self, capsys, tmp_path):
        bad = tmp_path / "grid.txt"
        bad.write_text("1 0 0\n")
        code, _, err = run(capsys, "build", "--scene", "ring_link", "--grid-file", str(bad),
                           "--epsilon", "auto", "--delta", "0")
        assert code == 2 and "grid.txt" in err


class TestQuery:
    def test_cavity_vs_outside(self, capsys):
        code, out, _ = run(capsys, "query", *BOX, "--from", "0 0 | 0.3", "--to", "14 0 | 0")
        assert code == 0 and out.strip() == "DISCONNECTED"

    def test_identical(self, capsys):
        code, out, _ = run(capsys, "query", *BOX, "--from", "0 0 | 0.3", "--to", "0 0 | 0.3")
        assert code == 0 and out.strip() == "POSSIBLY_CONNECTED"

    def test_caged(self, capsys):
        assert run(capsys, "query", *BOX, "--from", "0 0 | 0.3")[1].strip() == "CAGED"
        assert run(capsys, "query", *BOX, "--from", "14 0 | 0")[1].strip() == "NOT_CAGED"

    def test_in_collision(self, capsys):
        x, y = load_bundled("closed_box").obstacles.centers[0]
        code, out, _ = run(capsys, "query", *BOX, "--from", f"{x} {y} | 0", "--to", "14 0 | 0")
        assert code == 0 and out.strip() == "IN_COLLISION_APPROX"

    def test_passage(self, capsys):
        code, out, _ = run(capsys, "query", "--scene", "bugtrap", "--so2", "36", "--epsilon", "auto",
                           "--delta", "0", "--from", "0 0 | 0", "--to", "23.7 0 | 0", "--passage", "0.4")
        assert code == 0 and out.strip() == "PASSAGE<=0.4"

    @pytest.mark.parametrize("start", ["0 0 0 | 1 0 0", "0 0 0 | 2 0 0 0", "0 0 0 | a b c d"])
    def test_malformed_quaternion(self, capsys, start):
        code, _, err = run(capsys, "query", "--scene", "ring_link", "--grid-gen-dispersion", "0.5",
                           "--epsilon", "auto", "--delta", "0", "--from", start)
        assert code == 2 and "--from" in err

    def test_passage_needs_goal(self, capsys):
        code, _, err = run(capsys, "query", *BOX, "--from", "0 0 | 0", "--passage", "0.2")
        assert code == 2 and "--passage" in err


class TestBench:
    def test_table_and_json(self, capsys, tmp_path):
        out_path = tmp_path / "bench.json"
        code, out, _ = run(capsys, "bench", *BOX, "--threads", "1,2", "--out-stats", str(out_path))
        assert code == 0 and "speedup" in out
        data = json.loads(out_path.read_text())
        assert [r["threads"] for r in data["rows"]] == [1, 2]
        assert all(r["identical"] for r in data["rows"])
        assert data["rows"][0]["speedup"] == 1.0

    @pytest.fixture
    def toy_args(self, tmp_path):
        t = (1 + 5 ** 0.5) / 2
        verts = np.array([(a, b * t, 0) for a in (1, -1) for b in (1, -1)], dtype=float)
        verts = np.vstack([np.roll(verts, k, axis=1) for k in range(3)]) * (4.5 / math.hypot(1, t))
        scene = Scene(BallUnion(verts, np.full(12, 2.5)),
                      RigidObjectModel(BallUnion([[-0.1, 0, 0], [0.1, 0, 0]], [1.4, 1.4]), np.zeros(3)), "toy")
        (tmp_path / "toy.json").write_text(json.dumps(scene_to_dict(scene)))
        save_grid(tmp_path / "grid.txt", super_fibonacci(200))
        return ["--scene", str(tmp_path / "toy.json"), "--grid-file", str(tmp_path / "grid.txt"),
                "--epsilon", "auto", "--delta", "0"]

    def _rows(self, capsys, tmp_path, args, threads, repeat):
        out_path = tmp_path / "bench.json"
        assert run(capsys, "bench", *args, "--threads", threads, "--repeat", str(repeat),
                   "--out-stats", str(out_path))[0] == 0
        return json.loads(out_path.read_text())["rows"]

    @pytest.mark.slow
    def test_more_threads_never_slower(self, capsys, tmp_path, toy_args):
        rows = self._rows(capsys, tmp_path, toy_args, "1,2,3,4", 2)
        walls = [r["wall_s"] for r in rows]
        assert all(r["identical"] for r in rows)
        assert all(b <= 1.10 * a for a, b in zip(walls, walls[1:])), walls

    @pytest.mark.slow
    def test_repeat_noise(self, capsys, tmp_path, toy_args):
        a, b = (r["wall_s"] for r in self._rows(capsys, tmp_path, toy_args, "1,1", 1))
        assert abs(a - b) <= 0.25 * min(a, b)

    def test_bad_threads(self, capsys):
        code, _, err = run(capsys, "bench", *BOX, "--threads", "1,x")
        assert code == 2 and "--threads" in err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "cspace", "build", *BOX], capture_output=True, text=True)
    assert res.returncode == 0 and "classes 2" in res.stdout
