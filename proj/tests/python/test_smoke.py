import json
import math
import os
import subprocess

import numpy as np
import pytest

import latent_rqa as lr


def test_distance_examples():
    assert lr.cosine_distance([3, 4], [3, 4]) == 0.0
    assert lr.cosine_distance([1, 0], [0, 1]) == pytest.approx(1.0)
    assert lr.cosine_distance([1, 0], [-1, 0]) == pytest.approx(2.0)


def test_constant_trajectory_closed_form():
    traj = np.ones((10, 4), dtype=np.float32)
    m = lr.analyze(traj)
    assert m["epsilon"] == 0.0
    assert m["rr"] == 1.0
    assert m["entr"] == pytest.approx(math.log(7), abs=1e-12)
    assert m["det"] == pytest.approx(84 / 90, abs=1e-12)


def test_three_row_matrix():
    traj = np.array([[1, 0], [0, 1], [1, 0]], dtype=np.float32)
    r = lr.recurrence_matrix(traj, 0.5)
    assert r.tolist() == [[1, 0, 1], [0, 1, 0], [1, 0, 1]]


def test_identity_matrix_is_degenerate():
    m = lr.quantify_matrix(np.eye(6, dtype=np.uint8))
    assert m["degenerate"] and m["det"] == 0.0 and m["rr"] == 0.0


def test_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    a = rng.standard_normal((20, 8)).astype(np.float32)
    path = tmp_path / "t.ltrj"
    lr.write_trajectory(a, path)
    back, truncated = lr.read_trajectory(path)
    assert not truncated
    assert np.array_equal(a, back)
    assert os.path.getsize(path) == 28 + a.nbytes


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.ltrj"
    path.write_bytes(b"XXXX" + bytes(48))
    with pytest.raises(lr.FormatError):
        lr.read_trajectory(path)


def test_misc_scalars():
    assert lr.search_space_size(4, 4) == 331776
    assert lr.linear_slope([0, 1, 1, 2]) == pytest.approx(0.6)
    assert lr.dfa_exponent([1.0] * 8) is None
    stat, p = lr.mcnemar(10, 2)
    assert p == pytest.approx(0.03857, abs=1e-4)
    stat, p = lr.mcnemar(40, 10)
    assert stat == pytest.approx(16.82, abs=1e-2)


def test_temporal_feature_names():
    rng = np.random.default_rng(2)
    f = lr.temporal_features(rng.standard_normal((400, 16)).astype(np.float32))
    assert list(f) == [
        "det_mean", "det_std", "det_slope", "det_dfa",
        "lam_mean", "lam_std", "lam_slope", "lam_dfa",
        "entr_mean", "entr_std", "entr_slope", "entr_dfa",
    ]


def test_pipeline(tmp_path):
    spec = {
        "corpus": {
            "classes": [
                {"config": "2x2", "weights": {"periodic": 1}},
                {"config": "3x3", "weights": {"noise": 1}},
            ],
            "groups_per_class": 8,
            "traces_per_group": 2,
            "n_steps": 200,
            "dim": 8,
            "segment_len": 100,
            "seed": 5,
        }
    }
    assert lr.synth(json.dumps(spec), tmp_path / "c") == 32
    out = tmp_path / "global.csv"
    assert lr.build_features(tmp_path / "c" / "manifest.jsonl", "global", out) == []
    report = json.loads(lr.classify(out, "complexity", "rf", 8, 1))
    assert report["classes"] == ["2x2", "3x3"]
    assert report["mean_balanced_accuracy"] == 1.0
    assert len(report["predictions"]) == 32


@pytest.mark.skipif("RQA_BIN" not in os.environ, reason="CLI binary not provided")
def test_cli_plot(tmp_path):
    traj = np.array([[1, 0], [0, 1], [1, 0]], dtype=np.float32)
    lr.write_trajectory(traj, tmp_path / "t.ltrj")
    img = tmp_path / "t.pgm"
    subprocess.run([os.environ["RQA_BIN"], "plot", str(tmp_path / "t.ltrj"), "-o", str(img),
                    "--epsilon", "0.5"], check=True)
    data = img.read_bytes()
    assert data.startswith(b"P5\n3 3\n255\n")
    assert data[-9:].count(0) == 5
