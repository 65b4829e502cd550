import math

import numpy as np
import pytest

import flow

G0 = 9.80665


def quat_matrix(q):
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def random_quat(rng):
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)


def static_stream(q, n):
    r = quat_matrix(q)
    inc = math.radians(60.0)
    accel = np.tile(r.T @ np.array([0.0, 0.0, -G0]), (n, 1))
    mag = np.tile(r.T @ np.array([math.cos(inc), 0.0, math.sin(inc)]), (n, 1))
    return accel, np.zeros((n, 3)), mag


def angle_between(a, b):
    return 2.0 * math.degrees(math.acos(min(1.0, abs(float(np.dot(a, b))))))


def test_rotation_matrix_matches_formula():
    rng = np.random.default_rng(1)
    for _ in range(50):
        q = random_quat(rng)
        m = flow.rotation_matrix(q)
        assert np.allclose(m, quat_matrix(q), atol=1e-12)
        assert np.allclose(m @ m.T, np.eye(3), atol=1e-9)


def test_static_attitude_recovered():
    rng = np.random.default_rng(2)
    for _ in range(10):
        q = random_quat(rng)
        qs = flow.mahony_run(*static_stream(q, 60))
        assert qs.shape == (60, 4)
        assert angle_between(qs[-1], q) < 2.0


def test_mc_transform_shapes_and_gravity():
    q = random_quat(np.random.default_rng(3))
    out = flow.mc_transform(*static_stream(q, 90))
    assert out["trimmed"] == 30
    assert out["global"].shape == (60, 13)
    assert out["local"].shape == (60, 9)
    assert np.allclose(out["global"][:, :3], [0.0, 0.0, -G0], atol=1e-6)


def test_shuffle_columns_are_permutations():
    r = flow.gen_shuffle_matrix(16, 5, 9)
    assert r.shape == (16, 5)
    for j in range(5):
        assert sorted(r[:, j]) == list(range(16))


def test_metrics():
    cm = flow.confusion([0, 1, 1, 0], [0, 1, 0, 0], 2)
    assert cm.tolist() == [[2, 1], [0, 1]]
    assert flow.accuracy(cm) == pytest.approx(0.75)
    # per-class F1 0.8 and 2/3, weights 3/4 and 1/4
    assert flow.weighted_f1(cm) == pytest.approx(0.75 * 0.8 + 0.25 * 2 / 3)


def test_errors_carry_kind():
    with pytest.raises(flow.FlowError) as info:
        flow.rotation_matrix(np.array([2.0, 0.0, 0.0, 0.0]))
    assert info.value.kind == "invalid-input"
    with pytest.raises(flow.FlowError):
        flow.config_text({"epochs": "0"})
    with pytest.raises(ValueError):
        flow.mahony_run(np.zeros((4, 2)), np.zeros((4, 3)), np.zeros((4, 3)))


def test_small_louo_sweep(tmp_path):
    settings = {
        "epochs": "2",
        "synthetic.duration_s": "8",
        "output_dir": str(tmp_path),
        "eval_every": "0",
    }
    summary = flow.prepare_summary(settings)
    assert summary["subjects"] == [1, 2, 3]
    assert summary["channels"] == 22
    report = flow.run_louo(settings)
    assert report["completed"] == 3
    accs = [row["accuracy"] for row in report["rows"]]
    assert report["average_accuracy"] == pytest.approx(sum(accs) / 3)
    for row in report["rows"]:
        assert row["confusion"].sum() == row["test_windows"]
