"""Depth metric closed forms, alignment behavior, and container round-trips."""

import numpy as np
import pytest

from gatelab.depth import (
    METRIC,
    SCALE_SHIFT,
    DepthFrame,
    depth_metrics,
    read_depth_bin,
    read_depth_csv,
    write_depth_bin,
    write_depth_csv,
)


def gt_frame(seed=0, shape=(8, 10)):
    rng = np.random.default_rng(seed)
    return DepthFrame(values=rng.uniform(0.5, 10.0, shape))


# --- metrics ---------------------------------------------------------------------


@pytest.mark.parametrize("alignment", [METRIC, SCALE_SHIFT])
def test_perfect_prediction(alignment):
    gt = gt_frame()
    absrel, rmse, delta = depth_metrics(DepthFrame(gt.values.copy()), gt, alignment)
    assert absrel == pytest.approx(0.0, abs=1e-12)
    assert rmse == pytest.approx(0.0, abs=1e-12)
    assert delta == 100.0


def test_affine_prediction_absorbed_by_scale_shift():
    gt = gt_frame(1)
    pred = DepthFrame(3.0 * gt.values + 0.5)
    absrel, rmse, delta = depth_metrics(pred, gt, SCALE_SHIFT)
    assert absrel < 1e-10
    assert rmse < 1e-9
    assert delta == 100.0


def test_random_affine_absorbed_over_many_seeds():
    rng = np.random.default_rng(2)
    for _ in range(20):
        gt = DepthFrame(rng.uniform(0.2, 20.0, (6, 6)))
        s, t = rng.uniform(0.1, 5.0), rng.uniform(-2.0, 2.0)
        absrel, _, _ = depth_metrics(DepthFrame(s * gt.values + t), gt, SCALE_SHIFT)
        assert absrel < 1e-10


def test_metric_thirty_percent_overestimate():
    gt = gt_frame(3)
    absrel, rmse, delta = depth_metrics(DepthFrame(1.3 * gt.values), gt, METRIC)
    assert absrel == pytest.approx(0.3, abs=1e-12)
    assert delta == 0.0  # ratio is exactly 1.3 >= 1.25 everywhere
    expected_rmse = np.sqrt(((0.3 * gt.values) ** 2).mean())
    assert rmse == pytest.approx(expected_rmse, abs=1e-12)


def test_metrics_match_per_pixel_loop():
    rng = np.random.default_rng(4)
    gt = DepthFrame(rng.uniform(1.0, 5.0, (5, 5)))
    pred = DepthFrame(gt.values * rng.uniform(0.7, 1.6, (5, 5)))
    absrel, rmse, delta = depth_metrics(pred, gt, METRIC)
    errs, sqs, hits = [], [], 0
    for r in range(5):
        for c in range(5):
            p, g = pred.values[r, c], gt.values[r, c]
            errs.append(abs(p - g) / g)
            sqs.append((p - g) ** 2)
            if max(p / g, g / p) < 1.25:
                hits += 1
    assert absrel == pytest.approx(sum(errs) / 25, abs=1e-12)
    assert rmse == pytest.approx(np.sqrt(sum(sqs) / 25), abs=1e-12)
    assert delta == pytest.approx(hits * 4.0, abs=1e-12)


def test_scale_shift_never_beats_metric_backwards():
    # the fitted affine is the least-squares optimum, so its RMSE cannot
    # exceed the raw comparison
    rng = np.random.default_rng(5)
    for _ in range(10):
        gt = DepthFrame(rng.uniform(0.5, 8.0, (7, 7)))
        pred = DepthFrame(gt.values + rng.normal(0.0, 0.8, (7, 7)))
        _, rmse_metric, _ = depth_metrics(pred, gt, METRIC)
        _, rmse_fit, _ = depth_metrics(pred, gt, SCALE_SHIFT)
        assert rmse_fit <= rmse_metric + 1e-12


def test_masks_restrict_comparison():
    gt_vals = np.full((2, 2), 2.0)
    gt_vals[0, 0] = np.nan
    pred_vals = np.full((2, 2), 2.0)
    pred_vals[1, 1] = np.nan
    pred_vals[0, 1] = 4.0  # only pixel that differs but both valid
    absrel, _, _ = depth_metrics(DepthFrame(pred_vals), DepthFrame(gt_vals), METRIC)
    assert absrel == pytest.approx(1.0 / 2, abs=1e-12)  # mean over 2 joint pixels


def test_metric_error_paths():
    gt = gt_frame(6)
    with pytest.raises(ValueError):
        depth_metrics(DepthFrame(np.full((8, 10), np.nan)), gt, METRIC)
    with pytest.raises(ValueError):
        depth_metrics(DepthFrame(np.ones((3, 3))), gt, METRIC)  # shape mismatch
    bad_gt = DepthFrame(np.full((2, 2), -1.0))
    with pytest.raises(ValueError):
        depth_metrics(DepthFrame(np.ones((2, 2))), bad_gt, METRIC)
    with pytest.raises(ValueError):
        depth_metrics(DepthFrame(np.ones((2, 2))), gt_frame(7, (2, 2)), "affine")


def test_constant_prediction_degenerate_fit():
    gt = gt_frame(8, (4, 4))
    with pytest.raises(ValueError):
        depth_metrics(DepthFrame(np.full((4, 4), 2.0)), gt, SCALE_SHIFT)


# --- containers ------------------------------------------------------------------


def test_binary_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    values = rng.uniform(0.1, 9.0, (5, 7)).astype(np.float32).astype(float)
    values[2, 3] = np.nan
    frame = DepthFrame(values)
    path = tmp_path / "d.dpth"
    write_depth_bin(path, frame)
    back = read_depth_bin(path)
    assert back.height == 5 and back.width == 7
    np.testing.assert_array_equal(back.mask, frame.mask)
    np.testing.assert_array_equal(back.values[back.mask], frame.values[frame.mask])


def test_binary_rejects_garbage(tmp_path):
    p = tmp_path / "bad.dpth"
    p.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ValueError, match="magic"):
        read_depth_bin(p)
    p.write_bytes(b"DPTH" + np.uint32(2).tobytes() + np.uint32(2).tobytes() + b"\x00" * 4)
    with pytest.raises(ValueError, match="bytes"):
        read_depth_bin(p)


def test_csv_round_trip(tmp_path):
    values = np.array([[1.25, np.nan, 3.5], [0.875, 2.0, np.nan]])
    frame = DepthFrame(values)
    path = tmp_path / "d.csv"
    write_depth_csv(path, frame)
    back = read_depth_csv(path)
    np.testing.assert_array_equal(back.mask, frame.mask)
    np.testing.assert_array_equal(back.values[back.mask], frame.values[frame.mask])


def test_csv_rejects_ragged(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("1.0,2.0\n3.0\n")
    with pytest.raises(ValueError, match="ragged"):
        read_depth_csv(p)


def test_depth_frame_validation():
    with pytest.raises(ValueError):
        DepthFrame(values=np.zeros(4))
    with pytest.raises(ValueError):
        DepthFrame(values=np.zeros((2, 2)), mask=np.ones((3, 3), dtype=bool))
    f = DepthFrame(values=np.array([[1.0, np.inf], [np.nan, 2.0]]))
    assert f.mask.tolist() == [[True, False], [False, True]]
