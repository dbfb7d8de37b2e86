import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from armphone.arm import (
    DeviceProfile,
    calibrate_profile,
    check_structure,
    fit_calibration,
    identity_map,
    pixel_to_workspace,
    plan_swipe,
    plan_tap,
    trace_of,
    workspace_to_pixel,
)
from armphone.errors import CalibrationError, OutOfReachError

IDENTITY = np.array([[1.0, 0, 0], [0, 1.0, 0]])


def apply(affine, p):
    return tuple(np.asarray(affine) @ np.array([p[0], p[1], 1.0]))


def test_identity_correspondences():
    pairs = [((0, 0), (0, 0)), ((100, 0), (100, 0)), ((0, 100), (0, 100))]
    cmap = fit_calibration(pairs, 0, 5)
    np.testing.assert_allclose(cmap.affine, IDENTITY, atol=1e-12)
    assert cmap.residual == pytest.approx(0, abs=1e-12)


def test_scale_correspondences():
    pts = [(0, 0), (100, 0), (0, 100), (250, 400)]
    cmap = fit_calibration([(p, (0.1 * p[0], 0.1 * p[1])) for p in pts], 0, 5)
    np.testing.assert_allclose(cmap.affine, 0.1 * IDENTITY, atol=1e-12)
    assert cmap.residual <= 1e-9


def test_collinear_points_rejected():
    pairs = [((i, 2 * i), (i, i)) for i in range(5)]
    with pytest.raises(CalibrationError, match="collinear"):
        fit_calibration(pairs, 0, 5)
    with pytest.raises(CalibrationError):
        fit_calibration(pairs[:2], 0, 5)


def grid_search_sse(pixels, targets, center, half_width, steps=9):
    """Best sum of squared errors over a grid of affine rows around ``center``.

    X and Y rows are independent, so each is searched separately.
    """
    design = np.column_stack([pixels, np.ones(len(pixels))])
    best = 0.0
    for axis in range(2):
        axes = [np.linspace(c - w, c + w, steps) for c, w in zip(center[axis], half_width)]
        grid = np.array(list(itertools.product(*axes)))  # (steps^3, 3)
        err = design @ grid.T - targets[:, [axis]]
        best += float(np.min(np.sum(err ** 2, axis=0)))
    return best


@pytest.mark.parametrize("seed", range(5))
def test_noisy_fit_against_grid_search(seed):
    rng = np.random.default_rng(seed)
    true = np.array([[0.07, 0.001, 20.0], [-0.0005, 0.07, 15.0]])
    pixels = rng.uniform([0, 0], [1080, 2400], size=(9, 2))
    clean = np.array([apply(true, p) for p in pixels])
    noisy = clean + rng.uniform(-0.5, 0.5, size=clean.shape)
    cmap = fit_calibration(list(zip(map(tuple, pixels), map(tuple, noisy))), 0, 5)
    assert cmap.residual <= 1.0

    design = np.column_stack([pixels, np.ones(len(pixels))])
    fit_sse = float(np.sum((design @ cmap.affine.T - noisy) ** 2))
    grid_sse = grid_search_sse(pixels, noisy, true, (0.002, 0.002, 1.0))
    # least squares can only do better than any grid point
    assert fit_sse <= grid_sse + 1e-9
    # and the fit recovers the transform well enough to place taps within 1 mm
    for p in [(0, 0), (1079, 2399), (540, 1200)]:
        assert np.linalg.norm(np.subtract(apply(cmap.affine, p), apply(true, p))) < 1.0


def test_pixel_to_workspace_examples():
    assert pixel_to_workspace(identity_map(), (176, 1450)) == (176.0, 1450.0)
    scale = fit_calibration([((0, 0), (0, 0)), ((10, 0), (1, 0)), ((0, 10), (0, 1))], 0, 5)
    assert pixel_to_workspace(scale, (100, 200)) == pytest.approx((10.0, 20.0), abs=1e-12)


def test_out_of_reach():
    cmap = identity_map(bounds=(0, 0, 100, 100))
    assert pixel_to_workspace(cmap, (100, 100)) == (100.0, 100.0)
    plan_tap(cmap, (100, 0))
    with pytest.raises(OutOfReachError):
        pixel_to_workspace(cmap, (100.5, 50))
    with pytest.raises(OutOfReachError):
        plan_tap(cmap, (-1, 0))


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1079), st.floats(0, 2399))
def test_inverse_round_trip(cmap, x, y):
    back = workspace_to_pixel(cmap, pixel_to_workspace(cmap, (x, y)))
    assert back == pytest.approx((x, y), abs=1e-6)


def test_tap_template():
    cmap = identity_map(z_contact=0, z_hover=10)
    traj = plan_tap(cmap, (540, 1200))
    assert [(w.x, w.y) for w in traj.waypoints] == [(540, 1200)] * 4
    assert [w.z for w in traj.waypoints] == [10, 0, 0, 10]
    assert traj.waypoints[1].dwell_ms == 80
    check_structure(traj, cmap)


def test_tap_trace_marks_only_dwell_samples_as_contact():
    cmap = identity_map()
    trace = trace_of(plan_tap(cmap, (10, 20)), cmap)
    assert [s.contact for s in trace.samples] == [False, True, True, False]
    assert trace.samples[2].t_ms - trace.samples[1].t_ms >= 80


def test_swipe_structure():
    cmap = identity_map()
    traj = plan_swipe(cmap, (540, 1600), (540, 800))
    check_structure(traj, cmap)
    contact = [w for w in traj.waypoints if w.z == cmap.z_contact]
    assert len(contact) - 2 >= 8
    ys = [w.y for w in contact]
    assert all(b < a for a, b in zip(ys, ys[1:]))
    with pytest.raises(ValueError, match="degenerate"):
        plan_swipe(cmap, (5, 5), (5, 5))


def test_check_structure_rejects_broken_contact():
    cmap = identity_map()
    traj = plan_swipe(cmap, (0, 0), (100, 0))
    wps = list(traj.waypoints)
    wps[4] = type(wps[4])(wps[4].x, wps[4].y, cmap.z_hover)
    with pytest.raises(AssertionError, match="contiguous"):
        check_structure(type(traj)(tuple(wps), "swipe"), cmap)


def test_profile_round_trip_and_calibrate(tmp_path, profile_path):
    doc = json.loads(profile_path.read_text())
    profile = calibrate_profile(doc)
    assert profile.residual <= 1e-6
    out = tmp_path / "p.json"
    profile.save(out)
    again = DeviceProfile.load(out)
    np.testing.assert_allclose(again.calibration().affine, profile.calibration().affine)
    assert again.screen == (1080, 2400)
