"""Cylinder fitting, neck detection, and backward tracking oracles."""

import numpy as np
import pytest

from mcflab.curvature import estimate_curvature
from mcflab.errors import DegenerateFit, InsufficientSupport, TooShort
from mcflab.flow import FlowHistory, make_state
from mcflab.necks import (
    _folded_angle,
    detect_necks,
    fit_cylinder,
    measure_tilt,
    track_strong_neck,
)
from mcflab.scenarios import capped_cylinder


def _mid_barrel_vertex(mesh):
    return int(np.argmin(np.abs(mesh.vertices[:, 2]) + (np.hypot(mesh.vertices[:, 0], mesh.vertices[:, 1]) < 1e-9)))


def test_fit_exact_cylinder():
    m = capped_cylinder(radius=0.3, half_length=2.0, n_theta=48)
    fit = fit_cylinder(m, _mid_barrel_vertex(m), ball_radius=1.0, window=0.3)
    assert fit.radius == pytest.approx(0.3, abs=1e-9)
    assert abs(fit.axis[2]) > np.cos(np.radians(0.1))
    assert np.hypot(fit.center[0], fit.center[1]) < 1e-9
    assert fit.eps_measured < 0.02
    assert fit.axial_extent[0] < -0.9 and fit.axial_extent[1] > 0.9


def test_fit_sphere_degenerate(sphere3):
    with pytest.raises(DegenerateFit) as exc:
        fit_cylinder(sphere3, 0, ball_radius=1.5)
    assert exc.value.isotropy_ratio > 0.3


def test_fit_insufficient_support(sphere3):
    with pytest.raises(InsufficientSupport):
        fit_cylinder(sphere3, 0, ball_radius=1e-6)


def test_detect_necks_on_cylinder():
    m = capped_cylinder(radius=0.1, half_length=2.0, n_theta=32)
    c = estimate_curvature(m)
    necks = detect_necks(m, c, eps_threshold=0.1)
    assert len(necks) >= 1
    for n in necks:
        # model identity: a neck of radius r has H ~ 1/r
        assert abs(n.radius * 10.0 - 1.0) < 0.1
        assert n.eps_measured <= 0.1
        assert abs(n.axis[2]) > np.cos(np.radians(2.0))
    # dedupe: accepted centers are pairwise separated
    for i, a in enumerate(necks):
        for b in necks[i + 1 :]:
            assert np.linalg.norm(a.center - b.center) >= 0.5 * min(a.radius, b.radius)


def test_detect_necks_none_on_sphere(sphere3):
    c = estimate_curvature(sphere3)
    assert detect_necks(sphere3, c, eps_threshold=0.1) == []


def test_detect_necks_threshold_validation(sphere3):
    c = estimate_curvature(sphere3)
    with pytest.raises(ValueError):
        detect_necks(sphere3, c, eps_threshold=0.9)


def _shrinking_cylinder_history(t_p=0.5, times=(0.2, 0.26, 0.32, 0.38), n_theta=32):
    hist = FlowHistory()
    for t in times:
        r = np.sqrt(2.0 * (t_p - t))
        mesh = capped_cylinder(radius=r, half_length=12.0, n_theta=n_theta, n_z=100)
        hist.append(make_state(mesh, t))
    hist.stop_reason = "synthetic"
    return hist


def test_track_shrinking_cylinder_radius_law():
    hist = _shrinking_cylinder_history()
    final = hist.states[-1]
    necks = detect_necks(final.mesh, final.curv, eps_threshold=0.1)
    assert necks
    track = track_strong_neck(hist, necks[0], eps1=0.2, lookback=0.2)
    assert len(track.samples) == len(hist.states)
    assert track.truncated_at is None
    # extinction time recovered from the final fit alone
    assert track.t_star == pytest.approx(0.5, abs=1e-3)
    resid = np.abs(track.radii() / track.law_radii() - 1.0)
    assert resid.max() < 0.01


def test_track_tilt_straight(sphere3):
    hist = _shrinking_cylinder_history()
    final = hist.states[-1]
    necks = detect_necks(final.mesh, final.curv, eps_threshold=0.1)
    track = track_strong_neck(hist, necks[0], eps1=0.2, lookback=0.2)
    total, profile = measure_tilt(track)
    assert total < 0.5
    assert len(profile) == len(track.samples) - 1


def test_measure_tilt_too_short():
    hist = _shrinking_cylinder_history(times=(0.38,))
    final = hist.states[-1]
    necks = detect_necks(final.mesh, final.curv, eps_threshold=0.1)
    track = track_strong_neck(hist, necks[0], eps1=0.2, lookback=0.2)
    with pytest.raises(TooShort):
        measure_tilt(track)


def test_folded_angle_sign_invariance():
    u = np.array([0.0, 0.0, 1.0])
    v = np.array([np.sin(0.2), 0.0, np.cos(0.2)])
    assert _folded_angle(u, v) == pytest.approx(np.degrees(0.2), abs=1e-9)
    assert _folded_angle(u, -v) == pytest.approx(np.degrees(0.2), abs=1e-9)
