"""Flow integration: shrinking-sphere law, monotonicity, avoidance,
rescaled fixed points, history bookkeeping and I/O."""

import numpy as np
import pytest

from mcflab.errors import TimeOutOfRange
from mcflab.flow import (
    FlowHistory,
    StepControl,
    load_history,
    make_state,
    run_flow,
    run_rescaled,
    save_history,
)
from mcflab.scenarios import capped_cylinder, icosphere


@pytest.fixture(scope="module")
def sphere_history():
    ctrl = StepControl(cfl=0.1, stop_maxA=20.0)
    return run_flow(icosphere(level=3), ctrl, snapshot_every=0.02)


def _mean_radius(mesh):
    return float(np.linalg.norm(mesh.vertices, axis=1).mean())


def test_sphere_radius_law(sphere_history):
    for st in sphere_history.states:
        if st.time > 0.22:
            continue
        expected = np.sqrt(max(1.0 - 4.0 * st.time, 0.0))
        assert _mean_radius(st.mesh) == pytest.approx(expected, rel=0.01)


def test_sphere_stop_reason(sphere_history):
    assert sphere_history.stop_reason == "maxA"
    assert sphere_history.states[-1].curv.max_abs_A >= 20.0


def test_area_monotone_nonincreasing(sphere_history):
    areas = [st.mesh.area() for st in sphere_history.states]
    rises = np.diff(areas)
    assert rises.max() <= 1e-6 * areas[0]


def test_avoidance_order_preserved():
    # disjoint spheres stay disjoint: the inner one shrinks strictly faster
    ctrl = StepControl(stop_maxA=10.0)
    inner = run_flow(icosphere(level=2, radius=0.6), ctrl, snapshot_every=0.01, t_max=0.05)
    outer = run_flow(icosphere(level=2, radius=1.0), ctrl, snapshot_every=0.01, t_max=0.05)
    for t in np.linspace(0.0, 0.05, 6):
        ri = _mean_radius(inner.state_at(t).mesh)
        ro = _mean_radius(outer.state_at(t).mesh)
        assert ri < ro


def test_state_at_interpolates(sphere_history):
    times = sphere_history.times
    t = 0.5 * (times[0] + times[1])
    st = sphere_history.state_at(t)
    assert times[0] < st.time < times[1]
    r = _mean_radius(st.mesh)
    r0 = _mean_radius(sphere_history.states[0].mesh)
    r1 = _mean_radius(sphere_history.states[1].mesh)
    assert min(r0, r1) <= r <= max(r0, r1)


def test_state_at_out_of_range(sphere_history):
    with pytest.raises(TimeOutOfRange):
        sphere_history.state_at(sphere_history.times[-1] + 1.0)


def test_history_append_requires_increasing_time():
    h = FlowHistory()
    m = icosphere(level=1)
    h.append(make_state(m, 0.0))
    with pytest.raises(ValueError):
        h.append(make_state(m, 0.0))


def test_step_control_validation():
    with pytest.raises(ValueError):
        StepControl(cfl=0.0)
    with pytest.raises(ValueError):
        StepControl(stop_maxA=-1.0)


def test_history_roundtrip(tmp_path, sphere_history):
    save_history(sphere_history, tmp_path)
    back = load_history(tmp_path)
    assert len(back) == len(sphere_history)
    assert back.stop_reason == sphere_history.stop_reason
    np.testing.assert_array_equal(
        back.states[-1].mesh.vertices, sphere_history.states[-1].mesh.vertices
    )
    np.testing.assert_allclose(back.times, sphere_history.times, rtol=0, atol=0)


def test_rescaled_sphere_fixed_point():
    # the sphere of radius 2 is stationary under the rescaled update
    m = icosphere(level=3, radius=2.0)
    edge = m.mean_edge_length()
    ds = 0.01
    hist = run_rescaled(m, (0.0, 0.0, 0.0), ds, 20)
    for prev, cur in zip(hist.states, hist.states[1:]):
        disp = np.linalg.norm(cur.mesh.vertices - prev.mesh.vertices, axis=1).max()
        assert disp < 2.0 * edge * ds


def test_rescaled_sphere_fixed_point_unstable():
    # the stationary sphere radius 2 is unstable: dr/ds = r/2 - 2/r, so a
    # smaller sphere shrinks away and a larger one grows away
    small = run_rescaled(icosphere(level=2, radius=1.8), (0.0, 0.0, 0.0), 0.02, 30)
    large = run_rescaled(icosphere(level=2, radius=2.2), (0.0, 0.0, 0.0), 0.02, 30)
    assert _mean_radius(small.states[-1].mesh) < 1.8
    assert _mean_radius(large.states[-1].mesh) > 2.2


def test_rescaled_cylinder_fixed_point_interior():
    # radius sqrt(2) cylinder is stationary away from the caps
    m = capped_cylinder(radius=np.sqrt(2.0), half_length=6.0, n_theta=32)
    interior = np.abs(m.vertices[:, 2]) < 4.0
    edge = m.mean_edge_length()
    ds = 0.01
    hist = run_rescaled(m, (0.0, 0.0, 0.0), ds, 20)
    for prev, cur in zip(hist.states, hist.states[1:]):
        disp = np.linalg.norm(
            cur.mesh.vertices[interior] - prev.mesh.vertices[interior], axis=1
        ).max()
        assert disp < 2.0 * edge * ds
