"""Time integration of mean curvature flow and rescaled mean curvature flow.

Explicit forward Euler with a parabolic CFL step dt = cfl / max|A|^2.  Vertex
correspondence is preserved across the whole history (no remeshing), which the
neck tracker relies on.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .curvature import estimate_curvature
from .errors import EmptyHistory, QualityCollapse, TimeOutOfRange
from .mesh import TriMesh, load_off, save_off


@dataclass
class StepControl:
    cfl: float = 0.1
    dt_max: float = np.inf
    stop_maxA: float = 50.0
    stop_quality: float = 0.02
    # grid-scale stability limit dt <= mesh_cfl * (min local edge length)^2;
    # the curvature-scale CFL alone is unstable once 1/|A| >> h (the vertex
    # update diffuses grid-frequency modes at rate ~1/h^2)
    mesh_cfl: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.cfl < 1.0:
            raise ValueError("cfl must be in (0, 1)")
        if self.dt_max < 0 or self.stop_maxA <= 0 or self.stop_quality <= 0:
            raise ValueError("thresholds must be positive")


@dataclass
class FlowState:
    time: float
    mesh: TriMesh
    curv: object  # CurvatureField


@dataclass
class FlowHistory:
    states: list = field(default_factory=list)
    stop_reason: str = ""

    @property
    def times(self):
        return np.array([s.time for s in self.states])

    def __len__(self):
        return len(self.states)

    def __getitem__(self, i):
        return self.states[i]

    def append(self, state):
        if self.states:
            if state.time <= self.states[-1].time:
                raise ValueError("snapshot times must be strictly increasing")
            if state.mesh.n_vertices != self.states[0].mesh.n_vertices:
                raise ValueError("vertex count must be constant along a history")
        self.states.append(state)

    def state_at(self, t, tol=1e-9):
        """Snapshot at time t, linearly interpolating vertices if needed."""
        if not self.states:
            raise EmptyHistory("history has no snapshots")
        times = self.times
        if t < times[0] - tol or t > times[-1] + tol:
            raise TimeOutOfRange(f"t={t} outside [{times[0]}, {times[-1]}]")
        k = int(np.argmin(np.abs(times - t)))
        if abs(times[k] - t) <= tol:
            return self.states[k]
        hi = int(np.searchsorted(times, t))
        lo = hi - 1
        w = (t - times[lo]) / (times[hi] - times[lo])
        verts = (1 - w) * self.states[lo].mesh.vertices + w * self.states[hi].mesh.vertices
        mesh = TriMesh(verts, self.states[lo].mesh.faces)
        return FlowState(time=t, mesh=mesh, curv=estimate_curvature(mesh))


def make_state(mesh, t=0.0, rings=None):
    return FlowState(time=t, mesh=mesh, curv=estimate_curvature(mesh, rings=rings))


def _check_quality(mesh, ctrl, state):
    q = float(mesh.triangle_quality().min())
    if q < ctrl.stop_quality:
        raise QualityCollapse(
            f"min triangle quality {q:.3e} below {ctrl.stop_quality}",
            state=state,
            min_quality=q,
        )


def mcf_step(state, ctrl, rings=None):
    """One explicit Euler step of mean curvature flow.

    Each vertex moves by dt * Hvec with Hvec = -H * (outward normal) and
    dt = min(dt_max, cfl / max|A|^2).
    """
    curv = state.curv
    max_a2 = max(curv.max_abs_A**2, 1e-300)
    h_min = float(state.mesh.local_edge_length().min())
    dt = min(ctrl.dt_max, ctrl.cfl / max_a2, ctrl.mesh_cfl * h_min**2)
    if dt == 0.0:
        return state
    verts = state.mesh.vertices - dt * curv.H[:, None] * curv.normal
    mesh = TriMesh(verts, state.mesh.faces)
    new = FlowState(time=state.time + dt, mesh=mesh, curv=estimate_curvature(mesh, rings=rings))
    _check_quality(mesh, ctrl, new)
    return new


def rescaled_step(state, center, t_star, ds, ctrl=None, rings=None):
    """One explicit Euler step of rescaled mean curvature flow.

    Vertex update x <- x + ds * (Hvec + (x - center)^perp / 2); the time field
    of the returned state advances by ds in rescaled time.  ``t_star`` fixes
    the change of variables Sigma_s = M_t / sqrt(t_star - t), s = -log(t_star
    - t) relating the trajectory to unrescaled flow; the update itself is
    autonomous and does not depend on it.
    """
    curv = state.curv
    center = np.asarray(center, dtype=np.float64)
    x = state.mesh.vertices - center
    xperp = np.einsum("ij,ij->i", x, curv.normal)[:, None] * curv.normal
    vel = -curv.H[:, None] * curv.normal + 0.5 * xperp
    verts = state.mesh.vertices + ds * vel
    mesh = TriMesh(verts, state.mesh.faces)
    new = FlowState(time=state.time + ds, mesh=mesh, curv=estimate_curvature(mesh, rings=rings))
    if ctrl is not None:
        _check_quality(mesh, ctrl, new)
    return new


def rescaled_cfl_ds(state, cfl=0.1):
    """CFL-limited rescaled time step ds = cfl / max(|A|^2, 1)."""
    return cfl / max(state.curv.max_abs_A**2, 1.0)


def run_flow(initial, ctrl, snapshot_every, t_max=np.inf, max_steps=100000):
    """Integrate mean curvature flow until max|A| >= stop_maxA, quality
    collapse, or t_max; snapshots at the requested cadence plus the final state.
    """
    initial.validate()
    rings = initial.neighbor_rings(2)
    state = make_state(initial, 0.0, rings=rings)
    history = FlowHistory()
    history.append(state)
    if state.curv.max_abs_A >= ctrl.stop_maxA:
        history.stop_reason = "maxA"
        return history
    next_snapshot = snapshot_every
    reason = "t_max"
    for _ in range(max_steps):
        try:
            state = mcf_step(state, ctrl, rings=rings)
        except QualityCollapse as exc:
            state = exc.state
            reason = "quality"
            break
        if state.curv.max_abs_A >= ctrl.stop_maxA:
            reason = "maxA"
            break
        if state.time >= t_max:
            reason = "t_max"
            break
        if state.time >= next_snapshot:
            history.append(state)
            next_snapshot += snapshot_every
    if state is not history.states[-1]:
        history.append(state)
    history.stop_reason = reason
    return history


def run_rescaled(initial, center, ds, n_steps, t_star=0.0, snapshot_every_steps=1, ctrl=None, callback=None):
    """Integrate rescaled mean curvature flow for a fixed number of steps.

    ``callback(state, next_state, ds)`` is invoked after every step and may be
    used to accumulate per-step diagnostics.  Returns a FlowHistory whose time
    field is rescaled time s.
    """
    initial.validate()
    rings = initial.neighbor_rings(2)
    state = make_state(initial, 0.0, rings=rings)
    history = FlowHistory()
    history.append(state)
    for k in range(1, n_steps + 1):
        new = rescaled_step(state, center, t_star, ds, ctrl=ctrl, rings=rings)
        if callback is not None:
            callback(state, new, ds)
        state = new
        if k % snapshot_every_steps == 0:
            history.append(state)
    if state is not history.states[-1]:
        history.append(state)
    history.stop_reason = "n_steps"
    return history


# -- history IO -----------------------------------------------------------


def save_history(history, outdir):
    """Write snapshots as OFF files plus an index.csv of summary rows."""
    os.makedirs(outdir, exist_ok=True)
    rows = []
    for k, st in enumerate(history.states):
        name = f"snapshot_{k:04d}.off"
        save_off(st.mesh, os.path.join(outdir, name))
        rows.append(
            {
                "snapshot": name,
                "time": repr(st.time),
                "area": repr(st.mesh.area()),
                "maxH": repr(st.curv.max_H),
                "maxA": repr(st.curv.max_abs_A),
                "stop_reason": "",
            }
        )
    if rows:
        rows[-1]["stop_reason"] = history.stop_reason
    with open(os.path.join(outdir, "index.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def load_history(outdir):
    history = FlowHistory()
    with open(os.path.join(outdir, "index.csv"), newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        mesh = load_off(os.path.join(outdir, row["snapshot"]))
        history.append(make_state(mesh, float(row["time"])))
    history.stop_reason = rows[-1]["stop_reason"] if rows else ""
    return history
