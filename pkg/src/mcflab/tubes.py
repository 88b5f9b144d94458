"""Assembly of detected necks into tubes with central curves, intrinsic vs
extrinsic distance comparison along the curve, and the tube curvature
integral estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .mesh import surface_integral
from .necks import _folded_angle


@dataclass
class Tube:
    necks: list                  # ordered NeckFit list along the tube
    curve: np.ndarray            # (N, 3) polyline samples of the central curve
    arclength: np.ndarray        # (N,) cumulative arclength along curve
    length: float                # total length including end-neck axial coverage
    tilt_profile: list           # consecutive axis angles, degrees
    closed: bool

    def to_dict(self):
        return {
            "necks": [n.to_dict() for n in self.necks],
            "curve": self.curve.tolist(),
            "length": float(self.length),
            "tilt_profile": [float(a) for a in self.tilt_profile],
            "closed": self.closed,
        }


def _neck_adjacency(necks, window, max_angle):
    """Overlap + alignment adjacency lists over the neck index set."""
    n = len(necks)
    adj = [[] for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            a, b = necks[i], necks[j]
            if np.linalg.norm(a.center - b.center) >= min(a.radius, b.radius) / window:
                continue
            if _folded_angle(a.axis, b.axis) >= max_angle:
                continue
            adj[i].append(j)
            adj[j].append(i)
    return adj


def _order_component(necks, comp, adj):
    """Order a connected neck component into a path by greedy axis walk."""
    comp = list(comp)
    if len(comp) == 1:
        return comp, False
    deg = {i: sum(1 for j in adj[i] if j in comp) for i in comp}
    endpoints = [i for i in comp if deg[i] == 1]
    start = min(endpoints) if endpoints else min(comp)

    def walk(start, direction):
        path = [start]
        visited = {start}
        current = start
        d = direction.copy()
        while True:
            candidates = [j for j in adj[current] if j in comp_set and j not in visited]
            if not candidates:
                break
            steps = [necks[j].center - necks[current].center for j in candidates]
            dist = [float(np.linalg.norm(s)) for s in steps]
            proj = [float(np.dot(s, d)) for s in steps]
            forward = [k for k in range(len(candidates)) if proj[k] > 0]
            if not forward:
                break
            # nearest forward neighbor keeps the walk from leapfrogging
            k = min(forward, key=lambda k: dist[k])
            step = steps[k]
            d = step / max(np.linalg.norm(step), 1e-300)
            current = candidates[k]
            path.append(current)
            visited.add(current)
        return path

    comp_set = set(comp)
    fwd = walk(start, necks[start].axis)
    if len(fwd) < len(comp):
        # pick up the part behind the start and stitch the two half-walks
        back = walk(start, -necks[start].axis)
        path = back[::-1] + fwd[1:]
    else:
        path = fwd
    closed = len(path) > 2 and path[0] in adj[path[-1]] and len(path) == len(comp)
    return path, closed


def _central_curve(centers, closed, samples_per_segment=20):
    """Arclength-parametrized spline polyline through the neck centers."""
    if len(centers) == 1:
        c = centers[0][None, :]
        return c, np.zeros(1)
    pts = np.vstack([centers, centers[:1]]) if closed else centers
    chord = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    u = np.concatenate([[0.0], np.cumsum(chord)])
    if closed:
        spline = CubicSpline(u, pts, bc_type="periodic")
    else:
        spline = CubicSpline(u, pts, bc_type="natural")
    uu = np.linspace(0.0, u[-1], samples_per_segment * (len(pts) - 1) + 1)
    curve = spline(uu)
    seg = np.linalg.norm(np.diff(curve, axis=0), axis=1)
    arclength = np.concatenate([[0.0], np.cumsum(seg)])
    return curve, arclength


def assemble_tubes(mesh, necks, window=None, max_angle=30.0):
    """Group overlapping aligned necks into tubes with central curves.

    Open tube length includes the end necks' axial inlier coverage beyond
    the last centers, so a tube whose centers are confined by the fitting
    window still reports the full axial extent it certifies as tubular.
    """
    if not necks:
        return []
    if window is None:
        window = necks[0].window
    adj = _neck_adjacency(necks, window, max_angle)

    unvisited = set(range(len(necks)))
    comps = []
    while unvisited:
        stack = [unvisited.pop()]
        comp = {stack[0]}
        while stack:
            i = stack.pop()
            for j in adj[i]:
                if j in unvisited:
                    unvisited.discard(j)
                    comp.add(j)
                    stack.append(j)
        comps.append(comp)

    tubes = []
    for comp in comps:
        path, closed = _order_component(necks, comp, adj)
        ordered = [necks[i] for i in path]
        centers = np.array([n.center for n in ordered])
        curve, arclength = _central_curve(centers, closed)
        length = float(arclength[-1]) if len(arclength) > 1 else 0.0
        if not closed and len(ordered) >= 1:
            # extend by the end necks' axial coverage past the end centers
            if len(ordered) > 1:
                d0 = centers[0] - centers[1]
                d1 = centers[-1] - centers[-2]
                d0 /= np.linalg.norm(d0)
                d1 /= np.linalg.norm(d1)
            else:
                d0, d1 = -ordered[0].axis, ordered[0].axis
            first, last = ordered[0], ordered[-1]
            lo0, hi0 = first.axial_extent
            lo1, hi1 = last.axial_extent
            ext_first = hi0 if np.dot(first.axis, d0) > 0 else -lo0
            ext_last = hi1 if np.dot(last.axis, d1) > 0 else -lo1
            length += max(ext_first, 0.0) + max(ext_last, 0.0)
        tilt = [
            _folded_angle(ordered[i].axis, ordered[i + 1].axis)
            for i in range(len(ordered) - 1)
        ]
        tubes.append(
            Tube(
                necks=ordered,
                curve=curve,
                arclength=arclength,
                length=length,
                tilt_profile=tilt,
                closed=closed,
            )
        )
    return tubes


def tube_distance_comparison(tube, cutoff):
    """Max over sampled neck-center pairs of curve distance / chord distance.

    Pairs farther apart than ``cutoff`` extrinsically are skipped.  Returns
    (max_ratio, witness_pair_indices).
    """
    if len(tube.necks) < 3:
        raise ValueError("distance comparison needs a tube with >= 3 necks")
    centers = np.array([n.center for n in tube.necks])
    # arclength position of each center: nearest curve sample
    pos = np.empty(len(centers))
    for i, c in enumerate(centers):
        k = int(np.argmin(np.linalg.norm(tube.curve - c, axis=1)))
        pos[i] = tube.arclength[k]
    total = float(tube.arclength[-1])

    best = 0.0
    witness = (0, 0)
    for i in range(len(centers)):
        for j in range(i + 1, len(centers)):
            chord = float(np.linalg.norm(centers[i] - centers[j]))
            if chord == 0.0 or chord > cutoff:
                continue
            d = abs(pos[i] - pos[j])
            if tube.closed:
                d = min(d, total - d)
            ratio = d / chord
            if ratio > best:
                best, witness = ratio, (i, j)
    return best, witness


def tube_vertex_mask(mesh, tube, radial_tol=0.3):
    """Vertices lying on some neck's model cylinder within its axial coverage."""
    verts = mesh.vertices
    mask = np.zeros(len(verts), dtype=bool)
    for neck in tube.necks:
        rel = verts - neck.center
        axial = rel @ neck.axis
        radial = np.linalg.norm(rel - axial[:, None] * neck.axis, axis=1)
        lo, hi = neck.axial_extent
        mask |= (
            (axial >= lo)
            & (axial <= hi)
            & (np.abs(radial - neck.radius) <= radial_tol * neck.radius)
        )
    return mask


def tube_integral_estimate(mesh, curv, tube):
    """Curvature integral over the tube and its ratio to the tube length.

    Returns (integral of H over the tube's vertex set, integral / L).  On a
    round cylinder the integral is 2*pi*L independently of the radius, so
    the observed ratio is ~2*pi.
    """
    mask = tube_vertex_mask(mesh, tube)
    f = np.where(mask, np.abs(curv.H), 0.0)
    integral = float(surface_integral(mesh, f))
    return integral, integral / tube.length
