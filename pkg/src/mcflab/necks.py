"""Cylinder fitting, neck detection, and backward-in-time neck tracking.

A neck fit measures closeness to a round cylinder inside a ball of radius
r/window around a center point: the axis comes from the smallest-eigenvalue
direction of the normal covariance (cylinder normals are perpendicular to
the axis), center and radius from a least-squares circle fit in the
axis-orthogonal projection.  Closeness is the max over supporting vertices
of relative radial deviation plus normal angular deviation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateFit, InsufficientSupport, TooShort, TrackLost

EPS_WINDOW = 0.1           # ball radius = r / EPS_WINDOW, fixed detector window
_ISOTROPY_MAX = 0.3        # lam0/lam1 above this means "no single flat normal direction"


@dataclass
class NeckFit:
    center: np.ndarray          # (3,)
    axis: np.ndarray            # (3,) unit, sign-normalized
    radius: float
    eps_measured: float
    window: float               # the eps_window used (ball radius = radius/window)
    n_support: int
    isotropy_ratio: float
    axial_extent: tuple = (0.0, 0.0)   # inlier coverage along axis, relative to center

    def to_dict(self):
        return {
            "center": [float(v) for v in self.center],
            "axis": [float(v) for v in self.axis],
            "radius": float(self.radius),
            "eps_measured": float(self.eps_measured),
            "window": float(self.window),
            "n_support": int(self.n_support),
            "isotropy_ratio": float(self.isotropy_ratio),
            "axial_extent": [float(v) for v in self.axial_extent],
        }


def _normalize_axis_sign(v):
    """Resolve the Z2 axis ambiguity: positive dot with +z, then +y, then +x."""
    for k in (2, 1, 0):
        if abs(v[k]) > 1e-12:
            return v if v[k] > 0 else -v
    return v


def _circle_fit(a, b):
    """Least-squares circle through points (a, b); returns (a0, b0, r)."""
    A = np.column_stack([2.0 * a, 2.0 * b, np.ones_like(a)])
    rhs = a * a + b * b
    (a0, b0, d), *_ = np.linalg.lstsq(A, rhs, rcond=None)
    r2 = d + a0 * a0 + b0 * b0
    if r2 <= 0:
        raise DegenerateFit("circle fit collapsed", isotropy_ratio=float("nan"))
    return a0, b0, float(np.sqrt(r2))


def fit_cylinder(mesh, seed_vertex, ball_radius, window=EPS_WINDOW, normals=None):
    """Fit a round cylinder to the mesh inside a ball around ``seed_vertex``.

    Raises InsufficientSupport with < 30 supporting vertices and
    DegenerateFit when the normal covariance has no single flat direction
    (e.g. on a sphere), reporting the isotropy ratio lam_min/lam_mid.
    """
    x0 = mesh.vertices[seed_vertex]
    d = np.linalg.norm(mesh.vertices - x0, axis=1)
    sel = np.flatnonzero(d <= ball_radius)
    if len(sel) < 30:
        raise InsufficientSupport(f"only {len(sel)} vertices inside the fitting ball")
    pts = mesh.vertices[sel]
    if normals is None:
        normals = mesh.vertex_normals()
    nrm = normals[sel]

    cov = nrm.T @ nrm / len(nrm)
    lam, vec = np.linalg.eigh(cov)
    iso = float(lam[0] / max(lam[1], 1e-300))
    if iso > _ISOTROPY_MAX:
        raise DegenerateFit(
            f"normal covariance has no flat direction (isotropy ratio {iso:.3f})",
            isotropy_ratio=iso,
        )
    axis = _normalize_axis_sign(vec[:, 0])

    # orthonormal frame perpendicular to the axis
    e1 = np.zeros(3)
    e1[np.argmin(np.abs(axis))] = 1.0
    e1 = np.cross(axis, e1)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)

    a = pts @ e1
    b = pts @ e2
    a0, b0, radius = _circle_fit(a, b)
    axial = pts @ axis
    center = a0 * e1 + b0 * e2 + axial.mean() * axis

    rad_vec = (a - a0)[:, None] * e1 + (b - b0)[:, None] * e2
    rad_len = np.linalg.norm(rad_vec, axis=1)
    rad_dev = np.abs(rad_len - radius) / radius
    with np.errstate(invalid="ignore"):
        rad_unit = rad_vec / np.maximum(rad_len[:, None], 1e-300)
    ang_dev = np.arccos(np.clip(np.einsum("ij,ij->i", nrm, rad_unit), -1.0, 1.0))
    eps = float((rad_dev + ang_dev).max())

    inliers = rad_dev <= 0.2
    rel_axial = axial - axial.mean()
    if inliers.any():
        extent = (float(rel_axial[inliers].min()), float(rel_axial[inliers].max()))
    else:
        extent = (0.0, 0.0)

    return NeckFit(
        center=center,
        axis=axis,
        radius=radius,
        eps_measured=eps,
        window=window,
        n_support=int(len(sel)),
        isotropy_ratio=iso,
        axial_extent=extent,
    )


def detect_necks(mesh, curv, eps_threshold, window=EPS_WINDOW, max_seeds=200):
    """Detect neck regions: cylinder fits with eps_measured <= eps_threshold.

    Seeds are vertices of high cylindricity (|lambda1| small against
    lambda2 > 0), thinned so no two seeds sit within half an estimated
    radius; each seed is fit in a ball of radius (1/H)/window, refit once
    around the fitted center, and accepted fits are deduplicated by center
    proximity (within r/2, lowest eps wins).
    """
    if not 0.0 < eps_threshold < 0.5:
        raise ValueError("eps_threshold must be in (0, 0.5)")
    lam1, lam2, H = curv.lambda1, curv.lambda2, curv.H
    with np.errstate(divide="ignore", invalid="ignore"):
        cyl = np.where(lam2 > 0, 1.0 - np.abs(lam1) / np.maximum(np.abs(lam2), 1e-300), -np.inf)
    cand = np.flatnonzero((lam2 > 0) & (cyl > 0.5) & (H > 0))
    if len(cand) == 0:
        return []
    order = cand[np.argsort(-cyl[cand])]

    normals = mesh.vertex_normals()
    tree = cKDTree(mesh.vertices)

    seeds = []
    for v in order:
        r0 = 1.0 / H[v]
        if any(np.linalg.norm(mesh.vertices[v] - mesh.vertices[s]) < 0.5 / H[s] for s in seeds):
            continue
        seeds.append(int(v))
        if len(seeds) >= max_seeds:
            break

    fits = []
    for v in seeds:
        r0 = 1.0 / H[v]
        try:
            fit = fit_cylinder(mesh, v, r0 / window, window=window, normals=normals)
        except (InsufficientSupport, DegenerateFit):
            continue
        # one refit centered on the fitted cylinder; keep the tighter of the two
        try:
            _, nearest = tree.query(fit.center)
            refit = fit_cylinder(mesh, int(nearest), fit.radius / window, window=window, normals=normals)
            if refit.eps_measured < fit.eps_measured:
                fit = refit
        except (InsufficientSupport, DegenerateFit):
            pass
        if fit.eps_measured <= eps_threshold:
            fits.append(fit)

    fits.sort(key=lambda f: f.eps_measured)
    kept = []
    for fit in fits:
        if any(np.linalg.norm(fit.center - k.center) < 0.5 * min(fit.radius, k.radius) for k in kept):
            continue
        kept.append(fit)
    return kept


@dataclass
class StrongNeckTrack:
    p: np.ndarray               # fixed spatial center of the track
    t_star: float               # estimated extinction time of the neck
    samples: list               # list of (t, NeckFit), times strictly increasing
    max_eps_over_track: float
    window: float
    tol_r: float
    truncated_at: tuple = None  # (time, reason) of the first violation, if any

    def radii(self):
        return np.array([f.radius for _, f in self.samples])

    def times(self):
        return np.array([t for t, _ in self.samples])

    def law_radii(self):
        """Backward radius law sqrt(2 (t_star - t)) at the sample times."""
        return np.sqrt(2.0 * (self.t_star - self.times()))

    def to_dict(self):
        return {
            "p": [float(v) for v in self.p],
            "t_star": float(self.t_star),
            "samples": [{"t": float(t), "fit": f.to_dict()} for t, f in self.samples],
            "max_eps_over_track": float(self.max_eps_over_track),
            "window": float(self.window),
            "tol_r": float(self.tol_r),
            "truncated_at": list(self.truncated_at) if self.truncated_at else None,
        }


def track_strong_neck(history, neck, eps1, lookback, tol_r=0.1):
    """Track a final-snapshot neck backward in time against the radius law.

    The extinction time is estimated from the final fit via
    t_star = t_final + r^2 / 2 (n = 2), so the radius-law comparison at
    earlier snapshots is independent of the data it validates.  At each
    earlier snapshot a cylinder is refit in the ball of radius
    r_law(t)/window around the (fixed) center; the track is truncated at the
    first snapshot violating the eps or radius tolerance.
    """
    window = neck.window
    states = history.states
    t_final = states[-1].time
    tree = cKDTree(states[-1].mesh.vertices)
    _, seed = tree.query(neck.center)
    try:
        fit0 = fit_cylinder(states[-1].mesh, int(seed), neck.radius / window, window=window)
    except (InsufficientSupport, DegenerateFit) as exc:
        raise TrackLost(f"no cylinder at the track start: {exc}", time=t_final, reason=type(exc).__name__)
    p = fit0.center
    t_star = t_final + 0.5 * fit0.radius**2

    samples = [(t_final, fit0)]
    truncated_at = None
    for st in reversed(states[:-1]):
        if st.time < t_final - lookback:
            break
        r_law = float(np.sqrt(2.0 * (t_star - st.time)))
        tree = cKDTree(st.mesh.vertices)
        _, seed = tree.query(p)
        try:
            fit = fit_cylinder(st.mesh, int(seed), r_law / window, window=window)
        except (InsufficientSupport, DegenerateFit) as exc:
            truncated_at = (st.time, type(exc).__name__)
            break
        if fit.eps_measured > eps1:
            truncated_at = (st.time, "eps")
            break
        if abs(fit.radius - r_law) > tol_r * fit.radius:
            truncated_at = (st.time, "radius_law")
            break
        samples.append((st.time, fit))
    samples.reverse()
    return StrongNeckTrack(
        p=p,
        t_star=t_star,
        samples=samples,
        max_eps_over_track=max(f.eps_measured for _, f in samples),
        window=window,
        tol_r=tol_r,
        truncated_at=truncated_at,
    )


def _folded_angle(u, v):
    """Angle between axes modulo the Z2 sign ambiguity, in degrees."""
    c = abs(float(np.dot(u, v)))
    return float(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))


def measure_tilt(track):
    """Total and per-step axis tilt of a neck track, in degrees."""
    if len(track.samples) < 2:
        raise TooShort("tilt needs at least 2 track samples")
    axes = [f.axis for _, f in track.samples]
    profile = [_folded_angle(axes[i], axes[i + 1]) for i in range(len(axes) - 1)]
    total = _folded_angle(axes[0], axes[-1])
    return total, profile
