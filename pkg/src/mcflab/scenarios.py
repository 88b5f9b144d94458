"""Deterministic mesh generators for the standard experiment scenarios.

Generators: sphere (icosphere), capped_cylinder, dumbbell, torus, bent_tube,
wiggly_tube, from_file.  Every generator returns a closed, consistently
oriented, outward-facing TriMesh plus metadata recording the analytic ground
truth where one exists.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .errors import InvalidParams, SelfIntersecting
from .mesh import TriMesh, load_mesh


@dataclass
class Scenario:
    name: str
    generator: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    check_embedded: bool = True


# -- icosphere ------------------------------------------------------------


def icosphere(level=4, radius=1.0, center=(0.0, 0.0, 0.0)):
    """Subdivided icosahedron projected to the sphere; 10*4^level + 2 vertices."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    for _ in range(level):
        verts_list = list(verts)
        cache = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts_list[i] + verts_list[j]
                m = m / np.linalg.norm(m)
                cache[key] = len(verts_list)
                verts_list.append(m)
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab = midpoint(a, b)
            bc = midpoint(b, c)
            ca = midpoint(c, a)
            new_faces.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]])
        verts = np.array(verts_list)
        faces = np.array(new_faces, dtype=np.int64)
    verts = verts * radius + np.asarray(center, dtype=np.float64)
    return TriMesh(verts, faces)


# -- surface of revolution -------------------------------------------------


def revolve(z, rho, n_theta, pole_lo, pole_hi):
    """Closed surface of revolution around the z-axis.

    ``z``/``rho`` are profile samples ordered by increasing z with rho > 0;
    single vertices are added at ``(0, 0, pole_lo)`` and ``(0, 0, pole_hi)``.
    """
    z = np.asarray(z, dtype=np.float64)
    rho = np.asarray(rho, dtype=np.float64)
    if np.any(rho <= 0):
        raise InvalidParams("profile radii must be positive")
    n_rows = len(z)
    theta = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
    ct, st = np.cos(theta), np.sin(theta)
    ring = np.empty((n_rows, n_theta, 3))
    ring[:, :, 0] = rho[:, None] * ct[None, :]
    ring[:, :, 1] = rho[:, None] * st[None, :]
    ring[:, :, 2] = z[:, None]
    verts = np.concatenate(
        [[[0.0, 0.0, pole_lo]], ring.reshape(-1, 3), [[0.0, 0.0, pole_hi]]]
    )
    idx = lambda i, j: 1 + i * n_theta + (j % n_theta)
    faces = []
    for j in range(n_theta):
        faces.append([0, idx(0, j + 1), idx(0, j)])
    for i in range(n_rows - 1):
        for j in range(n_theta):
            faces.append([idx(i, j), idx(i, j + 1), idx(i + 1, j)])
            faces.append([idx(i, j + 1), idx(i + 1, j + 1), idx(i + 1, j)])
    top = len(verts) - 1
    for j in range(n_theta):
        faces.append([top, idx(n_rows - 1, j), idx(n_rows - 1, j + 1)])
    return TriMesh(verts, np.array(faces, dtype=np.int64))


# -- tubes along centerlines ----------------------------------------------


def _rmf_frames(points):
    """Rotation-minimizing frames along a polyline (double reflection)."""
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    tang = np.gradient(points, axis=0)
    tang /= np.linalg.norm(tang, axis=1, keepdims=True)
    # initial normal: any vector orthogonal to tang[0]
    a = np.zeros(3)
    a[np.argmin(np.abs(tang[0]))] = 1.0
    r = np.cross(tang[0], a)
    r /= np.linalg.norm(r)
    normals = np.empty_like(tang)
    normals[0] = r
    for i in range(n - 1):
        v1 = points[i + 1] - points[i]
        c1 = v1 @ v1
        rl = normals[i] - (2.0 / c1) * (v1 @ normals[i]) * v1
        tl = tang[i] - (2.0 / c1) * (v1 @ tang[i]) * v1
        v2 = tang[i + 1] - tl
        c2 = v2 @ v2
        if c2 < 1e-30:
            normals[i + 1] = rl
        else:
            normals[i + 1] = rl - (2.0 / c2) * (v2 @ rl) * v2
        normals[i + 1] -= (normals[i + 1] @ tang[i + 1]) * tang[i + 1]
        normals[i + 1] /= np.linalg.norm(normals[i + 1])
    binormals = np.cross(tang, normals)
    return tang, normals, binormals


def tube_mesh(centerline, radius, n_theta=32, n_cap=6, radii=None, closed=False):
    """Tube of given radius around a polyline centerline.

    Open centerlines get hemispherical end caps; ``closed=True`` identifies
    the ends (the first and last centerline points must then coincide up to
    numerics and are merged).  ``radii`` may give a per-ring radius.
    """
    centerline = np.asarray(centerline, dtype=np.float64)
    n = len(centerline)
    if radii is None:
        radii = np.full(n, float(radius))
    else:
        radii = np.asarray(radii, dtype=np.float64)
    tang, nrm, binrm = _rmf_frames(centerline)
    theta = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
    ct, st = np.cos(theta)[None, :, None], np.sin(theta)[None, :, None]

    if closed:
        # drop duplicated last sample, connect last ring back to first
        m = n - 1
        rings = (
            centerline[:m, None, :]
            + radii[:m, None, None] * (ct[:, :, :] * nrm[:m, None, :] + st * binrm[:m, None, :])
        )
        verts = rings.reshape(-1, 3)
        idx = lambda i, j: (i % m) * n_theta + (j % n_theta)
        faces = []
        for i in range(m):
            for j in range(n_theta):
                faces.append([idx(i, j), idx(i, j + 1), idx(i + 1, j)])
                faces.append([idx(i, j + 1), idx(i + 1, j + 1), idx(i + 1, j)])
        return TriMesh(verts, np.array(faces, dtype=np.int64))

    # open tube: rings, then hemispherical caps built from extra rings + poles
    phis = (np.arange(1, n_cap) / n_cap) * (np.pi / 2.0)
    lo_rows = []
    lo_radii = []
    for ph in phis[::-1]:
        lo_rows.append(centerline[0] - tang[0] * radii[0] * np.sin(ph))
        lo_radii.append(radii[0] * np.cos(ph))
    hi_rows = []
    hi_radii = []
    for ph in phis:
        hi_rows.append(centerline[-1] + tang[-1] * radii[-1] * np.sin(ph))
        hi_radii.append(radii[-1] * np.cos(ph))
    row_centers = np.array(lo_rows + list(centerline) + hi_rows)
    row_radii = np.array(lo_radii + list(radii) + hi_radii)
    row_n = np.concatenate([np.tile(nrm[0], (len(lo_rows), 1)), nrm, np.tile(nrm[-1], (len(hi_rows), 1))])
    row_b = np.concatenate([np.tile(binrm[0], (len(lo_rows), 1)), binrm, np.tile(binrm[-1], (len(hi_rows), 1))])
    n_rows = len(row_centers)
    rings = (
        row_centers[:, None, :]
        + row_radii[:, None, None] * (ct * row_n[:, None, :] + st * row_b[:, None, :])
    )
    pole_lo = centerline[0] - tang[0] * radii[0]
    pole_hi = centerline[-1] + tang[-1] * radii[-1]
    verts = np.concatenate([[pole_lo], rings.reshape(-1, 3), [pole_hi]])
    idx = lambda i, j: 1 + i * n_theta + (j % n_theta)
    faces = []
    for j in range(n_theta):
        faces.append([0, idx(0, j + 1), idx(0, j)])
    for i in range(n_rows - 1):
        for j in range(n_theta):
            faces.append([idx(i, j), idx(i, j + 1), idx(i + 1, j)])
            faces.append([idx(i, j + 1), idx(i + 1, j + 1), idx(i + 1, j)])
    top = len(verts) - 1
    for j in range(n_theta):
        faces.append([top, idx(n_rows - 1, j), idx(n_rows - 1, j + 1)])
    return TriMesh(verts, np.array(faces, dtype=np.int64))


def capped_cylinder(radius=0.2, half_length=2.0, n_theta=32, n_z=None, n_cap=6, axis="z"):
    """Straight cylinder of given barrel half-length with hemispherical caps."""
    if n_z is None:
        n_z = max(8, int(round(2 * half_length / (2 * np.pi * radius / n_theta))))
    zs = np.linspace(-half_length, half_length, n_z)
    centerline = np.zeros((n_z, 3))
    centerline[:, 2] = zs
    m = tube_mesh(centerline, radius, n_theta=n_theta, n_cap=n_cap)
    if axis == "x":
        m = m.rotated(_axis_rotation("y", np.pi / 2))
    elif axis == "y":
        m = m.rotated(_axis_rotation("x", -np.pi / 2))
    return m


def _axis_rotation(axis, angle):
    c, s = np.cos(angle), np.sin(angle)
    if axis == "x":
        return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
    if axis == "y":
        return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def torus(r=0.25, R=1.0, n_theta=None, n_phi=None):
    """Torus of revolution around the z-axis (tube radius r, ring radius R)."""
    if r >= R:
        raise InvalidParams(f"torus requires r < R, got r={r}, R={R}")
    if n_theta is None:
        n_theta = 32
    if n_phi is None:
        # phi spacing about 5x the theta spacing is enough: the curvature in
        # the ring direction is ~1/R, far below the 1/r of the cross-section
        n_phi = min(256, max(64, int(round(n_theta * R / (5.0 * r)))))
    th = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
    ph = np.linspace(0.0, 2.0 * np.pi, n_phi, endpoint=False)
    T, P = np.meshgrid(th, ph, indexing="ij")
    verts = np.stack(
        [
            (R + r * np.cos(T)) * np.cos(P),
            (R + r * np.cos(T)) * np.sin(P),
            r * np.sin(T),
        ],
        axis=2,
    ).reshape(-1, 3)
    idx = lambda i, j: (i % n_theta) * n_phi + (j % n_phi)
    faces = []
    for i in range(n_theta):
        for j in range(n_phi):
            faces.append([idx(i, j), idx(i, j + 1), idx(i + 1, j)])
            faces.append([idx(i, j + 1), idx(i + 1, j + 1), idx(i + 1, j)])
    return TriMesh(verts, np.array(faces, dtype=np.int64))


# -- dumbbell -------------------------------------------------------------


def _dumbbell_profile(ball_radius, neck_radius, c):
    """Join a cosh neck rho = a*cosh(z/c) C^1 to spherical caps of radius R.

    Returns (z_junction, ball_center_z).  The junction solves
    a*cosh(z/c) * sqrt(1 + (a/c)^2 sinh^2(z/c)) = R.
    """
    a, R = neck_radius, ball_radius

    def g(z):
        rho = a * np.cosh(z / c)
        m = (a / c) * np.sinh(z / c)
        return rho * np.sqrt(1.0 + m * m) - R

    if g(0.0) >= 0:
        raise InvalidParams("neck radius must be smaller than ball radius")
    z_hi = c
    while g(z_hi) < 0:
        z_hi *= 1.5
        if z_hi > 100 * c:
            raise InvalidParams("dumbbell profile failed to reach the ball radius")
    zj = brentq(g, 0.0, z_hi)
    rho_j = a * np.cosh(zj / c)
    m = (a / c) * np.sinh(zj / c)
    zc = zj + m * rho_j
    return zj, zc


def dumbbell(ball_radius=1.0, neck_radius=0.15, separation=3.0, n_theta=48, n_neck=None, n_cap=None):
    """Two balls joined by a mean convex cosh-profile neck.

    The cosh width c is solved so the ball centers sit ``separation`` apart;
    the profile is C^1 at the junctions and strictly mean convex (the cosh
    neck with c > a has H > 0, and the spherical caps have H = 2/R).
    """
    a, R = float(neck_radius), float(ball_radius)

    def center_gap(c):
        _, zc = _dumbbell_profile(R, a, c)
        return 2.0 * zc - separation

    c_lo, c_hi = 1.01 * a, 50.0 * a
    if center_gap(c_hi) < 0:
        raise InvalidParams("separation too large for this neck/ball combination")
    if center_gap(c_lo) > 0:
        raise InvalidParams("separation too small for this neck/ball combination")
    c = brentq(center_gap, c_lo, c_hi)
    zj, zc = _dumbbell_profile(R, a, c)

    if n_neck is None:
        n_neck = max(24, int(round(2 * zj / (2 * np.pi * a / n_theta))))
    if n_cap is None:
        n_cap = max(24, n_theta // 2)

    # neck rows, graded toward the waist
    u = np.linspace(-1.0, 1.0, n_neck)
    zn = zj * np.sign(u) * np.abs(u) ** 1.3
    rn = a * np.cosh(zn / c)

    # spherical cap rows: polar angle from the junction down to near the pole
    phi_j = np.arctan2(a * np.cosh(zj / c), zj - zc)  # angle at junction from +z pole axis
    phis = np.linspace(phi_j, 0.0, n_cap + 1)[1:-1]  # exclude junction row and pole
    z_cap_hi = zc + R * np.cos(phis)
    r_cap_hi = R * np.sin(phis)

    z = np.concatenate([(-z_cap_hi)[::-1], zn, z_cap_hi[::-1]])
    rho = np.concatenate([r_cap_hi[::-1], rn, r_cap_hi[::-1]])
    order = np.argsort(z)
    z, rho = z[order], rho[order]
    mesh = revolve(z, rho, n_theta, pole_lo=-(zc + R), pole_hi=zc + R)
    meta = {
        "ball_radius": R,
        "neck_radius": a,
        "neck_width_c": c,
        "junction_z": zj,
        "ball_center_z": zc,
    }
    return mesh, meta


# -- bent and wiggly tubes ------------------------------------------------


def bent_tube(tube_radius=0.1, bend_radius=1.0, arm_length=1.0, n_theta=32, n_center=None):
    """90-degree elbow: straight arm, quarter-circle bend, straight arm."""
    if n_center is None:
        step = 2 * np.pi * tube_radius / n_theta
        n_center = max(32, int(round((2 * arm_length + np.pi / 2 * bend_radius) / step)))
    # centerline in the xz-plane: along -x, bend, then along +z
    L_arm = arm_length
    L_bend = np.pi / 2 * bend_radius
    total = 2 * L_arm + L_bend
    s = np.linspace(0.0, total, n_center)
    pts = np.empty((n_center, 3))
    for i, si in enumerate(s):
        if si < L_arm:
            pts[i] = [-(L_arm - si) - 0, -0, 0]
            pts[i] = [si - L_arm - 0, 0, 0]  # from (-L_arm,0,0) to (0,0,0)
        elif si < L_arm + L_bend:
            ang = (si - L_arm) / bend_radius
            pts[i] = [bend_radius * np.sin(ang), 0, bend_radius * (1 - np.cos(ang))]
        else:
            t = si - L_arm - L_bend
            pts[i] = [bend_radius, 0, bend_radius + t]
    return tube_mesh(pts, tube_radius, n_theta=n_theta)


def wiggly_tube(tube_radius=0.15, length=6.0, amplitude=0.2, wavelength=3.0, octaves=2, n_theta=32, seed=0, n_center=None):
    """Tube around a z-axis centerline with k octaves of sinusoidal wiggle."""
    octaves = int(octaves)
    if octaves < 1 or octaves > 4:
        raise InvalidParams("octaves must be in 1..4")
    rng = np.random.default_rng(seed)
    if n_center is None:
        step = 2 * np.pi * tube_radius / n_theta
        n_center = max(64, int(round(length / step)))
    zs = np.linspace(-length / 2, length / 2, n_center)
    x = np.zeros_like(zs)
    y = np.zeros_like(zs)
    # taper so the ends are straight (keeps caps clean)
    taper = np.cos(np.clip(np.abs(zs) / (length / 2), 0, 1) * np.pi / 2) ** 2
    for k in range(octaves):
        amp = amplitude * 0.5**k
        wl = wavelength * 0.5**k
        phx, phy = rng.uniform(0, 2 * np.pi, size=2)
        x += amp * np.sin(2 * np.pi * zs / wl + phx) * taper
        y += amp * np.sin(2 * np.pi * zs / wl + phy) * taper
    pts = np.stack([x, y, zs], axis=1)
    return tube_mesh(pts, tube_radius, n_theta=n_theta)


# -- embeddedness check ----------------------------------------------------


def _tri_tri_overlap(t1, t2):
    """Triangle-triangle intersection via the separating axis test.

    Touching within a tiny tolerance counts as non-intersecting so that
    numerically adjacent bands of clean meshes do not trigger.
    """
    scale = max(np.abs(t1).max(), np.abs(t2).max(), 1e-30)
    tol = 1e-9 * scale
    e1 = [t1[(i + 1) % 3] - t1[i] for i in range(3)]
    e2 = [t2[(i + 1) % 3] - t2[i] for i in range(3)]
    axes = [np.cross(e1[0], e1[1]), np.cross(e2[0], e2[1])]
    axes.extend(np.cross(a, b) for a in e1 for b in e2)
    for ax in axes:
        n = np.linalg.norm(ax)
        if n < 1e-18 * scale * scale:
            continue
        ax = ax / n
        p1 = t1 @ ax
        p2 = t2 @ ax
        if p1.max() <= p2.min() + tol or p2.max() <= p1.min() + tol:
            return False
    return True


def check_embedded(mesh):
    """Raise SelfIntersecting if any two non-adjacent faces intersect."""
    v = mesh.vertices
    f = mesh.faces
    tri = v[f]
    centroids = tri.mean(axis=1)
    radii = np.linalg.norm(tri - centroids[:, None, :], axis=2).max(axis=1)
    tree = cKDTree(centroids)
    rmax = radii.max()
    pairs = tree.query_pairs(2.0 * rmax, output_type="ndarray")
    if len(pairs) == 0:
        return
    # prune by bounding spheres, then by axis-aligned boxes shrunk a hair so
    # merely touching neighbors drop out
    d = np.linalg.norm(centroids[pairs[:, 0]] - centroids[pairs[:, 1]], axis=1)
    pairs = pairs[d <= radii[pairs[:, 0]] + radii[pairs[:, 1]]]
    lo = tri.min(axis=1)
    hi = tri.max(axis=1)
    tol = 1e-9 * max(np.abs(v).max(), 1.0)
    i, j = pairs[:, 0], pairs[:, 1]
    overlap = np.all((lo[i] < hi[j] - tol) & (lo[j] < hi[i] - tol), axis=1)
    pairs = pairs[overlap]
    # drop pairs sharing a vertex (always geometric neighbors)
    shared = np.zeros(len(pairs), dtype=bool)
    for a in range(3):
        for b in range(3):
            shared |= f[pairs[:, 0], a] == f[pairs[:, 1], b]
    pairs = pairs[~shared]
    for i, j in pairs:
        if _tri_tri_overlap(tri[i], tri[j]):
            raise SelfIntersecting(f"faces {i} and {j} intersect")


# -- dispatch -------------------------------------------------------------


def generate(scenario):
    """Generate the mesh for a scenario; returns (TriMesh, metadata)."""
    p = dict(scenario.params)
    gen = scenario.generator
    meta = {"generator": gen, "params": dict(p), "seed": scenario.seed}
    if gen == "sphere":
        mesh = icosphere(
            level=p.get("level", 4),
            radius=p.get("radius", 1.0),
            center=p.get("center", (0.0, 0.0, 0.0)),
        )
        meta["radius"] = p.get("radius", 1.0)
    elif gen == "capped_cylinder":
        mesh = capped_cylinder(
            radius=p.get("radius", 0.2),
            half_length=p.get("half_length", 2.0),
            n_theta=p.get("n_theta", 32),
            n_z=p.get("n_z"),
            n_cap=p.get("n_cap", 6),
            axis=p.get("axis", "z"),
        )
        meta["radius"] = p.get("radius", 0.2)
        meta["half_length"] = p.get("half_length", 2.0)
    elif gen == "dumbbell":
        mesh, dmeta = dumbbell(
            ball_radius=p.get("ball_radius", 1.0),
            neck_radius=p.get("neck_radius", 0.15),
            separation=p.get("separation", 3.0),
            n_theta=p.get("n_theta", 48),
        )
        meta.update(dmeta)
    elif gen == "torus":
        mesh = torus(
            r=p.get("r", 0.25),
            R=p.get("R", 1.0),
            n_theta=p.get("n_theta"),
            n_phi=p.get("n_phi"),
        )
        meta["r"] = p.get("r", 0.25)
        meta["R"] = p.get("R", 1.0)
        meta["centerline_length"] = 2 * np.pi * p.get("R", 1.0)
    elif gen == "bent_tube":
        mesh = bent_tube(
            tube_radius=p.get("tube_radius", 0.1),
            bend_radius=p.get("bend_radius", 1.0),
            arm_length=p.get("arm_length", 1.0),
            n_theta=p.get("n_theta", 32),
        )
        meta.update({k: p.get(k) for k in ("tube_radius", "bend_radius", "arm_length")})
    elif gen == "wiggly_tube":
        mesh = wiggly_tube(
            tube_radius=p.get("tube_radius", 0.15),
            length=p.get("length", 6.0),
            amplitude=p.get("amplitude", 0.2),
            wavelength=p.get("wavelength", 3.0),
            octaves=p.get("octaves", 2),
            n_theta=p.get("n_theta", 32),
            seed=scenario.seed,
        )
    elif gen == "from_file":
        path = p.get("path")
        if not path:
            raise InvalidParams("from_file scenario requires a 'path' parameter")
        try:
            mesh = load_mesh(path)
        except FileNotFoundError as exc:
            raise InvalidParams(f"mesh file not found: {path}") from exc
    else:
        raise InvalidParams(f"unknown generator {gen!r}")
    mesh.validate()
    if scenario.check_embedded:
        check_embedded(mesh)
    return mesh, meta
