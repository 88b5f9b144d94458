"""Triangle mesh representation, validation, IO, and surface integrals.

The mesh is a closed oriented triangle surface in R^3.  Faces are ordered
counter-clockwise when seen from outside, so ``cross(v1-v0, v2-v0)`` points
along the outward normal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components as _cc

from .errors import (
    DegenerateFace,
    DisconnectedMesh,
    LengthMismatch,
    NonManifoldMesh,
)

_AREA_EPS = 1e-14


@dataclass
class TriMesh:
    """Closed oriented triangle surface.

    Parameters
    ----------
    vertices : (V, 3) float array of vertex positions.
    faces : (F, 3) int array of vertex indices, consistently oriented.
    """

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValueError("vertices must be (V, 3)")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ValueError("faces must be (F, 3)")

    # -- basic quantities -------------------------------------------------

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_faces(self):
        return self.faces.shape[0]

    def face_corner_vectors(self):
        v = self.vertices
        f = self.faces
        return v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]]

    def face_cross(self):
        e1, e2 = self.face_corner_vectors()
        return np.cross(e1, e2)

    def face_areas(self):
        return 0.5 * np.linalg.norm(self.face_cross(), axis=1)

    def face_normals(self):
        c = self.face_cross()
        n = np.linalg.norm(c, axis=1, keepdims=True)
        return c / np.maximum(n, _AREA_EPS)

    def area(self):
        return float(self.face_areas().sum())

    def vertex_areas(self):
        """Barycentric vertex areas: one third of incident face areas."""
        fa = self.face_areas()
        va = np.zeros(self.n_vertices)
        np.add.at(va, self.faces.ravel(), np.repeat(fa / 3.0, 3))
        return va

    def vertex_normals(self):
        """Area-weighted vertex normals (unit vectors)."""
        c = self.face_cross()  # 2 * area * unit normal
        vn = np.zeros_like(self.vertices)
        for k in range(3):
            np.add.at(vn, self.faces[:, k], c)
        norms = np.linalg.norm(vn, axis=1, keepdims=True)
        return vn / np.maximum(norms, _AREA_EPS)

    def edges(self):
        """Undirected unique edges as a (E, 2) sorted-index array."""
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def edge_lengths(self):
        e = self.edges()
        return np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)

    def mean_edge_length(self):
        return float(self.edge_lengths().mean())

    def local_edge_length(self):
        """Per-vertex mean length of incident edges."""
        e = self.edges()
        lengths = np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)
        total = np.zeros(self.n_vertices)
        count = np.zeros(self.n_vertices)
        for k in range(2):
            np.add.at(total, e[:, k], lengths)
            np.add.at(count, e[:, k], 1.0)
        return total / np.maximum(count, 1.0)

    def euler_characteristic(self):
        return self.n_vertices - len(self.edges()) + self.n_faces

    def signed_volume(self):
        """Signed enclosed volume; positive for outward-oriented surfaces."""
        v = self.vertices
        f = self.faces
        return float(np.einsum("ij,ij->i", v[f[:, 0]], np.cross(v[f[:, 1]], v[f[:, 2]])).sum() / 6.0)

    def triangle_quality(self):
        """Per-face quality 4*sqrt(3)*area / sum of squared edges, in (0, 1]."""
        v = self.vertices
        f = self.faces
        l2 = (
            np.sum((v[f[:, 1]] - v[f[:, 0]]) ** 2, axis=1)
            + np.sum((v[f[:, 2]] - v[f[:, 1]]) ** 2, axis=1)
            + np.sum((v[f[:, 0]] - v[f[:, 2]]) ** 2, axis=1)
        )
        return 4.0 * np.sqrt(3.0) * self.face_areas() / np.maximum(l2, _AREA_EPS)

    # -- adjacency --------------------------------------------------------

    def vertex_adjacency(self):
        e = self.edges()
        data = np.ones(len(e), dtype=bool)
        a = sparse.coo_matrix(
            (data, (e[:, 0], e[:, 1])), shape=(self.n_vertices, self.n_vertices)
        )
        return (a + a.T).tocsr()

    def neighbor_rings(self, depth=2):
        """List of neighbor index arrays within graph distance ``depth`` (self excluded)."""
        adj = self.vertex_adjacency()
        reach = adj.copy()
        power = adj
        for _ in range(depth - 1):
            power = (power @ adj).astype(bool)
            reach = (reach + power).astype(bool)
        reach = reach.tolil()
        out = []
        for i in range(self.n_vertices):
            nbrs = np.asarray(reach.rows[i], dtype=np.int64)
            out.append(nbrs[nbrs != i])
        return out

    def connected_component_labels(self):
        n, labels = _cc(self.vertex_adjacency(), directed=False)
        return n, labels

    def split_components(self):
        """Split into per-component meshes; returns list of (TriMesh, vertex index map)."""
        n, labels = self.connected_component_labels()
        out = []
        for c in range(n):
            vmask = labels == c
            vidx = np.nonzero(vmask)[0]
            remap = -np.ones(self.n_vertices, dtype=np.int64)
            remap[vidx] = np.arange(len(vidx))
            fmask = vmask[self.faces].all(axis=1)
            out.append((TriMesh(self.vertices[vidx], remap[self.faces[fmask]]), vidx))
        return out

    # -- validation -------------------------------------------------------

    def validate(self):
        """Check TriMesh invariants; raises on violation."""
        if not np.all(np.isfinite(self.vertices)):
            raise ValueError("non-finite vertex positions")
        if self.n_faces == 0:
            raise ValueError("empty face list")
        if self.faces.min() < 0 or self.faces.max() >= self.n_vertices:
            raise ValueError("face index out of range")
        areas = self.face_areas()
        if np.any(areas <= _AREA_EPS):
            bad = int(np.argmin(areas))
            raise DegenerateFace(f"face {bad} has vanishing area {areas[bad]:.3e}")
        # A closed, consistently oriented surface has every directed edge
        # exactly once and its reverse exactly once.
        f = self.faces
        de = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        keys = de[:, 0] * self.n_vertices + de[:, 1]
        uniq, counts = np.unique(keys, return_counts=True)
        if np.any(counts > 1):
            raise NonManifoldMesh("a directed edge appears more than once (inconsistent orientation or non-manifold)")
        rev = de[:, 1] * self.n_vertices + de[:, 0]
        if not np.isin(rev, uniq).all():
            raise NonManifoldMesh("an edge is not shared by exactly two faces (boundary or non-manifold)")
        return self

    def require_connected(self):
        n, _ = self.connected_component_labels()
        if n != 1:
            raise DisconnectedMesh(f"mesh has {n} components", n_components=n)
        return self

    # -- transforms -------------------------------------------------------

    def scaled(self, s):
        return TriMesh(self.vertices * float(s), self.faces)

    def translated(self, offset):
        return TriMesh(self.vertices + np.asarray(offset, dtype=np.float64), self.faces)

    def rotated(self, rot):
        return TriMesh(self.vertices @ np.asarray(rot, dtype=np.float64).T, self.faces)

    def copy(self):
        return TriMesh(self.vertices.copy(), self.faces.copy())


def surface_integral(mesh, field):
    """Integrate a per-vertex scalar field with barycentric vertex areas.

    Exact for constant fields.
    """
    field = np.asarray(field, dtype=np.float64)
    if field.shape != (mesh.n_vertices,):
        raise LengthMismatch(
            f"field has shape {field.shape}, expected ({mesh.n_vertices},)"
        )
    return float(field @ mesh.vertex_areas())


# -- IO -------------------------------------------------------------------


def save_off(mesh, path):
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.n_vertices} {mesh.n_faces} 0\n")
        for p in mesh.vertices:
            fh.write(f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}\n")
        for f in mesh.faces:
            fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")


def load_off(path):
    with open(path) as fh:
        tokens = []
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                tokens.extend(line.split())
    if tokens[0] != "OFF":
        raise ValueError("not an OFF file")
    nv, nf = int(tokens[1]), int(tokens[2])
    pos = 4
    verts = np.array(tokens[pos : pos + 3 * nv], dtype=np.float64).reshape(nv, 3)
    pos += 3 * nv
    faces = []
    for _ in range(nf):
        cnt = int(tokens[pos])
        if cnt != 3:
            raise ValueError(f"only triangles supported, got a {cnt}-gon")
        faces.append([int(tokens[pos + 1]), int(tokens[pos + 2]), int(tokens[pos + 3])])
        pos += cnt + 1
    return TriMesh(verts, np.array(faces, dtype=np.int64))


def load_obj(path):
    verts = []
    faces = []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [p.split("/")[0] for p in parts[1:]]
                if len(idx) != 3:
                    raise ValueError(f"only triangles supported, got a {len(idx)}-gon")
                faces.append([int(i) - 1 for i in idx])
    return TriMesh(np.array(verts), np.array(faces, dtype=np.int64))


def load_mesh(path):
    path = str(path)
    if path.lower().endswith(".obj"):
        return load_obj(path)
    return load_off(path)
