"""Per-vertex curvature estimation via local quadric fits.

At each vertex a quadric height field over the tangent plane of the
area-weighted vertex normal is fit to the 2-ring neighborhood, and the shape
operator is recovered from the first and second fundamental forms of the
graph.  Principal curvatures are signed so that a convex surface with outward
normals has positive curvature (unit sphere: lambda1 = lambda2 = 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class CurvatureField:
    """Per-vertex curvature data for a mesh snapshot.

    lambda1 <= lambda2 are the principal curvatures, H = lambda1 + lambda2,
    normA = sqrt(lambda1^2 + lambda2^2).  ``shape_operator`` is the symmetric
    2x2 operator in the orthonormal tangent frame ``(tangent_u, tangent_v)``.
    """

    normal: np.ndarray           # (V, 3) unit outward normals
    tangent_u: np.ndarray        # (V, 3)
    tangent_v: np.ndarray        # (V, 3)
    shape_operator: np.ndarray   # (V, 2, 2)
    lambda1: np.ndarray          # (V,)
    lambda2: np.ndarray          # (V,)
    H: np.ndarray                # (V,)
    normA: np.ndarray            # (V,)
    vertex_area: np.ndarray      # (V,)

    @property
    def max_abs_A(self):
        return float(self.normA.max())

    @property
    def max_H(self):
        return float(self.H.max())


def _tangent_frames(normals):
    """Orthonormal tangent bases for each unit normal."""
    n = normals
    # pick the global axis least aligned with each normal
    a = np.zeros_like(n)
    idx = np.argmin(np.abs(n), axis=1)
    a[np.arange(len(n)), idx] = 1.0
    u = np.cross(n, a)
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    v = np.cross(n, u)
    return u, v


def estimate_curvature(mesh, rings=None):
    """Estimate the curvature field of a validated mesh.

    ``rings`` may be precomputed ``mesh.neighbor_rings(2)`` to amortize
    adjacency across repeated calls on the same connectivity.
    """
    mesh.validate()
    V = mesh.n_vertices
    if rings is None:
        rings = mesh.neighbor_rings(2)
    normals = mesh.vertex_normals()
    tu, tv = _tangent_frames(normals)

    kmax = max(len(r) for r in rings)
    # padded neighbor table; padding with the vertex itself yields zero rows
    # that do not perturb the normal equations
    nbr = np.tile(np.arange(V)[:, None], (1, kmax))
    for i, r in enumerate(rings):
        nbr[i, : len(r)] = r

    p = mesh.vertices
    d = p[nbr] - p[:, None, :]              # (V, k, 3)
    u = np.einsum("vkj,vj->vk", d, tu)
    w = np.einsum("vkj,vj->vk", d, tv)
    h = np.einsum("vkj,vj->vk", d, normals)

    # local scale normalization for conditioning
    scale = np.sqrt(np.maximum(np.einsum("vk,vk->v", u, u) + np.einsum("vk,vk->v", w, w), 1e-300) / kmax)
    u = u / scale[:, None]
    w = w / scale[:, None]
    h = h / scale[:, None]

    # basis [u^2/2, u*w, w^2/2, u, w]; h = a u^2/2 + b u w + c w^2/2 + d u + e w
    B = np.stack([0.5 * u * u, u * w, 0.5 * w * w, u, w], axis=2)  # (V, k, 5)
    ata = np.einsum("vki,vkj->vij", B, B)
    atb = np.einsum("vki,vk->vi", B, h)
    ata += 1e-12 * np.eye(5)
    coef = np.linalg.solve(ata, atb[:, :, None])[:, :, 0]  # (V, 5)
    a, b, c, du, dv = (coef[:, i] for i in range(5))
    # undo scale: second derivatives pick up 1/scale, gradients are invariant
    a = a / scale
    b = b / scale
    c = c / scale

    # fundamental forms of the graph z = h(u, w) with upward normal along +n
    g = np.sqrt(1.0 + du * du + dv * dv)
    E = 1.0 + du * du
    F = du * dv
    G = 1.0 + dv * dv
    L = a / g
    M = b / g
    N = c / g

    # symmetric shape operator I^{-1/2} II I^{-1/2}; sign flipped so convex
    # surfaces with outward normals get positive curvature
    II = np.empty((V, 2, 2))
    II[:, 0, 0] = L
    II[:, 0, 1] = II[:, 1, 0] = M
    II[:, 1, 1] = N
    I = np.empty((V, 2, 2))
    I[:, 0, 0] = E
    I[:, 0, 1] = I[:, 1, 0] = F
    I[:, 1, 1] = G
    I_inv_sqrt = _sym2_inv_sqrt(I)
    S = -np.einsum("vij,vjk,vkl->vil", I_inv_sqrt, II, I_inv_sqrt)

    lam1, lam2 = _sym2_eigvals(S)
    H = lam1 + lam2
    normA = np.sqrt(lam1 * lam1 + lam2 * lam2)

    # the fitted graph normal (n - h_u tu - h_w tv)/g is second-order accurate
    # where the area-weighted seed normal is only first-order; using it keeps
    # normal motions from acquiring a spurious tangential component
    n_fit = (normals - du[:, None] * tu - dv[:, None] * tv) / g[:, None]
    n_fit /= np.linalg.norm(n_fit, axis=1, keepdims=True)
    tu_fit = tu - np.einsum("vj,vj->v", tu, n_fit)[:, None] * n_fit
    tu_fit /= np.linalg.norm(tu_fit, axis=1, keepdims=True)
    tv_fit = np.cross(n_fit, tu_fit)

    return CurvatureField(
        normal=n_fit,
        tangent_u=tu_fit,
        tangent_v=tv_fit,
        shape_operator=S,
        lambda1=lam1,
        lambda2=lam2,
        H=H,
        normA=normA,
        vertex_area=mesh.vertex_areas(),
    )


def _sym2_eigvals(S):
    """Sorted eigenvalues (lam1 <= lam2) of batched symmetric 2x2 matrices."""
    tr = S[:, 0, 0] + S[:, 1, 1]
    det = S[:, 0, 0] * S[:, 1, 1] - S[:, 0, 1] * S[:, 1, 0]
    disc = np.sqrt(np.maximum(0.25 * tr * tr - det, 0.0))
    return 0.5 * tr - disc, 0.5 * tr + disc


def _sym2_inv_sqrt(I):
    """Inverse square root of batched SPD 2x2 matrices (closed form)."""
    lam1, lam2 = _sym2_eigvals(I)
    s1 = 1.0 / np.sqrt(lam1)
    s2 = 1.0 / np.sqrt(lam2)
    # spectral decomposition: eigenvector for lam2
    a = I[:, 0, 0]
    b = I[:, 0, 1]
    vx = np.where(np.abs(b) > 1e-15, b, lam2 - I[:, 1, 1])
    vy = np.where(np.abs(b) > 1e-15, lam2 - a, b * 0.0)
    deg = (vx * vx + vy * vy) < 1e-30
    vx = np.where(deg, 1.0, vx)
    vy = np.where(deg, 0.0, vy)
    nrm = np.sqrt(vx * vx + vy * vy)
    vx /= nrm
    vy /= nrm
    out = np.empty_like(I)
    out[:, 0, 0] = s2 * vx * vx + s1 * vy * vy
    out[:, 0, 1] = out[:, 1, 0] = (s2 - s1) * vx * vy
    out[:, 1, 1] = s2 * vy * vy + s1 * vx * vx
    return out
