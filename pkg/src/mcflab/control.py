"""Pointwise curvature-control checks: mean convexity, uniform two-convexity,
curvature and area bounds, and noncollapsedness via tangent-ball tests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import InvalidParams


@dataclass
class ControlParams:
    """Control parameters (alpha, beta, gamma) plus an area bound.

    alpha: noncollapsedness ball radius factor (interior/exterior tangent
    balls of radius alpha/H); beta: uniform two-convexity factor
    (lambda1 + lambda2 >= beta*H, identically 1 for surfaces in R^3);
    gamma: curvature bound (max H <= gamma); area_bound: max total area.
    """

    alpha: float
    beta: float
    gamma: float
    area_bound: float

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1e300 and 0.0 < self.beta <= 1.0):
            raise InvalidParams("alpha must be positive and beta in (0, 1]")
        if self.gamma <= 0 or self.area_bound <= 0:
            raise InvalidParams("gamma and area_bound must be positive")


@dataclass
class ControlReport:
    """Boolean verdict plus a numeric witness per check."""

    mean_convex: bool
    min_H: float
    beta_two_convex: bool
    min_two_convexity_ratio: float
    gamma_ok: bool
    max_H: float
    area_ok: bool
    area: float
    alpha_ok: bool
    max_penetration_ratio: float     # worst penetration / allowed tolerance
    penetration_tolerance: str = "2 local edge lengths"
    params: dict = field(default_factory=dict)

    @property
    def all_ok(self):
        return (
            self.mean_convex
            and self.beta_two_convex
            and self.gamma_ok
            and self.area_ok
            and self.alpha_ok
        )

    def to_json(self, **kwargs):
        return json.dumps(asdict(self) | {"all_ok": self.all_ok}, **kwargs)


def _ball_penetrations(verts, centers, radii, tol, chunk=256):
    """Worst (penetration - tol) over vertices strictly inside tangent balls.

    ``centers[i]`` is the tangent ball at vertex i; vertex i itself sits on
    the ball boundary by construction and is excluded via the tolerance.
    Returns max over balls of (radius - distance - tol), clipped at 0 when no
    vertex penetrates beyond tolerance.
    """
    worst = -np.inf
    n = len(centers)
    for lo in range(0, n, chunk):
        c = centers[lo : lo + chunk]
        r = radii[lo : lo + chunk, None]
        d = np.linalg.norm(verts[None, :, :] - c[:, None, :], axis=2)
        pen = r - d - tol[None, :]
        worst = max(worst, float(pen.max()))
    return worst


def check_control_params(mesh, curv, params):
    """Evaluate a ControlReport for a mesh snapshot.

    The alpha check places interior and exterior tangent balls of radius
    alpha/H(p) at every vertex and requires that no other vertex penetrates
    them by more than 2 local edge lengths (discrete slack for the smooth
    ball condition).
    """
    H = curv.H
    min_H = float(H.min())
    mean_convex = min_H > 0.0

    # for surfaces in R^3 the lowest two principal curvatures are all of them,
    # so (lambda1 + lambda2)/H is identically 1; computed, not assumed
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(H != 0.0, (curv.lambda1 + curv.lambda2) / H, np.inf)
    min_ratio = float(ratio.min())
    beta_two_convex = mean_convex and min_ratio >= params.beta - 1e-12

    max_H = float(H.max())
    gamma_ok = max_H <= params.gamma
    area = float(mesh.area())
    area_ok = area <= params.area_bound

    if mean_convex:
        verts = mesh.vertices
        normals = curv.normal
        radii = params.alpha / H
        tol = 2.0 * mesh.local_edge_length()
        pen_in = _ball_penetrations(verts, verts - radii[:, None] * normals, radii, tol)
        pen_out = _ball_penetrations(verts, verts + radii[:, None] * normals, radii, tol)
        worst = max(pen_in, pen_out)
        # normalize by the mean tolerance so the witness is dimensionless
        max_pen_ratio = worst / float(tol.mean()) + 1.0
        alpha_ok = worst <= 0.0
    else:
        alpha_ok = False
        max_pen_ratio = np.inf

    return ControlReport(
        mean_convex=mean_convex,
        min_H=min_H,
        beta_two_convex=beta_two_convex,
        min_two_convexity_ratio=min_ratio,
        gamma_ok=gamma_ok,
        max_H=max_H,
        area_ok=area_ok,
        area=area,
        alpha_ok=alpha_ok,
        max_penetration_ratio=float(max_pen_ratio),
        params={
            "alpha": params.alpha,
            "beta": params.beta,
            "gamma": params.gamma,
            "area_bound": params.area_bound,
        },
    )
