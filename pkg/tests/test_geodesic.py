"""Intrinsic diameter estimates against closed-form geodesic diameters."""

import numpy as np
import pytest

from mcflab.errors import DisconnectedMesh, InvalidParams
from mcflab.geodesic import graph_distances, intrinsic_diameter
from mcflab.mesh import TriMesh
from mcflab.scenarios import icosphere


def test_sphere_diameter(sphere3):
    # geodesic diameter of the unit sphere is pi
    d = intrinsic_diameter(sphere3, method="landmark")
    assert d == pytest.approx(np.pi, rel=0.02)


def test_cylinder_diameter(cyl32):
    # pole to pole: barrel length plus two quarter-circumference cap arcs
    expected = 4.0 + np.pi * 0.2
    d = intrinsic_diameter(cyl32, method="landmark")
    assert d == pytest.approx(expected, rel=0.02)


def test_exact_graph_at_least_landmark(sphere2):
    exact = intrinsic_diameter(sphere2, method="exact-graph")
    landmark = intrinsic_diameter(sphere2, method="landmark", n_landmarks=8)
    assert landmark <= exact + 1e-12


def test_refinement_reduces_overestimate(sphere3):
    refined = intrinsic_diameter(sphere3, refine=True)
    unrefined = intrinsic_diameter(sphere3, refine=False)
    assert refined <= unrefined + 1e-12
    # the unrefined graph overestimates pi; refinement lands within 2%
    assert refined == pytest.approx(np.pi, rel=0.02)


def test_diameter_scale_covariance(sphere2):
    d1 = intrinsic_diameter(sphere2)
    d2 = intrinsic_diameter(sphere2.scaled(2.5))
    assert d2 == pytest.approx(2.5 * d1, rel=1e-12)


def test_disconnected_raises():
    a = icosphere(level=1)
    b = icosphere(level=1, center=(5.0, 0.0, 0.0))
    m = TriMesh(
        np.vstack([a.vertices, b.vertices]),
        np.vstack([a.faces, b.faces + a.n_vertices]),
    )
    with pytest.raises(DisconnectedMesh):
        intrinsic_diameter(m)


def test_invalid_method(sphere2):
    with pytest.raises(InvalidParams):
        intrinsic_diameter(sphere2, method="teleport")
    with pytest.raises(InvalidParams):
        intrinsic_diameter(sphere2, method="landmark", n_landmarks=0)


def test_graph_distances_zero_at_source(sphere2):
    d = graph_distances(sphere2, [0, 5])
    assert d.shape == (2, sphere2.n_vertices)
    assert d[0, 0] == 0.0 and d[1, 5] == 0.0
    assert np.all(np.isfinite(d))
