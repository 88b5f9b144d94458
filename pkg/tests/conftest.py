import numpy as np
import pytest

from mcflab.scenarios import icosphere, capped_cylinder, torus


def random_rotation(rng):
    """Uniform random rotation matrix (QR of a Gaussian matrix)."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


@pytest.fixture(scope="session")
def sphere2():
    return icosphere(level=2)


@pytest.fixture(scope="session")
def sphere3():
    return icosphere(level=3)


@pytest.fixture(scope="session")
def sphere4():
    return icosphere(level=4)


@pytest.fixture(scope="session")
def cyl32():
    """Capped cylinder, r=0.2, barrel half-length 2, 32 azimuthal samples."""
    return capped_cylinder(radius=0.2, half_length=2.0, n_theta=32)


@pytest.fixture(scope="session")
def thin_torus():
    return torus(r=0.05, R=1.0)
