import numpy as np
import pytest

from mixedform.mesh import CellGeometry

SUPPORTED = {
    "triangle": {"Lagrange": [1, 2, 3, 4, 5, 6], "DG": [0, 1, 2, 3, 4, 5, 6], "RT": [1, 2, 3, 4],
                 "BDM": [1, 2, 3, 4], "N1curl": [1, 2, 3]},
    "tetrahedron": {"Lagrange": [1, 2, 3, 4, 5, 6], "DG": [0, 1, 2, 3, 4, 5, 6],
                    "RT": [1, 2, 3, 4], "BDM": [1, 2, 3, 4], "N1curl": [1, 2, 3]},
}


def all_supported():
    return [(fam, cell, d) for cell, fams in SUPPORTED.items() for fam, ds in fams.items()
            for d in ds]


def random_geometry(rng, dim, negative=None):
    """Random well-conditioned affine cell; ``negative`` forces the sign of det J."""
    while True:
        J = rng.normal(size=(dim, dim))
        if np.linalg.cond(J) < 50:
            break
    if negative is not None and (np.linalg.det(J) < 0) != negative:
        J[:, [0, 1]] = J[:, [1, 0]]
    return CellGeometry(J, float(np.linalg.det(J)), np.linalg.inv(J), rng.normal(size=dim))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
