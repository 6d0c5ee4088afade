"""Collapsed-coordinate Gauss-Jacobi rules on the reference simplices."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np
from scipy.special import roots_jacobi

MAX_DEGREE = 30

CELL_DIM = {"interval": 1, "triangle": 2, "tetrahedron": 3}
CELL_NAME = {1: "interval", 2: "triangle", 3: "tetrahedron"}


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    exactness_degree: int

    def __len__(self):
        return len(self.weights)


def _gauss_jacobi(n, alpha):
    x, w = roots_jacobi(n, alpha, 0.0)
    return x, w


@lru_cache(maxsize=None)
def _make_rule(cell: str, degree: int) -> QuadratureRule:
    dim = CELL_DIM[cell]
    n = max(1, (degree + 2) // 2)
    # the Jacobi weight (1 - t)^k absorbs the Duffy Jacobian in direction k
    rules = [_gauss_jacobi(n, float(k)) for k in range(dim)]
    pts, wts = [], []
    for idx in product(range(n), repeat=dim):
        t = [rules[k][0][idx[k]] for k in range(dim)]
        w = np.prod([rules[k][1][idx[k]] for k in range(dim)])
        # collapse from the last coordinate inward
        X = np.empty(dim)
        scale = 1.0
        for k in reversed(range(dim)):
            X[k] = scale * (1 + t[k]) / 2
            scale *= (1 - t[k]) / 2
        pts.append(X)
        wts.append(w)
    points = np.array(pts)
    weights = np.array(wts) / 2.0 ** (dim * (dim + 1) // 2)
    points.flags.writeable = False
    weights.flags.writeable = False
    return QuadratureRule(points, weights, 2 * n - 1)


def make_rule(cell: str, degree: int) -> QuadratureRule:
    """Rule integrating every polynomial of total degree <= ``degree`` exactly.

    Weights sum to the reference volume: 1 (interval [0, 1]), 1/2, 1/6.
    """
    if cell not in CELL_DIM:
        raise ValueError(f"unknown cell {cell!r}")
    if not 0 <= degree <= MAX_DEGREE:
        raise ValueError(f"unsupported quadrature degree {degree} (max {MAX_DEGREE})")
    return _make_rule(cell, int(degree))


def simplex_monomial_integral(exponents) -> float:
    """Exact integral of prod X_i^a_i over the reference simplex of len(exponents) dims."""
    from math import factorial

    num = 1
    for a in exponents:
        num *= factorial(a)
    return num / factorial(sum(exponents) + len(exponents))
