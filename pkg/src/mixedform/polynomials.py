"""Vector-valued polynomials stored as coefficients over an orthogonal simplex basis.

A polynomial space of degree ``D`` in ``dim`` variables is represented by
an array ``C`` of shape ``(nfun, ncomp, nbasis)``.  Basis function ``e``
(an exponent tuple with total degree <= D) is the collapsed-coordinate
Jacobi product, orthogonal in L2 on the reference simplex.  Each factor is
written in homogenized form, ``s^n P_n^(a,0)(u / s)``, and evaluated by the
three-term recurrence in ``(u, s)`` so there is no division by ``s``.
Monomials would lose several digits to cancellation at degree 6.

Because the basis is graded, the functions of exact total degree ``t``
complement the polynomials of degree ``t - 1``, which is what the
reduced-space constructions below need.
"""
from __future__ import annotations

from functools import lru_cache
from itertools import product
from math import comb

import numpy as np

from .quadrature import CELL_NAME, make_rule


@lru_cache(maxsize=None)
def exponents(dim: int, degree: int) -> tuple:
    """Basis labels of total degree <= degree, graded then reverse-lex."""
    out = []
    for total in range(degree + 1):
        out += sorted((e for e in product(range(total + 1), repeat=dim) if sum(e) == total),
                      reverse=True)
    return tuple(out)


def num_polynomials(dim: int, degree: int) -> int:
    return comb(degree + dim, dim) if degree >= 0 else 0


def derivative_multi_indices(dim: int, order: int) -> list:
    """All derivative multi-indices of total order <= order."""
    return [e for e in exponents(dim, order)]


class _Jet:
    """Values and partial derivatives up to a fixed order, keyed by multi-index."""

    def __init__(self, parts):
        self.parts = parts

    @classmethod
    def affine(cls, const, grad, npts, indices):
        parts = {a: np.zeros(npts) for a in indices}
        parts[indices[0]] = np.full(npts, float(const)) if np.isscalar(const) else const
        for k, g in enumerate(grad):
            a = tuple(int(i == k) for i in range(len(grad)))
            if a in parts:
                parts[a] = np.full(npts, float(g))
        return cls(parts)

    def __add__(self, other):
        return _Jet({a: v + other.parts[a] for a, v in self.parts.items()})

    def __sub__(self, other):
        return _Jet({a: v - other.parts[a] for a, v in self.parts.items()})

    def scale(self, c):
        return _Jet({a: c * v for a, v in self.parts.items()})

    def __mul__(self, other):
        out = {}
        for a in self.parts:
            acc = 0.0
            for b in product(*(range(i + 1) for i in a)):
                w = 1
                for ai, bi in zip(a, b):
                    w *= comb(ai, bi)
                rest = tuple(ai - bi for ai, bi in zip(a, b))
                acc = acc + w * self.parts[b] * other.parts[rest]
            out[a] = acc
        return _Jet(out)


def _jacobi_coefficients(n: int, alpha: int):
    """(a, b, c) with P_{n+1} = (a t + b) P_n - c P_{n-1} for P^(alpha, 0)."""
    a = (2 * n + alpha + 1) * (2 * n + alpha + 2) / (2 * (n + 1) * (n + alpha + 1))
    if alpha == 0:
        b = 0.0
    else:
        b = alpha * alpha * (2 * n + alpha + 1) / (2 * (n + 1) * (n + alpha + 1) * (2 * n + alpha))
    c = 0.0 if n == 0 else (n + alpha) * n * (2 * n + alpha + 2) / (
        (n + 1) * (n + alpha + 1) * (2 * n + alpha))
    return a, b, c


def _homogenized_jacobi(u, s, s2, degree, alpha, one):
    """[s^n P_n^(alpha,0)(u/s) for n = 0..degree] as jets."""
    out = [one]
    for n in range(degree):
        a, b, c = _jacobi_coefficients(n, alpha)
        nxt = (u.scale(a) + s.scale(b)) * out[n]
        if n > 0:
            nxt = nxt - (s2 * out[n - 1]).scale(c)
        out.append(nxt)
    return out


def tabulate_all(dim: int, degree: int, points: np.ndarray, order: int = 0) -> dict:
    """{alpha: (nbasis, npts)} for every derivative multi-index of order <= order."""
    X = np.atleast_2d(np.asarray(points, dtype=float))
    npts = len(X)
    indices = derivative_multi_indices(dim, order)
    one = _Jet.affine(1.0, [0.0] * dim, npts, indices)
    # level i uses u_i = 2 x_i + sum_{j>i} x_j - 1 and s_i = 1 - sum_{j>i} x_j
    levels = []
    for i in range(dim):
        tail = X[:, i + 1:].sum(axis=1)
        gu = [0.0] * dim
        gs = [0.0] * dim
        gu[i] = 2.0
        for j in range(i + 1, dim):
            gu[j] = 1.0
            gs[j] = -1.0
        u = _Jet.affine(2 * X[:, i] + tail - 1, gu, npts, indices)
        s = _Jet.affine(1 - tail, gs, npts, indices)
        levels.append((u, s, s * s))
    cache = {}

    def factor(level, alpha):
        key = (level, alpha)
        if key not in cache:
            u, s, s2 = levels[level]
            cache[key] = _homogenized_jacobi(u, s, s2, degree, alpha, one)
        return cache[key]

    labels = exponents(dim, degree)
    out = {a: np.empty((len(labels), npts)) for a in indices}
    for m, e in enumerate(labels):
        jet = one
        shift = 0
        for level in range(dim):
            jet = jet * factor(level, 2 * shift + level)[e[level]]
            shift += e[level]
        for a in indices:
            out[a][m] = jet.parts[a]
    return out


def tabulate_basis(dim: int, degree: int, points: np.ndarray, alpha=None) -> np.ndarray:
    """(nbasis, npts) values of d^alpha of each basis function."""
    alpha = (0,) * dim if alpha is None else tuple(alpha)
    return tabulate_all(dim, degree, points, sum(alpha))[alpha]


def homogeneous_indices(dim: int, degree: int, total: int) -> np.ndarray:
    """Indices of the basis functions of exact total degree ``total``."""
    exps = exponents(dim, degree)
    return np.array([i for i, e in enumerate(exps) if sum(e) == total], dtype=int)


def multiply_by_coordinate(dim: int, degree: int, coeffs: np.ndarray, k: int) -> np.ndarray:
    """Coefficients of X_k * p for p given over the basis of degree - 1."""
    rule = make_rule(CELL_NAME[dim], 2 * degree)
    lo = tabulate_basis(dim, degree - 1, rule.points)
    hi = tabulate_basis(dim, degree, rule.points)
    # the basis is orthogonal, so projection needs only the diagonal of the Gram matrix
    norms = np.einsum("mp,mp,p->m", hi, hi, rule.weights)
    proj = np.einsum("ip,mp,p->im", lo * rule.points[:, k], hi, rule.weights) / norms
    return coeffs @ proj


def l2_orthonormalize(dim: int, degree: int, C: np.ndarray) -> np.ndarray:
    """Orthonormal basis (reference-cell L2) spanning the rows of C (nfun, ncomp, nmono)."""
    rule = make_rule(CELL_NAME[dim], 2 * degree)
    M = tabulate_basis(dim, degree, rule.points)
    vals = np.einsum("fcm,mp->fcp", C, M)
    gram = np.einsum("fcp,gcp,p->fg", vals, vals, rule.weights)
    w, Q = np.linalg.eigh(gram)
    if w.min() <= 1e-13 * w.max():
        raise ValueError("polynomial set is linearly dependent")
    T = Q / np.sqrt(w)
    return np.einsum("fg,fcm->gcm", T, C)


def scalar_space(dim: int, degree: int, total_degree: int | None = None) -> np.ndarray:
    """Orthonormal basis of P_degree as (n, 1, nmono(total_degree))."""
    D = degree if total_degree is None else total_degree
    n = num_polynomials(dim, degree)
    C = np.zeros((n, 1, num_polynomials(dim, D)))
    C[np.arange(n), 0, np.arange(n)] = 1.0
    return l2_orthonormalize(dim, D, C)


def vector_space(dim: int, degree: int, ncomp: int, total_degree: int | None = None) -> np.ndarray:
    """Orthonormal basis of (P_degree)^ncomp."""
    D = degree if total_degree is None else total_degree
    s = scalar_space(dim, degree, D)[:, 0, :]
    n = len(s)
    C = np.zeros((n * ncomp, ncomp, s.shape[-1]))
    for c in range(ncomp):
        C[c * n:(c + 1) * n, c, :] = s
    return C


def raviart_thomas_space(dim: int, degree: int) -> np.ndarray:
    """(P_{d-1})^dim + X * H_{d-1}, the reduced space P_d^- for (n-1)-forms."""
    base = vector_space(dim, degree - 1, dim, degree)
    hom = homogeneous_indices(dim, degree - 1, degree - 1)
    extra = np.zeros((len(hom), dim, num_polynomials(dim, degree)))
    for j, m in enumerate(hom):
        p = np.zeros(num_polynomials(dim, degree - 1))
        p[m] = 1.0
        for k in range(dim):
            extra[j, k] = multiply_by_coordinate(dim, degree, p, k)
    return l2_orthonormalize(dim, degree, np.concatenate([base, extra]))


def nedelec_space(dim: int, degree: int) -> np.ndarray:
    """First-kind Nedelec space P_d^- for 1-forms."""
    base = vector_space(dim, degree - 1, dim, degree)
    nm = num_polynomials(dim, degree)
    if dim == 2:
        hom = homogeneous_indices(dim, degree - 1, degree - 1)
        extra = np.zeros((len(hom), 2, nm))
        for j, m in enumerate(hom):
            p = np.zeros(num_polynomials(dim, degree - 1))
            p[m] = 1.0
            extra[j, 0] = -multiply_by_coordinate(dim, degree, p, 1)
            extra[j, 1] = multiply_by_coordinate(dim, degree, p, 0)
    else:
        # degree-d fields whose leading part p satisfies p . X = 0
        hom_d = homogeneous_indices(dim, degree, degree)
        hom_up = homogeneous_indices(dim, degree + 1, degree + 1)
        ncols = 3 * len(hom_d)
        A = np.zeros((len(hom_up), ncols))
        pos_up = {m: r for r, m in enumerate(hom_up)}
        for k in range(3):
            for j, m in enumerate(hom_d):
                p = np.zeros(nm)
                p[m] = 1.0
                q = multiply_by_coordinate(dim, degree + 1, p, k)
                for r, row in pos_up.items():
                    A[row, k * len(hom_d) + j] += q[r]
        _, s, Vt = np.linalg.svd(A)
        rank = int(np.sum(s > 1e-10 * s[0]))
        null = Vt[rank:]
        extra = np.zeros((len(null), 3, nm))
        for i, v in enumerate(null):
            for k in range(3):
                extra[i, k, hom_d] = v[k * len(hom_d):(k + 1) * len(hom_d)]
    return l2_orthonormalize(dim, degree, np.concatenate([base, extra]))
