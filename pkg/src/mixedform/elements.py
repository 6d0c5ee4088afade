"""Nodal reference elements for H1, L2, H(div) and H(curl).

Each element is built the FIAT way: take an orthonormal prime basis of the
polynomial space, apply every degree of freedom to it to get a
generalized Vandermonde matrix ``V``, and invert.  Degrees of freedom on
facets are scaled point evaluations of the normal (H(div)) or tangential
(H(curl)) component at lattice points of the facet; interior degrees of
freedom are moments against an orthonormal basis of the interior space.

Degree conventions: ``RT``/``N1curl`` of degree d span P_d^- (the lowest
order element has d = 1); ``BDM`` of degree r spans the full (P_r)^n.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import polynomials as poly
from .mesh import LOCAL_ENTITIES, REFERENCE_VERTICES, ROTATION
from .quadrature import CELL_DIM, make_rule

log = logging.getLogger(__name__)

AFFINE, CONTRAVARIANT, COVARIANT = "affine", "contravariant", "covariant"

_FAMILY_ALIASES = {
    "lagrange": "Lagrange", "cg": "Lagrange", "p": "Lagrange",
    "dg": "DG", "discontinuous lagrange": "DG",
    "rt": "RT", "raviart-thomas": "RT",
    "bdm": "BDM", "brezzi-douglas-marini": "BDM",
    "n1curl": "N1curl", "ned1": "N1curl", "nedelec": "N1curl",
}

MAX_DEGREE = {"Lagrange": 6, "DG": 6, "RT": 4, "BDM": 4, "N1curl": 3}


class ElementError(ValueError):
    pass


@dataclass(frozen=True)
class DofFunctional:
    """ell(v) = sum_q sum_c weights[q, c] * v_c(points[q])."""

    kind: str
    entity: tuple
    points: np.ndarray
    weights: np.ndarray
    scaling: float = 1.0

    def __call__(self, fn) -> float:
        return float(np.sum(self.weights * np.asarray(fn(self.points)).reshape(self.weights.shape)))


@dataclass(frozen=True)
class Tabulation:
    """Reference basis values keyed by derivative multi-index.

    ``derivatives[alpha]`` has shape (nbasis, ncomp, npoints).
    """

    derivatives: dict

    @property
    def values(self) -> np.ndarray:
        return self.derivatives[next(iter(self.derivatives))]

    def __getitem__(self, alpha):
        return self.derivatives[tuple(alpha)]

    def gradient(self) -> np.ndarray:
        """(nbasis, ncomp, npoints, dim) first derivatives."""
        dim = len(next(iter(self.derivatives)))
        return np.stack([self.derivatives[tuple(int(i == k) for i in range(dim))]
                         for k in range(dim)], axis=-1)


class FiniteElement:
    """A single (non-composite) nodal element on a reference simplex."""

    def __init__(self, family, cell, degree, mapping, value_size, prime, dofs, entity_dofs,
                 poly_degree):
        self.family = family
        self.cell = cell
        self.degree = degree
        self.dim = CELL_DIM[cell]
        self.mapping = mapping
        self.value_size = value_size
        self.value_shape = () if value_size == 1 and mapping == AFFINE else (value_size,)
        self.dofs = tuple(dofs)
        self.entity_dofs = entity_dofs
        self.poly_degree = poly_degree
        self.space_dimension = len(dofs)
        if prime.shape[0] != self.space_dimension:
            raise ElementError(
                f"{family}({cell}, {degree}): {prime.shape[0]} basis functions but "
                f"{self.space_dimension} dofs")

        V = self._apply_dofs(prime)
        self.vandermonde_condition = float(np.linalg.cond(V))
        log.debug("%s: cond(V) = %.3e", self, self.vandermonde_condition)
        if not np.isfinite(self.vandermonde_condition) or self.vandermonde_condition > 1e8:
            raise ElementError(f"{self}: singular generalized Vandermonde matrix "
                               f"(cond {self.vandermonde_condition:.3e})")
        self.nodal_coefficients = np.linalg.solve(V, np.eye(len(V))).T
        self.coefficients = np.einsum("jk,kcm->jcm", self.nodal_coefficients, prime)
        self.coefficients.flags.writeable = False
        err = np.abs(self._apply_dofs(self.coefficients) - np.eye(len(V))).max()
        if err > 1e-10:
            raise ElementError(f"{self}: unisolvence check failed ({err:.2e})")

    def __repr__(self):
        return f"{self.family}({self.cell}, {self.degree})"

    @property
    def blocks(self) -> list:
        """(component offset, size, mapping) of each independently mapped block."""
        return [(0, self.value_size, self.mapping)]

    @property
    def sub_elements(self) -> list:
        return [self]

    def _apply_dofs(self, C) -> np.ndarray:
        """(ndofs, nfun) matrix ell_i(p_j) for polynomials given by coefficients C."""
        out = np.empty((len(self.dofs), C.shape[0]))
        for i, ell in enumerate(self.dofs):
            M = poly.tabulate_basis(self.dim, self.poly_degree, ell.points)
            vals = np.einsum("jcm,mq->jqc", C, M)
            out[i] = np.einsum("jqc,qc->j", vals, ell.weights)
        return out

    def dual_matrix(self) -> np.ndarray:
        """ell_i(Phi_j) for the nodal basis; the identity up to rounding."""
        return self._apply_dofs(self.coefficients)

    def tabulate(self, points, deriv_order: int = 0) -> Tabulation:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if deriv_order > 2:
            raise ElementError("derivatives of order > 2 are not tabulated")
        tables = poly.tabulate_all(self.dim, self.poly_degree, points, deriv_order)
        return Tabulation({alpha: np.einsum("jcm,mp->jcp", self.coefficients, M)
                           for alpha, M in tables.items()})

    def apply_dofs(self, fn) -> np.ndarray:
        """Evaluate every degree of freedom on a reference-cell field ``fn``."""
        return np.array([ell(fn) for ell in self.dofs])


class MixedElement:
    """Concatenation of sub-elements; dofs and value components in declaration order."""

    def __init__(self, subs, value_shape=None):
        subs = list(subs)
        if len({s.cell for s in subs}) != 1:
            raise ElementError("sub-elements live on different cells")
        self.subs = subs
        self.family = "Mixed"
        self.cell = subs[0].cell
        self.dim = subs[0].dim
        self.degree = max(s.degree for s in subs)
        self.poly_degree = max(s.poly_degree for s in subs)
        self.value_size = sum(s.value_size for s in subs)
        self.value_shape = (self.value_size,) if value_shape is None else value_shape
        self.space_dimension = sum(s.space_dimension for s in subs)
        self.dof_offsets = np.cumsum([0] + [s.space_dimension for s in subs])
        self.component_offsets = np.cumsum([0] + [s.value_size for s in subs])

    def __repr__(self):
        return "Mixed(" + ", ".join(map(repr, self.subs)) + ")"

    @property
    def mapping(self):
        maps = {s.mapping for s in self.subs}
        return maps.pop() if len(maps) == 1 else "mixed"

    @property
    def blocks(self):
        out = []
        for s, c0 in zip(self.subs, self.component_offsets):
            out += [(c0 + off, size, m) for off, size, m in s.blocks]
        return out

    @property
    def sub_elements(self):
        out = []
        for s in self.subs:
            out += s.sub_elements
        return out

    @property
    def entity_dofs(self):
        out = {}
        for s, d0 in zip(self.subs, self.dof_offsets):
            for d, ents in s.entity_dofs.items():
                for e, dofs in ents.items():
                    out.setdefault(d, {}).setdefault(e, []).extend(int(d0 + i) for i in dofs)
        return out

    @property
    def dofs(self):
        out = []
        for s, c0 in zip(self.subs, self.component_offsets):
            for ell in s.dofs:
                w = np.zeros((len(ell.points), self.value_size))
                w[:, c0:c0 + s.value_size] = ell.weights
                out.append(DofFunctional(ell.kind, ell.entity, ell.points, w, ell.scaling))
        return tuple(out)

    def dual_matrix(self):
        return _dual_matrix(self)

    def tabulate(self, points, deriv_order=0) -> Tabulation:
        points = np.atleast_2d(points)
        tabs = [s.tabulate(points, deriv_order) for s in self.subs]
        out = {}
        for alpha in tabs[0].derivatives:
            arr = np.zeros((self.space_dimension, self.value_size, len(points)))
            for s, t, d0, c0 in zip(self.subs, tabs, self.dof_offsets, self.component_offsets):
                arr[d0:d0 + s.space_dimension, c0:c0 + s.value_size] = t[alpha]
            out[alpha] = arr
        return Tabulation(out)

    def apply_dofs(self, fn):
        return np.array([ell(fn) for ell in self.dofs])


class VectorElement(MixedElement):
    """``dim`` copies of a scalar element, one per vector component."""

    def __init__(self, sub, dim=None):
        if sub.value_shape != ():
            raise ElementError("VectorElement needs a scalar sub-element")
        n = sub.dim if dim is None else dim
        super().__init__([sub] * n, value_shape=(n,))
        self.family = f"Vector({sub.family})"

    def __repr__(self):
        return f"Vector({self.subs[0]!r})"


def _dual_matrix(element):
    # tabulate once per dof point set
    rows = []
    for ell in element.dofs:
        vals = element.tabulate(ell.points).values
        rows.append(np.einsum("jcq,qc->j", vals, ell.weights))
    return np.array(rows)


# ----------------------------------------------------------------------------
# degrees of freedom

def _edge_points(a, b, m):
    """m points strictly inside segment a->b, ordered from a to b."""
    t = np.arange(1, m + 1) / (m + 1)
    return a[None, :] + t[:, None] * (b - a)[None, :]


def _lattice_interior(verts, order):
    """Interior points of the order-``order`` lattice on a simplex, in vertex order."""
    verts = np.asarray(verts)
    k = len(verts) - 1
    pts = []
    if k == 1:
        return _edge_points(verts[0], verts[1], order - 1)
    if k == 2:
        for l in range(1, order):
            for j in range(1, order - l):
                pts.append(verts[0] + j / order * (verts[1] - verts[0]) + l / order * (verts[2] - verts[0]))
    else:
        for m in range(1, order):
            for l in range(1, order - m):
                for j in range(1, order - m - l):
                    pts.append(verts[0] + j / order * (verts[1] - verts[0])
                               + l / order * (verts[2] - verts[0])
                               + m / order * (verts[3] - verts[0]))
    return np.array(pts).reshape(-1, verts.shape[1])


def _lattice_all(verts, order):
    verts = np.asarray(verts)
    if order == 0:
        return verts.mean(axis=0, keepdims=True)
    dim = verts.shape[1]
    pts = []
    for e in poly.exponents(dim, order):
        pts.append(verts[0] + sum(e[i] / order * (verts[i + 1] - verts[0]) for i in range(dim)))
    return np.array(pts)


class _DofBuilder:
    def __init__(self, cell, value_size):
        self.dim = CELL_DIM[cell]
        self.X = REFERENCE_VERTICES[self.dim]
        self.value_size = value_size
        self.dofs = []
        self.entity_dofs = {d: {e: [] for e in range(len(LOCAL_ENTITIES[(self.dim, d)]))}
                            for d in range(self.dim + 1)}

    def add(self, kind, entity, points, weights, scaling=1.0):
        self.entity_dofs[entity[0]][entity[1]].append(len(self.dofs))
        self.dofs.append(DofFunctional(kind, entity, np.atleast_2d(points),
                                       np.atleast_2d(weights), scaling))

    def entities(self, d):
        return LOCAL_ENTITIES[(self.dim, d)]

    def point_evals(self, entity, points):
        for p in points:
            self.add("point_eval", entity, p, np.ones((1, 1)))

    def moments(self, space, degree):
        """Interior moments against the orthonormal polynomial set ``space``."""
        rule = make_rule(_CELL[self.dim], degree)
        M = poly.tabulate_basis(self.dim, _space_degree(space, self.dim), rule.points)
        vals = np.einsum("jcm,mq->jqc", space, M)
        for q in vals:
            self.add("interior_moment", (self.dim, 0), rule.points,
                     rule.weights[:, None] * q)


_CELL = {2: "triangle", 3: "tetrahedron"}


def _space_degree(space, dim):
    n = space.shape[-1]
    d = 0
    while poly.num_polynomials(dim, d) < n:
        d += 1
    return d


def _facet_normal_dofs(b, per_facet_order, measure_scaled=True):
    """Scaled normal evaluations on every facet (H(div) elements)."""
    dim = b.dim
    for f, verts in enumerate(b.entities(dim - 1)):
        x = b.X[list(verts)]
        if dim == 2:
            E = x[1] - x[0]
            w = ROTATION @ E  # |E| N
            pts = _edge_points(x[0], x[1], per_facet_order)
            scale = float(np.linalg.norm(E))
        else:
            cross = np.cross(x[1] - x[0], x[2] - x[0])
            w = 0.5 * cross  # |F| N
            pts = _lattice_interior(x, per_facet_order)
            scale = 0.5 * float(np.linalg.norm(cross))
        for p in pts:
            b.add("point_normal", (dim - 1, f), p, w[None, :], scale)


def _edge_tangent_dofs(b, m):
    for e, (i, j) in enumerate(b.entities(1)):
        E = b.X[j] - b.X[i]
        for p in _edge_points(b.X[i], b.X[j], m):
            b.add("point_tangential", (1, e), p, E[None, :], float(np.linalg.norm(E)))


def _build_lagrange(cell, k):
    b = _DofBuilder(cell, 1)
    dim = b.dim
    for v, (i,) in enumerate(b.entities(0)):
        b.point_evals((0, v), b.X[[i]])
    for d in range(1, dim + 1):
        for e, verts in enumerate(b.entities(d)):
            b.point_evals((d, e), _lattice_interior(b.X[list(verts)], k))
    prime = poly.scalar_space(dim, k)
    return FiniteElement("Lagrange", cell, k, AFFINE, 1, prime, b.dofs, b.entity_dofs, k)


def _build_dg(cell, k):
    b = _DofBuilder(cell, 1)
    b.point_evals((b.dim, 0), _lattice_all(b.X, k))
    prime = poly.scalar_space(b.dim, k)
    return FiniteElement("DG", cell, k, AFFINE, 1, prime, b.dofs, b.entity_dofs, k)


def _build_rt(cell, d):
    b = _DofBuilder(cell, CELL_DIM[cell])
    dim = b.dim
    # facet normal traces of RT(d) lie in P_{d-1}(facet)
    _facet_normal_dofs(b, d if dim == 2 else d + 2)
    if d >= 2:
        b.moments(poly.vector_space(dim, d - 2, dim), 2 * d)
    prime = poly.raviart_thomas_space(dim, d)
    return FiniteElement("RT", cell, d, CONTRAVARIANT, dim, prime, b.dofs, b.entity_dofs, d)


def _build_bdm(cell, r):
    b = _DofBuilder(cell, CELL_DIM[cell])
    dim = b.dim
    _facet_normal_dofs(b, r + 1 if dim == 2 else r + 3)
    if r >= 2:
        b.moments(poly.nedelec_space(dim, r - 1), 2 * r)
    prime = poly.vector_space(dim, r, dim)
    return FiniteElement("BDM", cell, r, CONTRAVARIANT, dim, prime, b.dofs, b.entity_dofs, r)


def _build_nedelec(cell, d):
    b = _DofBuilder(cell, CELL_DIM[cell])
    dim = b.dim
    _edge_tangent_dofs(b, d)
    if dim == 3 and d >= 2:
        for f, verts in enumerate(b.entities(2)):
            x = b.X[list(verts)]
            E1, E2 = x[1] - x[0], x[2] - x[0]
            for p in _lattice_interior(x, d + 1):
                b.add("point_tangential", (2, f), p, E1[None, :], float(np.linalg.norm(E1)))
                b.add("point_tangential", (2, f), p, E2[None, :], float(np.linalg.norm(E2)))
    interior = d - 2 if dim == 2 else d - 3
    if interior >= 0:
        b.moments(poly.vector_space(dim, interior, dim), 2 * d)
    prime = poly.nedelec_space(dim, d)
    return FiniteElement("N1curl", cell, d, COVARIANT, dim, prime, b.dofs, b.entity_dofs, d)


_BUILDERS = {"Lagrange": _build_lagrange, "DG": _build_dg, "RT": _build_rt,
             "BDM": _build_bdm, "N1curl": _build_nedelec}


@lru_cache(maxsize=None)
def _create(family, cell, degree):
    return _BUILDERS[family](cell, degree)


def create_element(family: str, cell: str, degree: int) -> FiniteElement:
    """Create (and cache) a nodal element, e.g. ``create_element("RT", "triangle", 1)``."""
    name = _FAMILY_ALIASES.get(family.lower())
    if name is None:
        raise ElementError(f"unsupported family {family!r}")
    if cell not in ("triangle", "tetrahedron"):
        raise ElementError(f"unsupported cell {cell!r}")
    lo = 0 if name == "DG" else 1
    if not lo <= degree <= MAX_DEGREE[name]:
        raise ElementError(f"{name} degree {degree} outside supported range "
                           f"[{lo}, {MAX_DEGREE[name]}]")
    return _create(name, cell, int(degree))


def space_dimension(family: str, cell: str, degree: int) -> int:
    """Closed-form dimension of the element space."""
    name = _FAMILY_ALIASES[family.lower()]
    d = degree
    if cell == "triangle":
        return {"Lagrange": (d + 1) * (d + 2) // 2, "DG": (d + 1) * (d + 2) // 2,
                "RT": d * (d + 2), "N1curl": d * (d + 2), "BDM": (d + 1) * (d + 2)}[name]
    return {"Lagrange": (d + 1) * (d + 2) * (d + 3) // 6, "DG": (d + 1) * (d + 2) * (d + 3) // 6,
            "RT": d * (d + 1) * (d + 3) // 2, "N1curl": d * (d + 2) * (d + 3) // 2,
            "BDM": (d + 1) * (d + 2) * (d + 3) // 2}[name]


# ----------------------------------------------------------------------------
# Piola maps

def mapping_matrices(mapping, J, detJ, K):
    """Matrix M with phi = M Phi for one block; broadcasts over leading cell axes."""
    if mapping == AFFINE:
        return None
    if mapping == CONTRAVARIANT:
        return J / np.asarray(detJ)[..., None, None]
    if mapping == COVARIANT:
        return np.swapaxes(K, -1, -2)
    raise ElementError(f"unknown mapping {mapping!r}")


def map_basis(element, geometry, tabulation: Tabulation, derivatives: bool = False):
    """Push reference basis values forward to a physical cell.

    Returns physical values of shape (nbasis, ncomp, npoints) and, with
    ``derivatives=True``, also physical gradients (nbasis, ncomp, npoints, dim).
    ``geometry`` is a :class:`CellGeometry`.
    """
    J, detJ, K = geometry.jacobian, geometry.detJ, geometry.inverse_jacobian
    if detJ == 0:
        raise ElementError("degenerate geometry")
    values = map_values(element, J, detJ, K, tabulation.values)
    if not derivatives:
        return values
    return values, map_gradients(element, J, detJ, K, tabulation.gradient())


def map_values(element, J, detJ, K, values):
    """values: (nbasis, ncomp, npts) -> (*cells, nbasis, ncomp, npts) for batched J."""
    lead = J.ndim - 2
    out = np.broadcast_to(values, J.shape[:lead] + values.shape).copy()
    for off, size, mapping in element.blocks:
        M = mapping_matrices(mapping, J, detJ, K)
        if M is None:
            continue
        blk = values[:, off:off + size, :]
        out[..., off:off + size, :] = np.einsum("...ca,jap->...jcp", M, blk)
    return out


def map_gradients(element, J, detJ, K, grads):
    """grads: (nbasis, ncomp, npts, dim) reference -> physical (*cells, nbasis, ncomp, npts, dim)."""
    # d/dx_b = sum_g K[g, b] d/dX_g
    phys = np.einsum("...gb,jcpg->...jcpb", K, grads)
    out = phys.copy()
    for off, size, mapping in element.blocks:
        M = mapping_matrices(mapping, J, detJ, K)
        if M is None:
            continue
        out[..., off:off + size, :, :] = np.einsum("...ca,...japb->...jcpb", M,
                                                   phys[..., off:off + size, :, :])
    return out


def pull_back_values(element, J, detJ, K, values):
    """Inverse map of physical field values (*cells, npts, ncomp) to the reference cell."""
    out = np.array(values, dtype=float, copy=True)
    for off, size, mapping in element.blocks:
        if mapping == AFFINE:
            continue
        if mapping == CONTRAVARIANT:
            Minv = K * np.asarray(detJ)[..., None, None]
        else:
            Minv = np.swapaxes(J, -1, -2)
        out[..., off:off + size] = np.einsum("...ac,...pc->...pa", Minv, values[..., off:off + size])
    return out
