"""Function spaces, global assembly, boundary conditions and error norms.

Global degrees of freedom are numbered entity by entity: all vertex dofs,
then edge dofs, then face dofs, then cell-interior dofs.  Within one
entity the dofs follow the element's local order for that entity, which
is the same from every cell that contains it because cell vertex tuples
are sorted.  Mixed spaces stack their sub-spaces in declaration order.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .elements import mapping_matrices, pull_back_values
from .forms import compile_form
from .forms.compiler import TensorRepresentation
from .mesh import Mesh
from .quadrature import CELL_NAME, make_rule

log = logging.getLogger(__name__)

CHUNK = 2048


class AssemblyError(ValueError):
    pass


def _simple_dofmap(mesh, element, offset):
    dim = mesh.dim
    cell_dofs = np.empty((mesh.num_cells, element.space_dimension), dtype=np.int64)
    entity_tables = {}
    start = offset
    for d in range(dim + 1):
        local = element.entity_dofs.get(d, {})
        n_d = len(local.get(0, []))
        if any(len(v) != n_d for v in local.values()):
            raise AssemblyError(f"{element}: uneven dof count on dimension-{d} entities")
        table = start + np.arange(mesh.num_entities(d) * n_d, dtype=np.int64).reshape(
            mesh.num_entities(d), n_d)
        entity_tables[d] = table
        ents = mesh.cell_entities(d)
        for e, ldofs in local.items():
            if ldofs:
                cell_dofs[:, ldofs] = table[ents[:, e]]
        start += table.size
    return cell_dofs, entity_tables, start - offset


class FunctionSpace:
    """Global dof numbering of ``element`` on ``mesh``."""

    def __init__(self, mesh: Mesh, element, _offset: int = 0):
        if element.dim != mesh.dim:
            raise AssemblyError("element and mesh dimensions differ")
        self.mesh = mesh
        self.element = element
        self.offset = _offset
        subs = getattr(element, "subs", None)
        if subs is None:
            self.subspaces = []
            self.cell_dofs, self.entity_dof_table, self.dim = _simple_dofmap(mesh, element, _offset)
        else:
            self.subspaces = []
            off = _offset
            for s in subs:
                V = FunctionSpace(mesh, s, off)
                self.subspaces.append(V)
                off += V.dim
            self.cell_dofs = np.concatenate([V.cell_dofs for V in self.subspaces], axis=1)
            self.dim = off - _offset
            self.entity_dof_table = None
        self.cell_dofs.flags.writeable = False

    def __repr__(self):
        return f"FunctionSpace({self.element!r}, N={self.dim})"

    def sub(self, k: int) -> "FunctionSpace":
        return self.subspaces[k]

    @property
    def global_offset(self) -> int:
        return self.offset

    def local_cell_dofs(self) -> np.ndarray:
        """Cell dofs relative to this space (zero-based even for a subspace)."""
        return self.cell_dofs - self.offset

    def entity_dofs(self, d: int, entities) -> np.ndarray:
        """Global (zero-based within this space) dofs attached to the given entities."""
        if self.subspaces:
            return np.concatenate([V.entity_dofs(d, entities) + (V.offset - self.offset)
                                   for V in self.subspaces])
        table = self.entity_dof_table.get(d)
        if table is None or table.shape[1] == 0:
            return np.zeros(0, dtype=np.int64)
        return (table[np.asarray(entities, dtype=np.int64)] - self.offset).ravel()

    def boundary_dofs(self) -> np.ndarray:
        """Dofs on entities in the closure of the boundary, sorted."""
        out = [self.entity_dofs(d, self.mesh.boundary_entities(d)) for d in range(self.mesh.dim)]
        return np.unique(np.concatenate(out))


@dataclass
class DiscreteField:
    space: FunctionSpace
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.space.dim,):
            raise AssemblyError("coefficient vector length does not match the space")

    def sub(self, k: int) -> "DiscreteField":
        V = self.space.sub(k)
        start = V.offset - self.space.offset
        return DiscreteField(V, self.values[start:start + V.dim])

    def cell_values(self) -> np.ndarray:
        return self.values[self.space.local_cell_dofs()]


# ---------------------------------------------------------------------------
# assembly

def _element_tensors(rep, J, detJ, K, coef_dofs, threads):
    ncells = len(J)
    chunks = [slice(i, min(i + CHUNK, ncells)) for i in range(0, ncells, CHUNK)]

    def work(s):
        return rep.element_tensor(J[s], detJ[s], K[s], [c[s] for c in coef_dofs])

    if threads and threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(s) for s in chunks]
    return np.concatenate(parts) if parts else np.zeros((0,))


def assemble(form, spaces, coefficients=None, threads: int = 1):
    """Assemble a bilinear form into CSR or a linear form into a vector.

    ``form`` is a :class:`Form` or a compiled :class:`TensorRepresentation`;
    ``spaces`` lists one :class:`FunctionSpace` per argument (test first);
    ``coefficients`` maps each form coefficient to a :class:`DiscreteField`.
    """
    rep = form if isinstance(form, TensorRepresentation) else compile_form(form)
    if isinstance(spaces, FunctionSpace):
        spaces = [spaces]
    if len(spaces) != rep.arity:
        raise AssemblyError(f"form has arity {rep.arity} but {len(spaces)} spaces were given")
    for V, el in zip(spaces, rep.argument_elements):
        if V.element is not el and repr(V.element) != repr(el):
            raise AssemblyError(f"space element {V.element!r} does not match argument {el!r}")
    mesh = spaces[0].mesh
    coefficients = coefficients or {}
    coef_dofs = []
    for w in rep.form.coefficients():
        if w not in coefficients:
            raise AssemblyError(f"no value supplied for coefficient {w!r}")
        coef_dofs.append(coefficients[w].cell_values())

    J, detJ, _ = mesh.jacobians()
    K = np.linalg.inv(J)
    A = _element_tensors(rep, J, detJ, K, coef_dofs, threads)

    if rep.arity == 1:
        dofs = spaces[0].local_cell_dofs()
        return np.bincount(dofs.ravel(), weights=A.ravel(), minlength=spaces[0].dim)
    rows = spaces[0].local_cell_dofs()
    cols = spaces[1].local_cell_dofs()
    R = np.broadcast_to(rows[:, :, None], A.shape).ravel()
    C = np.broadcast_to(cols[:, None, :], A.shape).ravel()
    M = sp.coo_matrix((A.ravel(), (R, C)), shape=(spaces[0].dim, spaces[1].dim)).tocsr()
    M.sum_duplicates()
    M.sort_indices()
    return M


def apply_essential_bc(A, b, dofs, values=0.0):
    """Symmetric elimination of the listed dofs; returns new (A, b)."""
    dofs = np.asarray(dofs, dtype=np.int64)
    n = A.shape[0]
    g = np.zeros(n)
    g[dofs] = values
    b = np.asarray(b, dtype=float) - A @ g
    free = np.ones(n)
    free[dofs] = 0.0
    D = sp.diags(free)
    A = (D @ A @ D + sp.diags(1.0 - free)).tocsr()
    A.eliminate_zeros()
    A.sort_indices()
    b[dofs] = g[dofs]
    return A, b


def write_coo(matrix, path) -> None:
    """Write ``i j value`` lines (0-based) in row-major order."""
    M = sp.coo_matrix(matrix)
    order = np.lexsort((M.col, M.row))
    lines = [f"{i} {j} {float(v)!r}" for i, j, v in zip(M.row[order], M.col[order], M.data[order])]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_coo(path, shape=None):
    data = np.loadtxt(path, ndmin=2)
    if data.size == 0:
        return sp.csr_matrix(shape or (0, 0))
    return sp.coo_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))),
                         shape=shape).tocsr()


# ---------------------------------------------------------------------------
# interpolation

def _dof_point_sets(element):
    """Stack every dof's points; returns points, per-dof slices and weights."""
    dofs = element.dofs
    pts = np.concatenate([ell.points for ell in dofs])
    sizes = np.cumsum([0] + [len(ell.points) for ell in dofs])
    return pts, sizes, [ell.weights for ell in dofs]


def _values_at(fn, x, ncomp):
    v = np.asarray(fn(x), dtype=float)
    return v.reshape(len(x), ncomp)


def interpolate(space: FunctionSpace, fn) -> DiscreteField:
    """Canonical interpolant: every dof functional applied to the pulled-back field.

    ``fn`` maps physical points (npts, dim) to values (npts,) or (npts, ncomp).
    """
    mesh = space.mesh
    el = space.element
    pts, sizes, weights = _dof_point_sets(el)
    J, detJ, x0 = mesh.jacobians()
    K = np.linalg.inv(J)
    x = np.einsum("cij,pj->cpi", J, pts) + x0[:, None, :]
    vals = _values_at(fn, x.reshape(-1, mesh.dim), el.value_size)
    vals = vals.reshape(mesh.num_cells, len(pts), el.value_size)
    ref = pull_back_values(el, J, detJ, K, vals)
    local = np.empty((mesh.num_cells, el.space_dimension))
    for i, w in enumerate(weights):
        local[:, i] = np.einsum("cqk,qk->c", ref[:, sizes[i]:sizes[i + 1]], w)
    U = np.zeros(space.dim)
    U[space.local_cell_dofs()] = local
    return DiscreteField(space, U)


# ---------------------------------------------------------------------------
# evaluation and norms

def _push_field(element, J, detJ, K, vals, grads=None):
    """Map per-cell reference field values (c, comp, p) and gradients (c, comp, p, dim)."""
    out_v = vals.copy()
    out_g = None if grads is None else np.einsum("cgb,ckpg->ckpb", K, grads)
    for off, size, mapping in element.blocks:
        M = mapping_matrices(mapping, J, detJ, K)
        if M is None:
            continue
        s = slice(off, off + size)
        out_v[:, s] = np.einsum("cij,cjp->cip", M, vals[:, s])
        if out_g is not None:
            out_g[:, s] = np.einsum("cij,cjpb->cipb", M, out_g[:, s])
    return out_v, out_g


def evaluate_field(field: DiscreteField, points, derivatives=False):
    """Physical values at reference ``points`` on every cell: (cells, comp, p)[, (..., dim)]."""
    el = field.space.element
    mesh = field.space.mesh
    J, detJ, _ = mesh.jacobians()
    K = np.linalg.inv(J)
    tab = el.tabulate(points, 1 if derivatives else 0)
    U = field.cell_values()
    vals = np.einsum("cn,nkp->ckp", U, tab.values)
    grads = np.einsum("cn,nkpg->ckpg", U, tab.gradient()) if derivatives else None
    return _push_field(el, J, detJ, K, vals, grads)


def locate_cells(mesh: Mesh, x, tol: float = 1e-12) -> np.ndarray:
    """Index of the first cell containing each physical point (brute force)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    J, _, x0 = mesh.jacobians()
    K = np.linalg.inv(J)
    out = np.full(len(x), -1, dtype=np.int64)
    for start in range(0, len(x), 256):
        xs = x[start:start + 256]
        X = np.einsum("cij,mcj->mci", K, xs[:, None, :] - x0[None])
        inside = (X >= -tol).all(axis=2) & (X.sum(axis=2) <= 1 + tol)
        hit = inside.any(axis=1)
        out[start:start + 256] = np.where(hit, inside.argmax(axis=1), -1)
    if np.any(out < 0):
        raise AssemblyError("point outside the mesh")
    return out


def evaluate_at_points(field: DiscreteField, x) -> np.ndarray:
    """Physical values (npts, ncomp) of ``field`` at arbitrary points of the mesh."""
    mesh = field.space.mesh
    el = field.space.element
    x = np.atleast_2d(np.asarray(x, dtype=float))
    cells = locate_cells(mesh, x)
    J, detJ, x0 = mesh.jacobians()
    K = np.linalg.inv(J)
    U = field.cell_values()
    out = np.empty((len(x), el.value_size))
    for c in np.unique(cells):
        idx = np.nonzero(cells == c)[0]
        X = (x[idx] - x0[c]) @ K[c].T
        ref = np.einsum("n,nkp->kp", U[c], el.tabulate(X).values)[None]
        v, _ = _push_field(el, J[c:c + 1], detJ[c:c + 1], K[c:c + 1], ref)
        out[idx] = v[0].T
    return out


def error_norm(field: DiscreteField, exact, norm: str = "L2", exact_derivative=None,
               quadrature_degree: int | None = None) -> float:
    """||u_h - u|| in L2, H(div) or H(curl).

    ``exact`` maps physical points to values; for "Hdiv" ``exact_derivative``
    gives div u, for "Hcurl" it gives curl u (the scalar rot in 2D).
    """
    norm = norm.lower()
    if norm not in ("l2", "hdiv", "hcurl"):
        raise AssemblyError(f"unknown norm {norm!r}")
    el = field.space.element
    mesh = field.space.mesh
    dim = mesh.dim
    deg = quadrature_degree or min(el.poly_degree + 4, 30)
    rule = make_rule(CELL_NAME[dim], deg)
    J, detJ, x0 = mesh.jacobians()
    x = (np.einsum("cij,pj->cpi", J, rule.points) + x0[:, None, :]).reshape(-1, dim)
    vals, grads = evaluate_field(field, rule.points, derivatives=norm != "l2")
    ncell, ncomp, npts = vals.shape
    wts = np.abs(detJ)[:, None] * rule.weights[None, :]

    ex = np.asarray(exact(x), dtype=float).reshape(ncell, npts, ncomp)
    err = np.einsum("cpk,cp->", (np.moveaxis(vals, 1, 2) - ex) ** 2, wts)
    if norm == "l2":
        return float(np.sqrt(err))
    if exact_derivative is None:
        raise AssemblyError(f"{norm} norm needs the exact derivative")
    if norm == "hdiv":
        d = np.einsum("ckpk->cp", grads)
        dex = np.asarray(exact_derivative(x), dtype=float).reshape(ncell, npts)
        err += np.einsum("cp,cp->", (d - dex) ** 2, wts)
    else:
        if dim == 2:
            d = (grads[:, 1, :, 0] - grads[:, 0, :, 1])[..., None]
        else:
            g = grads
            d = np.stack([g[:, 2, :, 1] - g[:, 1, :, 2], g[:, 0, :, 2] - g[:, 2, :, 0],
                          g[:, 1, :, 0] - g[:, 0, :, 1]], axis=-1)
        dex = np.asarray(exact_derivative(x), dtype=float).reshape(d.shape)
        err += np.einsum("cpk,cp->", (d - dex) ** 2, wts)
    return float(np.sqrt(err))


# ---------------------------------------------------------------------------
# conformity diagnostics

def basis_function(space: FunctionSpace, cell: int, local: int):
    """Physical local basis function ``local`` of ``cell`` as a callable of points."""
    geom = space.mesh.cell_geometry(cell)
    el = space.element

    def fn(x):
        X = geom.pull_back(np.atleast_2d(x))
        ref = el.tabulate(X).values[local:local + 1]       # (1, comp, p)
        v, _ = _push_field(el, geom.jacobian[None], np.array([geom.detJ]),
                           geom.inverse_jacobian[None], ref)
        return v[0].T
    return fn


def apply_cell_dofs(space: FunctionSpace, cell: int, fn) -> np.ndarray:
    """The local dof functionals of ``cell`` applied to a physical field ``fn``."""
    geom = space.mesh.cell_geometry(cell)
    el = space.element
    out = np.empty(el.space_dimension)
    for i, ell in enumerate(el.dofs):
        x = geom.push_forward(ell.points)
        v = _values_at(fn, x, el.value_size)
        ref = pull_back_values(el, geom.jacobian, geom.detJ, geom.inverse_jacobian, v)
        out[i] = np.sum(ref * ell.weights)
    return out


def trace_jumps(space: FunctionSpace, kind: str, degree: int | None = None) -> float:
    """Largest jump of the normal or tangential trace of any global basis function
    across interior facets, sampled at facet quadrature points."""
    mesh = space.mesh
    el = space.element
    dim = mesh.dim
    deg = degree or el.poly_degree + 1
    frule = make_rule(CELL_NAME[dim - 1], deg)
    worst = 0.0
    for f in mesh.interior_facets():
        c0, c1 = mesh.facet_cells(f)
        verts = mesh.vertices[mesh.facets[f]]
        x = verts[0] + frule.points @ (verts[1:] - verts[0])
        frame = mesh.facet_frame(f)
        n = frame.normal
        traces = []
        for c in (c0, c1):
            geom = mesh.cell_geometry(c)
            X = geom.pull_back(x)
            ref = el.tabulate(X).values
            v, _ = _push_field(el, np.broadcast_to(geom.jacobian, (len(ref),) + geom.jacobian.shape),
                               np.full(len(ref), geom.detJ),
                               np.broadcast_to(geom.inverse_jacobian, (len(ref),) + geom.jacobian.shape),
                               ref)
            if kind == "normal":
                t = np.einsum("nkp,k->np", v, n)[:, None, :]
            elif kind == "tangential":
                t = v - np.einsum("nkp,k->np", v, n)[:, None, :] * n[None, :, None]
            else:
                raise AssemblyError(f"unknown trace kind {kind!r}")
            traces.append(dict(zip(space.local_cell_dofs()[c], t)))
        for g in set(traces[0]) | set(traces[1]):
            a = traces[0].get(g, 0.0)
            b = traces[1].get(g, 0.0)
            worst = max(worst, float(np.max(np.abs(a - b))))
    return worst


__all__ = ["AssemblyError", "DiscreteField", "FunctionSpace", "apply_cell_dofs",
           "apply_essential_bc", "assemble", "basis_function", "error_norm", "evaluate_field",
           "evaluate_at_points", "interpolate", "locate_cells", "read_coo", "trace_jumps",
           "write_coo"]
