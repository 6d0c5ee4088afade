"""Compile a form into a reference tensor and a geometry-tensor recipe.

Every terminal is pulled back to the reference cell symbolically, so the
integrand becomes a polynomial whose monomials are products of

* reference factors ``(kind, slot, component, derivative)``: a derivative of a
  component of a reference basis function of an argument (``kind='a'``) or
  of a coefficient (``kind='c'``);
* geometry factors ``('J', i, j)`` or ``('K', i, j)`` with ``K = J^{-1}``;
* a power ``gamma`` of ``1/detJ``.

Monomials are grouped by their reference factors.  The group's geometry
polynomial, times ``|detJ|``, is one entry of the geometry tensor ``G``;
integrating the reference factors gives the matching slice of ``A0``.
Groups whose geometry polynomial is a plain number are merged per
``gamma`` so that, for instance, every divergence pairing shares a single
entry ``|detJ| / detJ^gamma``.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from ..elements import AFFINE, CONTRAVARIANT, COVARIANT
from ..quadrature import CELL_NAME, make_rule
from . import ir
from .ir import FormError


class Poly:
    """Sparse polynomial: {(ref_factors, geo_factors, gamma): coefficient}."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = terms or {}

    @classmethod
    def constant(cls, c):
        return cls({((), (), 0): float(c)}) if c else cls()

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Poly.constant(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            v = out.get(m, 0.0) + c
            if v == 0.0:
                out.pop(m, None)
            else:
                out[m] = v
        return Poly(out)

    __radd__ = __add__

    def __neg__(self):
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Poly({m: c * other for m, c in self.terms.items()}) if other else Poly()
        out = defaultdict(float)
        for (r1, g1, p1), c1 in self.terms.items():
            for (r2, g2, p2), c2 in other.terms.items():
                out[(tuple(sorted(r1 + r2)), tuple(sorted(g1 + g2)), p1 + p2)] += c1 * c2
        return Poly({m: c for m, c in out.items() if c != 0.0})

    __rmul__ = __mul__

    def derivative(self, beta: int, dim: int) -> "Poly":
        """d/dx_beta: the chain rule through K, product rule over reference factors."""
        out = defaultdict(float)
        for (refs, geo, gam), c in self.terms.items():
            for i, (kind, slot, comp, alpha) in enumerate(refs):
                for g in range(dim):
                    a = list(alpha)
                    a[g] += 1
                    new = refs[:i] + ((kind, slot, comp, tuple(a)),) + refs[i + 1:]
                    out[(tuple(sorted(new)), tuple(sorted(geo + (("K", g, beta),))), gam)] += c
        return Poly({m: c for m, c in out.items() if c != 0.0})

    def __repr__(self):
        return " + ".join(f"{c:g}*{m}" for m, c in self.terms.items()) or "0"


def _objarray(shape, fill=None):
    out = np.empty(shape, dtype=object)
    for idx in np.ndindex(*shape):
        out[idx] = Poly() if fill is None else fill(idx)
    return out


def _terminal_pullback(kind, slot, element):
    """Physical values of a terminal as Poly array of shape (value_size,)."""
    dim = element.dim
    zero = (0,) * dim
    out = _objarray((element.value_size,))
    for off, size, mapping in element.blocks:
        for c in range(size):
            if mapping == AFFINE:
                out[off + c] = Poly({(((kind, slot, off + c, zero),), (), 0): 1.0})
            elif mapping == CONTRAVARIANT:
                out[off + c] = Poly(
                    {(((kind, slot, off + a, zero),), (("J", c, a),), 1): 1.0 for a in range(size)})
            elif mapping == COVARIANT:
                out[off + c] = Poly(
                    {(((kind, slot, off + a, zero),), (("K", a, c),), 0): 1.0 for a in range(size)})
            else:
                raise FormError(f"unsupported mapping {mapping!r}")
    return out


def _simplify_poly(p: Poly, dim: int) -> Poly:
    groups = defaultdict(dict)
    for (refs, geo, gam), c in p.terms.items():
        groups[refs][(geo, gam)] = c
    out = {}
    for refs, recipe in groups.items():
        for (geo, gam), c in _kronecker_pass(recipe, dim).items():
            out[(refs, geo, gam)] = c
    return Poly(out)


class _Lowering:
    def __init__(self, coefficients, dim, simplify):
        self.coef_slot = {id(w): k for k, w in enumerate(coefficients)}
        self.dim = dim
        self.simplify = simplify
        self.cache = {}

    def __call__(self, e):
        key = id(e)
        if key not in self.cache:
            out = self._lower(e)
            if not isinstance(out, np.ndarray):
                box = np.empty((), dtype=object)
                box[()] = out
                out = box
            if self.simplify and isinstance(e, (ir.Grad, ir.Div, ir.Curl, ir.Rot)):
                # collapse J K products while the chain-rule sums are still linear
                for idx in np.ndindex(*out.shape):
                    out[idx] = _simplify_poly(out[idx], self.dim)
            self.cache[key] = (e, out)
        return self.cache[key][1]

    def _lower(self, e):
        if isinstance(e, ir.Constant):
            out = np.empty((), dtype=object)
            out[()] = Poly.constant(e.value)
            return out
        if isinstance(e, ir.Argument):
            return _terminal_pullback("a", e.number, e.element).reshape(e.shape)
        if isinstance(e, ir.Coefficient):
            return _terminal_pullback("c", self.coef_slot[id(e)], e.element).reshape(e.shape)
        if isinstance(e, ir.SubFunction):
            full = self(e.terminal).reshape(-1)
            return full[e.offset:e.offset + e.size].reshape(e.shape)
        if isinstance(e, ir.Sum):
            return self(e.operands[0]) + self(e.operands[1])
        if isinstance(e, ir.Product):
            a, b = (self(x) for x in e.operands)
            return a * b
        if isinstance(e, ir.Indexed):
            return self(e.operands[0])[e.index]
        if isinstance(e, ir.ListTensor):
            return np.stack([self(x) for x in e.operands])
        if isinstance(e, ir.Grad):
            a = self(e.operands[0])
            out = _objarray(a.shape + (e.dim,))
            for idx in np.ndindex(*a.shape):
                for b in range(e.dim):
                    out[idx + (b,)] = a[idx].derivative(b, e.dim)
            return out
        if isinstance(e, ir.Div):
            a = self(e.operands[0])
            out = _objarray(a.shape[:-1])
            for idx in np.ndindex(*a.shape[:-1]):
                out[idx] = sum((a[idx + (i,)].derivative(i, e.dim) for i in range(e.dim)), Poly())
            return out
        if isinstance(e, ir.Curl):
            a = self(e.operands[0])
            d = lambda i, j: a[i].derivative(j, 3)  # noqa: E731
            return np.array([d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)],
                            dtype=object)
        if isinstance(e, ir.Rot):
            a = self(e.operands[0])
            out = np.empty((), dtype=object)
            out[()] = a[1].derivative(0, 2) - a[0].derivative(1, 2)
            return out
        if isinstance(e, ir.Dot):
            a, b = (self(x) for x in e.operands)
            return np.asarray(np.tensordot(a, b, axes=1), dtype=object)
        if isinstance(e, ir.Inner):
            a, b = (self(x) for x in e.operands)
            out = np.empty((), dtype=object)
            out[()] = sum((a[i] * b[i] for i in np.ndindex(*a.shape)), Poly())
            return out
        if isinstance(e, ir.Trace):
            a = self(e.operands[0])
            out = np.empty((), dtype=object)
            out[()] = sum((a[i, i] for i in range(a.shape[0])), Poly())
            return out
        if isinstance(e, ir.Skew):
            a = self(e.operands[0])
            out = np.empty((), dtype=object)
            out[()] = (a[1, 0] - a[0, 1]) * 0.5
            return out
        raise FormError(f"cannot compile {type(e).__name__}")


# ---------------------------------------------------------------------------
# geometry simplification

def _contractions(geo):
    """Yield (remaining factors, members(b), x, y) for each J/K pair forming KJ or JK."""
    for i, f in enumerate(geo):
        if f[0] != "J":
            continue
        for j, h in enumerate(geo):
            if h[0] != "K":
                continue
            rest = [g for k, g in enumerate(geo) if k not in (i, j)]
            if h[2] == f[1]:      # sum_b K[y, b] J[b, x] = delta_yx
                y, x = h[1], f[2]
                yield rest, (lambda b, x=x, y=y: (("J", b, x), ("K", y, b))), x, y
            if f[2] == h[1]:      # sum_b J[x, b] K[b, y] = delta_xy
                x, y = f[1], h[2]
                yield rest, (lambda b, x=x, y=y: (("J", x, b), ("K", b, y))), x, y


def _kronecker_pass(recipe: dict, dim: int) -> dict:
    """Collapse complete sums of J K or K J products into Kronecker deltas.

    ``recipe`` maps (geo_factors, gamma) -> coefficient.  A sum is collapsed
    only when all ``dim`` terms are present with equal coefficients and the
    same remaining factors.  Repeats until nothing changes.
    """
    recipe = dict(recipe)
    changed = True
    while changed:
        changed = False
        for (geo, gam), c in list(recipe.items()):
            for rest, members, x, y in _contractions(geo):
                keys = {(tuple(sorted(rest + list(members(b)))), gam) for b in range(dim)}
                if len(keys) != dim or any(recipe.get(k) != c for k in keys):
                    continue
                for k in keys:
                    del recipe[k]
                if x == y:
                    key = (tuple(sorted(rest)), gam)
                    v = recipe.get(key, 0.0) + c
                    if v == 0.0:
                        recipe.pop(key, None)
                    else:
                        recipe[key] = v
                changed = True
                break
            if changed:
                break
    return recipe


def _eval_geo(geo, gam, J, K, detJ):
    v = detJ ** (-gam) if gam else np.ones_like(detJ)
    for name, i, j in geo:
        v = v * (J[..., i, j] if name == "J" else K[..., i, j])
    return v


@dataclass
class TensorRepresentation:
    """A^K = A0 : G_K for a compiled form.

    ``reference_tensor`` has axes (argument bases..., coefficient bases...,
    secondary index).  ``recipes[k]`` is a list of ``(coeff, geo_factors,
    gamma)`` terms; ``G[k] = |detJ| * sum coeff * prod(geo) / detJ^gamma``.
    """

    form: ir.Form
    reference_tensor: np.ndarray
    recipes: list
    labels: list
    argument_elements: list
    coefficient_elements: list
    quadrature_degree: int
    simplified: bool

    @property
    def arity(self):
        return len(self.argument_elements)

    @property
    def num_secondary(self):
        return len(self.recipes)

    def geometry_tensor(self, J, detJ, K, coefficient_dofs=()):
        """G for one or a batch of cells: shape (*cells, ncoefbasis..., nsecondary)."""
        J = np.asarray(J, dtype=float)
        K = np.asarray(K, dtype=float)
        detJ = np.asarray(detJ, dtype=float)
        G = np.stack([np.abs(detJ) * sum(c * _eval_geo(g, p, J, K, detJ) for c, g, p in rec)
                      for rec in self.recipes], axis=-1)
        if len(coefficient_dofs) != len(self.coefficient_elements):
            raise FormError("wrong number of coefficient dof arrays")
        nb = J.ndim - 2
        for w in reversed(coefficient_dofs):
            w = np.asarray(w, dtype=float)
            G = np.expand_dims(G, nb) * w.reshape(w.shape + (1,) * (G.ndim - nb))
        return G

    def contract(self, G):
        """Element tensor(s) from G; batched over leading cell axes of G."""
        A0 = self.reference_tensor
        nfree = self.arity
        free = A0.shape[:nfree]
        ncontract = A0.ndim - nfree
        batch = G.shape[:G.ndim - ncontract]
        A0f = A0.reshape(int(np.prod(free)), -1)
        Gf = G.reshape(int(np.prod(batch)) if batch else 1, -1)
        out = Gf @ A0f.T
        return out.reshape(batch + free)

    def element_tensor(self, J, detJ, K, coefficient_dofs=()):
        return self.contract(self.geometry_tensor(J, detJ, K, coefficient_dofs))

    def dump(self) -> str:
        lines = [f"arity {self.arity}; reference tensor shape {self.reference_tensor.shape}; "
                 f"quadrature degree {self.quadrature_degree}"]
        for k, (lab, rec) in enumerate(zip(self.labels, self.recipes)):
            terms = " + ".join(
                f"{c:+g}" + "".join(f"*{n}[{i},{j}]" for n, i, j in g) + (f"/detJ^{p}" if p else "")
                for c, g, p in rec)
            lines.append(f"G[{k}] = |detJ| * ({terms})    # {lab}")
        return "\n".join(lines)


def compile_form(form: ir.Form, quadrature_degree: int | None = None,
                 simplify: bool = True) -> TensorRepresentation:
    if not isinstance(form, ir.Form):
        raise FormError("compile_form expects a Form")
    args = form.arguments()
    coefs = form.coefficients()
    dim = form.dim
    lower = _Lowering(coefs, dim, simplify)
    integrand = lower(form.integrand)[()]
    arity = len(args)

    groups = defaultdict(dict)
    for (refs, geo, gam), c in integrand.terms.items():
        slots = [r[1] for r in refs if r[0] == "a"]
        if sorted(slots) != list(range(arity)):
            raise FormError("integrand is not linear in each argument")
        cslots = [r[1] for r in refs if r[0] == "c"]
        if sorted(cslots) != list(range(len(coefs))):
            raise FormError("every term must be linear in every coefficient of the form; "
                            "split terms with different coefficients into separate forms")
        groups[refs][(geo, gam)] = groups[refs].get((geo, gam), 0.0) + c

    # secondary indices: one per geometry-dependent reference signature,
    # plus one per gamma collecting all purely numeric recipes
    scalar = defaultdict(list)        # gamma -> [(refs, coeff)]
    entries = []                      # (label, recipe terms, [(refs, weight)])
    for refs in sorted(groups, key=lambda r: r):
        recipe = dict(groups[refs])
        if simplify:
            recipe = _kronecker_pass(recipe, dim)
        geo_terms = []
        for (geo, gam), c in sorted(recipe.items()):
            if abs(c) < 1e-15:
                continue
            if simplify and not geo:
                scalar[gam].append((refs, c))
            else:
                geo_terms.append((c, geo, gam))
        if geo_terms:
            entries.append((_label(refs), geo_terms, [(refs, 1.0)]))
    for gam in sorted(scalar):
        entries.append((f"numeric, gamma={gam}", [(1.0, (), gam)], scalar[gam]))

    if quadrature_degree is None:
        quadrature_degree = sum(a.element.poly_degree for a in args) + \
            sum(w.element.poly_degree for w in coefs)
    rule = make_rule(CELL_NAME[dim], quadrature_degree)
    max_deriv = max((sum(r[3]) for refs in groups for r in refs), default=0)
    elements = [a.element for a in args] + [w.element for w in coefs]
    tabs = [el.tabulate(rule.points, max_deriv) for el in elements]
    sizes = [el.space_dimension for el in elements]

    A0 = np.zeros(tuple(sizes) + (len(entries),))
    letters = "abcdefghij"[:len(elements)]
    subscripts = ",".join(f"{l}p" for l in letters) + ",p->" + letters
    for k, (_, _, members) in enumerate(entries):
        for refs, weight in members:
            factors = [None] * len(elements)
            for kind, slot, comp, alpha in refs:
                pos = slot if kind == "a" else arity + slot
                factors[pos] = tabs[pos][alpha][:, comp, :]
            A0[..., k] += weight * np.einsum(subscripts, *factors, rule.weights, optimize=True)

    return TensorRepresentation(form, A0, [e[1] for e in entries], [e[0] for e in entries],
                                [a.element for a in args], [w.element for w in coefs],
                                quadrature_degree, simplify)


def _label(refs):
    parts = []
    for kind, slot, comp, alpha in refs:
        name = ("v", "u")[slot] if kind == "a" and slot < 2 else f"{kind}{slot}"
        d = "".join(f"d{g}" * n for g, n in enumerate(alpha) if n)
        parts.append(f"{d}{name}_{comp}")
    return " ".join(parts)
