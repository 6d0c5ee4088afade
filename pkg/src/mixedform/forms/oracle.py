"""Direct quadrature evaluation of element tensors, used as a cross-check.

Works entirely on the physical cell: basis functions are pushed forward
numerically and the integrand is evaluated pointwise.  Every node returns
``(value, gradient)`` arrays laid out as ``(argument axes..., points,
value axes...)`` and ``(..., dim)``; argument axes have length 1 where the
argument does not occur.
"""
from __future__ import annotations

import numpy as np

from ..elements import map_basis
from ..quadrature import CELL_NAME, make_rule
from . import ir
from .ir import FormError

_LETTERS = "ijklmnopqrstuvw"
MISSING = "missing"   # gradient not available (e.g. pointwise coefficient); None means zero


def _apply(g, fn):
    return fn(g) if isinstance(g, np.ndarray) else g


def _combine(a, b, fn):
    if isinstance(a, str) or isinstance(b, str):
        return MISSING
    if a is None:
        return b
    if b is None:
        return a
    return fn(a, b)


def _einsum_pair(sa, sb, out, a, b):
    return np.einsum(f"...{sa},...{sb}->...{out}", a, b)


class _Evaluator:
    def __init__(self, form, geometry, points, coefficients):
        self.arity = form.arity
        self.geometry = geometry
        self.points = points
        self.coefficients = coefficients
        self.cache = {}

    def lead(self, number=None, n=1):
        shape = [1] * self.arity
        if number is not None:
            shape[number] = n
        return tuple(shape)

    def __call__(self, e):
        if id(e) not in self.cache:
            self.cache[id(e)] = (e, self._eval(e))
        return self.cache[id(e)][1]

    def _terminal(self, element, number=None, dofs=None):
        tab = element.tabulate(self.points, 1)
        vals, grads = map_basis(element, self.geometry, tab, derivatives=True)
        vals = np.moveaxis(vals, 1, -1)            # (n, p, c)
        grads = np.moveaxis(grads, 1, -2)          # (n, p, c, d)
        if dofs is not None:
            vals = np.tensordot(dofs, vals, axes=1)[None]
            grads = np.tensordot(dofs, grads, axes=1)[None]
            number, n = None, 1
        else:
            n = vals.shape[0]
        lead = self.lead(number, n)
        npts, dim = len(self.points), element.dim
        return (vals.reshape(lead + (npts,) + tuple(element.value_shape)),
                grads.reshape(lead + (npts,) + tuple(element.value_shape) + (dim,)))

    def _eval(self, e):
        ax = self.arity + 1               # first value axis
        if isinstance(e, ir.Constant):
            return np.full(self.lead() + (1,), e.value), None
        if isinstance(e, ir.Argument):
            return self._terminal(e.element, e.number)
        if isinstance(e, ir.Coefficient):
            data = self.coefficients[e]
            if callable(data):
                x = self.geometry.push_forward(self.points)
                v = np.asarray(data(x), dtype=float).reshape((len(x),) + e.shape)
                return v.reshape(self.lead() + v.shape), MISSING
            return self._terminal(e.element, dofs=np.asarray(data, dtype=float))
        if isinstance(e, ir.SubFunction):
            v, g = self(e.terminal)
            shape = v.shape[:ax] + e.shape
            v = v.reshape(v.shape[:ax] + (-1,))[..., e.offset:e.offset + e.size].reshape(shape)
            if isinstance(g, np.ndarray):
                g = g.reshape(g.shape[:ax] + (-1, g.shape[-1]))
                g = g[..., e.offset:e.offset + e.size, :].reshape(shape + (g.shape[-1],))
            return v, g
        if isinstance(e, ir.Sum):
            (va, ga), (vb, gb) = self(e.operands[0]), self(e.operands[1])
            return va + vb, _combine(ga, gb, lambda x, y: x + y)
        if isinstance(e, ir.Product):
            (va, ga), (vb, gb) = self(e.operands[0]), self(e.operands[1])
            ra, rb = va.ndim - ax, vb.ndim - ax
            va_ = va.reshape(va.shape + (1,) * rb)
            vb_ = vb.reshape(vb.shape + (1,) * ra)
            ta = _apply(ga, lambda g: g.reshape(g.shape[:-1] + (1,) * rb + g.shape[-1:])
                        * vb_[..., None])
            tb = _apply(gb, lambda g: va_[..., None]
                        * g.reshape(g.shape[:-1] + (1,) * ra + g.shape[-1:]))
            return va_ * vb_, _combine(ta, tb, lambda x, y: x + y)
        if isinstance(e, ir.Indexed):
            v, g = self(e.operands[0])
            idx = (slice(None),) * ax + (e.index,)
            return v[idx], _apply(g, lambda x: x[idx])
        if isinstance(e, ir.ListTensor):
            parts = [self(x) for x in e.operands]
            vs = np.broadcast_arrays(*[p[0] for p in parts])
            v = np.stack(vs, axis=ax)
            gs = [p[1] for p in parts]
            if all(isinstance(x, np.ndarray) for x in gs):
                g = np.stack(np.broadcast_arrays(*gs), axis=ax)
            else:
                g = MISSING
            return v, g
        if isinstance(e, (ir.Grad, ir.Div, ir.Curl, ir.Rot)):
            v, g = self(e.operands[0])
            if not isinstance(g, np.ndarray):
                raise FormError("oracle cannot differentiate this operand")
            if isinstance(e, ir.Grad):
                return g, MISSING
            if isinstance(e, ir.Div):
                return np.einsum("...ii->...", g), MISSING
            if isinstance(e, ir.Rot):
                return g[..., 1, 0] - g[..., 0, 1], MISSING
            return np.stack([g[..., 2, 1] - g[..., 1, 2], g[..., 0, 2] - g[..., 2, 0],
                             g[..., 1, 0] - g[..., 0, 1]], axis=-1), MISSING
        if isinstance(e, (ir.Dot, ir.Inner)):
            (va, _), (vb, _) = self(e.operands[0]), self(e.operands[1])
            ra, rb = va.ndim - ax, vb.ndim - ax
            la = _LETTERS[:ra]
            lb = _LETTERS[ra:ra + rb]
            if isinstance(e, ir.Dot):
                lb = la[-1] + lb[1:]
                out = la[:-1] + lb[1:]
            else:
                lb = la
                out = ""
            return _einsum_pair(la, lb, out, va, vb), MISSING
        if isinstance(e, ir.Trace):
            v, _ = self(e.operands[0])
            return np.einsum("...ii->...", v), MISSING
        if isinstance(e, ir.Skew):
            v, _ = self(e.operands[0])
            return 0.5 * (v[..., 1, 0] - v[..., 0, 1]), MISSING
        raise FormError(f"oracle cannot evaluate {type(e).__name__}")


def evaluate_by_quadrature(form: ir.Form, geometry, coefficients=None,
                           quadrature_degree: int | None = None) -> np.ndarray:
    """Element tensor of ``form`` on the cell described by ``geometry``.

    ``coefficients`` maps each :class:`Coefficient` to either its local dof
    vector or a callable of physical points returning values.
    """
    coefficients = coefficients or {}
    args = form.arguments()
    dim = form.dim
    if quadrature_degree is None:
        quadrature_degree = sum(a.element.poly_degree for a in args) + \
            sum(w.element.poly_degree for w in form.coefficients()) + 2
    rule = make_rule(CELL_NAME[dim], min(quadrature_degree, 30))
    ev = _Evaluator(form, geometry, rule.points, coefficients)
    total = 0
    for integrand in form.integrands:
        v, _ = ev(integrand)
        total = total + np.tensordot(v, rule.weights, axes=([form.arity], [0]))
    shape = tuple(a.element.space_dimension for a in args)
    return np.broadcast_to(total * abs(geometry.detJ), shape).copy()
