"""Expression language for multilinear forms over a single cell measure ``dx``."""
from __future__ import annotations

import numbers
from itertools import count

import numpy as np


class FormError(ValueError):
    pass


def _wrap(x):
    if isinstance(x, Expr):
        return x
    if isinstance(x, numbers.Real):
        return Constant(float(x))
    if isinstance(x, (list, tuple)):
        return as_tensor(x)
    raise FormError(f"cannot use {type(x).__name__} in a form expression")


def _common_dim(*exprs):
    dims = {e.dim for e in exprs if e.dim is not None}
    if len(dims) > 1:
        raise FormError("expressions live on cells of different dimension")
    return dims.pop() if dims else None


class Expr:
    shape: tuple = ()
    dim: int | None = None
    operands: tuple = ()

    def __add__(self, other):
        return Sum(self, _wrap(other))

    def __radd__(self, other):
        if isinstance(other, numbers.Real) and other == 0:
            return self
        return Sum(_wrap(other), self)

    def __sub__(self, other):
        return Sum(self, -_wrap(other))

    def __rsub__(self, other):
        return Sum(_wrap(other), -self)

    def __neg__(self):
        return Product(Constant(-1.0), self)

    def __mul__(self, other):
        if isinstance(other, Measure):
            return Form([self])
        return Product(self, _wrap(other))

    def __rmul__(self, other):
        return Product(_wrap(other), self)

    def __truediv__(self, other):
        if not isinstance(other, numbers.Real):
            raise FormError("only division by numbers is supported")
        return Product(Constant(1.0 / other), self)

    def __getitem__(self, i):
        if isinstance(i, tuple):
            out = self
            for j in i:
                out = out[j]
            return out
        return Indexed(self, i)

    def __len__(self):
        if not self.shape:
            raise FormError("scalar expression has no length")
        return self.shape[0]

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def terminals(self):
        seen = []
        stack = [self]
        while stack:
            e = stack.pop()
            if isinstance(e, (Argument, Coefficient)):
                if e not in seen:
                    seen.append(e)
            stack.extend(reversed(e.operands))
        return seen


class Constant(Expr):
    def __init__(self, value: float):
        self.value = float(value)

    def __repr__(self):
        return repr(self.value)


class _Terminal(Expr):
    def __init__(self, element):
        self.element = element
        self.shape = tuple(element.value_shape)
        self.dim = element.dim

    def split(self):
        subs = getattr(self.element, "subs", None)
        if subs is None or type(self.element).__name__ == "VectorElement":
            return (self,)
        return tuple(SubFunction(self, k) for k in range(len(subs)))


class Argument(_Terminal):
    """Basis function slot ``number`` (0 = test, 1 = trial)."""

    def __init__(self, element, number: int):
        super().__init__(element)
        self.number = number

    def __repr__(self):
        return ("v", "u")[self.number] if self.number < 2 else f"arg{self.number}"


_coefficient_ids = count()


class Coefficient(_Terminal):
    """A field given by its dofs in ``element`` (compiled path) or pointwise (oracle only)."""

    def __init__(self, element, name: str | None = None):
        super().__init__(element)
        self.id = next(_coefficient_ids)
        self.name = name or f"w{self.id}"

    def __repr__(self):
        return self.name


def TestFunction(element):
    return Argument(element, 0)


def TrialFunction(element):
    return Argument(element, 1)


def TestFunctions(element):
    return Argument(element, 0).split()


def TrialFunctions(element):
    return Argument(element, 1).split()


class SubFunction(Expr):
    """Restriction of a mixed terminal to one of its sub-elements."""

    def __init__(self, terminal, index: int):
        self.terminal = terminal
        self.index = index
        sub = terminal.element.subs[index]
        self.offset = int(terminal.element.component_offsets[index])
        self.size = sub.value_size
        self.shape = tuple(sub.value_shape)
        self.dim = terminal.dim
        self.operands = (terminal,)

    def __repr__(self):
        return f"{self.terminal!r}[{self.index}]"


class Sum(Expr):
    def __init__(self, a, b):
        if a.shape != b.shape:
            raise FormError(f"cannot add shapes {a.shape} and {b.shape}")
        self.operands = (a, b)
        self.shape = a.shape
        self.dim = _common_dim(a, b)


class Product(Expr):
    def __init__(self, a, b):
        if a.shape and b.shape:
            raise FormError("product of two non-scalars; use dot or inner")
        self.operands = (a, b)
        self.shape = a.shape or b.shape
        self.dim = _common_dim(a, b)


class Indexed(Expr):
    def __init__(self, a, i: int):
        if not a.shape:
            raise FormError("cannot index a scalar")
        if not 0 <= i < a.shape[0]:
            raise FormError(f"index {i} out of range for shape {a.shape}")
        self.operands = (a,)
        self.index = int(i)
        self.shape = a.shape[1:]
        self.dim = a.dim


class ListTensor(Expr):
    def __init__(self, items):
        items = [_wrap(x) for x in items]
        if len({x.shape for x in items}) != 1:
            raise FormError("list tensor entries must share a shape")
        self.operands = tuple(items)
        self.shape = (len(items),) + items[0].shape
        self.dim = _common_dim(*items)


def as_tensor(items):
    return ListTensor(items)


as_vector = as_tensor
as_matrix = as_tensor


class _Derivative(Expr):
    def __init__(self, a):
        if a.dim is None:
            raise FormError("cannot differentiate a constant expression")
        self.operands = (a,)
        self.dim = a.dim


class Grad(_Derivative):
    def __init__(self, a):
        super().__init__(a)
        self.shape = a.shape + (a.dim,)


class Div(_Derivative):
    def __init__(self, a):
        super().__init__(a)
        if not a.shape or a.shape[-1] != a.dim:
            raise FormError("div needs a vector (or row-wise matrix) of length dim")
        self.shape = a.shape[:-1]


class Curl(_Derivative):
    def __init__(self, a):
        super().__init__(a)
        if a.dim != 3 or a.shape != (3,):
            raise FormError("curl is defined for 3-vectors in 3D; use rot in 2D")
        self.shape = (3,)


class Rot(_Derivative):
    def __init__(self, a):
        super().__init__(a)
        if a.dim != 2 or a.shape != (2,):
            raise FormError("rot is defined for 2-vectors in 2D")
        self.shape = ()


class Dot(Expr):
    def __init__(self, a, b):
        if not a.shape and not b.shape:
            self.shape = ()
        elif not a.shape or not b.shape or a.shape[-1] != b.shape[0]:
            raise FormError(f"dot: incompatible shapes {a.shape}, {b.shape}")
        else:
            self.shape = a.shape[:-1] + b.shape[1:]
        self.operands = (a, b)
        self.dim = _common_dim(a, b)


class Inner(Expr):
    def __init__(self, a, b):
        if a.shape != b.shape:
            raise FormError(f"inner: shapes differ {a.shape}, {b.shape}")
        self.operands = (a, b)
        self.shape = ()
        self.dim = _common_dim(a, b)


class Trace(Expr):
    def __init__(self, a):
        if len(a.shape) != 2 or a.shape[0] != a.shape[1]:
            raise FormError("trace needs a square matrix")
        self.operands = (a,)
        self.shape = ()
        self.dim = a.dim


class Skew(Expr):
    """Scalar skew part of a 2x2 matrix: (a[1,0] - a[0,1]) / 2."""

    def __init__(self, a):
        if a.shape != (2, 2):
            raise FormError("skew needs a 2x2 matrix")
        self.operands = (a,)
        self.shape = ()
        self.dim = a.dim


def grad(a):
    return Grad(_wrap(a))


def div(a):
    return Div(_wrap(a))


def curl(a):
    return Curl(_wrap(a))


def rot(a):
    return Rot(_wrap(a))


def dot(a, b):
    a, b = _wrap(a), _wrap(b)
    if not a.shape and not b.shape:
        return Product(a, b)
    return Dot(a, b)


def inner(a, b):
    a, b = _wrap(a), _wrap(b)
    if not a.shape:
        return Product(a, b)
    return Inner(a, b)


def trace(a):
    return Trace(_wrap(a))


tr = trace


def skew(a):
    return Skew(_wrap(a))


class Measure:
    def __repr__(self):
        return "dx"

    def __rmul__(self, other):
        return Form([_wrap(other)])


dx = Measure()


class Form:
    """Sum of cell integrals; arity is fixed by the argument numbers present."""

    def __init__(self, integrands):
        self.integrands = tuple(integrands)
        for e in self.integrands:
            if e.shape != ():
                raise FormError("integrand must be scalar")
        numbers_ = None
        for e in self.integrands:
            nums = sorted({t.number for t in e.terminals() if isinstance(t, Argument)})
            if numbers_ is None:
                numbers_ = nums
            elif nums != numbers_:
                raise FormError("integrals of a form must share the same arguments")
        numbers_ = numbers_ or []
        if numbers_ != list(range(len(numbers_))):
            raise FormError("argument numbers must be 0..arity-1")
        self.arity = len(numbers_)
        if self.arity not in (1, 2):
            raise FormError("only linear and bilinear forms are supported")

    def __add__(self, other):
        if isinstance(other, numbers.Real) and other == 0:
            return self
        return Form(self.integrands + other.integrands)

    __radd__ = __add__

    def __sub__(self, other):
        return Form(self.integrands + tuple(-e for e in other.integrands))

    def __neg__(self):
        return Form(tuple(-e for e in self.integrands))

    def __rmul__(self, c):
        return Form(tuple(c * e for e in self.integrands))

    @property
    def integrand(self):
        out = self.integrands[0]
        for e in self.integrands[1:]:
            out = out + e
        return out

    def arguments(self):
        found = {}
        for e in self.integrands:
            for t in e.terminals():
                if isinstance(t, Argument):
                    found.setdefault(t.number, t)
        return [found[k] for k in sorted(found)]

    def coefficients(self):
        out = []
        for e in self.integrands:
            for t in e.terminals():
                if isinstance(t, Coefficient) and t not in out:
                    out.append(t)
        return out

    @property
    def dim(self):
        return self.arguments()[0].dim
