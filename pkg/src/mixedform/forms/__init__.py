"""Form language, tensor-contraction compiler and a quadrature cross-check."""
from .compiler import Poly, TensorRepresentation, compile_form
from .ir import (Argument, Coefficient, Constant, Form, FormError, TestFunction, TestFunctions,
                 TrialFunction, TrialFunctions, as_matrix, as_tensor, as_vector, curl, div, dot,
                 dx, grad, inner, rot, skew, tr, trace)
from .oracle import evaluate_by_quadrature

__all__ = [
    "Argument", "Coefficient", "Constant", "Form", "FormError", "Poly", "TensorRepresentation",
    "TestFunction", "TestFunctions", "TrialFunction", "TrialFunctions", "as_matrix",
    "as_tensor", "as_vector", "compile_form", "curl", "div", "dot", "dx",
    "evaluate_by_quadrature", "grad", "inner", "rot", "skew", "tr", "trace",
]
