"""Forms shared by the compiler tests and the acceptance checks."""
from mixedform.elements import MixedElement, VectorElement, create_element
from mixedform.forms import (Coefficient, TestFunction, TestFunctions, TrialFunction,
                             TrialFunctions, as_matrix, curl, div, dot, dx, grad, inner, rot,
                             skew, tr)


def mass(family, cell, degree):
    el = create_element(family, cell, degree)
    v, u = TestFunction(el), TrialFunction(el)
    return inner(v, u) * dx if el.value_shape else v * u * dx


def mixed_poisson(degree=1, family="RT"):
    ME = MixedElement([create_element(family, "triangle", degree),
                       create_element("DG", "triangle", degree - 1)])
    tau, v = TestFunctions(ME)
    sig, u = TrialFunctions(ME)
    return (inner(tau, sig) - div(tau) * u + v * div(sig)) * dx


def elasticity(degree=1, nu=0.5, zeta=0.2475):
    B = create_element("BDM", "triangle", degree)
    D = create_element("DG", "triangle", degree - 1)
    ME = MixedElement([B, B, VectorElement(D), D])
    t0, t1, w, eta = TestFunctions(ME)
    s0, s1, u, gam = TrialFunctions(ME)
    S = as_matrix([[s0[0], s0[1]], [s1[0], s1[1]]])
    T = as_matrix([[t0[0], t0[1]], [t1[0], t1[1]]])

    def b(tau, v, q):
        return div(tau)[0] * v[0] + div(tau)[1] * v[1] + skew(tau) * q

    return (nu * inner(S, T) - zeta * tr(S) * tr(T) + b(T, u, gam) + b(S, w, eta)) * dx


def core_forms():
    """The five forms of the oracle-equivalence check, keyed by name."""
    return {
        "affine mass": mass("Lagrange", "triangle", 2),
        "contravariant mass": mass("RT", "tetrahedron", 2),
        "covariant mass": mass("N1curl", "tetrahedron", 2),
        "mixed Poisson": mixed_poisson(2),
        "elasticity": elasticity(1),
    }


def div_pairing(cell="triangle", degree=1):
    """<v, div sigma> with v in DG(degree - 1) and sigma in RT(degree)."""
    v = TestFunction(create_element("DG", cell, degree - 1))
    s = TrialFunction(create_element("RT", cell, degree))
    return v * div(s) * dx


def extra_forms():
    tri, tet = "triangle", "tetrahedron"
    out = {}
    s = create_element("RT", tri, 2)
    out["div-div"] = div(TestFunction(s)) * div(TrialFunction(s)) * dx
    n2 = create_element("N1curl", tri, 2)
    out["rot-rot"] = rot(TestFunction(n2)) * rot(TrialFunction(n2)) * dx
    n3 = create_element("N1curl", tet, 1)
    out["curl-curl"] = inner(curl(TestFunction(n3)), curl(TrialFunction(n3))) * dx
    p = create_element("Lagrange", tet, 2)
    out["stiffness"] = inner(grad(TestFunction(p)), grad(TrialFunction(p))) * dx
    ME = MixedElement([n3, create_element("RT", tet, 1)])
    tau, v = TestFunctions(ME)
    sig, u = TrialFunctions(ME)
    out["curl-div"] = (inner(tau, sig) - inner(curl(tau), u) + inner(v, curl(sig))
                       + div(v) * div(u)) * dx
    return out


def coefficient_forms():
    """(form, coefficient) pairs; the coefficient enters linearly."""
    tri = "triangle"
    k = Coefficient(create_element("DG", tri, 1), "k")
    s = create_element("BDM", tri, 1)
    weighted = k * inner(TestFunction(s), TrialFunction(s)) * dx
    g = Coefficient(VectorElement(create_element("Lagrange", tri, 2)), "g")
    rt = create_element("RT", tri, 1)
    load = dot(TestFunction(rt), g) * dx + div(TestFunction(rt)) * g[0] * dx
    return {"weighted mass": (weighted, k), "vector load": (load, g)}
