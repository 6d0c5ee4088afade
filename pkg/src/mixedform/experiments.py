"""Convergence and eigenvalue studies on manufactured solutions.

Exact fields are written out by hand below; the test suite re-derives
every one of them symbolically.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .assembly import (DiscreteField, FunctionSpace, apply_essential_bc, assemble, error_norm,
                       interpolate)
from .elements import MixedElement, VectorElement, create_element
from .forms import (Coefficient, TestFunctions, TrialFunctions, as_matrix, compile_form, curl,
                    div, dot, dx, grad, inner, rot, skew, tr)
from .forms.ir import TestFunction, TrialFunction
from .mesh import unit_cube_mesh, unit_square_mesh
from .solve import solve_generalized_eigen, solve_linear

log = logging.getLogger(__name__)
PI = np.pi
ERROR_FLOOR = 1e-9

CSV_COLUMNS = ["level", "n", "h", "dofs", "err_L2_sigma", "err_Hdiv_sigma", "err_Hcurl_sigma",
               "err_L2_u", "err_Hdiv_u", "rate_running", "seconds"]


@dataclass
class RunRecord:
    level: int
    n: int
    h: float
    dofs: int
    errors: dict
    seconds: float


@dataclass
class ExperimentReport:
    name: str
    parameters: dict
    exact_solution: str
    primary_error: str
    runs: list = field(default_factory=list)
    rates: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)
    tolerance: float = 0.0
    eigenvalues: list | None = None
    exact_eigenvalues: list | None = None

    def passed(self) -> bool | None:
        if self.eigenvalues is not None:
            return _eigen_ok(self.eigenvalues, self.exact_eigenvalues)
        if not self.expected:
            return None
        return all(abs(self.rates.get(k, np.nan) - v) <= self.tolerance
                   for k, v in self.expected.items())


def fit_rate(hs, errors, last: int = 3) -> float:
    """Least-squares slope of log(error) against log(h) over the last levels,
    skipping errors below the precision floor."""
    pts = [(h, e) for h, e in zip(hs, errors) if e is not None and e >= ERROR_FLOOR][-last:]
    if len(pts) < 2:
        return float("nan")
    lh, le = np.log([p[0] for p in pts]), np.log([p[1] for p in pts])
    return float(np.polyfit(lh, le, 1)[0])


def _finish(report: ExperimentReport):
    hs = [r.h for r in report.runs]
    keys = sorted({k for r in report.runs for k in r.errors})
    report.rates = {k: fit_rate(hs, [r.errors.get(k) for r in report.runs]) for k in keys}
    return report


def _split_mixed(U, space):
    field_ = DiscreteField(space, U)
    return [field_.sub(k) for k in range(len(space.subspaces))]


# ---------------------------------------------------------------------------
# mixed Poisson: sigma = -grad u, div sigma = f, u = C sin(pi x) sin(pi y)

def poisson_exact(C):
    def u(x):
        return C * np.sin(PI * x[:, 0]) * np.sin(PI * x[:, 1])

    def sigma(x):
        return -C * PI * np.stack([np.cos(PI * x[:, 0]) * np.sin(PI * x[:, 1]),
                                   np.sin(PI * x[:, 0]) * np.cos(PI * x[:, 1])], axis=1)

    def f(x):
        return 2 * PI ** 2 * u(x)

    return u, sigma, f


def run_mixed_poisson(family="RT", degree=1, levels=(4, 8, 16, 32), C=100.0, threads=1,
                      pattern="regular") -> ExperimentReport:
    """``degree`` is r: RT of degree r spans P_r^- (lowest order r = 1), BDM_r is full P_r."""
    fam = create_element(family, "triangle", degree).family
    S = create_element(fam, "triangle", degree)
    V = create_element("DG", "triangle", degree - 1)
    F = create_element("DG", "triangle", min(degree + 2, 6))
    ME = MixedElement([S, V])
    tau, v = TestFunctions(ME)
    sig, u = TrialFunctions(ME)
    f = Coefficient(F, "f")
    a = compile_form((inner(tau, sig) - div(tau) * u + v * div(sig)) * dx)
    L = compile_form(v * f * dx)
    u_ex, sig_ex, f_ex = poisson_exact(C)
    expected = degree if fam == "RT" else degree + 1
    rep = ExperimentReport("mixed_poisson", dict(family=fam, degree=degree, levels=list(levels),
                                                 C=C, pattern=pattern),
                           "u = C sin(pi x) sin(pi y)", "err_L2_sigma",
                           expected={"err_L2_sigma": expected}, tolerance=0.15)
    for lvl, n in enumerate(levels):
        t0 = time.perf_counter()
        mesh = unit_square_mesh(n, pattern)
        W = FunctionSpace(mesh, ME)
        fh = interpolate(FunctionSpace(mesh, F), f_ex)
        A = assemble(a, [W, W], threads=threads)
        b = assemble(L, [W], {f: fh}, threads=threads)
        x = solve_linear(A, b).x
        sh, uh = _split_mixed(x, W)
        div_ex = f_ex
        errs = {"err_L2_sigma": error_norm(sh, sig_ex),
                "err_Hdiv_sigma": error_norm(sh, sig_ex, "Hdiv", div_ex),
                "err_L2_u": error_norm(uh, u_ex)}
        rep.runs.append(RunRecord(lvl, n, mesh.h_max, W.dim, errs, time.perf_counter() - t0))
        log.info("mixed_poisson %s%d n=%d dofs=%d errL2=%.3e", fam, degree, n, W.dim,
                 errs["err_L2_sigma"])
    return _finish(rep)


# ---------------------------------------------------------------------------
# curl-div Hodge Laplacian on the unit cube
#
# u_i = p(x_i) sin(pi x_j) sin(pi x_k), p(t) = t^2 (t - 1)^2, (i, j, k) cyclic.
# sigma = curl u,  f = curl sigma - grad div u = -Laplace u.

def _p(t):
    return t ** 2 * (t - 1) ** 2


def _dp(t):
    return 2 * t * (t - 1) * (2 * t - 1)


def _ddp(t):
    return 12 * t ** 2 - 12 * t + 2


def curl_div_exact():
    def parts(x):
        s = np.sin(PI * x)
        c = np.cos(PI * x)
        return s.T, c.T, _p(x).T, _dp(x).T, _ddp(x).T

    def u(x):
        s, _, p, _, _ = parts(x)
        return np.stack([p[0] * s[1] * s[2], p[1] * s[0] * s[2], p[2] * s[0] * s[1]], axis=1)

    def div_u(x):
        s, _, _, dp, _ = parts(x)
        return dp[0] * s[1] * s[2] + dp[1] * s[0] * s[2] + dp[2] * s[0] * s[1]

    def sigma(x):
        s, c, p, _, _ = parts(x)
        return PI * np.stack([s[0] * (p[2] * c[1] - p[1] * c[2]),
                              s[1] * (p[0] * c[2] - p[2] * c[0]),
                              s[2] * (p[1] * c[0] - p[0] * c[1])], axis=1)

    def f(x):
        s, _, p, _, ddp = parts(x)
        return np.stack([(2 * PI ** 2 * p[0] - ddp[0]) * s[1] * s[2],
                         (2 * PI ** 2 * p[1] - ddp[1]) * s[0] * s[2],
                         (2 * PI ** 2 * p[2] - ddp[2]) * s[0] * s[1]], axis=1)

    def grad_div_u(x):
        s, c, _, dp, ddp = parts(x)
        return np.stack([
            ddp[0] * s[1] * s[2] + PI * c[0] * (dp[1] * s[2] + dp[2] * s[1]),
            ddp[1] * s[0] * s[2] + PI * c[1] * (dp[0] * s[2] + dp[2] * s[0]),
            ddp[2] * s[0] * s[1] + PI * c[2] * (dp[0] * s[1] + dp[1] * s[0])], axis=1)

    def curl_sigma(x):
        # curl curl u = grad div u - Laplace u
        return grad_div_u(x) + f(x)

    return dict(u=u, div_u=div_u, sigma=sigma, curl_sigma=curl_sigma, f=f)


# keyed by (family, Nedelec degree, H(div) degree)
CURL_DIV_EXPECTED = {
    ("RT", 1, 1): {"err_L2_sigma": 1, "err_Hcurl_sigma": 1, "err_L2_u": 1, "err_Hdiv_u": 1},
    ("BDM", 2, 1): {"err_L2_sigma": 2, "err_Hcurl_sigma": 2, "err_L2_u": 2, "err_Hdiv_u": 1},
}


def run_curl_div(family="RT", degree=1, levels=(2, 4, 8), threads=1, zero=False,
                 div_degree=None) -> ExperimentReport:
    """N1curl(degree) x H(div) element on the unit cube.

    The H(div) degree defaults to ``degree`` for RT and ``degree - 1`` for
    BDM: curl maps N1curl(d) onto a subspace of BDM(d - 1), and pairing it
    with a larger BDM space leaves divergence-free fields outside the range
    of curl, which makes the system singular.
    """
    fam = create_element(family, "tetrahedron", max(degree - 1, 1)).family
    if div_degree is None:
        div_degree = degree - 1 if fam == "BDM" else degree
    NED = create_element("N1curl", "tetrahedron", degree)
    DIV = create_element(fam, "tetrahedron", div_degree)
    F = create_element("DG", "tetrahedron", min(degree + 1, 6))
    ME = MixedElement([NED, DIV])
    tau, v = TestFunctions(ME)
    sig, u = TrialFunctions(ME)
    f = Coefficient(VectorElement(F), "f")
    a = compile_form((inner(tau, sig) - inner(curl(tau), u) + inner(v, curl(sig))
                      + div(v) * div(u)) * dx)
    L = compile_form(inner(v, f) * dx)
    ex = curl_div_exact()
    if zero:
        ex = {k: (lambda x, g=g: 0.0 * g(x)) for k, g in ex.items()}
    expected = CURL_DIV_EXPECTED.get((fam, degree, div_degree), {})
    rep = ExperimentReport("curl_div", dict(family=fam, degree=degree, div_degree=div_degree,
                                            levels=list(levels)),
                           "u_i = x_i^2 (x_i-1)^2 sin(pi x_j) sin(pi x_k)", "err_L2_sigma",
                           expected=expected, tolerance=0.25)
    for lvl, n in enumerate(levels):
        t0 = time.perf_counter()
        mesh = unit_cube_mesh(n)
        W = FunctionSpace(mesh, ME)
        fh = interpolate(FunctionSpace(mesh, VectorElement(F)), ex["f"])
        A = assemble(a, [W, W], threads=threads)
        b = assemble(L, [W], {f: fh}, threads=threads)
        x = solve_linear(A, b).x
        sh, uh = _split_mixed(x, W)
        errs = {"err_L2_sigma": error_norm(sh, ex["sigma"]),
                "err_Hcurl_sigma": error_norm(sh, ex["sigma"], "Hcurl", ex["curl_sigma"]),
                "err_L2_u": error_norm(uh, ex["u"]),
                "err_Hdiv_u": error_norm(uh, ex["u"], "Hdiv", ex["div_u"])}
        rep.runs.append(RunRecord(lvl, n, mesh.h_max, W.dim, errs, time.perf_counter() - t0))
        log.info("curl_div NED%d x %s%d n=%d dofs=%d %s", degree, fam, div_degree, n, W.dim, errs)
    return _finish(rep)


# ---------------------------------------------------------------------------
# Maxwell cavity on [0, pi]^2

def cavity_exact(k: int) -> list:
    """Sorted m1^2 + m2^2 with at least one m_i >= 1, with multiplicity."""
    m = int(np.ceil(np.sqrt(k))) + 2
    vals = sorted(a * a + b * b for a in range(m + 1) for b in range(m + 1) if a + b > 0)
    while len(vals) < k or vals[k - 1] > m * m:
        m *= 2
        vals = sorted(a * a + b * b for a in range(m + 1) for b in range(m + 1) if a + b > 0)
    return vals[:k]


def _eigen_ok(computed, exact, tol=0.08):
    exact_set = np.array(sorted(set(exact)))
    within = [np.min(np.abs(exact_set - lam) / exact_set) <= tol for lam in computed]
    return bool(all(within))


def run_cavity(element="N1curl", n=16, k=10, pattern="crisscross") -> ExperimentReport:
    mesh = unit_square_mesh(n, pattern, scale=PI)
    t0 = time.perf_counter()
    if element.lower() in ("n1curl", "ned1", "nedelec"):
        el = create_element("N1curl", "triangle", 1)
        V = FunctionSpace(mesh, el)
        constrained = V.boundary_dofs()
    else:
        el = VectorElement(create_element("Lagrange", "triangle", 1))
        V = FunctionSpace(mesh, el)
        constrained = _tangential_lagrange_dofs(V)
    E, F = TrialFunction(el), TestFunction(el)
    A = assemble(rot(F) * rot(E) * dx, [V, V])
    M = assemble(inner(F, E) * dx, [V, V])
    free = np.setdiff1d(np.arange(V.dim), constrained)
    sol = solve_generalized_eigen(A, M, k, free=free)
    exact = cavity_exact(k)
    rep = ExperimentReport("cavity", dict(element=repr(el), n=n, k=k, pattern=pattern),
                           "omega^2 = m1^2 + m2^2 on [0, pi]^2", "eigenvalues",
                           tolerance=0.08)
    rep.runs.append(RunRecord(0, n, mesh.h_max, V.dim, {}, time.perf_counter() - t0))
    rep.eigenvalues = [float(x) for x in sol.eigenvalues]
    rep.exact_eigenvalues = [float(x) for x in exact]
    rep.parameters["constrained_dofs"] = int(len(constrained))
    rep.parameters["zero_threshold"] = sol.zero_threshold
    return rep


def _tangential_lagrange_dofs(V):
    """Vector P1 dofs fixing the tangential component on the boundary of a box."""
    mesh = V.mesh
    lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
    bverts = mesh.boundary_entities(0)
    x = mesh.vertices[bverts]
    tol = 1e-12 * (hi - lo).max()
    comp_dofs = [V.sub(c).entity_dofs(0, bverts) + (V.sub(c).offset - V.offset) for c in range(2)]
    out = []
    # on x = const sides the tangent is e_y, on y = const sides it is e_x
    on_x = (np.abs(x[:, 0] - lo[0]) < tol) | (np.abs(x[:, 0] - hi[0]) < tol)
    on_y = (np.abs(x[:, 1] - lo[1]) < tol) | (np.abs(x[:, 1] - hi[1]) < tol)
    out.append(comp_dofs[1][on_x])
    out.append(comp_dofs[0][on_y])
    return np.unique(np.concatenate(out))


# ---------------------------------------------------------------------------
# elasticity with weakly imposed symmetry
#
# u = (-y sin(pi x), pi/2 y^2 cos(pi x)), div u = 0, so with the compliance
# A s = nu s - zeta tr(s) I the exact stress is sigma = eps(u) / nu.

def elasticity_exact(nu=0.5, zeta=0.2475, scale=1.0):
    lam_fac = zeta / (nu - 2 * zeta)

    def u(x):
        return scale * np.stack([-x[:, 1] * np.sin(PI * x[:, 0]),
                                 0.5 * PI * x[:, 1] ** 2 * np.cos(PI * x[:, 0])], axis=1)

    def grad_u(x):
        s, c, y = np.sin(PI * x[:, 0]), np.cos(PI * x[:, 0]), x[:, 1]
        g = np.empty((len(x), 2, 2))
        g[:, 0, 0] = -PI * y * c
        g[:, 0, 1] = -s
        g[:, 1, 0] = -0.5 * PI ** 2 * y ** 2 * s
        g[:, 1, 1] = PI * y * c
        return scale * g

    def sigma(x):
        g = grad_u(x)
        eps = 0.5 * (g + np.swapaxes(g, 1, 2))
        trace = eps[:, 0, 0] + eps[:, 1, 1]
        return (eps + lam_fac * trace[:, None, None] * np.eye(2)) / nu

    def div_sigma(x):
        # div u = 0, so div sigma = div eps / nu
        s, c, y = np.sin(PI * x[:, 0]), np.cos(PI * x[:, 0]), x[:, 1]
        return scale / nu * np.stack([0.5 * PI ** 2 * y * s,
                                      PI * c * (0.5 - 0.25 * PI ** 2 * y ** 2)], axis=1)

    return dict(u=u, grad_u=grad_u, sigma=sigma, div_sigma=div_sigma)


def run_elasticity(degree=1, levels=(4, 8, 16), nu=0.5, zeta=0.2475, threads=1,
                   scale=1.0, pattern="regular") -> ExperimentReport:
    r = degree
    B = create_element("BDM", "triangle", r)
    D = create_element("DG", "triangle", r - 1)
    ME = MixedElement([B, B, VectorElement(D), D])
    t0_, t1_, w, eta = TestFunctions(ME)
    s0, s1, u, gam = TrialFunctions(ME)
    S = as_matrix([[s0[0], s0[1]], [s1[0], s1[1]]])
    T = as_matrix([[t0_[0], t0_[1]], [t1_[0], t1_[1]]])

    def b(tau, v, q):
        return div(tau)[0] * v[0] + div(tau)[1] * v[1] + skew(tau) * q

    a = compile_form((nu * inner(S, T) - zeta * tr(S) * tr(T) + b(T, u, gam) + b(S, w, eta)) * dx)
    # the displacement is not zero on the boundary; its trace enters through
    # int_dOmega (tau n) . u = <tau, grad u> + <div tau, u>
    G = create_element("Lagrange", "triangle", min(r + 2, 6))
    FD = create_element("DG", "triangle", min(r + 1, 6))
    ug = Coefficient(VectorElement(G), "u_exact")
    fc = Coefficient(VectorElement(FD), "f")
    L_bd = compile_form((inner(T, grad(ug)) + dot(div(T), ug)) * dx)
    L_f = compile_form(inner(w, fc) * dx)
    ex = elasticity_exact(nu, zeta, scale)
    rep = ExperimentReport("elasticity", dict(degree=r, levels=list(levels), nu=nu, zeta=zeta,
                                              scale=scale, pattern=pattern),
                           "u = (-y sin(pi x), pi/2 y^2 cos(pi x))", "err_Hdiv_sigma",
                           expected={"err_Hdiv_sigma": r}, tolerance=0.2)
    for lvl, n in enumerate(levels):
        t0 = time.perf_counter()
        mesh = unit_square_mesh(n, pattern)
        W = FunctionSpace(mesh, ME)
        coef = {ug: interpolate(FunctionSpace(mesh, VectorElement(G)), ex["u"]),
                fc: interpolate(FunctionSpace(mesh, VectorElement(FD)), ex["div_sigma"])}
        A = assemble(a, [W, W], threads=threads)
        rhs = assemble(L_bd, [W], coef, threads=threads) + assemble(L_f, [W], coef, threads=threads)
        x = solve_linear(A, rhs).x
        sh0, sh1, uh, _ = _split_mixed(x, W)
        e2 = {"l2": 0.0, "hdiv": 0.0}
        for i, sh in enumerate((sh0, sh1)):
            row = lambda X, i=i: ex["sigma"](X)[:, i, :]  # noqa: E731
            drow = lambda X, i=i: ex["div_sigma"](X)[:, i]  # noqa: E731
            e2["l2"] += error_norm(sh, row) ** 2
            e2["hdiv"] += error_norm(sh, row, "Hdiv", drow) ** 2
        errs = {"err_L2_sigma": float(np.sqrt(e2["l2"])),
                "err_Hdiv_sigma": float(np.sqrt(e2["hdiv"])),
                "err_L2_u": error_norm(uh, ex["u"])}
        rep.runs.append(RunRecord(lvl, n, mesh.h_max, W.dim, errs, time.perf_counter() - t0))
        log.info("elasticity r=%d n=%d dofs=%d %s", r, n, W.dim, errs)
    return _finish(rep)
