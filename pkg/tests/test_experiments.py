import json
import subprocess
import sys

import numpy as np
import pytest
import sympy as sym

from mixedform import cli
from mixedform import experiments as ex

X, Y, Z = sym.symbols("x y z")


def _lambdify(expr, vars_):
    f = sym.lambdify(vars_, expr, "numpy")
    return lambda P: np.broadcast_to(np.asarray(f(*P.T), dtype=float), (len(P),))


def _sample(dim, n=25, seed=4):
    return np.random.default_rng(seed).random((n, dim))


def test_poisson_exact_fields():
    C = 7.0
    u = C * sym.sin(sym.pi * X) * sym.sin(sym.pi * Y)
    sigma = [-sym.diff(u, X), -sym.diff(u, Y)]
    f = sym.diff(sigma[0], X) + sym.diff(sigma[1], Y)
    P = _sample(2)
    u_h, s_h, f_h = ex.poisson_exact(C)
    np.testing.assert_allclose(u_h(P), _lambdify(u, (X, Y))(P), atol=1e-12)
    np.testing.assert_allclose(s_h(P), np.stack([_lambdify(s, (X, Y))(P) for s in sigma], 1),
                               atol=1e-12)
    np.testing.assert_allclose(f_h(P), _lambdify(f, (X, Y))(P), atol=1e-10)


def _curl(v):
    return [sym.diff(v[2], Y) - sym.diff(v[1], Z), sym.diff(v[0], Z) - sym.diff(v[2], X),
            sym.diff(v[1], X) - sym.diff(v[0], Y)]


def test_curl_div_exact_fields():
    p = lambda t: t ** 2 * (t - 1) ** 2  # noqa: E731
    s = sym.sin
    pi = sym.pi
    u = [p(X) * s(pi * Y) * s(pi * Z), p(Y) * s(pi * Z) * s(pi * X), p(Z) * s(pi * X) * s(pi * Y)]
    div_u = sum(sym.diff(u[i], v) for i, v in enumerate((X, Y, Z)))
    sigma = _curl(u)
    curl_sigma = _curl(sigma)
    grad_div = [sym.diff(div_u, v) for v in (X, Y, Z)]
    f = [curl_sigma[i] - grad_div[i] for i in range(3)]
    exact = ex.curl_div_exact()
    P = _sample(3)
    vec = lambda comps: np.stack([_lambdify(c, (X, Y, Z))(P) for c in comps], 1)  # noqa: E731
    np.testing.assert_allclose(exact["u"](P), vec(u), atol=1e-12)
    np.testing.assert_allclose(exact["div_u"](P), _lambdify(div_u, (X, Y, Z))(P), atol=1e-12)
    np.testing.assert_allclose(exact["sigma"](P), vec(sigma), atol=1e-12)
    np.testing.assert_allclose(exact["curl_sigma"](P), vec(curl_sigma), atol=1e-11)
    np.testing.assert_allclose(exact["f"](P), vec(f), atol=1e-11)
    # f is minus the vector Laplacian of u
    lap = [sum(sym.diff(c, v, 2) for v in (X, Y, Z)) for c in u]
    np.testing.assert_allclose(vec(f), -vec(lap), atol=1e-11)
    # u is not solenoidal, but its tangential trace and divergence vanish on the boundary
    assert sym.simplify(div_u) != 0
    for face in (0, 1):
        for i, v in enumerate((X, Y, Z)):
            assert sym.simplify(div_u.subs(v, face)) == 0
            for j in range(3):
                if j != i:
                    assert sym.simplify(u[j].subs(v, face)) == 0


@pytest.mark.parametrize("nu,zeta,scale", [(0.5, 0.2475, 1.0), (1.0, 0.1, 2.0)])
def test_elasticity_exact_fields(nu, zeta, scale):
    u = [-Y * sym.sin(sym.pi * X) * scale, sym.pi / 2 * Y ** 2 * sym.cos(sym.pi * X) * scale]
    grad = [[sym.diff(u[i], v) for v in (X, Y)] for i in range(2)]
    eps = [[(grad[i][j] + grad[j][i]) / 2 for j in range(2)] for i in range(2)]
    # invert the compliance A s = nu s - zeta tr(s) I
    S = sym.Matrix(2, 2, sym.symbols("s0:4"))
    eqs = nu * S - zeta * S.trace() * sym.eye(2) - sym.Matrix(eps)
    sol = sym.solve(list(eqs), list(S))
    sigma = [[sol[S[i, j]] for j in range(2)] for i in range(2)]
    div_sigma = [sym.diff(sigma[i][0], X) + sym.diff(sigma[i][1], Y) for i in range(2)]
    assert sym.simplify(grad[0][0] + grad[1][1]) == 0
    exact = ex.elasticity_exact(nu, zeta, scale)
    P = _sample(2)
    f = lambda e: _lambdify(e, (X, Y))(P)  # noqa: E731
    np.testing.assert_allclose(exact["u"](P), np.stack([f(c) for c in u], 1), atol=1e-12)
    np.testing.assert_allclose(exact["grad_u"](P),
                               np.stack([np.stack([f(c) for c in row], 1) for row in grad], 1),
                               atol=1e-12)
    np.testing.assert_allclose(exact["sigma"](P),
                               np.stack([np.stack([f(c) for c in row], 1) for row in sigma], 1),
                               atol=1e-12)
    np.testing.assert_allclose(exact["div_sigma"](P), np.stack([f(c) for c in div_sigma], 1),
                               atol=1e-11)


def test_cavity_exact_multiplicities():
    assert ex.cavity_exact(10) == [1, 1, 2, 4, 4, 5, 5, 8, 9, 9]
    assert ex.cavity_exact(1) == [1]
    assert len(ex.cavity_exact(40)) == 40


def test_fit_rate():
    hs = [1 / 4, 1 / 8, 1 / 16, 1 / 32]
    assert ex.fit_rate(hs, [h ** 2.5 for h in hs]) == pytest.approx(2.5)
    # values below the floor are ignored
    assert ex.fit_rate(hs, [1e-2, 1e-3, 1e-12, 1e-13]) == pytest.approx(np.log(10) / np.log(2))
    assert np.isnan(ex.fit_rate(hs, [1e-12] * 4))


def test_zero_data_gives_zero_solution():
    rep = ex.run_mixed_poisson("RT", 1, levels=(2, 4), C=0.0)
    assert all(max(r.errors.values()) == 0.0 for r in rep.runs)
    rep = ex.run_curl_div("RT", 1, levels=(1,), zero=True)
    assert max(rep.runs[0].errors.values()) == 0.0
    rep = ex.run_elasticity(1, levels=(2,), scale=0.0)
    assert max(rep.runs[0].errors.values()) == 0.0


def test_cavity_lagrange_pollution():
    rep = ex.run_cavity("Lagrange", n=8, k=10)
    assert rep.passed() is False
    rep = ex.run_cavity("N1curl", n=8, k=10)
    assert rep.passed() is True


def test_csv_schema_and_json(tmp_path):
    assert cli.main(["mixed_poisson", "--levels", "2,4", "--out", str(tmp_path)]) in (0, 1)
    lines = (tmp_path / "mixed_poisson.csv").read_text().splitlines()
    assert lines[0] == ("level,n,h,dofs,err_L2_sigma,err_Hdiv_sigma,err_Hcurl_sigma,"
                        "err_L2_u,err_Hdiv_u,rate_running,seconds")
    assert len(lines) == 3
    row = lines[2].split(",")
    assert row[1] == "4" and row[6] == "" and row[10] == "" and float(row[9]) > 0
    data = json.loads((tmp_path / "mixed_poisson.json").read_text())
    assert data["parameters"]["levels"] == [2, 4] and len(data["runs"]) == 2


def test_timings_flag_fills_seconds(tmp_path):
    cli.main(["elasticity", "--levels", "2", "--timings", "--out", str(tmp_path)])
    row = (tmp_path / "elasticity.csv").read_text().splitlines()[1].split(",")
    assert float(row[10]) > 0


def test_cavity_cli_writes_eigenvalue_table(tmp_path):
    assert cli.main(["cavity", "--n", "8", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "cavity_eigenvalues.csv").read_text().splitlines()
    assert rows[0] == "index,computed,exact,relative_error" and len(rows) == 11


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "mixedform", "cavity", "--n", "4", "--k", "3",
                          "--out", str(tmp_path)], capture_output=True, text=True, check=False)
    assert out.returncode == 0, out.stderr
    assert "cavity" in out.stdout


def test_bad_arguments():
    with pytest.raises(SystemExit):
        cli.main(["no_such_experiment"])
