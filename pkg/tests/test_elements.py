import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mixedform.elements import (ElementError, MixedElement, VectorElement, create_element,
                                map_values, pull_back_values, space_dimension)
from mixedform.mesh import LOCAL_ENTITIES, REFERENCE_VERTICES, ROTATION
from mixedform.quadrature import make_rule

from conftest import all_supported, random_geometry


@pytest.mark.parametrize("family,cell,degree", all_supported())
def test_unisolvent(family, cell, degree):
    el = create_element(family, cell, degree)
    assert np.abs(el.dual_matrix() - np.eye(el.space_dimension)).max() < 1e-10
    assert el.space_dimension == space_dimension(family, cell, degree)


@pytest.mark.parametrize("cell,dim", [("triangle", 2), ("tetrahedron", 3)])
def test_dimension_formulas_small_cases(cell, dim):
    known = {"triangle": {("RT", 1): 3, ("N1curl", 1): 3, ("BDM", 1): 6, ("Lagrange", 2): 6},
             "tetrahedron": {("RT", 1): 4, ("N1curl", 1): 6, ("BDM", 1): 12, ("Lagrange", 2): 10}}
    for (fam, d), n in known[cell].items():
        assert create_element(fam, cell, d).space_dimension == n


@pytest.mark.parametrize("family,degree", [("RT", 0), ("RT", 5), ("BDM", 0), ("N1curl", 4),
                                           ("Lagrange", 0), ("DG", -1), ("DG", 7)])
def test_degree_out_of_range(family, degree):
    with pytest.raises(ElementError):
        create_element(family, "triangle", degree)


def test_unknown_family_and_cell():
    with pytest.raises(ElementError):
        create_element("BDFM", "triangle", 1)
    with pytest.raises(ElementError):
        create_element("RT", "quadrilateral", 1)


def test_aliases_share_cache():
    assert create_element("ned1", "triangle", 1) is create_element("N1curl", "triangle", 1)


def _facet_samples(dim, facet, n=7, seed=0):
    verts = REFERENCE_VERTICES[dim][list(LOCAL_ENTITIES[(dim, dim - 1)][facet])]
    rng = np.random.default_rng(seed)
    lam = rng.dirichlet(np.ones(len(verts)), size=n)
    return verts, lam @ verts


@pytest.mark.parametrize("family,cell,degree",
                         [t for t in all_supported() if t[0] in ("RT", "BDM", "N1curl")])
def test_trace_locality(family, cell, degree):
    """Only dofs on a facet (or its closure) see that facet's normal/tangential trace."""
    el = create_element(family, cell, degree)
    dim = el.dim
    for f in range(dim + 1):
        verts, x = _facet_samples(dim, f)
        E = verts[1:] - verts[0]
        vals = el.tabulate(x).values                     # (nbasis, dim, p)
        if family == "N1curl":
            traces = [np.einsum("jcp,c->jp", vals, e) for e in E]
            own = set()
            for d in range(1, dim):
                for ent, fverts in enumerate(LOCAL_ENTITIES[(dim, d)]):
                    if set(fverts) <= set(LOCAL_ENTITIES[(dim, dim - 1)][f]):
                        own |= set(el.entity_dofs[d].get(ent, []))
        else:
            n = ROTATION @ E[0] if dim == 2 else np.cross(E[0], E[1])
            traces = [np.einsum("jcp,c->jp", vals, n)]
            own = set(el.entity_dofs[dim - 1][f])
        for t in traces:
            others = [j for j in range(el.space_dimension) if j not in own]
            assert np.abs(t[others]).max(initial=0.0) < 1e-11


@pytest.mark.parametrize("cell", ["triangle", "tetrahedron"])
@pytest.mark.parametrize("degree", [1, 2, 3])
def test_rt_contained_in_bdm(cell, degree):
    rt = create_element("RT", cell, degree)
    bdm = create_element("BDM", cell, degree)
    rule = make_rule(cell, 2 * degree + 2)
    x = rule.points
    # every RT basis function is reproduced by BDM interpolation
    for j in range(rt.space_dimension):
        fn = lambda p, j=j: rt.tabulate(p).values[j].T  # noqa: E731
        coeff = bdm.apply_dofs(fn)
        recon = np.einsum("j,jcp->cp", coeff, bdm.tabulate(x).values)
        np.testing.assert_allclose(recon, rt.tabulate(x).values[j], atol=1e-11)


@pytest.mark.parametrize("family,cell,degree",
                         [("Lagrange", "triangle", 3), ("RT", "tetrahedron", 2),
                          ("N1curl", "triangle", 3), ("BDM", "tetrahedron", 2)])
def test_first_derivatives_match_finite_differences(family, cell, degree):
    el = create_element(family, cell, degree)
    x = np.array([[0.2, 0.3, 0.1][:el.dim]])
    h = 1e-6
    grad = el.tabulate(x, 1).gradient()[..., 0, :]
    for k in range(el.dim):
        e = np.zeros(el.dim)
        e[k] = h
        fd = (el.tabulate(x + e).values - el.tabulate(x - e).values)[..., 0] / (2 * h)
        np.testing.assert_allclose(grad[..., k], fd, atol=1e-6)


@pytest.mark.parametrize("family,cell,degree", [("DG", "triangle", 4), ("BDM", "triangle", 3),
                                                ("N1curl", "tetrahedron", 2)])
def test_reference_interpolation_reproduces_space(family, cell, degree):
    el = create_element(family, cell, degree)
    rng = np.random.default_rng(3)
    c = rng.normal(size=el.space_dimension)
    fn = lambda p: np.einsum("j,jcp->pc", c, el.tabulate(p).values)  # noqa: E731
    np.testing.assert_allclose(el.apply_dofs(fn), c, atol=1e-12)


def test_mixed_and_vector_elements():
    rt = create_element("RT", "triangle", 1)
    dg = create_element("DG", "triangle", 0)
    m = MixedElement([rt, dg])
    assert m.space_dimension == 4
    assert list(m.component_offsets) == [0, 2, 3]
    assert np.abs(m.dual_matrix() - np.eye(4)).max() < 1e-12
    v = VectorElement(create_element("Lagrange", "tetrahedron", 1))
    assert v.space_dimension == 12 and v.value_shape == (3,)
    with pytest.raises(ElementError):
        VectorElement(rt)
    with pytest.raises(ElementError):
        MixedElement([rt, create_element("DG", "tetrahedron", 0)])


# -- Piola trace identities ---------------------------------------------------

@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.booleans())
def test_contravariant_normal_trace_identity_2d(seed, negative):
    rng = np.random.default_rng(seed)
    g = random_geometry(rng, 2, negative)
    el = create_element("RT", "triangle", 2)
    E = rng.normal(size=2)
    e = g.jacobian @ E
    X = rng.random((4, 2)) * 0.5
    Phi = el.tabulate(X).values
    phi = map_values(el, g.jacobian, g.detJ, g.inverse_jacobian, Phi)
    # |e| phi.n = |E| Phi.N with n, N the rotated unit tangents
    lhs = np.einsum("jcp,c->jp", phi, ROTATION @ e)
    rhs = np.einsum("jcp,c->jp", Phi, ROTATION @ E)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * np.abs(rhs).max())


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([2, 3]), st.booleans())
def test_covariant_tangential_trace_identity(seed, dim, negative):
    rng = np.random.default_rng(seed)
    g = random_geometry(rng, dim, negative)
    el = create_element("N1curl", "triangle" if dim == 2 else "tetrahedron", 1)
    E = rng.normal(size=dim)
    X = rng.random((3, dim)) / dim
    Phi = el.tabulate(X).values
    phi = map_values(el, g.jacobian, g.detJ, g.inverse_jacobian, Phi)
    lhs = np.einsum("jcp,c->jp", phi, g.jacobian @ E)
    rhs = np.einsum("jcp,c->jp", Phi, E)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * np.abs(rhs).max())


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.booleans())
def test_contravariant_face_area_identity_3d(seed, negative):
    rng = np.random.default_rng(seed)
    g = random_geometry(rng, 3, negative)
    el = create_element("BDM", "tetrahedron", 1)
    E1, E2 = rng.normal(size=(2, 3))
    e1, e2 = g.jacobian @ E1, g.jacobian @ E2
    X = rng.random((3, 3)) / 3
    Phi = el.tabulate(X).values
    phi = map_values(el, g.jacobian, g.detJ, g.inverse_jacobian, Phi)
    # |face| phi.n = |ref face| Phi.N, written with the unnormalised cross products
    lhs = np.einsum("jcp,c->jp", phi, np.cross(e1, e2))
    rhs = np.einsum("jcp,c->jp", Phi, np.cross(E1, E2))
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * np.abs(rhs).max())


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(["RT", "N1curl", "BDM"]))
def test_pull_back_inverts_push_forward(seed, family):
    rng = np.random.default_rng(seed)
    g = random_geometry(rng, 3)
    el = create_element(family, "tetrahedron", 1)
    v = rng.normal(size=(5, 3))
    pushed = map_values(el, g.jacobian, g.detJ, g.inverse_jacobian, v.T[None])[0].T
    np.testing.assert_allclose(pull_back_values(el, g.jacobian, g.detJ, g.inverse_jacobian,
                                                pushed), v, atol=1e-12)
