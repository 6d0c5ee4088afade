import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mixedform.mesh import (LOCAL_ENTITIES, ROTATION, Mesh, MeshError, refine_uniform,
                            unit_cube_mesh, unit_square_mesh)


@pytest.mark.parametrize("n", [1, 2, 5])
def test_unit_square_counts(n):
    m = unit_square_mesh(n)
    assert m.num_vertices == (n + 1) ** 2
    assert m.num_cells == 2 * n * n
    assert m.num_entities(1) == 3 * n * n + 2 * n
    assert len(m.boundary_facets()) == 4 * n


@pytest.mark.parametrize("n", [1, 3])
def test_crisscross_counts(n):
    m = unit_square_mesh(n, "crisscross")
    assert m.num_vertices == (n + 1) ** 2 + n * n
    assert m.num_cells == 4 * n * n
    # Euler characteristic of a disc
    assert m.num_vertices - m.num_entities(1) + m.num_cells == 1


@pytest.mark.parametrize("n", [1, 2, 3])
def test_unit_cube_euler_and_volume(n):
    m = unit_cube_mesh(n)
    assert m.num_cells == 6 * n ** 3
    chi = m.num_vertices - m.num_entities(1) + m.num_entities(2) - m.num_cells
    assert chi == 1
    _, det, _ = m.jacobians()
    assert np.sum(np.abs(det)) / 6 == pytest.approx(1.0)
    assert len(m.boundary_facets()) == 12 * n * n


@pytest.mark.parametrize("mesh", [unit_square_mesh(3), unit_square_mesh(2, "crisscross"),
                                  unit_cube_mesh(2)])
def test_cells_sorted_and_shared_entities_agree(mesh):
    assert np.all(np.diff(mesh.cells, axis=1) > 0)
    dim = mesh.dim
    for d in range(1, dim):
        ents = mesh.cell_entities(d)
        for c in range(mesh.num_cells):
            for k, local in enumerate(LOCAL_ENTITIES[(dim, d)]):
                # the cell's local view of entity k equals the stored global tuple
                assert tuple(mesh.cells[c][list(local)]) == tuple(mesh.entities(d)[ents[c, k]])


def test_facets_shared_by_at_most_two_cells():
    m = unit_cube_mesh(2)
    counts = [len(m.facet_cells(f)) for f in range(m.num_entities(2))]
    assert set(counts) == {1, 2}
    assert len(m.interior_facets()) + len(m.boundary_facets()) == m.num_entities(2)


def test_facet_frame_same_from_both_cells():
    for m in (unit_square_mesh(3, "crisscross"), unit_cube_mesh(2)):
        for f in m.interior_facets():
            c0, c1 = m.facet_cells(f)
            a, b = m.facet_frame(f, c0), m.facet_frame(f, c1)
            np.testing.assert_allclose(a.normal, b.normal)
            assert a.measure == pytest.approx(b.measure)


def test_2d_normal_is_rotated_tangent():
    m = unit_square_mesh(2)
    for f in range(m.num_entities(1)):
        fr = m.facet_frame(f)
        np.testing.assert_allclose(fr.normal, ROTATION @ fr.tangents[0])
        assert np.linalg.norm(fr.normal) == pytest.approx(1.0)


def test_boundary_entities():
    m = unit_square_mesh(3)
    assert len(m.boundary_entities(0)) == 12
    c = unit_cube_mesh(2)
    bv = c.boundary_entities(0)
    assert len(bv) == 27 - 1
    be = c.boundary_entities(1)
    x = c.vertices[c.edges[be]]
    on_bd = lambda p: np.any((np.abs(p) < 1e-12) | (np.abs(p - 1) < 1e-12), axis=-1)  # noqa: E731
    # both end points of a boundary edge lie on a common face of the cube
    common = np.any(((np.abs(x[:, 0]) < 1e-12) & (np.abs(x[:, 1]) < 1e-12))
                    | ((np.abs(x[:, 0] - 1) < 1e-12) & (np.abs(x[:, 1] - 1) < 1e-12)), axis=-1)
    assert np.all(on_bd(x[:, 0])) and np.all(on_bd(x[:, 1])) and np.all(common)


def test_roundtrip_file(tmp_path):
    m = unit_cube_mesh(1)
    m.write(tmp_path / "m.txt")
    m2 = Mesh.read(tmp_path / "m.txt")
    np.testing.assert_array_equal(m.cells, m2.cells)
    np.testing.assert_array_equal(m.vertices, m2.vertices)


def test_invalid_meshes_rejected():
    with pytest.raises(MeshError):
        Mesh(np.array([[0.0, 0], [1, 0], [0, 1]]), np.array([[0, 2, 1]]))
    with pytest.raises(MeshError):
        Mesh.from_cells(np.array([[0.0, 0], [1, 0], [2, 0]]), [[0, 1, 2]])


def test_refinement_halves_h():
    m = unit_square_mesh(2, "crisscross")
    r = refine_uniform(m)
    assert r.num_cells == 4 * m.num_cells
    assert r.h_max == pytest.approx(m.h_max / 2)
    _, d0, _ = m.jacobians()
    _, d1, _ = r.jacobians()
    assert np.abs(d1).sum() == pytest.approx(np.abs(d0).sum())


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.sampled_from(["regular", "crisscross"]), st.floats(0.5, 4.0))
def test_jacobians_map_reference_vertices(n, pattern, scale):
    m = unit_square_mesh(n, pattern, scale)
    J, det, x0 = m.jacobians()
    ref = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    mapped = np.einsum("cij,pj->cpi", J, ref) + x0[:, None]
    np.testing.assert_allclose(mapped, m.vertices[m.cells], atol=1e-13)
    assert np.abs(det).sum() / 2 == pytest.approx(scale ** 2)
