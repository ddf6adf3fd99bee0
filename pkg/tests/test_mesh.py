import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ibcfem.mesh import (
    GAMMA1,
    GAMMA2,
    GAMMA3,
    MeshError,
    build_unit_square_mesh,
    gamma_edges,
    load_mesh_dump,
)


def test_counts_n10():
    m = build_unit_square_mesh(10)
    assert m.num_vertices == 121
    assert m.num_triangles == 200
    assert len(m.boundary_edges) == 40


def test_single_cell_triangles():
    m = build_unit_square_mesh(1)
    tris = {frozenset(map(tuple, m.vertices[t])) for t in m.triangles}
    assert tris == {
        frozenset({(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)}),
        frozenset({(0.0, 0.0), (1.0, 1.0), (0.0, 1.0)}),
    }


def test_finest_reference_mesh_size():
    assert build_unit_square_mesh(80).h == pytest.approx(0.0125, abs=1e-16)


def test_vertex_ordering_is_row_major_in_y_then_x():
    m = build_unit_square_mesh(3, L=2.0)
    assert np.allclose(m.vertices[6], [4.0 / 3.0, 2.0 / 3.0])
    assert np.allclose(m.vertices[-1], [2.0, 2.0])


def test_gamma1_edges_n10():
    m = build_unit_square_mesh(10)
    edges = gamma_edges(m, GAMMA1)
    assert len(edges) == 10
    for e in edges:
        assert e.length == pytest.approx(0.1, abs=1e-15)
        assert e.outward_normal == (-1.0, 0.0)
        assert np.allclose(m.vertices[list(e.endpoints), 0], 0.0)


def test_gamma2_edges_n10():
    m = build_unit_square_mesh(10)
    edges = gamma_edges(m, GAMMA2)
    assert len(edges) == 20
    ys = sorted({float(m.vertices[e.endpoints[0], 1]) for e in edges})
    assert ys == [0.0, 1.0]


@pytest.mark.parametrize("diagonal", ["right", "left"])
def test_gamma3_single_cell_owner(diagonal):
    m = build_unit_square_mesh(1, diagonal=diagonal)
    (e,) = gamma_edges(m, GAMMA3)
    assert e.length == pytest.approx(1.0)
    owner = {tuple(p) for p in m.vertices[m.triangles[e.owner_triangle]]}
    assert {(1.0, 0.0), (1.0, 1.0)} <= owner


@pytest.mark.parametrize("bad", [0, -3, 2.5])
def test_rejects_bad_n(bad):
    with pytest.raises(MeshError):
        build_unit_square_mesh(bad)


@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan")])
def test_rejects_bad_length(bad):
    with pytest.raises(MeshError):
        build_unit_square_mesh(4, L=bad)


def test_rejects_crossed_diagonal():
    with pytest.raises(MeshError):
        build_unit_square_mesh(4, diagonal="crossed")


def test_unknown_tag():
    with pytest.raises(MeshError):
        build_unit_square_mesh(2).edge_indices("Gamma4")


def test_deterministic():
    a, b = build_unit_square_mesh(7), build_unit_square_mesh(7)
    for name in ("vertices", "triangles", "edge_vertices", "edge_owner", "edge_normals", "edge_lengths"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert list(a.edge_tags) == list(b.edge_tags)


def test_dump_roundtrip(tmp_path):
    m = build_unit_square_mesh(3)
    path = tmp_path / "mesh.txt"
    m.dump(path)
    verts, tris, edges = load_mesh_dump(path)
    assert np.array_equal(verts, m.vertices)
    assert np.array_equal(tris, m.triangles)
    assert edges == [(int(a), int(b), str(t)) for (a, b), t in zip(m.edge_vertices, m.edge_tags)]


@given(n=st.integers(1, 14), L=st.floats(0.05, 20.0), diagonal=st.sampled_from(["right", "left"]))
def test_mesh_invariants(n, L, diagonal):
    m = build_unit_square_mesh(n, L=L, diagonal=diagonal)
    h = L / n
    assert m.num_vertices == (n + 1) ** 2
    assert m.num_triangles == 2 * n * n
    assert len(m.edge_vertices) == 4 * n

    areas = m.signed_areas()
    assert np.all(areas > 0)
    assert np.allclose(areas, h * h / 2, rtol=1e-12)
    assert abs(areas.sum() - L * L) <= 1e-12 * L * L

    assert m.triangles.min() >= 0 and m.triangles.max() < m.num_vertices
    assert m.edge_vertices.min() >= 0 and m.edge_vertices.max() < m.num_vertices

    p = m.vertices[m.edge_vertices]
    d = p[:, 1] - p[:, 0]
    nrm = m.edge_normals
    assert np.allclose(np.linalg.norm(nrm, axis=1), 1.0, atol=1e-14)
    assert np.all(np.abs(np.einsum("ij,ij->i", d, nrm)) <= 1e-14 * L)

    expected = {GAMMA1: ((0, 0.0), (-1, 0)), GAMMA3: ((0, L), (1, 0))}
    for tag, ((axis, value), normal) in expected.items():
        idx = m.edge_indices(tag)
        assert len(idx) == n
        assert np.allclose(p[idx][..., axis], value)
        assert np.all(m.edge_normals[idx] == normal)
    assert m.edge_lengths[m.edge_indices(GAMMA1)].sum() == pytest.approx(L, rel=1e-12)
    g2 = m.edge_indices(GAMMA2)
    assert len(g2) == 2 * n
    for k in g2:
        y = p[k, 0, 1]
        assert np.isclose(y, 0.0) or np.isclose(y, L)
        assert tuple(m.edge_normals[k]) == ((0.0, -1.0) if np.isclose(y, 0.0) else (0.0, 1.0))

    # every edge is owned by exactly one triangle, and that triangle contains it
    for k, (a, b) in enumerate(m.edge_vertices):
        containing = np.flatnonzero(np.isin(m.triangles, [a, b]).sum(axis=1) == 2)
        assert list(containing) == [m.edge_owner[k]]

    # the boundary is covered exactly once: each boundary unit segment appears once
    keys = {tuple(sorted(e)) for e in m.edge_vertices.tolist()}
    assert len(keys) == 4 * n
