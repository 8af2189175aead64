import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxwellfem.coeffs import pml_region_map
from maxwellfem.mesh import (
    Mesh,
    NonConforming,
    bisect,
    build_faces,
    read_mesh,
    structured_mesh,
    vertex_patch,
    write_mesh,
)
from maxwellfem.problems import OBSTACLE_REGION, scattering_materials

DATA = __import__("pathlib").Path(__file__).parent / "data"


@pytest.mark.parametrize("n", [1, 2, 3, 4, 7])
def test_structured_counts(n):
    m = structured_mesh(n)
    assert m.n_triangles == 4 * n * n
    assert m.n_vertices == (n + 1) ** 2 + n * n
    assert m.areas.sum() == pytest.approx(4.0, abs=1e-14)
    assert np.all(m.areas > 0)
    assert m.is_conforming()


def test_n1_has_four_unit_triangles():
    m = structured_mesh(1)
    np.testing.assert_allclose(m.areas, 1.0, rtol=1e-15)


def test_n4_congruent_triangles():
    m = structured_mesh(4)
    assert np.ptp(m.shape_regularity) < 1e-12
    assert m.h == pytest.approx(0.5)


def test_clockwise_input_is_reoriented():
    m = Mesh([[0, 0], [1, 0], [0, 1]], [[0, 2, 1]])
    assert m.areas[0] == pytest.approx(0.5)


@pytest.mark.parametrize("n, nb, ni", [(1, 4, 4), (2, 8, 20)])
def test_face_counts(n, nb, ni):
    f = build_faces(structured_mesh(n))
    assert (f.n_boundary, f.n_interior) == (nb, ni)
    assert 3 * 4 * n * n == 2 * ni + nb


def test_single_triangle_faces_and_patch():
    m = Mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
    f = build_faces(m)
    assert (f.n_boundary, f.n_interior) == (3, 0)
    assert vertex_patch(m, 0).tolist() == [0]


def test_face_normals_and_signs():
    m = structured_mesh(3)
    f = build_faces(m)
    np.testing.assert_allclose(np.linalg.norm(f.normals, axis=1), 1.0)
    inner = f.interior
    assert np.all(f.tri_sign[inner, 0] == -f.tri_sign[inner, 1])
    # outward normal of a boundary edge points out of the box
    mid = m.vertices[m.edges[~inner]].mean(axis=1)
    out = f.normals[~inner] * f.tri_sign[~inner, :1]
    assert np.all(np.einsum("ij,ij->i", out, mid) > 0)


def test_overshared_edge_raises():
    v = [[0, 0], [1, 0], [0, 1], [0, -1], [1, 1]]
    with pytest.raises(NonConforming):
        Mesh(v, [[0, 1, 2], [0, 3, 1], [0, 1, 4]])


def test_patches():
    m1 = structured_mesh(1)
    for k in range(4):
        assert sorted(vertex_patch(m1, k)) == [0, 1, 2, 3]
    m = structured_mesh(8)
    interior = [k for k in range(m.n_triangles) if not m.boundary_edges[m.tri_edges[k]].any()
                and np.all(np.abs(m.vertices[m.triangles[k]]) < 0.74)]
    sizes = {len(vertex_patch(m, k)) for k in interior}
    # regression value of the generator: 4 in the own square, 4 + 4 in the
    # two edge neighbours and 3 + 3 in the two squares sharing only a corner
    assert sizes == {15}


def test_patch_symmetry():
    m = bisect(structured_mesh(3), [0, 7, 20])
    for k in range(m.n_triangles):
        assert k in vertex_patch(m, k)
        for j in vertex_patch(m, k):
            assert k in vertex_patch(m, j)


def test_bisect_empty_is_identity():
    m = structured_mesh(2)
    assert bisect(m, []) is m


def test_single_marked_triangle():
    m = Mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
    r = bisect(m, [0])
    assert r.n_triangles >= 4
    assert r.areas.sum() == pytest.approx(0.5, abs=1e-15)


def test_all_marked_n2():
    m = structured_mesh(2)
    r = bisect(m, np.arange(m.n_triangles))
    assert r.is_conforming()
    assert r.areas.sum() == pytest.approx(4.0, abs=1e-14)
    assert r.min_angles.min() >= 0.5 * m.min_angles.min()


def test_marked_triangles_shrink():
    m = structured_mesh(2)
    r = bisect(m, [3])
    inside = np.array([np.allclose(m.areas[3], 4 * a) for a in r.areas])
    assert inside.sum() >= 4


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_random_refinement_rounds(seed):
    rng = np.random.default_rng(seed)
    m = structured_mesh(2)
    beta0 = m.beta
    for _ in range(10):
        k = rng.integers(1, max(2, m.n_triangles // 4))
        marked = rng.choice(m.n_triangles, size=k, replace=False)
        m = bisect(m, marked)
        assert m.is_conforming()
        assert abs(m.areas.sum() - 4.0) <= 4.0 * 1e-14
        assert m.beta <= 2.0 * beta0


def test_regions_inherited():
    rm, _ = scattering_materials(2 * np.pi)
    m = structured_mesh(10, (-1.25, 1.25, -1.25, 1.25), rm)
    assert not m.straddles_regions(rm).any()
    r = bisect(m, np.arange(0, m.n_triangles, 7))
    assert not r.straddles_regions(rm).any()
    assert np.count_nonzero(r.region_id == OBSTACLE_REGION) > 0


def test_misaligned_grid_straddles():
    m = structured_mesh(7, (-1.25, 1.25, -1.25, 1.25), pml_region_map())
    assert m.straddles_regions(pml_region_map()).any()


def test_roundtrip(tmp_path):
    m = bisect(structured_mesh(3), [1, 2, 30])
    path = tmp_path / "m.txt"
    write_mesh(m, path)
    r = read_mesh(path)
    np.testing.assert_array_equal(r.triangles, m.triangles)
    np.testing.assert_array_equal(r.vertices, m.vertices)
    np.testing.assert_array_equal(r.region_id, m.region_id)


def test_golden_file():
    m = bisect(structured_mesh(2), [0, 5])
    g = read_mesh(DATA / "n2_bisect_0_5.mesh")
    np.testing.assert_array_equal(g.triangles, m.triangles)
    np.testing.assert_array_equal(g.vertices, m.vertices)


def test_mesh_is_immutable():
    m = structured_mesh(2)
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 3.0
