import numpy as np
import pytest

from maxwellfem.coeffs import (
    InvalidPml,
    MaterialField,
    homogeneous,
    patch_bounds,
    pml_materials,
    tensor_max,
    tensor_min,
)
from maxwellfem.mesh import structured_mesh
from maxwellfem.problems import OBSTACLE_REGION, scattering_materials

D = 1 - 0.75j


@pytest.mark.parametrize(
    "phi, lo, hi",
    [
        (np.eye(2), 1.0, 1.0),
        (np.diag([8.0, 32.0]), 8.0, 32.0),
        (np.diag([1 / D, D]), 0.64, 1.25),
    ],
)
def test_tensor_bounds(phi, lo, hi):
    assert tensor_min(phi) == pytest.approx(lo, rel=1e-14)
    assert tensor_max(phi) == pytest.approx(hi, rel=1e-14)


def test_bounds_sandwich_random_vectors(rng):
    _, mat = scattering_materials(2 * np.pi)
    u = rng.normal(size=(1000, 2)) + 1j * rng.normal(size=(1000, 2))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    for eps in mat.eps:
        q = np.einsum("ij,nj,ni->n", eps, u, u.conj()).real
        assert q.min() >= tensor_min(eps) - 1e-12
        assert q.max() <= tensor_max(eps) + 1e-12


def test_pml_regions():
    rm, mat = pml_materials(2 * np.pi, 0.75 * 2 * np.pi)
    pts = np.array([[0.0, 0.0], [1.1, 0.0], [1.1, 1.1], [-1.1, 0.2], [0.3, -1.2]])
    rid = rm(pts)
    np.testing.assert_allclose(mat.eps[rid[0]], np.eye(2))
    assert mat.mu[rid[0]] == 1
    # right side layer: d1 = 1 - 0.75i, d2 = 1
    np.testing.assert_allclose(mat.eps[rid[1]], np.diag([1 / D, D]), atol=1e-15)
    assert mat.mu[rid[1]] == pytest.approx(D)
    # corner: eps = I, mu = d^2
    np.testing.assert_allclose(mat.eps[rid[2]], np.eye(2), atol=1e-15)
    assert mat.mu[rid[2]] == pytest.approx(D**2)
    # left and bottom layers absorb as well
    assert mat.mu[rid[3]] == pytest.approx(D)
    np.testing.assert_allclose(mat.eps[rid[4]], np.diag([D, 1 / D]), atol=1e-15)
    assert len(set(rm(np.array([[x, y] for x in (-1.1, 0, 1.1) for y in (-1.1, 0, 1.1)])))) == 9


def test_pml_zero_sigma_is_identity():
    _, mat = pml_materials(3.0, 0.0)
    np.testing.assert_allclose(mat.eps, np.broadcast_to(np.eye(2), mat.eps.shape))
    np.testing.assert_allclose(mat.mu, 1.0)


@pytest.mark.parametrize("sigma", [2.0, 3.0, -0.1])
def test_invalid_pml(sigma):
    with pytest.raises(InvalidPml):
        pml_materials(2.0, sigma)


def test_material_validation():
    with pytest.raises(ValueError):
        MaterialField(np.array([[[1, 0.5], [0, 1]]]), [1.0])
    with pytest.raises(ValueError):
        homogeneous(eps=-1.0)
    with pytest.raises(ValueError):
        homogeneous(mu=-1.0)


def test_experiment_materials_positive():
    for mat in (homogeneous(), pml_materials(5.0, 3.75)[1], scattering_materials(5.0)[1]):
        assert np.all(mat.eps_min > 0) and np.all(mat.mu_min > 0) and np.all(mat.chi_min > 0)


def test_patch_bounds_homogeneous():
    b = patch_bounds(structured_mesh(3), homogeneous())
    for arr in (b.eps_min, b.eps_max, b.mu_min, b.mu_max, b.c_min):
        np.testing.assert_allclose(arr, 1.0)


def test_patch_bounds_next_to_obstacle():
    rm, mat = scattering_materials(2 * np.pi)
    m = structured_mesh(10, (-1.25, 1.25, -1.25, 1.25), rm)
    b = patch_bounds(m, mat)
    c = m.centroids
    # a free-space element sharing a vertex with the obstacle
    touching = (m.region_id == 0) & np.isin(
        np.arange(m.n_triangles),
        np.unique(np.concatenate([m.patch_indices[m.patch_indptr[k]:m.patch_indptr[k + 1]]
                                  for k in np.flatnonzero(m.region_id == OBSTACLE_REGION)])),
    )
    k = np.flatnonzero(touching & (np.abs(c[:, 0]) < 0.5))[0]
    assert b.eps_max[k] == pytest.approx(32.0)
    assert b.mu_min[k] == pytest.approx(0.25)
    assert b.c_min[k] == pytest.approx(np.sqrt(0.25 / 32), rel=1e-12)
    assert np.all(b.eps_min <= b.eps_max)


def test_patch_bounds_pml_corner():
    rm, mat = pml_materials(2 * np.pi, 1.5 * np.pi)
    m = structured_mesh(20, (-1.25, 1.25, -1.25, 1.25), rm)
    b = patch_bounds(m, mat)
    k = np.argmin(np.linalg.norm(m.centroids - [1.2, 1.2], axis=1))
    assert b.eps_min[k] == pytest.approx(1.0)
    assert b.eps_max[k] == pytest.approx(1.0)
