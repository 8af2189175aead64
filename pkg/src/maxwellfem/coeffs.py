"""Piecewise-constant electromagnetic coefficients.

Every region carries a complex symmetric 2x2 permittivity ``eps`` and a
complex scalar permeability ``mu`` (in 2D the curl is scalar, so only the
out-of-plane permeability enters).  ``chi = 1/mu``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MaterialField",
    "PatchBounds",
    "InvalidPml",
    "tensor_min",
    "tensor_max",
    "patch_bounds",
    "pml_materials",
    "pml_region_map",
    "homogeneous",
]


class InvalidPml(ValueError):
    pass


def tensor_min(phi) -> float:
    """min over unit complex u of Re(phi u . conj(u)).

    Only the real symmetric part of ``phi`` contributes, so this is the
    smallest eigenvalue of ``sym(Re phi)``.
    """
    phi = np.atleast_2d(np.asarray(phi, dtype=complex))
    re = phi.real
    return float(np.linalg.eigvalsh(0.5 * (re + re.T))[0])


def tensor_max(phi) -> float:
    """sup over unit complex u, v of Re(phi u . conj(v)), i.e. the spectral norm."""
    phi = np.atleast_2d(np.asarray(phi, dtype=complex))
    return float(np.linalg.norm(phi, 2))


@dataclass(frozen=True)
class MaterialField:
    """Region-wise coefficients.

    Attributes
    ----------
    eps : (nreg, 2, 2) complex array
    mu : (nreg,) complex array
    """

    eps: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        eps = np.asarray(self.eps, dtype=complex).reshape(-1, 2, 2)
        mu = np.asarray(self.mu, dtype=complex).ravel()
        if eps.shape[0] != mu.shape[0]:
            raise ValueError("eps and mu must describe the same regions")
        if not np.allclose(eps[:, 0, 1], eps[:, 1, 0], rtol=0, atol=1e-14):
            raise ValueError("permittivity tensors must be symmetric")
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "mu", mu)
        if np.any(self.eps_min <= 0) or np.any(self.mu_min <= 0) or np.any(self.chi_min <= 0):
            raise ValueError("coefficients must have positive definite real parts")

    @property
    def n_regions(self) -> int:
        return self.mu.shape[0]

    @property
    def chi(self) -> np.ndarray:
        return 1.0 / self.mu

    @property
    def eps_min(self) -> np.ndarray:
        return np.array([tensor_min(e) for e in self.eps])

    @property
    def eps_max(self) -> np.ndarray:
        return np.array([tensor_max(e) for e in self.eps])

    @property
    def mu_min(self) -> np.ndarray:
        return self.mu.real

    @property
    def mu_max(self) -> np.ndarray:
        return np.abs(self.mu)

    @property
    def chi_min(self) -> np.ndarray:
        return self.chi.real


def homogeneous(eps=1.0, mu=1.0) -> MaterialField:
    eps = np.asarray(eps, dtype=complex)
    if eps.ndim == 0:
        eps = eps * np.eye(2)
    return MaterialField(eps[None], np.array([mu]))


@dataclass(frozen=True)
class PatchBounds:
    """Coefficient bounds over the vertex patch of every element."""

    eps_min: np.ndarray
    eps_max: np.ndarray
    mu_min: np.ndarray
    mu_max: np.ndarray

    @property
    def c_min(self) -> np.ndarray:
        return np.sqrt(self.mu_min / self.eps_max)


def patch_bounds(mesh, materials: MaterialField) -> PatchBounds:
    rid = mesh.region_id
    return PatchBounds(
        eps_min=mesh.patch_reduce(materials.eps_min[rid], np.minimum),
        eps_max=mesh.patch_reduce(materials.eps_max[rid], np.maximum),
        mu_min=mesh.patch_reduce(materials.mu_min[rid], np.minimum),
        mu_max=mesh.patch_reduce(materials.mu_max[rid], np.maximum),
    )


def pml_region_map(L: float = 1.0):
    """Region ids for the Cartesian layers around (-L, L)^2.

    0 is the interior; 1..8 encode the layers as ``1 + 3*(iy+1) + (ix+1)``
    shifted to skip the interior, where ``ix, iy`` are -1, 0, +1.
    """

    def region(x):
        x = np.asarray(x, dtype=float)
        ix = np.where(x[..., 0] > L, 1, np.where(x[..., 0] < -L, -1, 0))
        iy = np.where(x[..., 1] > L, 1, np.where(x[..., 1] < -L, -1, 0))
        code = 3 * (iy + 1) + (ix + 1)
        return np.where(code < 4, code + 1, np.where(code == 4, 0, code))

    return region


def _layer_codes():
    # region id -> (ix, iy) for the nine cells
    codes = {}
    for iy in (-1, 0, 1):
        for ix in (-1, 0, 1):
            code = 3 * (iy + 1) + (ix + 1)
            rid = code + 1 if code < 4 else (0 if code == 4 else code)
            codes[rid] = (ix, iy)
    return codes


def pml_materials(omega: float, sigma_star: float, L: float = 1.0, ell: float = 0.25):
    """Stretched coefficients of a Cartesian PML of thickness ``ell``.

    With ``d_j = 1 + sigma/(i omega)`` in layers where ``|x_j| > L`` and 1
    elsewhere, ``eps = diag(d2/d1, d1/d2)`` and ``mu = d1 d2``.

    Returns
    -------
    region_map : callable
        Maps points of ``(-L-ell, L+ell)^2`` to region ids 0..8.
    materials : MaterialField
    """
    if not 0 <= sigma_star < omega:
        raise InvalidPml(f"need 0 <= sigma_star < omega, got sigma_star={sigma_star}, omega={omega}")
    if ell <= 0:
        raise InvalidPml("PML thickness must be positive")
    d = 1.0 + sigma_star / (1j * omega)
    eps = np.zeros((9, 2, 2), dtype=complex)
    mu = np.zeros(9, dtype=complex)
    for rid, (ix, iy) in _layer_codes().items():
        d1 = d if ix else 1.0
        d2 = d if iy else 1.0
        eps[rid] = np.diag([d2 / d1, d1 / d2])
        mu[rid] = d1 * d2
    return pml_region_map(L), MaterialField(eps, mu)
