"""Assembly and solution of the discrete time-harmonic Maxwell problem.

The sesquilinear form ``b(e, v) = -w^2 (eps e, v) + (chi curl e, curl v)`` is
assembled without conjugating the (real) test functions, which gives a
complex symmetric matrix ``A``.  For coefficient vectors ``u, v`` the form is
recovered as ``b(u, v) = conj(v) @ A @ u``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fespace import DiscreteField, NedelecSpace
from .quadrature import quad_rule

__all__ = [
    "AssembledSystem",
    "SingularMatrix",
    "ResidualTooLarge",
    "element_matrices",
    "assemble",
    "solve",
    "solve_sparse",
    "relative_residual",
    "write_matrix_coo",
]

RESIDUAL_TOL = 1e-10


class SingularMatrix(RuntimeError):
    """Factorization broke down; omega is at or too near a discrete resonance."""


class ResidualTooLarge(RuntimeError):
    pass


def _quad_order(p):
    return min(2 * p + 4, 20)


def element_matrices(space: NedelecSpace, materials, elements=None):
    """Local eps-mass and chi-curl-curl matrices in each element's sorted frame.

    Returns two complex arrays of shape (ne, ndof, ndof).
    """
    el = np.arange(space.mesh.n_triangles) if elements is None else np.asarray(elements)
    basis = space.basis
    q = quad_rule(_quad_order(space.p))
    phi = basis.values(q.points)  # (nq, nb, 2)
    curl = basis.curls(q.points)  # (nq, nb)
    ref_mass = np.einsum("q,qai,qbj->ijab", q.weights, phi, phi)
    ref_curl = np.einsum("q,qa,qb->ab", q.weights, curl, curl)

    rid = space.mesh.region_id[el]
    eps = materials.eps[rid]
    chi = materials.chi[rid]
    jinv = space.jac_inv[el]
    adet = np.abs(space.det[el])
    g = np.einsum("eik,ekl,ejl->eij", jinv, eps, jinv)
    mass = adet[:, None, None] * np.einsum("eij,ijab->eab", g, ref_mass)
    stiff = (chi / adet)[:, None, None] * ref_curl[None]
    return mass, stiff


def _scatter(space, local):
    dm = space.dofmap
    nb = dm.shape[1]
    rows = np.repeat(dm, nb, axis=1).ravel()
    cols = np.tile(dm, (1, nb)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(space.ndofs, space.ndofs))
    return mat.tocsr()


def load_vector(space: NedelecSpace, source, omega: float, order=None):
    """Full vector ``i omega (J, phi_a)`` for every global basis function."""
    out = np.zeros(space.ndofs, dtype=complex)
    if source is None:
        return out
    q = quad_rule(order or _quad_order(space.p))
    phi = space.basis.values(q.points)
    x = space.to_physical(q.points)
    j = np.asarray(source(x), dtype=complex)  # (nt, nq, 2)
    jref = np.einsum("eij,eqj->eqi", space.jac_inv, j)
    local = 1j * omega * np.abs(space.det)[:, None] * np.einsum("q,eqi,qai->ea", q.weights, jref, phi)
    np.add.at(out, space.dofmap.ravel(), local.ravel())
    return out


@dataclass
class AssembledSystem:
    """Discrete problem restricted to the free DOFs.

    ``mass`` and ``stiffness`` are the full (unconstrained) blocks, kept for
    evaluating the sesquilinear form on arbitrary discrete fields.
    """

    space: NedelecSpace
    omega: float
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    load: np.ndarray
    matrix: sp.csr_matrix
    rhs: np.ndarray

    @property
    def free(self) -> np.ndarray:
        return self.space.free

    @property
    def full_matrix(self) -> sp.csr_matrix:
        return (-self.omega**2) * self.mass + self.stiffness

    def form(self, u, v) -> complex:
        """b(u, v) for full coefficient vectors (conjugating ``v``)."""
        u = getattr(u, "coeffs", u)
        v = getattr(v, "coeffs", v)
        return complex(np.conj(v) @ (self.full_matrix @ u))


def assemble(space: NedelecSpace, materials, omega: float, source=None) -> AssembledSystem:
    """Assemble ``b(E_h, v) = i omega (J, v)`` and drop the constrained DOFs.

    ``source`` maps physical points (..., 2) to complex J values (..., 2).
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    mass_loc, stiff_loc = element_matrices(space, materials)
    mass = _scatter(space, mass_loc)
    stiff = _scatter(space, stiff_loc)
    load = load_vector(space, source, omega)
    free = space.free
    full = (-omega**2) * mass + stiff
    matrix = full[free][:, free].tocsr()
    return AssembledSystem(space, omega, mass, stiff, load, matrix, load[free].copy())


def relative_residual(matrix, x, rhs) -> float:
    nb = np.linalg.norm(rhs)
    r = np.linalg.norm(matrix @ x - rhs)
    return float(r / nb) if nb > 0 else float(r)


def solve_sparse(matrix, rhs, tol: float = RESIDUAL_TOL):
    """Sparse LU solve with COLAMD ordering and a verified residual.

    Returns the solution and its relative residual.
    """
    a = sp.csc_matrix(matrix)
    rhs = np.asarray(rhs, dtype=complex)
    if not np.any(rhs):
        return np.zeros(a.shape[1], dtype=complex), 0.0
    try:
        lu = spla.splu(a.astype(complex), permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SingularMatrix(str(exc)) from exc
    x = lu.solve(rhs)
    if not np.all(np.isfinite(x)):
        raise SingularMatrix("factorization produced non-finite values")
    res = relative_residual(a, x, rhs)
    if res > tol:
        # one step of iterative refinement before giving up
        x = x + lu.solve(rhs - a @ x)
        res = relative_residual(a, x, rhs)
    if res > tol:
        raise ResidualTooLarge(f"relative residual {res:.3e} exceeds {tol:.1e}")
    return x, res


def solve(system: AssembledSystem, tol: float = RESIDUAL_TOL) -> DiscreteField:
    """Solve for the free DOFs; constrained DOFs of the result are zero.

    The relative residual is stored on the returned field as ``residual``.
    """
    space = system.space
    x, res = solve_sparse(system.matrix, system.rhs, tol)
    coeffs = np.zeros(space.ndofs, dtype=complex)
    coeffs[space.free] = x
    field = DiscreteField(space, coeffs)
    field.residual = res
    return field


def write_matrix_coo(matrix, path) -> None:
    """Dump a sparse matrix as ``row col re im`` lines."""
    coo = sp.coo_matrix(matrix)
    data = np.column_stack([coo.row, coo.col, coo.data.real, coo.data.imag])
    np.savetxt(path, data, fmt=["%d", "%d", "%.17g", "%.17g"])
