"""First-family Nedelec elements of degree p on triangles.

The local space on the reference triangle is N_{p-1} = P_{p-1}^2 + (y, -x) P~_{p-1}
(dimension p(p+2)).  Its degrees of freedom are

* edge moments  int_0^1 v(P_i + s t) . t  L_k(2s - 1) ds,  k < p,  with the
  unnormalized tangent t = P_j - P_i, on every edge;
* interior moments  int v . w  for w in an L2-orthogonal basis of P_{p-2}^2.

Every element is handled in its *sorted frame*: local vertices are ordered by
increasing global index, so each local edge runs from its lower to its
higher global vertex.  Local and global edge orientations then always agree
and no sign flips or Legendre reversals are needed, for any degree.  The
element map of a clockwise sorted frame has negative determinant, which the
covariant transform handles through the signed determinant.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from math import comb, factorial

import numpy as np
from numpy.polynomial import legendre
from scipy.spatial import cKDTree

from .quadrature import line_rule, quad_rule

__all__ = [
    "MAX_DEGREE",
    "UnsupportedDegree",
    "DegenerateElement",
    "ReferenceBasis",
    "ref_basis",
    "piola_map",
    "NedelecSpace",
    "DiscreteField",
    "interpolate",
    "REF_VERTICES",
    "REF_EDGES",
]

MAX_DEGREE = 4

REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
# local edge k is opposite local vertex k and runs from lower to higher index
REF_EDGES = ((1, 2), (0, 2), (0, 1))


class UnsupportedDegree(ValueError):
    pass


class DegenerateElement(ValueError):
    pass


def _exponents(deg):
    return np.array([(a, d - a) for d in range(deg + 1) for a in range(d, -1, -1)])


def _monomials(exps, pts):
    pts = np.asarray(pts, dtype=float)
    x = pts[..., 0, None]
    y = pts[..., 1, None]
    return x ** exps[:, 0] * y ** exps[:, 1]


def _diff_matrices(exps):
    """Matrices D with coeffs_dx = coeffs @ D.T for the monomial basis."""
    index = {tuple(e): i for i, e in enumerate(exps)}
    n = len(exps)
    dx = np.zeros((n, n))
    dy = np.zeros((n, n))
    for i, (a, b) in enumerate(exps):
        if a > 0:
            dx[index[(a - 1, b)], i] = a
        if b > 0:
            dy[index[(a, b - 1)], i] = b
    return dx, dy


def _poly_mul(a, b):
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def _poly_pow(a, n):
    out = [1]
    for _ in range(n):
        out = _poly_mul(out, a)
    return out


def _shifted_legendre(k):
    # L_k(2s - 1) in powers of s
    return [(-1) ** (k + j) * comb(k, j) * comb(k + j, j) for j in range(k + 1)]


def _triangle_moment(a, b):
    return Fraction(factorial(a) * factorial(b), factorial(a + b + 2))


@lru_cache(maxsize=None)
def _orthogonal_tests(deg):
    """L2(reference)-orthogonal basis of P_deg as rational monomial coefficients.

    Gram-Schmidt on monomials in exact arithmetic; rows are polynomials.
    """
    exps = _exponents(deg)
    n = len(exps)

    def inner(u, v):
        return sum(
            u[i] * v[j] * _triangle_moment(exps[i][0] + exps[j][0], exps[i][1] + exps[j][1])
            for i in range(n) if u[i]
            for j in range(n) if v[j]
        )

    basis = []
    for k in range(n):
        v = [Fraction(int(i == k)) for i in range(n)]
        for b in basis:
            f = inner(v, b) / inner(b, b)
            v = [x - f * y for x, y in zip(v, b)]
        basis.append(v)
    return tuple(tuple(r) for r in basis)


def _exact_inverse(rows):
    n = len(rows)
    aug = [list(r) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(rows)]
    for col in range(n):
        piv = next(r for r in range(col, n) if aug[r][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        pv = aug[col][col]
        aug[col] = [x / pv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    return np.array([[float(x) for x in r[n:]] for r in aug])


class ReferenceBasis:
    """Nodal Nedelec basis on the reference triangle, stored as monomial
    coefficients so that all derivatives are exact."""

    def __init__(self, p: int):
        if not 1 <= p <= MAX_DEGREE:
            raise UnsupportedDegree(f"degree must be in [1, {MAX_DEGREE}], got {p}")
        self.p = p
        self.ndof = p * (p + 2)
        self.n_edge_dofs = p
        self.n_interior_dofs = p * (p - 1)
        self.exps = _exponents(p)
        self.dx, self.dy = _diff_matrices(self.exps)

        span = self._spanning_set()
        inv = _exact_inverse(self._exact_dofs(span))
        # basis_k = sum_j span_j X[j, k] with dof_i(basis_k) = delta_ik
        self.coeffs = np.einsum("jcm,jk->kcm", span, inv)

    def _spanning_set(self):
        p, exps = self.p, self.exps
        index = {tuple(e): i for i, e in enumerate(exps)}
        out = []
        for a, b in _exponents(p - 1):
            for comp in range(2):
                c = np.zeros((2, len(exps)))
                c[comp, index[(a, b)]] = 1.0
                out.append(c)
        for a in range(p - 1, -1, -1):
            b = p - 1 - a
            c = np.zeros((2, len(exps)))
            c[0, index[(a, b + 1)]] = 1.0
            c[1, index[(a + 1, b)]] = -1.0
            out.append(c)
        return np.array(out)

    def _exact_dofs(self, fields):
        """DOF functionals of integer-coefficient fields as exact rationals."""
        p = self.p
        rows = []
        for i, j in REF_EDGES:
            a, b = REF_VERTICES[i].astype(int), REF_VERTICES[j].astype(int)
            t = b - a
            for k in range(p):
                leg = _shifted_legendre(k)
                row = []
                for f in fields:
                    total = Fraction(0)
                    for m, (ex, ey) in enumerate(self.exps):
                        c = int(f[0, m]) * int(t[0]) + int(f[1, m]) * int(t[1])
                        if c:
                            poly = _poly_mul(_poly_pow([int(a[0]), int(t[0])], ex),
                                             _poly_pow([int(a[1]), int(t[1])], ey))
                            poly = _poly_mul(poly, leg)
                            total += c * sum(Fraction(cj, j + 1) for j, cj in enumerate(poly))
                    row.append(total)
                rows.append(row)
        if p > 1:
            texps = _exponents(p - 2)
            for comp in range(2):
                for test in _orthogonal_tests(p - 2):
                    row = []
                    for f in fields:
                        total = Fraction(0)
                        for m, (ex, ey) in enumerate(self.exps):
                            c = int(f[comp, m])
                            if c:
                                total += c * sum(
                                    tc * _triangle_moment(ex + ta, ey + tb)
                                    for tc, (ta, tb) in zip(test, texps) if tc
                                )
                        row.append(total)
                    rows.append(row)
        return rows

    def apply_dofs(self, fields):
        """Apply the local DOF functionals to polynomial fields.

        ``fields`` has shape (m, 2, nmon); returns (ndof, m).
        """
        p = self.p
        s, w = line_rule(p + 2)
        leg = legendre.legvander(2 * s - 1, p - 1)  # (ns, p)
        rows = []
        for i, j in REF_EDGES:
            a, b = REF_VERTICES[i], REF_VERTICES[j]
            t = b - a
            pts = a + s[:, None] * t
            vals = np.einsum("qm,fcm->qfc", _monomials(self.exps, pts), fields)
            tang = vals @ t
            rows.append(np.einsum("q,qk,qf->kf", w, leg, tang))
        if p > 1:
            q = quad_rule(2 * p)
            vals = np.einsum("qm,fcm->qfc", _monomials(self.exps, q.points), fields)
            tests = self._test_values(q.points)  # (nq, ntest)
            for comp in range(2):
                rows.append(np.einsum("q,qt,qf->tf", q.weights, tests, vals[:, :, comp]))
        return np.vstack(rows)

    def _test_values(self, points):
        t = np.array(_orthogonal_tests(self.p - 2), dtype=float)
        return _monomials(_exponents(self.p - 2), points) @ t.T

    def interior_tests(self, points):
        """Interior test functions w (ntest*2 of them) at reference points."""
        tests = self._test_values(points)
        z = np.zeros_like(tests)
        return np.stack(
            [np.stack([tests, z], axis=-1), np.stack([z, tests], axis=-1)], axis=-3
        ).reshape(*tests.shape[:-1], -1, 2)

    def values(self, pts):
        """(..., ndof, 2) basis values."""
        return np.einsum("...m,kcm->...kc", _monomials(self.exps, pts), self.coeffs)

    def jacobians(self, pts):
        """(..., ndof, 2, 2) with [..., k, i, j] = d v_i / d x_j."""
        mon = _monomials(self.exps, pts)
        gx = np.einsum("...m,kcm->...kc", mon, self.coeffs @ self.dx.T)
        gy = np.einsum("...m,kcm->...kc", mon, self.coeffs @ self.dy.T)
        return np.stack([gx, gy], axis=-1)

    @cached_property
    def _curl_coeffs(self):
        return self.coeffs[:, 1] @ self.dx.T - self.coeffs[:, 0] @ self.dy.T

    def curls(self, pts):
        """(..., ndof) scalar curls dv2/dx - dv1/dy."""
        return _monomials(self.exps, pts) @ self._curl_coeffs.T

    def curl_gradients(self, pts):
        """(..., ndof, 2) gradients of the scalar curls."""
        mon = _monomials(self.exps, pts)
        cc = self._curl_coeffs
        return np.stack([mon @ (cc @ self.dx.T).T, mon @ (cc @ self.dy.T).T], axis=-1)


@lru_cache(maxsize=None)
def _reference(p):
    return ReferenceBasis(p)


def ref_basis(p: int, ref_point):
    """Values (ndof, 2) and curls (ndof,) of the degree-p basis at a point."""
    basis = _reference(p)
    pt = np.asarray(ref_point, dtype=float)
    return basis.values(pt), basis.curls(pt)


def piola_map(jac, values=None, curls=None):
    """Covariant transform v = J^{-T} v_ref, curl v = curl_ref / det J.

    ``jac`` is a single 2x2 Jacobian (or a stack); ``values`` carry the vector
    components in their last axis.
    """
    jac = np.asarray(jac, dtype=float)
    det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
    scale = np.sqrt(np.abs(jac[..., :, 0] ** 2 + jac[..., :, 1] ** 2).sum(axis=-1))
    if np.any(np.abs(det) < 1e-14 * scale**2):
        raise DegenerateElement("element map is (nearly) singular")
    out = []
    if values is not None:
        inv_t = np.linalg.inv(jac).swapaxes(-1, -2)
        out.append(np.einsum("...ij,...j->...i", inv_t, values))
    if curls is not None:
        out.append(np.asarray(curls) / det)
    return out[0] if len(out) == 1 else tuple(out)


class NedelecSpace:
    """Global first-family Nedelec space of degree ``p`` on ``mesh``.

    Global numbering: ``p`` DOFs per edge (edge ``e`` owns ``p*e .. p*e+p-1``),
    followed by ``p(p-1)`` interior DOFs per triangle.  DOFs on boundary edges
    are constrained to zero (vanishing tangential trace).
    """

    def __init__(self, mesh, p: int):
        self.mesh = mesh
        self.p = p
        self.basis = _reference(p)

        perm = np.argsort(mesh.triangles, axis=1, kind="stable")
        self.sorted_vertices = np.take_along_axis(mesh.triangles, perm, axis=1)
        # edge opposite sorted vertex k = edge opposite ccw vertex perm[k]
        self.local_edges = np.take_along_axis(mesh.tri_edges, perm, axis=1)

        pts = mesh.vertices[self.sorted_vertices]
        self.origin = pts[:, 0]
        jac = np.stack([pts[:, 1] - pts[:, 0], pts[:, 2] - pts[:, 0]], axis=-1)
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        if np.any(np.abs(det) < 1e-14 * mesh.diameters**2):
            raise DegenerateElement("mesh contains degenerate triangles")
        self.jac = jac
        self.det = det
        self.jac_inv = np.linalg.inv(jac)
        self.jac_inv_t = self.jac_inv.swapaxes(1, 2)

        nt = mesh.n_triangles
        edge_dofs = p * self.local_edges[:, :, None] + np.arange(p)
        parts = [edge_dofs.reshape(nt, 3 * p)]
        if p > 1:
            ni = p * (p - 1)
            parts.append(p * mesh.n_edges + ni * np.arange(nt)[:, None] + np.arange(ni))
        self.dofmap = np.hstack(parts)
        self.ndofs = p * mesh.n_edges + p * (p - 1) * nt

        bdofs = p * np.flatnonzero(mesh.boundary_edges)[:, None] + np.arange(p)
        constrained = np.zeros(self.ndofs, dtype=bool)
        constrained[bdofs.ravel()] = True
        self.constrained = constrained
        self.free = np.flatnonzero(~constrained)

    def __repr__(self):
        return f"NedelecSpace(p={self.p}, ndofs={self.ndofs}, free={self.free.size})"

    @property
    def local_dim(self) -> int:
        return self.basis.ndof

    def to_physical(self, ref_points):
        """Map reference points (nq, 2) to physical points (nt, nq, 2)."""
        return self.origin[:, None, :] + np.einsum("eij,qj->eqi", self.jac, ref_points)

    def to_reference(self, elements, points):
        """Reference coordinates of physical ``points`` in ``elements``."""
        d = points - self.origin[elements]
        return np.einsum("eij,ej->ei", self.jac_inv[elements], d)


class DiscreteField:
    """Complex coefficient vector over the DOFs of a :class:`NedelecSpace`.

    Fields returned by the solver vanish on constrained DOFs.
    """

    def __init__(self, space: NedelecSpace, coeffs=None):
        self.space = space
        if coeffs is None:
            coeffs = np.zeros(space.ndofs, dtype=complex)
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape != (space.ndofs,):
            raise ValueError(f"expected {space.ndofs} coefficients, got {coeffs.shape}")
        self.coeffs = coeffs

    @property
    def local_coeffs(self):
        return self.coeffs[self.space.dofmap]

    def _local(self, elements):
        sp_ = self.space
        if elements is None:
            elements = slice(None)
        return sp_, self.coeffs[sp_.dofmap[elements]], elements

    def values_at(self, ref_points, elements=None):
        """Physical field values (ne, nq, 2) at reference points of each element.

        ``ref_points`` is (nq, 2) shared by all elements or (ne, nq, 2).
        """
        sp_, c, el = self._local(elements)
        phi = sp_.basis.values(ref_points)
        if phi.ndim == 3:
            vref = np.einsum("qkc,ek->eqc", phi, c)
        else:
            vref = np.einsum("eqkc,ek->eqc", phi, c)
        return np.einsum("eij,eqj->eqi", sp_.jac_inv_t[el], vref)

    def curls_at(self, ref_points, elements=None):
        sp_, c, el = self._local(elements)
        cur = sp_.basis.curls(ref_points)
        if cur.ndim == 2:
            cref = cur @ c.T
            return cref.T / sp_.det[el][:, None]
        return np.einsum("eqk,ek->eq", cur, c) / sp_.det[el][:, None]

    def jacobians_at(self, ref_points, elements=None):
        """(ne, nq, 2, 2) physical derivatives d E_i / d x_j."""
        sp_, c, el = self._local(elements)
        jref = np.einsum("qkij,ek->eqij", sp_.basis.jacobians(ref_points), c)
        return np.einsum("eia,eqab,ebj->eqij", sp_.jac_inv_t[el], jref, sp_.jac_inv[el])

    def curl_gradients_at(self, ref_points, elements=None):
        sp_, c, el = self._local(elements)
        gref = np.einsum("qkc,ek->eqc", sp_.basis.curl_gradients(ref_points), c)
        g = np.einsum("eij,eqj->eqi", sp_.jac_inv_t[el], gref)
        return g / sp_.det[el][:, None, None]

    @cached_property
    def _locator(self):
        return cKDTree(self.space.mesh.centroids)

    def locate(self, points, k=12):
        """Index of a triangle containing each physical point (-1 if none)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        mesh = self.space.mesh
        k = min(k, mesh.n_triangles)
        _, cand = self._locator.query(points, k=k)
        cand = np.asarray(cand).reshape(points.shape[0], k)
        found = -np.ones(points.shape[0], dtype=np.int64)
        tol = -1e-12
        for j in range(k):
            todo = found < 0
            if not todo.any():
                break
            el = cand[todo, j]
            lam = self.space.to_reference(el, points[todo])
            inside = (lam[:, 0] >= tol) & (lam[:, 1] >= tol) & (lam.sum(axis=1) <= 1 - tol)
            idx = np.flatnonzero(todo)[inside]
            found[idx] = el[inside]
        missing = np.flatnonzero(found < 0)
        for i in missing:
            lam = self.space.to_reference(np.arange(mesh.n_triangles), np.broadcast_to(points[i], (mesh.n_triangles, 2)))
            ok = np.flatnonzero((lam >= tol).all(axis=1) & (lam.sum(axis=1) <= 1 - tol))
            if ok.size:
                found[i] = ok[0]
        return found

    def evaluate(self, points):
        """Values (m, 2) and curls (m,) at physical points inside the mesh."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        el = self.locate(points)
        if np.any(el < 0):
            raise ValueError("points outside the mesh")
        ref = self.space.to_reference(el, points)[:, None, :]
        vals = self.values_at(ref, el)[:, 0]
        curls = self.curls_at(ref, el)[:, 0]
        return vals, curls


def interpolate(space: NedelecSpace, field, essential: bool = False) -> DiscreteField:
    """Canonical interpolant obtained by applying the DOF functionals.

    ``field`` maps physical points (..., 2) to complex vectors (..., 2).
    With ``essential=True`` the constrained DOFs are set to zero.
    """
    p = space.p
    basis = space.basis
    nt = space.mesh.n_triangles
    local = np.zeros((nt, basis.ndof), dtype=complex)

    s, w = line_rule(p + 4)
    leg = legendre.legvander(2 * s - 1, p - 1)
    row = 0
    for i, j in REF_EDGES:
        a, b = REF_VERTICES[i], REF_VERTICES[j]
        t = b - a
        ref = a + s[:, None] * t
        v = np.asarray(field(space.to_physical(ref)), dtype=complex)
        # pull back: v_ref = J^T v
        vref = np.einsum("eji,eqj->eqi", space.jac, v)
        local[:, row : row + p] = np.einsum("q,qk,eq->ek", w, leg, vref @ t)
        row += p
    if p > 1:
        q = quad_rule(min(2 * p + 6, 20))
        v = np.asarray(field(space.to_physical(q.points)), dtype=complex)
        vref = np.einsum("eji,eqj->eqi", space.jac, v)
        tests = basis.interior_tests(q.points)  # (nq, ntest, 2)
        local[:, row:] = np.einsum("q,qtc,eqc->et", q.weights, tests, vref)

    coeffs = np.zeros(space.ndofs, dtype=complex)
    coeffs[space.dofmap] = local
    if essential:
        coeffs[space.constrained] = 0.0
    return DiscreteField(space, coeffs)
