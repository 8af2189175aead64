"""Residual a posteriori error estimator, data oscillation and energy errors.

For each element K with diameter h_K and Nedelec degree p:

    eta_div,K  = eps_min^{-1/2} [ (h/p) ||div J - i w div(eps E_h)||_K
                                  + w (h/p)^{1/2} ||[eps E_h . n]||_{dK \\ dOmega} ]
    eta_curl,K = mu_max^{1/2}   [ (h/p) ||i w J + w^2 eps E_h - rot(chi curl E_h)||_K
                                  + (h/p)^{1/2} ||[chi curl E_h]||_{dK \\ dOmega} ]

where the coefficient bounds are taken over the vertex patch of K.  Every
interior edge contributes its full jump to both neighbours.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .coeffs import PatchBounds, patch_bounds
from .fespace import REF_EDGES, REF_VERTICES, DiscreteField, _diff_matrices, _exponents, _monomials, _orthogonal_tests
from .mesh import build_faces
from .quadrature import line_rule, quad_rule

__all__ = [
    "LocalEstimate",
    "ErrorReport",
    "SingularLocalSystem",
    "ProjectedSource",
    "estimate",
    "eta_div",
    "eta_curl",
    "project_source",
    "oscillation",
    "energy_error",
    "energy_norm",
    "local_energy_errors",
    "write_estimates",
]

CHUNK = 4096


class SingularLocalSystem(np.linalg.LinAlgError):
    """The local projection system could not be solved."""


def _volume_order(p):
    return min(2 * p + 6, 20)


def _chunks(n, size=CHUNK):
    for start in range(0, n, size):
        yield np.arange(start, min(start + size, n))


@dataclass
class LocalEstimate:
    """Per-element indicators.

    ``eta_div``/``eta_curl`` are the two residual indicators and
    ``osc0``/``oscdiv`` the elementwise oscillation of the source; the patch
    oscillation is obtained by summing squares over vertex patches.
    """

    eta_div: np.ndarray
    eta_curl: np.ndarray
    osc0: np.ndarray
    oscdiv: np.ndarray

    @property
    def eta_local(self) -> np.ndarray:
        return np.sqrt(self.eta_div**2 + self.eta_curl**2)

    @property
    def osc_local(self) -> np.ndarray:
        return np.sqrt(self.osc0**2 + self.oscdiv**2)

    @property
    def eta(self) -> float:
        return float(np.sqrt(np.sum(self.eta_local**2)))

    @property
    def eta_div_total(self) -> float:
        return float(np.sqrt(np.sum(self.eta_div**2)))

    @property
    def eta_curl_total(self) -> float:
        return float(np.sqrt(np.sum(self.eta_curl**2)))

    @property
    def osc(self) -> float:
        return float(np.sqrt(np.sum(self.osc_local**2)))

    def patch_osc(self, mesh) -> np.ndarray:
        """osc over the vertex patch of each element."""
        sq = self.osc_local**2
        csr = mesh._patch_csr
        return np.sqrt(csr @ sq)


# -- residual indicators --------------------------------------------------------

def _volume_residuals(field: DiscreteField, materials, omega, source, order=None):
    """Elementwise L2 norms of the divergence and curl residuals."""
    space = field.space
    mesh = space.mesh
    q = quad_rule(order or _volume_order(space.p))
    nt = mesh.n_triangles
    r_div = np.zeros(nt)
    r_curl = np.zeros(nt)
    for el in _chunks(nt):
        x = space.origin[el][:, None, :] + np.einsum("eij,qj->eqi", space.jac[el], q.points)
        rid = mesh.region_id[el]
        eps = materials.eps[rid]
        chi = materials.chi[rid]
        e = field.values_at(q.points, el)
        jac = field.jacobians_at(q.points, el)
        gc = field.curl_gradients_at(q.points, el)
        wdet = q.weights[None, :] * np.abs(space.det[el])[:, None]

        div_eps_e = np.einsum("eik,eqki->eq", eps, jac)
        if source is not None:
            j = np.asarray(source.value(x), dtype=complex)
            divj = np.asarray(source.div(x), dtype=complex)
        else:
            j = np.zeros_like(e)
            divj = np.zeros(x.shape[:-1], dtype=complex)
        rd = divj - 1j * omega * div_eps_e
        rot = np.stack([gc[..., 1], -gc[..., 0]], axis=-1) * chi[:, None, None]
        rc = 1j * omega * j + omega**2 * np.einsum("eij,eqj->eqi", eps, e) - rot
        r_div[el] = np.sqrt(np.sum(wdet * np.abs(rd) ** 2, axis=1))
        r_curl[el] = np.sqrt(np.sum(wdet * np.sum(np.abs(rc) ** 2, axis=-1), axis=1))
    return r_div, r_curl


def _edge_ref_points(local_edge, s):
    """Reference points (nf, ns, 2) along local edges, low to high vertex."""
    a = np.array([REF_EDGES[k][0] for k in range(3)])
    b = np.array([REF_EDGES[k][1] for k in range(3)])
    pa = REF_VERTICES[a[local_edge]]
    pb = REF_VERTICES[b[local_edge]]
    return pa[:, None, :] + s[None, :, None] * (pb - pa)[:, None, :]


def _jump_norms(field: DiscreteField, materials, faces=None):
    """Per-element sqrt of the sum over interior edges of the squared jump
    norms of ``eps E . n`` and ``chi curl E``."""
    space = field.space
    mesh = space.mesh
    faces = faces or build_faces(mesh)
    s, w = line_rule(space.p + 2)
    interior = np.flatnonzero(faces.interior)
    jn_sq = np.zeros(interior.size)
    jc_sq = np.zeros(interior.size)
    for chunk in _chunks(interior.size):
        f = interior[chunk]
        normal = faces.normals[f]
        jump_n = 0
        jump_c = 0
        for side in range(2):
            t = faces.tris[f, side]
            k = np.argmax(space.local_edges[t] == f[:, None], axis=1)
            ref = _edge_ref_points(k, s)
            rid = mesh.region_id[t]
            eps = materials.eps[rid]
            chi = materials.chi[rid]
            sign = faces.tri_sign[f, side][:, None]
            e = field.values_at(ref, t)
            c = field.curls_at(ref, t)
            en = np.einsum("eij,eqj,ei->eq", eps, e, normal)
            jump_n = jump_n + sign * en
            jump_c = jump_c + sign * chi[:, None] * c
        jn_sq[chunk] = faces.lengths[f] * (np.abs(jump_n) ** 2 @ w)
        jc_sq[chunk] = faces.lengths[f] * (np.abs(jump_c) ** 2 @ w)
    per_n = np.zeros(mesh.n_triangles)
    per_c = np.zeros(mesh.n_triangles)
    for side in range(2):
        np.add.at(per_n, faces.tris[interior, side], jn_sq)
        np.add.at(per_c, faces.tris[interior, side], jc_sq)
    return np.sqrt(per_n), np.sqrt(per_c)


def _bounds(field, materials, bounds):
    return bounds if bounds is not None else patch_bounds(field.space.mesh, materials)


def eta_div(field: DiscreteField, materials, omega: float, source=None, bounds: PatchBounds | None = None,
            _parts=None) -> np.ndarray:
    """Divergence indicator for every element."""
    mesh = field.space.mesh
    hp = mesh.diameters / field.space.p
    b = _bounds(field, materials, bounds)
    r_div, _ = _parts[0] if _parts else _volume_residuals(field, materials, omega, source)
    jn, _ = _parts[1] if _parts else _jump_norms(field, materials)
    return (hp * r_div + omega * np.sqrt(hp) * jn) / np.sqrt(b.eps_min)


def eta_curl(field: DiscreteField, materials, omega: float, source=None, bounds: PatchBounds | None = None,
             _parts=None) -> np.ndarray:
    """Curl indicator for every element."""
    mesh = field.space.mesh
    hp = mesh.diameters / field.space.p
    b = _bounds(field, materials, bounds)
    _, r_curl = _parts[0] if _parts else _volume_residuals(field, materials, omega, source)
    _, jc = _parts[1] if _parts else _jump_norms(field, materials)
    return np.sqrt(b.mu_max) * (hp * r_curl + np.sqrt(hp) * jc)


# -- source projection and oscillation -----------------------------------------

class ProjectedSource:
    """Elementwise polynomial J_h in P_p(K)^2.

    J_h minimises ``a ||J - v||_K^2 + ||div(J - v)||_K^2`` with
    ``a = w^2 / c_min^2``, which is the weighted projection with weights
    ``w^2 h^2/(p^2 c_min^2)`` and ``h^2/p^2`` after dividing by ``h^2/p^2``.
    """

    def __init__(self, space, coeffs):
        self.space = space
        self.coeffs = coeffs  # (nt, 2, n)
        p = space.p
        self._exps = _exponents(p)
        self._t = np.array(_orthogonal_tests(p), dtype=float)
        dx, dy = _diff_matrices(self._exps)
        self._dt = (self._t @ dx.T, self._t @ dy.T)

    def _psi(self, pts):
        mono = _monomials(self._exps, pts)
        return mono @ self._t.T, np.stack([mono @ d.T for d in self._dt], axis=-1)

    def _div_basis(self, pts, el):
        _, g = self._psi(pts)  # (nq, n, 2) reference gradients
        # div(psi e_c) = sum_l Jinv[l, c] d_l psi
        return np.einsum("elc,qml->eqcm", self.space.jac_inv[el], g)

    def values_at(self, pts, elements=None):
        el = np.arange(self.space.mesh.n_triangles) if elements is None else elements
        psi, _ = self._psi(pts)
        return np.einsum("qm,ecm->eqc", psi, self.coeffs[el])

    def div_at(self, pts, elements=None):
        el = np.arange(self.space.mesh.n_triangles) if elements is None else elements
        return np.einsum("eqcm,ecm->eq", self._div_basis(pts, el), self.coeffs[el])


def project_source(space, source, omega: float, materials=None, bounds: PatchBounds | None = None) -> ProjectedSource:
    if bounds is None:
        bounds = patch_bounds(space.mesh, materials)
    p = space.p
    proj = ProjectedSource(space, None)
    q = quad_rule(_volume_order(p))
    psi, _ = proj._psi(q.points)
    n = psi.shape[1]
    mref = np.einsum("q,qa,qb->ab", q.weights, psi, psi)
    nt = space.mesh.n_triangles
    coeffs = np.zeros((nt, 2, n), dtype=complex)
    alpha = omega**2 / bounds.c_min**2
    for el in _chunks(nt):
        x = space.origin[el][:, None, :] + np.einsum("eij,qj->eqi", space.jac[el], q.points)
        j = np.asarray(source.value(x), dtype=complex)
        divj = np.asarray(source.div(x), dtype=complex)
        dv = proj._div_basis(q.points, el).reshape(el.size, q.weights.size, 2 * n)
        gram = np.einsum("q,eqa,eqb->eab", q.weights, dv, dv)
        gram[:, :n, :n] += alpha[el, None, None] * mref
        gram[:, n:, n:] += alpha[el, None, None] * mref
        rhs = np.einsum("q,eqa,eq->ea", q.weights, dv, divj)
        rhs += alpha[el, None] * np.einsum("q,qm,eqc->ecm", q.weights, psi, j).reshape(el.size, 2 * n)
        # |det| scales both sides alike, so it is left out
        try:
            sol = np.linalg.solve(gram, rhs[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise SingularLocalSystem(str(exc)) from exc
        coeffs[el] = sol.reshape(el.size, 2, n)
    proj.coeffs = coeffs
    return proj


def oscillation(space, source, omega: float, materials=None, bounds: PatchBounds | None = None,
                projected: ProjectedSource | None = None):
    """Elementwise (osc0, oscdiv).

    ``osc0 = p^{3/2} mu_max^{1/2} w (h/p) ||J - J_h||`` and
    ``oscdiv = p^{3/2} eps_min^{-1/2} (h/p) ||div(J - J_h)||``.  Both vanish
    identically when J is a polynomial of degree at most p.
    """
    nt = space.mesh.n_triangles
    if source is None or (source.degree is not None and source.degree <= space.p):
        return np.zeros(nt), np.zeros(nt)
    if bounds is None:
        bounds = patch_bounds(space.mesh, materials)
    jh = projected or project_source(space, source, omega, bounds=bounds)
    q = quad_rule(_volume_order(space.p))
    n0 = np.zeros(nt)
    nd = np.zeros(nt)
    for el in _chunks(nt):
        x = space.origin[el][:, None, :] + np.einsum("eij,qj->eqi", space.jac[el], q.points)
        wdet = q.weights[None, :] * np.abs(space.det[el])[:, None]
        d0 = np.asarray(source.value(x), dtype=complex) - jh.values_at(q.points, el)
        dd = np.asarray(source.div(x), dtype=complex) - jh.div_at(q.points, el)
        n0[el] = np.sqrt(np.sum(wdet * np.sum(np.abs(d0) ** 2, axis=-1), axis=1))
        nd[el] = np.sqrt(np.sum(wdet * np.abs(dd) ** 2, axis=1))
    p = space.p
    hp = space.mesh.diameters / p
    scale = p**1.5 * hp
    return scale * np.sqrt(bounds.mu_max) * omega * n0, scale * nd / np.sqrt(bounds.eps_min)


def estimate(field: DiscreteField, materials, omega: float, source=None) -> LocalEstimate:
    """All indicators for a discrete solution."""
    mesh = field.space.mesh
    bounds = patch_bounds(mesh, materials)
    parts = (_volume_residuals(field, materials, omega, source), _jump_norms(field, materials))
    ed = eta_div(field, materials, omega, source, bounds, _parts=parts)
    ec = eta_curl(field, materials, omega, source, bounds, _parts=parts)
    o0, od = oscillation(field.space, source, omega, bounds=bounds)
    return LocalEstimate(ed, ec, o0, od)


# -- errors --------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorReport:
    """Energy norm ``(w^2 ||eps^{1/2} e||^2 + ||chi^{1/2} curl e||^2)^{1/2}``
    split in its two parts, together with the energy of the reference."""

    l2_part: float
    curl_part: float
    reference: float
    eta: float = float("nan")

    @property
    def energy(self) -> float:
        return float(np.hypot(self.l2_part, self.curl_part))

    @property
    def relative(self) -> float:
        return self.energy / self.reference if self.reference > 0 else float("nan")

    @property
    def relative_percent(self) -> float:
        return 100.0 * self.relative

    @property
    def effectivity(self) -> float:
        return self.eta / self.energy if self.energy > 0 else float("nan")


def _reference_values(reference, space, pts, el, x):
    if isinstance(reference, DiscreteField):
        if reference.space.mesh is not space.mesh:
            raise ValueError("discrete references must live on the same mesh")
        return reference.values_at(pts, el), reference.curls_at(pts, el)
    return np.asarray(reference.value(x), dtype=complex), np.asarray(reference.curl(x), dtype=complex)


def _squared_parts(field: DiscreteField, reference, materials, omega: float, order=None):
    """Per-element squared L2 and curl parts of the error and of the reference."""
    space = field.space
    mesh = space.mesh
    q = quad_rule(order or _volume_order(max(space.p, getattr(getattr(reference, "space", None), "p", 0))))
    nt = mesh.n_triangles
    out = np.zeros((4, nt))
    for el in _chunks(nt):
        x = space.origin[el][:, None, :] + np.einsum("eij,qj->eqi", space.jac[el], q.points)
        wdet = q.weights[None, :] * np.abs(space.det[el])[:, None]
        rid = mesh.region_id[el]
        eps = materials.eps[rid].real
        chi = materials.chi[rid].real
        ev, ec = _reference_values(reference, space, q.points, el, x)
        d = ev - field.values_at(q.points, el)
        dc = ec - field.curls_at(q.points, el)

        def quad_eps(v):
            return np.sum(wdet * np.einsum("eij,eqj,eqi->eq", eps, v, v.conj()).real, axis=1)

        out[0, el] = omega**2 * quad_eps(d)
        out[1, el] = np.sum(wdet * chi[:, None] * np.abs(dc) ** 2, axis=1)
        out[2, el] = omega**2 * quad_eps(ev)
        out[3, el] = np.sum(wdet * chi[:, None] * np.abs(ec) ** 2, axis=1)
    return np.maximum(out, 0.0)


def energy_error(field: DiscreteField, reference, materials, omega: float, order=None,
                 eta: float = float("nan")) -> ErrorReport:
    """Energy error against an analytic solution (``value``/``curl``
    callables) or a discrete field on the same mesh.

    Uses ``Re eps`` and ``Re chi`` so that the norm is a genuine norm in
    absorbing layers as well.
    """
    l2, cu, r_l2, r_cu = _squared_parts(field, reference, materials, omega, order).sum(axis=1)
    return ErrorReport(float(np.sqrt(l2)), float(np.sqrt(cu)), float(np.sqrt(r_l2 + r_cu)), float(eta))


def local_energy_errors(field: DiscreteField, reference, materials, omega: float, order=None) -> np.ndarray:
    """Energy error restricted to each element."""
    parts = _squared_parts(field, reference, materials, omega, order)
    return np.sqrt(parts[0] + parts[1])


def energy_norm(field: DiscreteField, materials, omega: float) -> float:
    zero = DiscreteField(field.space)
    return energy_error(zero, field, materials, omega).energy


def write_estimates(path, est: LocalEstimate) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["element", "eta_div", "eta_curl", "osc0", "oscdiv"])
        for k in range(est.eta_div.size):
            wr.writerow([k, f"{est.eta_div[k]:.12e}", f"{est.eta_curl[k]:.12e}",
                         f"{est.osc0[k]:.12e}", f"{est.oscdiv[k]:.12e}"])
