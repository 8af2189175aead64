"""Model problems: PEC cavity, PML plane wave and penetrable scatterer.

All problems solve ``-w^2 eps E + curl(chi curl E) = i w J`` with
``E x n = 0`` on the outer boundary.  In 2D, ``curl E = dE2/dx - dE1/dy`` is
scalar and ``rot s = (ds/dy, -ds/dx)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .coeffs import MaterialField, pml_materials, pml_region_map

__all__ = [
    "Source",
    "AnalyticSolution",
    "AtResonance",
    "cavity_solution",
    "quintic_cutoff",
    "radial_cutoff",
    "pml_planewave_solution",
    "scattering_source",
    "scattering_materials",
    "resonance_distance",
    "gba_cavity_diagnostic",
    "cavity_omega_delta",
    "cavity_omega_ell",
    "admissible_n",
]


class AtResonance(ValueError):
    pass


@dataclass(frozen=True)
class Source:
    """Current density J with its divergence.

    ``degree`` is set when J is a polynomial of that degree, in which case
    its elementwise projection is J itself.
    """

    value: Callable
    div: Callable
    degree: int | None = None


@dataclass(frozen=True)
class AnalyticSolution:
    value: Callable
    curl: Callable
    source: Source
    rhs: Callable | None = field(default=None, repr=False)


def _zeros_like_points(x, dtype=complex):
    x = np.asarray(x, dtype=float)
    return np.zeros(x.shape[:-1], dtype=dtype)


# -- PEC cavity ---------------------------------------------------------------

def cavity_solution(omega: float) -> AnalyticSolution:
    """Cavity (-1, 1)^2 with eps = I, mu = 1.

    ``E = (1/w)(cos(w y)/cos(w) - 1) e1`` solves the problem with the
    constant load ``w e1``, i.e. ``J = -i e1``.
    """
    c = np.cos(omega)
    if abs(c) < 1e-12:
        raise AtResonance(f"omega={omega} is a cavity resonance")

    def value(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        out[..., 0] = (np.cos(omega * x[..., 1]) / c - 1.0) / omega
        return out

    def curl(x):
        x = np.asarray(x, dtype=float)
        return (np.sin(omega * x[..., 1]) / c).astype(complex)

    def source(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        out[..., 0] = -1j
        return out

    def rhs(x):
        return 1j * omega * source(x)

    return AnalyticSolution(value, curl, Source(source, _zeros_like_points, degree=0), rhs)


def resonance_distance(omega: float) -> float:
    """Distance from omega to the nearest cavity resonance k pi / 2, k >= 1."""
    k = max(1, round(omega / (np.pi / 2)))
    return float(min(abs(omega - j * np.pi / 2) for j in (k - 1, k, k + 1) if j >= 1))


def gba_cavity_diagnostic(omega: float, h: float, p: int, c: float = 1.0) -> float:
    """Upper bound shape ``w h/c + (w/delta)(w h/c)^p`` of the approximation
    factor in the cavity, with the unknown constant set to 1."""
    delta = resonance_distance(omega)
    if delta == 0:
        raise AtResonance(f"omega={omega} is a cavity resonance")
    kh = omega * h / c
    return kh + (omega / delta) * kh**p


def cavity_omega_delta(delta: float) -> float:
    """Near-resonance frequency 3 pi/2 + delta pi/2."""
    return 1.5 * np.pi + delta * np.pi / 2


def cavity_omega_ell(ell: int) -> float:
    """High-frequency sequence (ell + 3/10) 2 pi."""
    return (ell + 0.3) * 2 * np.pi


# -- cutoff and plane wave -----------------------------------------------------

R_INNER = 0.8
R_OUTER = 0.9


def quintic_cutoff(t, derivative: int = 0):
    """C^2 cutoff: 1 below 0.8, 0 above 0.9, Hermite quintic in between."""
    t = np.asarray(t, dtype=float)
    width = R_OUTER - R_INNER
    u = np.clip((t - R_INNER) / width, 0.0, 1.0)
    inside = (t > R_INNER) & (t < R_OUTER)
    if derivative == 0:
        return 1.0 - (10 * u**3 - 15 * u**4 + 6 * u**5)
    if derivative == 1:
        return np.where(inside, -(30 * u**2 - 60 * u**3 + 30 * u**4) / width, 0.0)
    if derivative == 2:
        return np.where(inside, -(60 * u - 180 * u**2 + 120 * u**3) / width**2, 0.0)
    raise ValueError("derivative must be 0, 1 or 2")


def radial_cutoff(x):
    """chi(x) = quintic_cutoff(|x|) with its gradient and Hessian."""
    x = np.asarray(x, dtype=float)
    r = np.hypot(x[..., 0], x[..., 1])
    f0 = quintic_cutoff(r)
    f1 = quintic_cutoff(r, 1)
    f2 = quintic_cutoff(r, 2)
    rs = np.where(r > 0, r, 1.0)
    unit = x / rs[..., None]
    grad = f1[..., None] * unit
    eye = np.eye(2)
    outer = unit[..., :, None] * unit[..., None, :]
    hess = f2[..., None, None] * outer + (f1 / rs)[..., None, None] * (eye - outer)
    return f0, grad, hess


def pml_planewave_solution(omega: float, phi: float = np.pi / 12) -> AnalyticSolution:
    """Cut-off plane wave ``E = chi(x) p exp(-i w d.x)``.

    ``d = (cos phi, sin phi)``, ``p = (sin phi, -cos phi)``.  The right-hand
    side ``-w^2 E + rot curl E`` is supported in the ring 0.8 <= |x| <= 0.9;
    J is that right-hand side divided by ``i w``.
    """
    d = np.array([np.cos(phi), np.sin(phi)])
    pol = np.array([np.sin(phi), -np.cos(phi)])
    cross_dp = d[0] * pol[1] - d[1] * pol[0]  # = -1

    def wave(x):
        return np.exp(-1j * omega * (np.asarray(x, dtype=float) @ d))

    def value(x):
        chi, _, _ = radial_cutoff(x)
        return (chi * wave(x))[..., None] * pol

    def curl(x):
        chi, g, _ = radial_cutoff(x)
        gp = g[..., 0] * pol[1] - g[..., 1] * pol[0]
        return wave(x) * (gp - 1j * omega * chi * cross_dp)

    def in_ring(x):
        r = np.hypot(x[..., 0], x[..., 1])
        return (r > R_INNER) & (r < R_OUTER)

    def rhs(x):
        x = np.asarray(x, dtype=float)
        chi, g, hess = radial_cutoff(x)
        e = wave(x)
        gp = g[..., 0] * pol[1] - g[..., 1] * pol[0]
        inner = gp - 1j * omega * chi * cross_dp
        # d/dx_k of the curl
        dgp = hess[..., :, 0] * pol[1] - hess[..., :, 1] * pol[0]
        ds = e[..., None] * (dgp - 1j * omega * cross_dp * g) - 1j * omega * d * (e * inner)[..., None]
        rot = np.stack([ds[..., 1], -ds[..., 0]], axis=-1)
        out = -omega**2 * (chi * e)[..., None] * pol + rot
        # the plane wave solves the homogeneous equation inside the ring
        return np.where(in_ring(x)[..., None], out, 0.0)

    def source(x):
        return rhs(x) / (1j * omega)

    def source_div(x):
        # div E = exp(.) p . grad chi since p . d = 0; div rot = 0
        x = np.asarray(x, dtype=float)
        _, g, _ = radial_cutoff(x)
        div_e = wave(x) * (g @ pol)
        return np.where(in_ring(x), -omega**2 * div_e / (1j * omega), 0.0)

    return AnalyticSolution(value, curl, Source(source, source_div), rhs)


# -- geometry helpers ----------------------------------------------------------

OBSTACLE = 0.25
OBSTACLE_REGION = 9


def scattering_source(omega: float, phi: float = np.pi / 12) -> Source:
    return pml_planewave_solution(omega, phi).source


def scattering_materials(omega: float, sigma_star: float | None = None, L: float = 1.0,
                         ell: float = 0.25, eps_obstacle=(8.0, 32.0), mu_obstacle: float = 0.25):
    """PML layers plus the obstacle (-1/4, 1/4)^2 as region 9."""
    if sigma_star is None:
        sigma_star = 0.75 * omega
    pml_map, pml = pml_materials(omega, sigma_star, L, ell)
    eps = np.concatenate([pml.eps, np.diag(np.asarray(eps_obstacle, dtype=complex))[None]])
    mu = np.concatenate([pml.mu, [mu_obstacle]])

    def region_map(x):
        x = np.asarray(x, dtype=float)
        inside = (np.abs(x[..., 0]) < OBSTACLE) & (np.abs(x[..., 1]) < OBSTACLE)
        return np.where(inside, OBSTACLE_REGION, pml_map(x))

    return region_map, MaterialField(eps, mu)


def admissible_n(n: int, half_width: float, lines=()) -> int:
    """Smallest n' >= n such that every coordinate in ``lines`` is a grid
    line of the uniform n' x n' grid on (-half_width, half_width)^2."""
    width = Fraction(2 * half_width).limit_denominator(10**6)
    offsets = [Fraction(half_width + a).limit_denominator(10**6) for a in lines]
    m = max(int(n), 1)
    while not all((m * off / width).denominator == 1 for off in offsets):
        m += 1
    return m


__all__ += ["OBSTACLE", "OBSTACLE_REGION", "pml_region_map"]
