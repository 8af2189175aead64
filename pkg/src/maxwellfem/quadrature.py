"""Quadrature on the reference triangle and on the unit interval.

Triangle rules are Duffy-collapsed tensor products of Gauss-Jacobi and
Gauss-Legendre rules.  They are not minimal but every weight is positive and
any order of exactness is available.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

__all__ = ["QuadRule", "UnsupportedOrder", "quad_rule", "line_rule", "MAX_ORDER"]

MAX_ORDER = 20


class UnsupportedOrder(ValueError):
    pass


@dataclass(frozen=True)
class QuadRule:
    """Rule on the reference triangle {x, y >= 0, x + y <= 1}.

    ``points`` are Cartesian reference coordinates, ``weights`` sum to the
    reference area 1/2.
    """

    points: np.ndarray
    weights: np.ndarray
    order: int

    @property
    def barycentric(self) -> np.ndarray:
        x, y = self.points.T
        return np.column_stack([1.0 - x - y, x, y])

    def __len__(self):
        return self.weights.size


@lru_cache(maxsize=None)
def quad_rule(order: int) -> QuadRule:
    """Triangle rule integrating polynomials of total degree ``order`` exactly."""
    if not 1 <= order <= MAX_ORDER:
        raise UnsupportedOrder(f"order must be in [1, {MAX_ORDER}], got {order}")
    n = (order + 2) // 2
    # x = u, y = v (1 - u); the Jacobian (1 - u) is absorbed by the Jacobi weight
    u, wu = roots_jacobi(n, 1.0, 0.0)
    u = 0.5 * (u + 1.0)
    wu = wu / 4.0
    v, wv = np.polynomial.legendre.leggauss(n)
    v = 0.5 * (v + 1.0)
    wv = 0.5 * wv
    U, V = np.meshgrid(u, v, indexing="ij")
    points = np.column_stack([U.ravel(), (V * (1.0 - U)).ravel()])
    weights = np.outer(wu, wv).ravel()
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadRule(points, weights, order)


@lru_cache(maxsize=None)
def line_rule(n: int):
    """n-point Gauss-Legendre rule on [0, 1] (exact to degree 2n - 1)."""
    s, w = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (s + 1.0)
    w = 0.5 * w
    s.setflags(write=False)
    w.setflags(write=False)
    return s, w
