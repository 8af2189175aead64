"""Doerfler marking and the solve, estimate, mark, refine loop."""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .estimator import LocalEstimate, estimate
from .fespace import NedelecSpace
from .mesh import Mesh, bisect
from .system import assemble, solve

__all__ = [
    "AdaptConfig",
    "IterationRecord",
    "AllZeroEstimates",
    "Experiment",
    "doerfler_mark",
    "adapt_loop",
    "write_records",
]


class AllZeroEstimates(ValueError):
    """Every indicator vanishes; there is nothing left to refine."""


@dataclass(frozen=True)
class AdaptConfig:
    theta: float = 0.1
    max_iterations: int = 10
    max_dofs: int = 300_000
    p: int = 1

    def __post_init__(self):
        if not 0 < self.theta <= 1:
            raise ValueError("theta must lie in (0, 1]")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    n_elements: int
    ndofs: int
    eta: float
    eta_div: float
    eta_curl: float
    osc: float
    error: float = float("nan")
    effectivity: float = float("nan")
    wall_time: float = 0.0


@dataclass
class Experiment:
    """What the loop needs to know about a problem.

    ``error`` optionally maps a discrete solution to its energy error (or
    ``None`` when no reference is available).
    """

    mesh: Mesh
    materials: object
    omega: float
    source: object
    error: Callable | None = None
    history: list = field(default_factory=list, repr=False)


def doerfler_mark(etas, theta: float) -> np.ndarray:
    """Smallest set of elements, taken in decreasing order of eta (ties by
    index), whose squared indicators sum to at least ``theta`` of the total."""
    etas = np.asarray(etas, dtype=float)
    if np.any(etas < 0) or not np.all(np.isfinite(etas)):
        raise ValueError("indicators must be finite and nonnegative")
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    sq = etas**2
    total = sq.sum()
    if total == 0:
        raise AllZeroEstimates("all indicators are zero")
    order = np.lexsort((np.arange(etas.size), -etas))
    csum = np.cumsum(sq[order])
    # relative slack absorbs rounding in the running sum
    target = theta * total * (1 - 1e-12)
    m = int(np.searchsorted(csum, target, side="left")) + 1
    marked = order[: min(m, etas.size)]
    return np.sort(marked[sq[marked] > 0])


def adapt_loop(experiment: Experiment, config: AdaptConfig, on_iteration: Callable | None = None):
    """Run the adaptive loop and return the list of :class:`IterationRecord`.

    ``on_iteration(record, mesh, field, est, marked)`` is called after each
    iteration.  Solver failures end the loop; the exception is attached to
    ``experiment.history`` and the records gathered so far are returned.
    """
    mesh = experiment.mesh
    records = []
    for it in range(config.max_iterations):
        t0 = time.perf_counter()
        space = NedelecSpace(mesh, config.p)
        if records and space.ndofs > config.max_dofs:
            break
        try:
            system = assemble(space, experiment.materials, experiment.omega, experiment.source.value)
            field_h = solve(system)
        except Exception as exc:  # noqa: BLE001 - reported to the caller
            experiment.history.append(exc)
            break
        est: LocalEstimate = estimate(field_h, experiment.materials, experiment.omega, experiment.source)
        err = experiment.error(field_h) if experiment.error else None
        err_val = float(getattr(err, "energy", err)) if err is not None else float("nan")
        rec = IterationRecord(
            iteration=it,
            n_elements=mesh.n_triangles,
            ndofs=int(space.free.size),
            eta=est.eta,
            eta_div=est.eta_div_total,
            eta_curl=est.eta_curl_total,
            osc=est.osc,
            error=err_val,
            effectivity=est.eta / err_val if err_val > 0 else float("nan"),
            wall_time=time.perf_counter() - t0,
        )
        records.append(rec)
        last = it == config.max_iterations - 1
        marked = None
        if not last:
            try:
                marked = doerfler_mark(est.eta_local, config.theta)
            except AllZeroEstimates:
                last = True
        if on_iteration is not None:
            on_iteration(rec, mesh, field_h, est, marked)
        if last:
            break
        mesh = bisect(mesh, marked)
    experiment.mesh = mesh
    return records


RECORD_FIELDS = ["iter", "elements", "N", "err", "eta", "eta_div", "eta_curl", "osc", "effectivity"]


def write_records(path, records, wall_time: bool = True) -> None:
    header = RECORD_FIELDS + (["wall_time"] if wall_time else [])
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for r in records:
            row = [r.iteration, r.n_elements, r.ndofs] + [
                f"{v:.12e}" for v in (r.error, r.eta, r.eta_div, r.eta_curl, r.osc, r.effectivity)
            ]
            if wall_time:
                row.append(f"{r.wall_time:.3f}")
            wr.writerow(row)
