"""Reproducible runs of the three model experiments with CSV output."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .adapt import AdaptConfig, Experiment, adapt_loop
from .coeffs import homogeneous, pml_materials
from .estimator import ErrorReport, energy_error, estimate
from .fespace import MAX_DEGREE, NedelecSpace
from .mesh import structured_mesh
from .problems import (
    admissible_n,
    cavity_omega_delta,
    cavity_omega_ell,
    cavity_solution,
    gba_cavity_diagnostic,
    pml_planewave_solution,
    scattering_materials,
    scattering_source,
)
from .system import assemble, solve

__all__ = [
    "ExperimentConfig",
    "SameMeshReference",
    "run_experiment",
    "uniform_sweep",
    "scattering_experiment",
    "CSV_HEADER",
    "ADAPTIVE_HEADER",
]

CSV_HEADER = ["h", "N", "err", "eta", "eta_div", "eta_curl", "osc", "effectivity", "gba_diag"]
ADAPTIVE_HEADER = ["iter"] + CSV_HEADER[1:]
KINDS = ("cavity", "pml", "scattering")
CAVITY_HALF_WIDTH = 1.0
PML_HALF_WIDTH = 1.25


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "cavity"
    p: int = 1
    omega: float | None = None
    delta: float | None = None
    ell: float | None = None
    n0: int = 4
    nmax: int = 64
    iters: int = 10
    theta: float = 0.1
    max_dofs: int = 300_000
    sigma_star: float | None = None
    phi: float = math.pi / 12
    out: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if sum(v is not None for v in (self.omega, self.delta, self.ell)) > 1:
            raise ValueError("give at most one of omega, delta, ell")
        if (self.delta is not None or self.ell is not None) and self.kind != "cavity":
            raise ValueError("delta and ell only apply to the cavity")
        if not 1 <= self.p <= MAX_DEGREE:
            raise ValueError(f"p must lie in 1..{MAX_DEGREE}")
        if self.resolved_omega <= 0:
            raise ValueError("omega must be positive")

    @property
    def resolved_omega(self) -> float:
        if self.omega is not None:
            return float(self.omega)
        if self.delta is not None:
            return cavity_omega_delta(self.delta)
        if self.ell is not None:
            return cavity_omega_ell(self.ell)
        return 7 * math.pi / 4 if self.kind == "cavity" else 2 * math.pi

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12e}"


class _CsvSink:
    def __init__(self, path, header):
        self.path = path
        self.buffer = io.StringIO()
        self.writer = csv.writer(self.buffer, lineterminator="\n")
        self.writer.writerow(header)

    def row(self, values):
        self.writer.writerow([_fmt(v) for v in values])
        self.flush()

    def trailer(self, exc):
        self.writer.writerow(["error", f"{type(exc).__name__}: {exc}"])
        self.flush()

    def flush(self):
        if self.path:
            with open(self.path, "w", newline="") as fh:
                fh.write(self.buffer.getvalue())

    @property
    def text(self):
        return self.buffer.getvalue()


def _setup_uniform(config: ExperimentConfig):
    omega = config.resolved_omega
    if config.kind == "cavity":
        return omega, CAVITY_HALF_WIDTH, None, homogeneous(), cavity_solution(omega), ()
    sigma = 0.75 * omega if config.sigma_star is None else config.sigma_star
    region_map, materials = pml_materials(omega, sigma)
    return omega, PML_HALF_WIDTH, region_map, materials, pml_planewave_solution(omega, config.phi), (1.0,)


def uniform_sweep(config: ExperimentConfig):
    """Rows for meshes n0, 2 n0, ... <= nmax (each n moved up to the next
    size whose grid resolves the material interfaces)."""
    omega, half, region_map, materials, solution, lines = _setup_uniform(config)
    n = config.n0
    while n <= config.nmax:
        m_n = admissible_n(n, half, lines)
        if m_n > config.nmax:
            break
        mesh = structured_mesh(m_n, (-half, half, -half, half), region_map)
        space = NedelecSpace(mesh, config.p)
        field = solve(assemble(space, materials, omega, solution.source.value))
        est = estimate(field, materials, omega, solution.source)
        err = energy_error(field, solution, materials, omega).energy
        gba = gba_cavity_diagnostic(omega, mesh.h, config.p) if config.kind == "cavity" else float("nan")
        yield [mesh.h, int(space.free.size), err, est.eta, est.eta_div_total, est.eta_curl_total,
               est.osc, est.eta / err, gba]
        n = 2 * m_n


class SameMeshReference:
    """Error of a discrete field against higher-degree solutions on its mesh.

    The reference has degree ``min(p + 2, 4)``; ``gap`` is the energy
    distance between the degree ``p + 1`` and the reference solution, a
    computable bound for the reference's own error.
    """

    def __init__(self, materials, omega, source):
        self.materials = materials
        self.omega = omega
        self.source = source
        self.last_gap = float("nan")
        self.gaps = []

    def degree(self, p):
        return min(p + 2, MAX_DEGREE)

    def solve_degree(self, mesh, q):
        return solve(assemble(NedelecSpace(mesh, q), self.materials, self.omega, self.source.value))

    def __call__(self, field) -> ErrorReport:
        mesh = field.space.mesh
        q = self.degree(field.space.p)
        ref = self.solve_degree(mesh, q)
        if field.space.p + 1 < q:
            mid = self.solve_degree(mesh, field.space.p + 1)
            self.last_gap = energy_error(mid, ref, self.materials, self.omega).energy
        else:
            self.last_gap = float("nan")
        self.gaps.append(self.last_gap)
        return energy_error(field, ref, self.materials, self.omega)


def scattering_experiment(config: ExperimentConfig, with_reference: bool = True) -> Experiment:
    omega = config.resolved_omega
    region_map, materials = scattering_materials(omega, config.sigma_star)
    source = scattering_source(omega, config.phi)
    n = admissible_n(config.n0, PML_HALF_WIDTH, (1.0, 0.25))
    mesh = structured_mesh(n, (-PML_HALF_WIDTH, PML_HALF_WIDTH) * 2, region_map)
    ref = SameMeshReference(materials, omega, source) if with_reference else None
    return Experiment(mesh, materials, omega, source, error=ref)


def run_experiment(config: ExperimentConfig):
    """Run ``config`` and return the CSV text; also written to ``config.out``.

    Failures append an ``error`` trailer row to the partial CSV and re-raise.
    """
    if config.kind == "scattering":
        sink = _CsvSink(config.out, ADAPTIVE_HEADER)
        exp = scattering_experiment(config)
        acfg = AdaptConfig(config.theta, config.iters, config.max_dofs, config.p)

        def record(rec, *_):
            sink.row([rec.iteration, rec.ndofs, rec.error, rec.eta, rec.eta_div, rec.eta_curl,
                      rec.osc, rec.effectivity, float("nan")])

        adapt_loop(exp, acfg, on_iteration=record)
        if exp.history:
            sink.trailer(exp.history[-1])
            raise exp.history[-1]
        return sink.text

    sink = _CsvSink(config.out, CSV_HEADER)
    try:
        for row in uniform_sweep(config):
            sink.row(row)
    except Exception as exc:
        sink.trailer(exc)
        raise
    return sink.text


def with_overrides(config: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(config, **{k: v for k, v in kw.items() if v is not None})
