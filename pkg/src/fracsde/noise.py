"""Reproducible Q-Wiener increments and marked Poisson events.

Every random stream is derived from ``(master_seed, path_index, stream tag)``
through :class:`numpy.random.SeedSequence` and a Philox generator, so a path
can be regenerated in isolation and ensembles do not depend on the order or
the number of workers used to produce them.  Wiener modes get separate
streams: the increment at ``(step, mode)`` depends only on the seed, the
path, the mode and the step.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import ConfigError
from .grid import TimeGrid

__all__ = [
    "QWienerSpec",
    "JumpSpec",
    "NoiseRealization",
    "path_rng",
    "sample_wiener",
    "sample_poisson",
    "sample_noise",
    "compensated_integral",
    "write_noise_csv",
    "coarsen",
]

WIENER_STREAM = 0
JUMP_STREAM = 1


def path_rng(master_seed: int, path_index: int, *stream) -> np.random.Generator:
    """Independent generator for one (seed, path, stream...) tuple."""
    ss = np.random.SeedSequence(entropy=int(master_seed) & (2 ** 64 - 1),
                                spawn_key=(int(path_index),) + tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class QWienerSpec:
    """Truncated Karhunen-Loeve description of a Q-Wiener process.

    ``q_eigenvalues[k]`` is the variance rate of mode ``k``; the trace of Q
    is their sum.
    """

    q_eigenvalues: tuple = ()

    def __post_init__(self):
        q = tuple(float(v) for v in self.q_eigenvalues)
        if any(v < 0 or not math.isfinite(v) for v in q):
            raise ValueError("Q eigenvalues must be finite and nonnegative")
        object.__setattr__(self, "q_eigenvalues", q)

    @property
    def modes(self) -> int:
        return len(self.q_eigenvalues)

    @property
    def trace(self) -> float:
        return float(sum(self.q_eigenvalues))


@dataclass(frozen=True)
class JumpSpec:
    """Finite intensity measure ``lambda(du)`` on a mark interval.

    ``kind`` selects the shape of the measure:

    * ``"uniform"``: constant density ``total_rate / |Z|``;
    * ``"point"``: all mass ``total_rate`` at ``atom``;
    * ``"density"``: ``density(u)`` events per unit time per unit mark,
      ``total_rate`` is then computed from it.
    """

    mark_space: tuple = (0.0, 1.0)
    total_rate: float = 0.0
    kind: str = "uniform"
    atom: Optional[float] = None
    density: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        lo, hi = (float(v) for v in self.mark_space)
        if not hi >= lo:
            raise ValueError("mark_space must be an interval (lo, hi) with lo <= hi")
        object.__setattr__(self, "mark_space", (lo, hi))
        if self.kind == "density":
            if self.density is None:
                raise ValueError("density kind needs a density callable")
            rate, _ = integrate.quad(lambda u: float(self.density(u)), lo, hi, limit=200)
            object.__setattr__(self, "total_rate", float(rate))
        elif self.kind == "point":
            if self.atom is None or not lo <= self.atom <= hi:
                raise ValueError("point intensity needs an atom inside the mark space")
        elif self.kind != "uniform":
            raise ValueError(f"unknown intensity kind {self.kind!r}")
        if not math.isfinite(self.total_rate):
            raise ConfigError("total jump rate must be finite (infinite-activity "
                              "measures are not supported)")
        if self.total_rate < 0:
            raise ValueError("total jump rate must be nonnegative")
        if self.kind == "uniform" and hi == lo and self.total_rate > 0:
            raise ValueError("uniform intensity needs a nondegenerate mark interval")

    def quadrature(self, n: int = 16):
        """Nodes and weights with ``sum w_i h(u_i) ~ int_Z h(u) lambda(du)``."""
        lo, hi = self.mark_space
        if self.total_rate == 0:
            return np.zeros(0), np.zeros(0)
        if self.kind == "point":
            return np.array([self.atom]), np.array([self.total_rate])
        x, w = np.polynomial.legendre.leggauss(n)
        u = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        w = 0.5 * (hi - lo) * w
        if self.kind == "uniform":
            return u, w * self.total_rate / (hi - lo)
        return u, w * np.array([float(self.density(v)) for v in u])

    def _density_ceiling(self):
        lo, hi = self.mark_space
        u = np.linspace(lo, hi, 2001)
        return 1.05 * max(float(self.density(v)) for v in u)


@dataclass(frozen=True)
class NoiseRealization:
    """One path of driving noise on a time grid."""

    grid: TimeGrid
    wiener_increments: np.ndarray
    jump_times: np.ndarray
    jump_marks: np.ndarray
    master_seed: int
    path_index: int

    @property
    def jump_cells(self) -> np.ndarray:
        return self.grid.cell_of(self.jump_times)

    @classmethod
    def empty(cls, grid: TimeGrid, wiener_modes: int = 0, master_seed=0, path_index=0):
        return cls(grid, np.zeros((grid.steps, wiener_modes)), np.zeros(0), np.zeros(0),
                   master_seed, path_index)


def sample_wiener(spec: QWienerSpec, grid: TimeGrid, master_seed: int,
                  path_index: int) -> NoiseRealization:
    """Q-Wiener increments ``sqrt(q_k dt) * N(0, 1)`` for every step and mode."""
    inc = np.zeros((grid.steps, spec.modes))
    for k, q in enumerate(spec.q_eigenvalues):
        z = path_rng(master_seed, path_index, WIENER_STREAM, k).standard_normal(grid.steps)
        inc[:, k] = math.sqrt(q * grid.dt) * z
    return NoiseRealization(grid, inc, np.zeros(0), np.zeros(0), master_seed, path_index)


def sample_poisson(spec: JumpSpec, grid: TimeGrid, master_seed: int,
                   path_index: int) -> NoiseRealization:
    """Poisson random measure on ``[0, horizon] x Z`` by homogeneous-rate thinning."""
    rng = path_rng(master_seed, path_index, JUMP_STREAM)
    T = grid.horizon
    lo, hi = spec.mark_space
    if spec.total_rate == 0:
        times = marks = np.zeros(0)
    elif spec.kind == "point":
        n = rng.poisson(spec.total_rate * T)
        times = rng.uniform(0.0, T, n)
        marks = np.full(n, spec.atom)
    elif spec.kind == "uniform":
        n = rng.poisson(spec.total_rate * T)
        times = rng.uniform(0.0, T, n)
        marks = rng.uniform(lo, hi, n)
    else:
        ceiling = spec._density_ceiling()
        n = rng.poisson(ceiling * (hi - lo) * T)
        times = rng.uniform(0.0, T, n)
        marks = rng.uniform(lo, hi, n)
        accept = rng.uniform(0.0, ceiling, n) < np.array([spec.density(u) for u in marks])
        times, marks = times[accept], marks[accept]
    order = np.argsort(times, kind="stable")
    return NoiseRealization(grid, np.zeros((grid.steps, 0)), times[order], marks[order],
                            master_seed, path_index)


def sample_noise(wiener: QWienerSpec, jumps: JumpSpec, grid: TimeGrid,
                 master_seed: int, path_index: int) -> NoiseRealization:
    w = sample_wiener(wiener, grid, master_seed, path_index)
    j = sample_poisson(jumps, grid, master_seed, path_index)
    return replace(w, jump_times=j.jump_times, jump_marks=j.jump_marks)


def compensated_integral(noise: NoiseRealization, integrand: Callable, spec: JumpSpec,
                         grid: Optional[TimeGrid] = None, quad_nodes: int = 16) -> np.ndarray:
    """Path of ``int_0^t int_Z h(s, u) (N(ds, du) - lambda(du) ds)`` on the grid.

    ``integrand(s, u)`` must accept arrays and may return a trailing state
    axis.  The jump part sums over events with time <= t_i; the compensator
    uses the left-endpoint rule in time and Gauss-Legendre (or the atom) in
    the mark.
    """
    grid = grid or noise.grid
    t = grid.times
    nodes, weights = spec.quadrature(quad_nodes)
    if nodes.size:
        tt, uu = np.meshgrid(t[:-1], nodes, indexing="ij")
        vals = np.asarray(integrand(tt, uu), float)
        comp_rate = np.tensordot(weights, np.moveaxis(vals, 1, 0), axes=1)
    else:
        probe = np.asarray(integrand(np.zeros(1), np.zeros(1)), float)
        comp_rate = np.zeros((grid.steps,) + probe.shape[1:])
    comp = np.concatenate([np.zeros((1,) + comp_rate.shape[1:]),
                           np.cumsum(comp_rate * grid.dt, axis=0)])
    out = -comp
    if noise.jump_times.size:
        jumps = np.asarray(integrand(noise.jump_times, noise.jump_marks), float)
        jumps = np.broadcast_to(jumps, (noise.jump_times.size,) + comp_rate.shape[1:])
        counted = noise.jump_times[None, :] <= t[:, None] + 1e-12 * grid.dt
        out = out + np.tensordot(counted.astype(float), jumps, axes=1)
    return out


def write_noise_csv(realizations, path) -> None:
    """Dump realizations as rows ``path,kind,index,mode_or_mark,value``.

    Wiener rows carry (step, mode, increment); event rows carry
    (event number, mark, time).
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "kind", "index", "mode_or_mark", "value"])
        for r in realizations:
            for i, row in enumerate(r.wiener_increments):
                for k, v in enumerate(row):
                    w.writerow([r.path_index, "step", i, k, repr(float(v))])
            for e, (tj, uj) in enumerate(zip(r.jump_times, r.jump_marks)):
                w.writerow([r.path_index, "event", e, repr(float(uj)), repr(float(tj))])


def coarsen(noise: NoiseRealization, factor: int) -> NoiseRealization:
    """The same realization seen on a grid ``factor`` times coarser.

    Wiener increments are summed over consecutive blocks; events are kept.
    """
    factor = int(factor)
    if factor < 1 or noise.grid.steps % factor:
        raise ValueError("factor must divide the number of steps")
    grid = TimeGrid(noise.grid.dt * factor, noise.grid.steps // factor)
    inc = noise.wiener_increments.reshape(grid.steps, factor, -1).sum(axis=1)
    return NoiseRealization(grid, inc, noise.jump_times, noise.jump_marks,
                            noise.master_seed, noise.path_index)
