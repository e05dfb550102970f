"""Mild solutions: the mild-solution map, successive approximations with
integral contractors, a direct time-stepping oracle, the regularity equation
and the uniqueness gap.

Every integral uses the left-endpoint product rule on a uniform grid.  For
mode ``n`` a convolution term reads

    sum_{j < i} K_n(t_i - t_j) * inc_{j, n}

where ``inc_j`` is the increment of the integrator over ``[t_j, t_{j+1})``
evaluated at ``t_j`` (``f dt``, ``G dW``, jump sizes, ...).  Stochastic terms
are therefore non-anticipating.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import (DivergenceError, IllPosedNeutralTermError, InapplicableCriterionError,
                     UnsupportedRegimeError)
from .grid import TimeGrid
from .model import HistorySegment, ProblemSpec, Trajectory
from .noise import NoiseRealization, sample_noise
from .spectral import SpectralGenerator, family_kernel

__all__ = [
    "PicardState",
    "SolveResult",
    "PathResult",
    "convolve_family",
    "picard_initial",
    "mild_map",
    "picard_residual",
    "picard_update",
    "picard_solve",
    "direct_scheme",
    "regularity_solve",
    "regularity_residual",
    "uniqueness_constants",
    "uniqueness_gap",
    "gronwall_envelope",
    "solve_path",
    "run_ensemble",
    "write_trajectory_csv",
    "write_residual_csv",
]

#: Bound on sup |lambda_n|^gamma |g_n| relative to the state scale.
NEUTRAL_GROWTH_LIMIT = 1e8
#: Residual sup-norms above this are treated as a blow-up.
BLOWUP = 1e150


@dataclass(frozen=True)
class PicardState:
    n: int
    x: Trajectory
    y: Trajectory
    residual_norm: float

    def __post_init__(self):
        if not self.residual_norm >= 0:
            raise ValueError("residual_norm must be nonnegative")


class SolveResult(NamedTuple):
    trajectory: Trajectory
    iterations: int
    residual_history: list


class PathResult(NamedTuple):
    path_index: int
    trajectory: Trajectory
    iterations: int
    residual_history: list


# ------------------------------------------------------------------ helpers

def _causal_conv(K: np.ndarray, inc: np.ndarray) -> np.ndarray:
    """out_i = sum_{j<i} K[i-j] * inc_j, mode by mode.  ``inc`` has >= steps rows."""
    steps = K.shape[0] - 1
    n = K.shape[1]
    out = np.zeros((steps + 1, n))
    for m in range(n):
        out[1:, m] = np.convolve(K[1:, m], inc[:steps, m])[:steps]
    return out


class _Setup(NamedTuple):
    lam: np.ndarray
    S: np.ndarray
    C: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray


@lru_cache(maxsize=32)
def _setup(spec: ProblemSpec, grid: TimeGrid) -> _Setup:
    ev = spec.generator.eigenvalues
    nodes, weights = spec.jumps.quadrature(spec.quad_nodes)
    return _Setup(spec.generator.lam,
                  family_kernel(spec.alpha, ev, grid.dt, grid.steps, "sin"),
                  family_kernel(spec.alpha, ev, grid.dt, grid.steps, "cos"),
                  nodes, weights)


def _check_noise(spec: ProblemSpec, grid: TimeGrid, noise: Optional[NoiseRealization]):
    if noise is None:
        return NoiseRealization.empty(grid, spec.wiener.modes)
    if noise.grid != grid:
        raise ValueError(f"noise grid {noise.grid} differs from trajectory grid {grid}")
    if noise.wiener_increments.shape != (grid.steps, spec.wiener.modes):
        raise ValueError("noise has the wrong number of Wiener modes")
    return noise


def _events_by_cell(noise: NoiseRealization):
    cells = noise.jump_cells
    return [(int(c), float(u)) for c, u in zip(cells, noise.jump_marks)]


def _phi_trajectory(spec: ProblemSpec, grid: TimeGrid) -> Trajectory:
    return Trajectory(grid, np.tile(spec.phi0(), (grid.steps + 1, 1)))


def _g_at_zero(spec: ProblemSpec, grid: TimeGrid) -> np.ndarray:
    seg = HistorySegment(_phi_trajectory(spec, grid), 0.0, spec.phi, spec.delay)
    return np.asarray(spec.coefficients.g(0.0, seg), float)


def _check_neutral(spec: ProblemSpec, gv: np.ndarray, traj: Trajectory):
    if not np.all(np.isfinite(gv)):
        raise IllPosedNeutralTermError("neutral coefficient produced non-finite values")
    weighted = np.max(np.abs(gv) * spec.generator.power(spec.gamma))
    scale = 1.0 + max(float(np.max(np.abs(traj.states))), float(np.max(np.abs(spec.phi0()))))
    if weighted > NEUTRAL_GROWTH_LIMIT * scale:
        raise IllPosedNeutralTermError(
            f"(-A)^gamma g reaches {weighted:.3g}; the neutral coefficient grows faster "
            f"than the |lambda_n|^-gamma weighting allows")


def _as_eigenvalues(gen):
    if isinstance(gen, SpectralGenerator):
        return gen.eigenvalues
    return tuple(float(v) for v in np.atleast_1d(gen))


# ------------------------------------------------------------------ mild map

def convolve_family(kind: str, alpha: float, gen, values, grid: TimeGrid) -> Trajectory:
    """Left-endpoint convolution ``sum_{j<i} K(t_i - t_j) values_j dt``.

    ``kind`` is ``"sine"`` or ``"cosine"``; ``gen`` is a generator or a
    plain sequence of eigenvalues (which may contain 0).
    """
    code = {"sine": "sin", "cosine": "cos"}.get(kind)
    if code is None:
        raise ValueError("kind must be 'sine' or 'cosine'")
    values = np.asarray(values, float)
    if values.ndim == 1:
        values = values[:, None]
    if values.shape[0] < grid.steps:
        raise ValueError("values must be given on the grid nodes")
    K = family_kernel(alpha, _as_eigenvalues(gen), grid.dt, grid.steps, code)
    return Trajectory(grid, _causal_conv(K, values) * grid.dt)


def picard_initial(spec: ProblemSpec, grid: TimeGrid) -> Trajectory:
    """x0(t) = C(t)[phi(0) + g(0, phi)] + S(t) eta."""
    st = _setup(spec, grid)
    a = spec.phi0() + _g_at_zero(spec, grid)
    return Trajectory(grid, st.C * a + st.S * np.asarray(spec.eta))


def _increments(spec: ProblemSpec, traj: Trajectory, noise: NoiseRealization, st: _Setup):
    """Neutral values g_i and per-cell increments of every integrator."""
    c = spec.coefficients
    grid = traj.grid
    dt = grid.dt
    gv = c.g.on_grid(traj, spec.phi, spec.delay)
    _check_neutral(spec, gv, traj)
    inc = np.zeros((grid.steps, spec.modes))
    if not c.f.is_zero:
        inc += dt * c.f.on_grid(traj, spec.phi, spec.delay)[:-1]
    if not c.g.is_zero:
        # -int A S g: mode-wise -lambda_n * g_n
        inc -= dt * st.lam * gv[:-1]
    if spec.wiener.modes and not c.G.is_zero:
        Gv = c.G.on_grid(traj, spec.phi, spec.delay)[:-1]
        inc += np.einsum("jnk,jk->jn", Gv, noise.wiener_increments)
    if not c.sigma.is_zero:
        if st.nodes.size:
            sv = c.sigma.on_grid(traj, spec.phi, spec.delay, st.nodes)[:-1]
            inc -= dt * np.einsum("q,jqn->jn", st.weights, sv)
        times = grid.times
        for j, u in _events_by_cell(noise):
            seg = HistorySegment(traj, times[j], spec.phi, spec.delay)
            inc[j] += c.sigma(times[j], seg, np.asarray(u))
    return gv, inc


def mild_map(spec: ProblemSpec, traj: Trajectory, noise: Optional[NoiseRealization] = None
             ) -> Trajectory:
    """Right-hand side Phi(x) of the mild-solution equation on the grid.

    Phi(x)(t) = C(t)[phi + g(0, phi)] + S(t) eta - g(t, x_t) - int A S g
                + int S f + int S G dw + int int S sigma (N - lambda du dt)
    """
    grid = traj.grid
    noise = _check_noise(spec, grid, noise)
    st = _setup(spec, grid)
    x0 = picard_initial(spec, grid)
    gv, inc = _increments(spec, traj, noise, st)
    return Trajectory(grid, x0.states - gv + _causal_conv(st.S, inc))


def picard_residual(spec: ProblemSpec, x: Trajectory,
                    noise: Optional[NoiseRealization] = None) -> Trajectory:
    """y = x - Phi(x); zero exactly at a (discrete) mild solution."""
    return Trajectory(x.grid, x.states - mild_map(spec, x, noise).states)


# ------------------------------------------------------------- contractors

def _contractor_operators(spec: ProblemSpec, x: Trajectory, noise: NoiseRealization,
                          st: _Setup) -> Optional[np.ndarray]:
    """Per-cell matrices L_j with sum_{j<i} S(t_i - t_j) L_j y_j the contractor terms.

    L_j = (Gamma1 + Gamma2) dt + sum_k Gamma3[:, k, :] dW_jk + (int Gamma4 lambda du) dt
    (or, with the compensated measure, the jump sum minus that compensator).
    """
    k = spec.contractors
    if k.all_zero:
        return None
    grid = x.grid
    dt = grid.dt
    times = grid.times[:-1]
    xs = x.states[:-1]
    n = spec.modes
    L = np.zeros((grid.steps, n, n))
    for gam in (k.gamma1, k.gamma2):
        if not gam.is_zero:
            L += dt * np.asarray(gam.on_grid(times, xs))
    if not k.gamma3.is_zero and spec.wiener.modes:
        T = np.asarray(k.gamma3.on_grid(times, xs))
        L += np.einsum("jnkm,jk->jnm", T, noise.wiener_increments)
    if not k.gamma4.is_zero and st.nodes.size:
        M4 = np.asarray(k.gamma4.on_grid(times, xs, st.nodes))
        comp = np.einsum("q,jqnm->jnm", st.weights, M4) * dt
        if spec.gamma4_measure == "intensity":
            L += comp
        else:
            L -= comp
            for j, u in _events_by_cell(noise):
                L[j] += k.gamma4(times[j], xs[j], u)
    return L


def _apply_operators(L: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.einsum("jnm,jm->jn", L, y[:L.shape[0]])


def picard_update(spec: ProblemSpec, x: Trajectory, y: Trajectory,
                  noise: Optional[NoiseRealization] = None) -> Trajectory:
    """x_{n+1} = x_n - [y_n + int S Gamma1 y + int S Gamma2 y + int S Gamma3 y dw
    + int int S Gamma4 y lambda du ds]."""
    if x.grid != y.grid:
        raise ValueError("x and y must share a grid")
    noise = _check_noise(spec, x.grid, noise)
    st = _setup(spec, x.grid)
    L = _contractor_operators(spec, x, noise, st)
    bracket = y.states
    if L is not None:
        bracket = bracket + _causal_conv(st.S, _apply_operators(L, y.states))
    return Trajectory(x.grid, x.states - bracket)


def _sup_moment(traj: Trajectory, p: float) -> float:
    return traj.sup_norm(p)


def _theta_exist(spec: ProblemSpec):
    from .stability import existence_criterion, resolve_constants
    try:
        return existence_criterion(resolve_constants(spec)).theta
    except Exception:      # diagnostic only
        return None


def picard_solve(spec: ProblemSpec, noise: Optional[NoiseRealization] = None,
                 tol: float = 1e-10, max_iter: int = 50,
                 grid: Optional[TimeGrid] = None) -> SolveResult:
    """Successive approximations from ``picard_initial`` until sup_t ||y_n||^p < tol.

    The residual norm is the pathwise surrogate sup_t ||y_n(t)||^p of
    sup_t E||y_n(t)||^p.  ``iterations`` counts residual evaluations, so a
    problem whose initial iterate is already a fixed point converges in one.

    Raises
    ------
    DivergenceError
        When the tolerance is not reached within ``max_iter`` iterations or
        the residual becomes non-finite.  Carries the residual history and
        the existence-criterion value.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if grid is None:
        grid = noise.grid if noise is not None else None
    if grid is None:
        raise ValueError("need a grid or a noise realization")
    noise = _check_noise(spec, grid, noise)
    x = picard_initial(spec, grid)
    history = []
    for n in range(1, max_iter + 1):
        y = picard_residual(spec, x, noise)
        r = _sup_moment(y, spec.p)
        history.append(r)
        if not math.isfinite(r) or r > BLOWUP:
            raise DivergenceError(f"residual blew up at iteration {n}", history,
                                  _theta_exist(spec))
        if r < tol:
            return SolveResult(x, n, history)
        x = picard_update(spec, x, y, noise)
    trend = "non-decreasing" if history[-1] >= min(history[:-1] or history) else "decreasing"
    raise DivergenceError(
        f"no convergence after {max_iter} iterations (residual {history[-1]:.3e}, {trend})",
        history, _theta_exist(spec))


# ------------------------------------------------------------- direct scheme

def direct_scheme(spec: ProblemSpec, noise: Optional[NoiseRealization] = None,
                  grid: Optional[TimeGrid] = None) -> Trajectory:
    """One pass of time stepping through the mild form (independent oracle).

    Deterministic integrands are frozen on each cell and integrated exactly
    against the sine family (weights from t^2 E_{a,3}); stochastic and jump
    terms use the same left-endpoint sums as :func:`mild_map`.  The neutral
    term at t_i is evaluated with the current state frozen at x(t_{i-1}).
    Only the Lipschitz regime (all contractors zero) is supported.
    """
    if not spec.contractors.all_zero:
        raise UnsupportedRegimeError("direct_scheme requires all contractors to be zero")
    if grid is None:
        if noise is None:
            raise ValueError("need a grid or a noise realization")
        grid = noise.grid
    noise = _check_noise(spec, grid, noise)
    st = _setup(spec, grid)
    c = spec.coefficients
    I = family_kernel(spec.alpha, spec.generator.eigenvalues, grid.dt, grid.steps, "int")
    W = np.zeros_like(I)
    W[1:] = I[1:] - I[:-1]
    x0 = picard_initial(spec, grid).states
    times = grid.times
    n = spec.modes
    events = [[] for _ in range(grid.steps)]
    for j, u in _events_by_cell(noise):
        events[j].append(u)

    work = np.tile(spec.phi0(), (grid.steps + 1, 1))
    traj = Trajectory(grid, work)
    states = traj.states            # filled in place
    det = np.zeros((grid.steps, n))
    sto = np.zeros((grid.steps, n))
    for i in range(1, grid.steps + 1):
        j = i - 1
        seg = HistorySegment(traj, times[j], spec.phi, spec.delay)
        gj = np.asarray(c.g(times[j], seg), float)
        d = np.asarray(c.f(times[j], seg), float) - st.lam * gj
        s = np.zeros(n)
        if spec.wiener.modes and not c.G.is_zero:
            s += np.asarray(c.G(times[j], seg)) @ noise.wiener_increments[j]
        if not c.sigma.is_zero:
            if st.nodes.size:
                d -= st.weights @ np.asarray(c.sigma(times[j], seg, st.nodes))
            for u in events[j]:
                s += np.asarray(c.sigma(times[j], seg, np.asarray(u)))
        det[j], sto[j] = d, s
        # frozen current state for the neutral term at t_i
        states[i:] = states[j]
        gi = np.asarray(c.g(times[i], HistorySegment(traj, times[i], spec.phi, spec.delay)))
        conv = np.sum(W[i:0:-1] * det[:i], axis=0) + np.sum(st.S[i:0:-1] * sto[:i], axis=0)
        states[i] = x0[i] - gi + conv
        states[i + 1:] = states[i]
    gv = c.g.on_grid(traj, spec.phi, spec.delay)
    _check_neutral(spec, gv, traj)
    return Trajectory(grid, states.copy())


# ------------------------------------------------------- regularity, uniqueness

def regularity_residual(spec: ProblemSpec, x_field: Trajectory, y: Trajectory,
                        A_field: Trajectory, noise: Optional[NoiseRealization] = None) -> float:
    """Relative sup residual of the discrete regularity equation."""
    noise = _check_noise(spec, x_field.grid, noise)
    st = _setup(spec, x_field.grid)
    L = _contractor_operators(spec, x_field, noise, st)
    lhs = y.states.copy()
    if L is not None:
        lhs += _causal_conv(st.S, _apply_operators(L, y.states))
    scale = max(1.0, float(np.max(np.abs(A_field.states))))
    return float(np.max(np.abs(lhs - A_field.states)) / scale)


def regularity_solve(spec: ProblemSpec, x_field: Trajectory, A_field: Trajectory,
                     noise: Optional[NoiseRealization] = None) -> Trajectory:
    """Solve y + int S Gamma1 y + int S Gamma2 y + int S Gamma3 y dw
    + int int S Gamma4 y lambda du ds = A by forward substitution.

    Under the left-endpoint rule the system is lower triangular in time with
    unit diagonal, so y_0 = A_0 and each later y_i needs only y_0..y_{i-1}.
    """
    grid = x_field.grid
    if A_field.grid != grid:
        raise ValueError("x_field and A_field must share a grid")
    noise = _check_noise(spec, grid, noise)
    st = _setup(spec, grid)
    L = _contractor_operators(spec, x_field, noise, st)
    A = A_field.states
    if L is None:
        return Trajectory(grid, A.copy())
    y = np.zeros_like(A)
    ly = np.zeros((grid.steps, spec.modes))
    y[0] = A[0]
    for i in range(1, grid.steps + 1):
        ly[i - 1] = L[i - 1] @ y[i - 1]
        y[i] = A[i] - np.sum(st.S[i:0:-1] * ly[:i], axis=0)
    out = Trajectory(grid, y)
    res = regularity_residual(spec, x_field, out, A_field, noise)
    if not res <= 1e-10:
        raise ArithmeticError(f"forward substitution residual {res:.3e} exceeds 1e-10")
    return out


def uniqueness_constants(spec: ProblemSpec) -> tuple:
    """(oplus1, oplus2) of the Gronwall argument, from the resolved constants.

    oplus1 collects the neutral and jump addends of the existence display,
    oplus2 the drift and diffusion addends.
    """
    from .stability import existence_criterion, resolve_constants
    items = existence_criterion(resolve_constants(spec)).items
    o1 = math.fsum([items["neutral_norm"], items["neutral_smoothing"], items["jump"]])
    o2 = math.fsum([items["drift"], items["diffusion"]])
    return o1, o2


def _moment_curve(x1, x2, p):
    if isinstance(x1, Trajectory):
        x1, x2 = [x1], [x2]
    if len(x1) != len(x2) or not x1:
        raise ValueError("need two nonempty ensembles of equal size")
    rows = [np.sum((b.states - a.states) ** 2, axis=1) ** (p / 2) for a, b in zip(x1, x2)]
    return np.mean(rows, axis=0)


def uniqueness_gap(spec: ProblemSpec, x1, x2, noise=None) -> float:
    """sup_t E||x2(t) - x1(t)||^p for two solutions driven by the same noise.

    ``x1`` and ``x2`` are trajectories or equally long lists of them (paired
    path by path).  ``noise`` is accepted for interface symmetry; the gap
    itself only needs the trajectories.

    Raises
    ------
    InapplicableCriterionError
        If oplus1 >= 1, where the Gronwall argument gives no bound.
    """
    o1, _ = uniqueness_constants(spec)
    if o1 >= 1:
        raise InapplicableCriterionError(f"oplus1 = {o1:.6g} >= 1; uniqueness bound inapplicable")
    return float(np.max(_moment_curve(x1, x2, spec.p)))


def gronwall_envelope(spec: ProblemSpec, x1, x2) -> tuple:
    """Gap curve E||x2 - x1||^p and the envelope (oplus2/(1-oplus1)) int_0^t gap.

    Returns ``(times, gap_curve, envelope)``.
    """
    o1, o2 = uniqueness_constants(spec)
    if o1 >= 1:
        raise InapplicableCriterionError(f"oplus1 = {o1:.6g} >= 1; uniqueness bound inapplicable")
    grid = (x1 if isinstance(x1, Trajectory) else x1[0]).grid
    gap = _moment_curve(x1, x2, spec.p)
    cum = np.concatenate([[0.0], np.cumsum(gap[:-1]) * grid.dt])
    return grid.times, gap, o2 / (1 - o1) * cum


# ---------------------------------------------------------------- ensembles

def solve_path(spec: ProblemSpec, grid: TimeGrid, seed: int, index: int,
               method: str = "picard", tol: float = 1e-10, max_iter: int = 50) -> PathResult:
    """Sample path ``index`` of the noise for ``seed`` and solve on ``grid``."""
    noise = sample_noise(spec.wiener, spec.jumps, grid, seed, index)
    if method == "picard":
        res = picard_solve(spec, noise, tol=tol, max_iter=max_iter)
        return PathResult(index, res.trajectory, res.iterations, res.residual_history)
    if method == "direct":
        return PathResult(index, direct_scheme(spec, noise), 0, [])
    raise ValueError(f"unknown method {method!r}")


def run_ensemble(spec: ProblemSpec, grid: TimeGrid, paths: int, seed: int,
                 method: str = "picard", tol: float = 1e-10, max_iter: int = 50,
                 workers: int = 1) -> list:
    """Solve ``paths`` independent paths; results are ordered by path index.

    Each path depends only on ``(seed, index)``, so the output is identical
    for any number of worker threads.
    """
    if paths < 1:
        raise ValueError("paths must be >= 1")

    def one(i):
        try:
            return solve_path(spec, grid, seed, i, method, tol, max_iter)
        except DivergenceError as exc:
            exc.path_index = i
            raise

    if workers <= 1:
        return [one(i) for i in range(paths)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(paths)))


# ----------------------------------------------------------------- export

def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Columns ``t, mode_1..mode_N``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"mode_{k}" for k in range(1, traj.modes + 1)])
        for t, row in zip(traj.times, traj.states):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])


def write_residual_csv(history: Sequence[float], path) -> None:
    """Columns ``iteration, residual``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "residual"])
        for i, r in enumerate(history, start=1):
            w.writerow([i, repr(float(r))])
