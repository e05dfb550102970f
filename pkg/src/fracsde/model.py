"""Problem description: coefficients, contractors, initial data, noise, constants.

States are coefficient vectors in the eigenbasis of the generator.  All
coefficient functions and contractors are small objects created from a
``{name, params}`` entry through :data:`REGISTRY`, which is what makes
problems serialisable to JSON.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError
from .grid import TimeGrid
from .noise import JumpSpec, QWienerSpec
from .spectral import QUOTED_INV_POWER_NORM, SpectralGenerator, frac_power_norm

__all__ = [
    "Trajectory",
    "HistorySegment",
    "history_lookup",
    "REGISTRY",
    "register",
    "build",
    "CoefficientSet",
    "ContractorSet",
    "StatedConstants",
    "ProblemSpec",
    "example_problem",
    "damped_problem",
    "problem_to_dict",
    "problem_from_dict",
    "load_problem",
    "save_problem",
]


# ---------------------------------------------------------------- trajectories

@dataclass(frozen=True)
class Trajectory:
    """Grid-sampled state, ``states[i]`` is the coefficient vector at ``t_i``."""

    grid: TimeGrid
    states: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.states, float)
        if s.ndim != 2 or s.shape[0] != self.grid.steps + 1:
            raise ValueError(f"states must have shape (steps+1, N), got {s.shape}")
        object.__setattr__(self, "states", s)

    @property
    def modes(self) -> int:
        return self.states.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def sup_norm(self, p: float = 2.0) -> float:
        """sup_t ||x(t)||^p with the spectral l2 norm."""
        return float(np.max(np.sum(self.states ** 2, axis=1) ** (p / 2)))

    def __sub__(self, other: "Trajectory") -> "Trajectory":
        return Trajectory(self.grid, self.states - other.states)

    def __add__(self, other: "Trajectory") -> "Trajectory":
        return Trajectory(self.grid, self.states + other.states)


def _interp_states(traj: Trajectory, s):
    """Linear interpolation of the trajectory at nonnegative times ``s``."""
    s = np.asarray(s, float)
    pos = s / traj.grid.dt
    j = np.clip(np.floor(pos).astype(int), 0, traj.grid.steps - 1)
    w = (pos - j)[..., None]
    return (1 - w) * traj.states[j] + w * traj.states[j + 1]


def history_lookup(traj: Trajectory, t: float, theta: float, phi: Callable,
                   delay: float) -> np.ndarray:
    """x_t(theta) = x(t + theta), read from ``phi`` before time 0."""
    if not -delay - 1e-12 <= theta <= 1e-12:
        raise ValueError(f"theta={theta} outside [-{delay}, 0]")
    s = t + theta
    if s < -1e-12 * traj.grid.dt:
        return np.asarray(phi(s), float)
    if s > traj.grid.horizon + 1e-12:
        raise ValueError(f"time {s} beyond the trajectory horizon")
    return _interp_states(traj, min(max(s, 0.0), traj.grid.horizon))


@dataclass(frozen=True)
class HistorySegment:
    """The window x_t = x(t + .) on [-delay, 0] of a trajectory."""

    traj: Trajectory
    t: float
    phi: Callable
    delay: float

    def __call__(self, theta: float = 0.0) -> np.ndarray:
        return history_lookup(self.traj, self.t, theta, self.phi, self.delay)

    @property
    def current(self) -> np.ndarray:
        return self(0.0)


def _lookup_grid(traj: Trajectory, lag: float, phi: Callable) -> np.ndarray:
    """x(t_i - lag) for every grid node (phi for negative times)."""
    s = traj.times - lag
    out = np.empty_like(traj.states)
    neg = s < -1e-12 * traj.grid.dt
    if np.any(~neg):
        out[~neg] = _interp_states(traj, np.clip(s[~neg], 0.0, None))
    for i in np.flatnonzero(neg):
        out[i] = phi(s[i])
    return out


# -------------------------------------------------------------------- registry

REGISTRY: dict = {k: {} for k in ("f", "g", "G", "sigma", "gamma12", "gamma3",
                                  "gamma4", "phi")}


def register(kind: str, name: str):
    def deco(cls):
        REGISTRY[kind][name] = cls
        cls.registry_name = name
        cls.kind = kind
        return cls
    return deco


def build(kind: str, entry, ctx: dict):
    """Instantiate a registered component from ``{"name": ..., "params": {...}}``."""
    if isinstance(entry, Component):
        return entry
    if isinstance(entry, str):
        entry = {"name": entry}
    try:
        cls = REGISTRY[kind][entry["name"]]
    except KeyError:
        raise ConfigError(f"unknown {kind} component {entry!r}; known: "
                          f"{sorted(REGISTRY.get(kind, {}))}") from None
    try:
        return cls(ctx, **dict(entry.get("params") or {}))
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {kind} {entry['name']!r}: {exc}") from None


class Component:
    registry_name = "?"
    kind = "?"

    def __init__(self, ctx, **params):
        self.params = params
        self.n = ctx["modes"]
        self.k = ctx.get("wiener_modes", 0)
        self.ctx = ctx

    def entry(self) -> dict:
        return {"name": self.registry_name, "params": dict(self.params)}

    def _key(self):
        return (self.kind, self.registry_name, self.n, self.k,
                json.dumps(self.params, sort_keys=True, default=repr))

    def __eq__(self, other):
        return isinstance(other, Component) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return f"{type(self).__name__}({self.params})"

    @property
    def is_zero(self) -> bool:
        return False

    def _profile(self, profile):
        if profile is None:
            v = np.zeros(self.n)
            v[0] = 1.0
            return v
        v = np.asarray(profile, float)
        if v.shape != (self.n,):
            raise ConfigError(f"profile must have length {self.n}")
        return v

    def _matrix(self, value):
        """Scalar -> multiple of I, vector -> diagonal, matrix as is."""
        v = np.asarray(value, float)
        if v.ndim == 0:
            return float(v) * np.eye(self.n)
        if v.ndim == 1:
            return np.diag(v)
        if v.shape != (self.n, self.n):
            raise ConfigError(f"matrix must be {self.n}x{self.n}")
        return v


class StateCoefficient(Component):
    """Coefficient of the form h(t, x_t); subclasses vectorise ``on_grid``."""

    def __call__(self, t: float, seg: HistorySegment) -> np.ndarray:
        raise NotImplementedError

    def on_grid(self, traj: Trajectory, phi: Callable, delay: float) -> np.ndarray:
        return np.stack([self(t, HistorySegment(traj, t, phi, delay))
                         for t in traj.times])


def _norms(x):
    return np.sqrt(np.sum(np.asarray(x) ** 2, axis=-1))


@register("f", "zero")
@register("g", "zero")
class ZeroState(StateCoefficient):
    @property
    def is_zero(self):
        return True

    def __call__(self, t, seg):
        return np.zeros(self.n)

    def on_grid(self, traj, phi, delay):
        return np.zeros_like(traj.states)


@register("f", "linear")
class LinearDrift(StateCoefficient):
    """f(t, x_t) = L x(t)."""

    def __init__(self, ctx, gain=0.0):
        super().__init__(ctx, gain=gain)
        self.L = self._matrix(gain)

    def __call__(self, t, seg):
        return self.L @ seg.current

    def on_grid(self, traj, phi, delay):
        return traj.states @ self.L.T


@register("f", "linear_delay")
class DelayedLinearDrift(StateCoefficient):
    """f(t, x_t) = L x(t - lag), lag defaults to the problem delay."""

    def __init__(self, ctx, gain=0.0, lag=None):
        super().__init__(ctx, gain=gain, lag=lag)
        self.L = self._matrix(gain)
        self.lag = ctx.get("delay", 0.0) if lag is None else float(lag)
        if self.lag > ctx.get("delay", 0.0) + 1e-12:
            raise ConfigError("lag exceeds the history window")

    def __call__(self, t, seg):
        return self.L @ seg(-self.lag)

    def on_grid(self, traj, phi, delay):
        return _lookup_grid(traj, self.lag, phi) @ self.L.T


@register("f", "saturating")
class SaturatingDrift(StateCoefficient):
    """f(t, x_t) = scale e^{rate t} ||x(t)|| / (c + ||x(t)||) * profile."""

    def __init__(self, ctx, c=49.0, rate=0.0, scale=1.0, profile=None):
        super().__init__(ctx, c=c, rate=rate, scale=scale, profile=profile)
        self.c, self.rate, self.scale = float(c), float(rate), float(scale)
        self.profile = self._profile(profile)

    def _value(self, t, x):
        r = _norms(x)
        return (self.scale * np.exp(self.rate * np.asarray(t)) * r / (self.c + r))[..., None] \
            * self.profile

    def __call__(self, t, seg):
        return self._value(t, seg.current)

    def on_grid(self, traj, phi, delay):
        return self._value(traj.times, traj.states)


@register("f", "saturating_memory")
class SaturatingMemoryDrift(StateCoefficient):
    """f(t, x_t) = scale int_0^t e^{rate (t-s)} ||x(s)|| / (c + ||x(s)||) ds * profile.

    The memory integral uses the left-endpoint rule on the trajectory grid.
    """

    def __init__(self, ctx, c=49.0, rate=0.5, scale=1.0, profile=None):
        super().__init__(ctx, c=c, rate=rate, scale=scale, profile=profile)
        self.c, self.rate, self.scale = float(c), float(rate), float(scale)
        self.profile = self._profile(profile)

    def _memory(self, times, norms, dt):
        # m_i = sum_{j<i} e^{rate (t_i - t_j)} h_j dt
        h = norms / (self.c + norms)
        w = np.exp(-self.rate * times) * h * dt
        cum = np.concatenate([[0.0], np.cumsum(w[:-1])])
        return self.scale * np.exp(self.rate * times) * cum

    def __call__(self, t, seg):
        traj = seg.traj
        i = int(round(t / traj.grid.dt))
        m = self._memory(traj.times[:i + 1], _norms(traj.states[:i + 1]), traj.grid.dt)
        return m[-1] * self.profile

    def on_grid(self, traj, phi, delay):
        m = self._memory(traj.times, _norms(traj.states), traj.grid.dt)
        return m[:, None] * self.profile


@register("g", "neutral_exp")
class ExponentialNeutral(StateCoefficient):
    """g(t, x_t) = amp e^{-rate t} * (x(t) if state_dependent else profile).

    With ``divide_by_inv_power_norm`` the amplitude is divided by the
    resolved value of ||(-A)^(-gamma)||.
    """

    def __init__(self, ctx, amplitude=1.0, rate=2.0, divide_by_inv_power_norm=False,
                 state_dependent=False, profile=None):
        super().__init__(ctx, amplitude=amplitude, rate=rate,
                         divide_by_inv_power_norm=divide_by_inv_power_norm,
                         state_dependent=state_dependent, profile=profile)
        self.amp = float(amplitude)
        if divide_by_inv_power_norm:
            self.amp /= ctx["inv_power_norm"]
        self.rate = float(rate)
        self.state_dependent = bool(state_dependent)
        self.profile = self._profile(profile)

    def __call__(self, t, seg):
        w = self.amp * math.exp(-self.rate * t)
        return w * (seg.current if self.state_dependent else self.profile)

    def on_grid(self, traj, phi, delay):
        w = self.amp * np.exp(-self.rate * traj.times)[:, None]
        return w * (traj.states if self.state_dependent else self.profile)


class DiffusionCoefficient(StateCoefficient):
    """G(t, x_t) as an (N, K) matrix mapping Wiener modes to state modes."""

    def _pi(self):
        P = np.zeros((self.n, self.k))
        m = min(self.n, self.k)
        P[np.arange(m), np.arange(m)] = 1.0
        return P

    def on_grid(self, traj, phi, delay):
        if self.k == 0:
            return np.zeros(traj.states.shape + (0,))
        return super().on_grid(traj, phi, delay)


@register("G", "zero")
class ZeroDiffusion(DiffusionCoefficient):
    @property
    def is_zero(self):
        return True

    def __call__(self, t, seg):
        return np.zeros((self.n, self.k))

    def on_grid(self, traj, phi, delay):
        return np.zeros(traj.states.shape + (self.k,))


@register("G", "additive")
class AdditiveDiffusion(DiffusionCoefficient):
    """G(t) = scale e^{rate t} Pi, Pi the identity between leading modes."""

    def __init__(self, ctx, scale=1.0, rate=0.0):
        super().__init__(ctx, scale=scale, rate=rate)
        self.scale, self.rate = float(scale), float(rate)
        self.P = self._pi()

    def __call__(self, t, seg):
        return self.scale * math.exp(self.rate * t) * self.P

    def on_grid(self, traj, phi, delay):
        w = self.scale * np.exp(self.rate * traj.times)
        return w[:, None, None] * self.P


@register("G", "saturating_diffusion")
class SaturatingDiffusion(DiffusionCoefficient):
    """G(t, x_t) = scale e^{rate t} / (c + ||x(t)||) Pi."""

    def __init__(self, ctx, c=25.0, rate=1.0, scale=1.0):
        super().__init__(ctx, c=c, rate=rate, scale=scale)
        self.c, self.rate, self.scale = float(c), float(rate), float(scale)
        self.P = self._pi()

    def __call__(self, t, seg):
        return self.scale * math.exp(self.rate * t) / (self.c + _norms(seg.current)) * self.P

    def on_grid(self, traj, phi, delay):
        w = self.scale * np.exp(self.rate * traj.times) / (self.c + _norms(traj.states))
        return w[:, None, None] * self.P


@register("G", "linear_diffusion")
class LinearDiffusion(DiffusionCoefficient):
    """G(t, x_t) = gain * x(t) (x) e_1: multiplicative noise on the first Wiener mode."""

    def __init__(self, ctx, gain=0.0):
        super().__init__(ctx, gain=gain)
        self.gain = float(gain)

    def __call__(self, t, seg):
        out = np.zeros((self.n, self.k))
        if self.k:
            out[:, 0] = self.gain * seg.current
        return out

    def on_grid(self, traj, phi, delay):
        out = np.zeros(traj.states.shape + (self.k,))
        if self.k:
            out[:, :, 0] = self.gain * traj.states
        return out


class JumpCoefficient(Component):
    """sigma(t, x_t, u); ``u`` may be an array, the result has shape u.shape + (N,)."""

    def __call__(self, t, seg, u):
        raise NotImplementedError

    def on_grid(self, traj, phi, delay, marks) -> np.ndarray:
        """Values at every node and mark, shape (steps+1, len(marks), N)."""
        return np.stack([self(t, HistorySegment(traj, t, phi, delay), np.asarray(marks))
                         for t in traj.times])


@register("sigma", "zero")
class ZeroJump(JumpCoefficient):
    @property
    def is_zero(self):
        return True

    def __call__(self, t, seg, u):
        return np.zeros(np.shape(u) + (self.n,))

    def on_grid(self, traj, phi, delay, marks):
        return np.zeros((traj.grid.steps + 1, len(marks), self.n))


@register("sigma", "exp_decay")
class ExpDecayJump(JumpCoefficient):
    """sigma(t, x_t, u) = scale e^{-rate t} u^mark_power * profile."""

    def __init__(self, ctx, scale=1.0, rate=6.0, mark_power=1.0, profile=None):
        super().__init__(ctx, scale=scale, rate=rate, mark_power=mark_power, profile=profile)
        self.scale, self.rate, self.mp = float(scale), float(rate), float(mark_power)
        self.profile = self._profile(profile)

    def __call__(self, t, seg, u):
        w = self.scale * math.exp(-self.rate * t) * np.asarray(u, float) ** self.mp
        return w[..., None] * self.profile

    def on_grid(self, traj, phi, delay, marks):
        w = self.scale * np.exp(-self.rate * traj.times)[:, None] \
            * np.asarray(marks, float)[None, :] ** self.mp
        return w[..., None] * self.profile


@register("sigma", "linear_jump")
class LinearJump(JumpCoefficient):
    """sigma(t, x_t, u) = gain * u * x(t)."""

    def __init__(self, ctx, gain=0.0):
        super().__init__(ctx, gain=gain)
        self.gain = float(gain)

    def __call__(self, t, seg, u):
        return self.gain * np.asarray(u, float)[..., None] * seg.current

    def on_grid(self, traj, phi, delay, marks):
        return self.gain * np.asarray(marks, float)[None, :, None] * traj.states[:, None, :]


# contractors: Gamma1/Gamma2 -> (N, N); Gamma3 -> (N, K, N); Gamma4 -> (N, N) per mark

@register("gamma12", "zero")
@register("gamma3", "zero")
@register("gamma4", "zero")
class ZeroContractor(Component):
    @property
    def is_zero(self):
        return True


@register("gamma12", "constant")
class ConstantContractor(Component):
    """Gamma(t, x) = value (scalar -> value I, vector -> diag, or a full matrix)."""

    def __init__(self, ctx, value=0.0):
        super().__init__(ctx, value=value)
        self.M = self._matrix(value)

    def __call__(self, t, x):
        return self.M

    def on_grid(self, times, states):
        return np.broadcast_to(self.M, (len(times), self.n, self.n))


@register("gamma12", "state_scaled")
class StateScaledContractor(Component):
    """Gamma(t, x) = value / (1 + ||x||) I, bounded by |value|."""

    def __init__(self, ctx, value=0.0):
        super().__init__(ctx, value=value)
        self.v = float(value)

    def __call__(self, t, x):
        return self.v / (1.0 + _norms(x)) * np.eye(self.n)

    def on_grid(self, times, states):
        w = self.v / (1.0 + _norms(states))
        return w[:, None, None] * np.eye(self.n)


@register("gamma3", "constant")
class ConstantNoiseContractor(Component):
    """Gamma3(t, x) y = value * y (x) e_1 (drives the first Wiener mode)."""

    def __init__(self, ctx, value=0.0):
        super().__init__(ctx, value=value)
        self.T = np.zeros((self.n, self.k, self.n))
        if self.k:
            self.T[np.arange(self.n), 0, np.arange(self.n)] = float(value)

    def __call__(self, t, x):
        return self.T

    def on_grid(self, times, states):
        return np.broadcast_to(self.T, (len(times),) + self.T.shape)


@register("gamma4", "constant")
class ConstantJumpContractor(Component):
    """Gamma4(t, x, u) = value * u^mark_power * I."""

    def __init__(self, ctx, value=0.0, mark_power=0.0):
        super().__init__(ctx, value=value, mark_power=mark_power)
        self.v, self.mp = float(value), float(mark_power)

    def __call__(self, t, x, u):
        return self.v * float(u) ** self.mp * np.eye(self.n)

    def mark_weight(self, marks):
        return self.v * np.asarray(marks, float) ** self.mp

    def on_grid(self, times, states, marks):
        w = self.mark_weight(marks)
        return np.broadcast_to(w[None, :, None, None] * np.eye(self.n),
                               (len(times), len(marks), self.n, self.n))


class InitialHistory(Component):
    def __call__(self, s: float) -> np.ndarray:
        raise NotImplementedError


@register("phi", "zero")
class ZeroHistory(InitialHistory):
    def __call__(self, s):
        return np.zeros(self.n)


@register("phi", "constant")
class ConstantHistory(InitialHistory):
    def __init__(self, ctx, values=None):
        super().__init__(ctx, values=values)
        self.v = self._profile(values)

    def __call__(self, s):
        return self.v.copy()


@register("phi", "exponential")
class ExponentialHistory(InitialHistory):
    """phi(s) = values * e^{rate s} for s <= 0."""

    def __init__(self, ctx, values=None, rate=1.0):
        super().__init__(ctx, values=values, rate=rate)
        self.v = self._profile(values)
        self.rate = float(rate)

    def __call__(self, s):
        return self.v * math.exp(self.rate * s)


# -------------------------------------------------------------------- problem

@dataclass(frozen=True)
class CoefficientSet:
    g: object
    f: object
    G: object
    sigma: object
    a_hat: tuple = (0.0, 0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        a = tuple(float(v) for v in self.a_hat)
        if len(a) != 5 or any(v < 0 for v in a):
            raise ConfigError("a_hat must be five nonnegative constants")
        object.__setattr__(self, "a_hat", a)


@dataclass(frozen=True)
class ContractorSet:
    gamma1: object
    gamma2: object
    gamma3: object
    gamma4: object
    c: tuple = (0.0, 0.0, 0.0, 0.0, 0.0)   # c1, c2, c3, c4, c4_hat

    def __post_init__(self):
        c = tuple(float(v) for v in self.c)
        if len(c) != 5 or any(v < 0 for v in c):
            raise ConfigError("contractor bounds c must be five nonnegative constants")
        object.__setattr__(self, "c", c)

    @property
    def all_zero(self) -> bool:
        return all(g.is_zero for g in (self.gamma1, self.gamma2, self.gamma3, self.gamma4))


@dataclass(frozen=True)
class StatedConstants:
    """Constants for the closed-form criteria as supplied with the problem.

    ``inv_power_norm`` is ``"diagonal"`` (computed from the spectrum),
    ``"quoted"`` (the quoted 1/pi^{3/2}) or an explicit number.  Fields left
    as ``None`` are estimated from the generator when a report needs them.
    """

    t_eval: float = 0.5
    M: Optional[float] = None
    M_c: Optional[float] = None
    c_mu: Optional[float] = None
    mu_smoothing: float = 0.3
    D1: Optional[float] = None
    a1: Optional[float] = None
    D2: Optional[float] = None
    a2: Optional[float] = None
    C_p: Optional[float] = None
    k_p: float = 1.0
    inv_power_norm: object = "diagonal"
    p2_convention: bool = True


@dataclass(frozen=True)
class ProblemSpec:
    alpha: float
    p: float
    horizon: float
    delay: float
    gamma: float
    generator: SpectralGenerator
    coefficients: CoefficientSet
    contractors: ContractorSet
    wiener: QWienerSpec
    jumps: JumpSpec
    phi: object
    eta: tuple
    constants: StatedConstants = field(default_factory=StatedConstants)
    gamma4_measure: str = "intensity"
    quad_nodes: int = 16
    name: str = "problem"

    def __post_init__(self):
        if not 1 < self.alpha < 2:
            raise ConfigError(f"alpha must lie in (1, 2), got {self.alpha}")
        if not self.p >= 2:
            raise ConfigError(f"moment order p must be >= 2, got {self.p}")
        if not self.horizon > 0:
            raise ConfigError("horizon must be positive")
        if not self.delay >= 0:
            raise ConfigError("delay must be nonnegative")
        if not 0 < self.gamma < 1:
            raise ConfigError("gamma must lie in (0, 1)")
        if self.gamma4_measure not in ("intensity", "compensated"):
            raise ConfigError("gamma4_measure must be 'intensity' or 'compensated'")
        eta = tuple(float(v) for v in self.eta)
        if len(eta) != self.generator.size:
            raise ConfigError(f"eta must have {self.generator.size} entries")
        object.__setattr__(self, "eta", eta)

    @property
    def modes(self) -> int:
        return self.generator.size

    @property
    def a_hat(self) -> tuple:
        return self.coefficients.a_hat

    def inv_power_norm(self) -> tuple:
        """Resolved ||(-A)^(-gamma)|| and a label saying where it came from."""
        return _resolve_inv_norm(self.constants.inv_power_norm, self.generator, self.gamma)

    def phi0(self) -> np.ndarray:
        return np.asarray(self.phi(0.0), float)

    def grid(self, dt: float) -> TimeGrid:
        return TimeGrid.from_horizon(self.horizon, dt)


def _resolve_inv_norm(setting, gen, gamma):
    if setting == "diagonal":
        return frac_power_norm(gen, gamma), "diagonal (sup_n |lambda_n|^-gamma)"
    if setting == "quoted":
        return QUOTED_INV_POWER_NORM, "override 1/pi^(3/2)"
    try:
        v = float(setting)
    except (TypeError, ValueError):
        raise ConfigError(f"inv_power_norm must be 'diagonal', 'quoted' or a number, "
                          f"got {setting!r}") from None
    if not v > 0:
        raise ConfigError("inv_power_norm must be positive")
    return v, "user supplied"


# ---------------------------------------------------------------- (de)serialise

def _generator_from(d):
    if "eigenvalues" in d:
        return SpectralGenerator(tuple(d["eigenvalues"]), d.get("mode_labels"))
    if d.get("kind") == "laplacian":
        return SpectralGenerator.laplacian(int(d["modes"]))
    raise ConfigError("generator needs 'eigenvalues' or kind='laplacian'")


def _generator_to(gen: SpectralGenerator):
    lap = SpectralGenerator.laplacian(gen.size)
    if gen == lap:
        return {"kind": "laplacian", "modes": gen.size}
    out = {"eigenvalues": list(gen.eigenvalues)}
    if gen.mode_labels:
        out["mode_labels"] = list(gen.mode_labels)
    return out


def _jumps_from(d):
    return JumpSpec(tuple(d.get("mark_space", (0.0, 1.0))), float(d.get("total_rate", 0.0)),
                    d.get("kind", "uniform"), d.get("atom"))


def _jumps_to(j: JumpSpec):
    if j.kind == "density":
        raise ConfigError("density-defined jump intensities cannot be serialised")
    return {"mark_space": list(j.mark_space), "total_rate": j.total_rate,
            "kind": j.kind, "atom": j.atom}


_REQUIRED = ("alpha", "p", "horizon", "generator")


def problem_from_dict(d: dict) -> ProblemSpec:
    """Build a problem from the JSON layout described in the README (problem file section)."""
    for key in _REQUIRED:
        if key not in d:
            raise ConfigError(f"missing required field {key!r}")
    gen = _generator_from(d["generator"])
    gamma = float(d.get("gamma", 0.5))
    const_d = dict(d.get("constants") or {})
    unknown = set(const_d) - set(StatedConstants.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown constants {sorted(unknown)}")
    constants = StatedConstants(**const_d)
    wiener = QWienerSpec(tuple(d.get("wiener", {}).get("q_eigenvalues", ())))
    ctx = {"modes": gen.size, "wiener_modes": wiener.modes, "delay": float(d.get("delay", 0.0)),
           "inv_power_norm": _resolve_inv_norm(constants.inv_power_norm, gen, gamma)[0]}
    coef = d.get("coefficients") or {}
    cset = CoefficientSet(
        g=build("g", coef.get("g", "zero"), ctx),
        f=build("f", coef.get("f", "zero"), ctx),
        G=build("G", coef.get("G", "zero"), ctx),
        sigma=build("sigma", coef.get("sigma", "zero"), ctx),
        a_hat=tuple(coef.get("a_hat", (0.0,) * 5)),
    )
    con = d.get("contractors") or {}
    kset = ContractorSet(
        gamma1=build("gamma12", con.get("gamma1", "zero"), ctx),
        gamma2=build("gamma12", con.get("gamma2", "zero"), ctx),
        gamma3=build("gamma3", con.get("gamma3", "zero"), ctx),
        gamma4=build("gamma4", con.get("gamma4", "zero"), ctx),
        c=tuple(con.get("c", (0.0,) * 5)),
    )
    return ProblemSpec(
        alpha=float(d["alpha"]), p=float(d["p"]), horizon=float(d["horizon"]),
        delay=float(d.get("delay", 0.0)), gamma=gamma, generator=gen,
        coefficients=cset, contractors=kset, wiener=wiener,
        jumps=_jumps_from(d.get("jumps") or {}),
        phi=build("phi", d.get("phi", "zero"), ctx),
        eta=tuple(d.get("eta", (0.0,) * gen.size)),
        constants=constants,
        gamma4_measure=d.get("gamma4_measure", "intensity"),
        quad_nodes=int(d.get("quad_nodes", 16)),
        name=d.get("name", "problem"),
    )


def problem_to_dict(spec: ProblemSpec) -> dict:
    c = spec.coefficients
    k = spec.contractors
    return {
        "name": spec.name,
        "alpha": spec.alpha, "p": spec.p, "horizon": spec.horizon,
        "delay": spec.delay, "gamma": spec.gamma,
        "generator": _generator_to(spec.generator),
        "coefficients": {"g": c.g.entry(), "f": c.f.entry(), "G": c.G.entry(),
                         "sigma": c.sigma.entry(), "a_hat": list(c.a_hat)},
        "contractors": {"gamma1": k.gamma1.entry(), "gamma2": k.gamma2.entry(),
                        "gamma3": k.gamma3.entry(), "gamma4": k.gamma4.entry(),
                        "c": list(k.c)},
        "wiener": {"q_eigenvalues": list(spec.wiener.q_eigenvalues)},
        "jumps": _jumps_to(spec.jumps),
        "phi": spec.phi.entry(),
        "eta": list(spec.eta),
        "constants": dict(spec.constants.__dict__),
        "gamma4_measure": spec.gamma4_measure,
        "quad_nodes": spec.quad_nodes,
    }


def load_problem(path) -> ProblemSpec:
    with open(path) as fh:
        text = fh.read()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: "
                          f"{exc.msg}") from None
    return problem_from_dict(d)


def save_problem(spec: ProblemSpec, path) -> None:
    with open(path, "w") as fh:
        json.dump(problem_to_dict(spec), fh, indent=2, sort_keys=True)
        fh.write("\n")


# --------------------------------------------------------------------- presets

def example_dict(modes: int = 8) -> dict:
    """JSON form of the built-in Laplacian example (alpha = 5/3, p = 2)."""
    return {
        "name": "laplacian-example",
        "alpha": 5.0 / 3.0, "p": 2, "horizon": 1.0, "delay": 0.0, "gamma": 0.5,
        "generator": {"kind": "laplacian", "modes": modes},
        "coefficients": {
            "g": {"name": "neutral_exp",
                  "params": {"amplitude": 1.0, "rate": 2.0, "divide_by_inv_power_norm": True,
                             "state_dependent": False}},
            "f": {"name": "saturating_memory", "params": {"c": 49.0, "rate": 0.5}},
            "G": {"name": "saturating_diffusion", "params": {"c": 25.0, "rate": 1.0}},
            "sigma": {"name": "exp_decay", "params": {"rate": 6.0, "mark_power": 1.0}},
            "a_hat": [1 / 3, 1 / 3, 1 / 3, 1 / 3, 0.02],
        },
        "contractors": {"gamma1": "zero", "gamma2": "zero", "gamma3": "zero",
                        "gamma4": "zero", "c": [0, 0, 0, 0, 0]},
        "wiener": {"q_eigenvalues": [1.0 / k ** 2 for k in range(1, modes + 1)]},
        "jumps": {"mark_space": [0.0, 1.0], "total_rate": 1.0, "kind": "uniform"},
        "phi": {"name": "constant", "params": {"values": None}},
        "eta": [0.0] * modes,
        "constants": {"t_eval": 0.5, "M": 0.002, "c_mu": 1.0, "mu_smoothing": 0.3,
                      "D1": 1.0, "a1": 1.0, "D2": 0.002, "a2": 1.0, "C_p": 1.0, "k_p": 1.0,
                      "inv_power_norm": "quoted", "p2_convention": True},
    }


def example_problem(modes: int = 8) -> ProblemSpec:
    """The Dirichlet-Laplacian example with the quoted parameter set.

    alpha = 5/3, p = 2, evaluation time 1/2, M = 0.002, C_p = 1, k(p) = 1,
    a_hat_1..4 = 1/3, a_hat_5 = 0.02, all contractors zero, and
    ||(-A)^(-gamma)|| taken as the quoted 1/pi^{3/2}.
    """
    return problem_from_dict(example_dict(modes))


def damped_dict(modes: int = 4) -> dict:
    """A decaying variant used to exercise the moment-decay pipeline.

    Spectrum lambda_k = -(k+1)^2 (the Dirichlet Laplacian without its
    lowest mode), linear drift, multiplicative Wiener and jump noise and a
    small state-dependent neutral term.  The a_hat constants are the exact
    Lipschitz constants of these coefficients.
    """
    lam_max = float((modes + 1) ** 2)
    return {
        "name": "damped",
        "alpha": 1.5, "p": 2, "horizon": 3.0, "delay": 0.0, "gamma": 0.5,
        "generator": {"eigenvalues": [-float((k + 1) ** 2) for k in range(1, modes + 1)]},
        "coefficients": {
            "g": {"name": "neutral_exp",
                  "params": {"amplitude": 0.02, "rate": 1.0, "state_dependent": True}},
            "f": {"name": "linear", "params": {"gain": -0.2}},
            "G": {"name": "linear_diffusion", "params": {"gain": 0.1}},
            "sigma": {"name": "linear_jump", "params": {"gain": 0.1}},
            # |A^g g'|^2 = 0.02^2 lam_max, L^2, q_1 0.1^2, 0.1^2 E u^2; the last one is
            # (0.1^4 E u^4)^(1/2) = 0.0045 times room for (E|y|^4)^(1/2) / E|y|^2 > 1
            "a_hat": [0.0004 * lam_max, 0.04, 0.01, 0.01 / 3, 0.01],
        },
        "contractors": {"gamma1": "zero", "gamma2": "zero", "gamma3": "zero",
                        "gamma4": "zero", "c": [0, 0, 0, 0, 0]},
        "wiener": {"q_eigenvalues": [1.0 / k ** 2 for k in range(1, modes + 1)]},
        "jumps": {"mark_space": [0.0, 1.0], "total_rate": 1.0, "kind": "uniform"},
        "phi": {"name": "constant", "params": {"values": [1.0] + [0.5] * (modes - 1)}},
        "eta": [0.0] * modes,
        "constants": {"t_eval": 0.5, "mu_smoothing": 0.3, "k_p": 1.0,
                      "inv_power_norm": "diagonal", "p2_convention": True},
    }


def damped_problem(modes: int = 4) -> ProblemSpec:
    return problem_from_dict(damped_dict(modes))
