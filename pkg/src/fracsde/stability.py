"""Closed-form existence and stability criteria, the decay-root machinery of
the impulsive integral inequality, and Monte Carlo moment-decay estimation.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import optimize, stats

from .errors import (DegenerateDenominatorError, FitDomainError, NoRootError,
                     SingularExponentError)
from .model import ProblemSpec, Trajectory
from .spectral import (FamilyBounds, estimate_exponential_bounds, estimate_family_bounds,
                       estimate_smoothing_constant)

__all__ = [
    "CriterionConstants",
    "CriterionResult",
    "InequalityParams",
    "DecayFit",
    "MomentCurve",
    "MCConfig",
    "StabilityReport",
    "REFERENCE_THETAS",
    "burkholder_constant",
    "resolve_constants",
    "existence_criterion",
    "stability_criterion",
    "reference_deviation",
    "criteria_report",
    "decay_root",
    "n_epsilon",
    "estimate_moment",
    "fit_decay",
    "verify_stability",
    "write_moment_csv",
    "write_json",
]

#: Criterion values quoted for the built-in Laplacian example.
REFERENCE_THETAS = {"laplacian-example": {"existence": 0.007436, "stability": 0.00874}}


def burkholder_constant(p: float) -> float:
    """(p (p - 1) / 2)^(p / 2), the moment constant for stochastic integrals."""
    if not p >= 2:
        raise ValueError(f"Burkholder constant needs p >= 2, got {p}")
    return (p * (p - 1) / 2) ** (p / 2)


# --------------------------------------------------------------- constants

@dataclass(frozen=True)
class CriterionConstants:
    """Every constant entering the two closed-form criteria.

    ``provenance`` maps each constant to where its value came from
    (stated, fitted on a grid, Burkholder formula, quoted override, ...).
    """

    p: float
    alpha: float
    t_eval: float
    a_hat: tuple
    bounds: FamilyBounds
    C_p: float
    k_p: float = 1.0
    p2_convention: bool = True
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.p >= 2:
            raise ValueError("p must be >= 2")
        if not self.t_eval > 0:
            raise ValueError("t_eval must be positive")
        a = tuple(float(v) for v in self.a_hat)
        if len(a) != 5 or any(v < 0 for v in a):
            raise ValueError("a_hat must be five nonnegative numbers")
        object.__setattr__(self, "a_hat", a)
        if self.C_p < 0 or self.k_p < 0:
            raise ValueError("C_p and k_p must be nonnegative")
        b = self.bounds
        for name in ("M", "c_mu", "mu_smoothing", "inv_power_norm"):
            if getattr(b, name) is None:
                raise ValueError(f"bounds.{name} is required")

    def to_dict(self) -> dict:
        d = {"p": self.p, "alpha": self.alpha, "t_eval": self.t_eval,
             "a_hat": list(self.a_hat), "C_p": self.C_p, "k_p": self.k_p,
             "p2_convention": self.p2_convention,
             "bounds": {k: v for k, v in self.bounds.to_dict().items() if k != "sources"},
             "provenance": dict(self.provenance)}
        return d


def _envelope_holds(gen, alpha, horizon, D1, a1, D2, a2, grid_density=400):
    t = np.linspace(0.0, horizon, max(2, int(math.ceil(grid_density * horizon))) + 1)
    c = np.max(np.abs(gen.cosine(alpha, t)), axis=1)
    s = np.max(np.abs(gen.sine(alpha, t)), axis=1)
    tol = 1e-12
    return (bool(np.all(c <= D1 * np.exp(-a1 * t) * (1 + tol) + tol)),
            bool(np.all(s <= D2 * np.exp(-a2 * t) * (1 + tol) + tol)))


def resolve_constants(spec: ProblemSpec, grid_density: float = 400.0) -> CriterionConstants:
    """Stated constants of ``spec`` completed by grid estimates where missing."""
    sc = spec.constants
    gen, alpha, T = spec.generator, spec.alpha, spec.horizon
    prov = {}
    inv, inv_label = spec.inv_power_norm()
    prov["inv_power_norm"] = inv_label

    fam = None
    vals = {}
    for name in ("M", "M_c"):
        v = getattr(sc, name)
        if v is None:
            fam = fam or estimate_family_bounds(gen, alpha, T, grid_density)
            v = getattr(fam, name)
            prov[name] = f"fitted on [0, {T}]"
        else:
            prov[name] = "stated"
        vals[name] = float(v)
    if sc.c_mu is None:
        vals["c_mu"] = estimate_smoothing_constant(gen, alpha, spec.gamma, sc.mu_smoothing,
                                                   T, grid_density).c_mu
        prov["c_mu"] = f"fitted on (0, {T}] with mu={sc.mu_smoothing}"
    else:
        vals["c_mu"] = float(sc.c_mu)
        prov["c_mu"] = "stated"
    exp_names = ("D1", "a1", "D2", "a2")
    fitted = None
    for name in exp_names:
        v = getattr(sc, name)
        if v is None:
            fitted = fitted or estimate_exponential_bounds(gen, alpha, T, grid_density)
            v = getattr(fitted, name)
            prov[name] = f"fitted on [0, {T}]"
        else:
            prov[name] = "stated"
        vals[name] = float(v)
    c_ok, s_ok = _envelope_holds(gen, alpha, T, vals["D1"], vals["a1"], vals["D2"], vals["a2"])
    problems = []
    if not (vals["a1"] > 0 and vals["a2"] > 0):
        problems.append("a zero decay rate (no uniform exponential decay)")
    if vals["D1"] < 1 or vals["D2"] < 1:
        problems.append("D1 or D2 below 1")
    if not c_ok:
        problems.append("D1 exp(-a1 t) does not bound the cosine family on the grid")
    if not s_ok:
        problems.append("D2 exp(-a2 t) does not bound the sine family on the grid")
    h2_ok = not problems
    h2_report = ("H2 satisfied on [0, %g]" % T) if h2_ok else \
        "H2 not satisfied (" + "; ".join(problems) + ")"
    if sc.C_p is None:
        C_p = burkholder_constant(spec.p)
        prov["C_p"] = "Burkholder formula (p(p-1)/2)^(p/2)"
    else:
        C_p = float(sc.C_p)
        prov["C_p"] = "stated"
    prov["k_p"] = "stated (configurable; no closed form)"
    bounds = FamilyBounds(M_c=max(1.0, vals["M_c"]), M=vals["M"], c_mu=vals["c_mu"],
                          mu_smoothing=sc.mu_smoothing, gamma=spec.gamma, inv_power_norm=inv,
                          D1=vals["D1"], a1=vals["a1"], D2=vals["D2"], a2=vals["a2"],
                          h2_satisfied=h2_ok, h2_report=h2_report,
                          sources={k: prov[k] for k in ("M", "M_c", "c_mu") + exp_names})
    return CriterionConstants(p=spec.p, alpha=alpha, t_eval=sc.t_eval, a_hat=spec.a_hat,
                              bounds=bounds, C_p=C_p, k_p=sc.k_p,
                              p2_convention=sc.p2_convention, provenance=prov)


# ---------------------------------------------------------------- criteria

@dataclass(frozen=True)
class CriterionResult:
    name: str
    theta: float
    passed: bool
    items: dict
    notes: tuple = ()

    def to_dict(self) -> dict:
        return {"name": self.name, "theta": self.theta, "pass": self.passed,
                "items": dict(self.items), "notes": list(self.notes)}


def _result(name, items, notes):
    theta = math.fsum(items.values())
    return CriterionResult(name, theta, bool(theta < 1), items, tuple(notes))


def _neutral_items(c: CriterionConstants):
    p, b = c.p, c.bounds
    a1 = c.a_hat[0]
    w = 5 ** (p - 1)
    pam = p * c.alpha * b.mu_smoothing
    return {
        "neutral_norm": w * b.inv_power_norm ** p * a1 ** p,
        "neutral_smoothing": w * c.alpha ** p * b.c_mu ** p * a1 ** p
        * (c.t_eval ** pam / pam) ** p,
    }


def existence_criterion(c: CriterionConstants) -> CriterionResult:
    """theta = 5^{p-1} { ||A^-g||^p a1^p + alpha^p c_mu^p a1^p [t^{p a mu}/(p a mu)]^p
    + k M^p [(t^3/3)^{p/2} a4^p + (t^{2p+1}/(2p+1))^{1/2} a5^p]
    + M^p t^{p-1} a2^p + C_p M^p t^{p/2-1} a3^p }, passing when theta < 1.

    ``items`` holds the five addends (each including the 5^{p-1} factor);
    ``theta`` is their exactly rounded sum.
    """
    p, t, M = c.p, c.t_eval, c.bounds.M
    _, a2, a3, a4, a5 = c.a_hat
    w = 5 ** (p - 1)
    items = _neutral_items(c)
    items["jump"] = w * c.k_p * M ** p * ((t ** 3 / 3) ** (p / 2) * a4 ** p
                                          + (t ** (2 * p + 1) / (2 * p + 1)) ** 0.5 * a5 ** p)
    items["drift"] = w * M ** p * t ** (p - 1) * a2 ** p
    items["diffusion"] = w * c.C_p * M ** p * t ** (p / 2 - 1) * a3 ** p
    notes = [f"||A^-gamma|| = {c.bounds.inv_power_norm:.12g} "
             f"({c.provenance.get('inv_power_norm', 'given')})",
             f"k(p) = {c.k_p:g}, C_p = {c.C_p:g}, evaluation time {t:g}"]
    return _result("existence", items, notes)


def _singular_factor(c: CriterionConstants):
    p, a2 = c.p, c.bounds.a2
    if p == 2:
        if not c.p2_convention:
            raise SingularExponentError(
                "p = 2 makes (2 a2 (p-1)/(p-2))^(1-p/2) singular; enable the p = 2 convention")
        return 1.0, "p = 2 convention: (2 a2 (p-1)/(p-2))^(1-p/2) taken as 1"
    base = 2 * a2 * (p - 1) / (p - 2)
    if base == 0:
        return math.inf, "a2 = 0 makes (2 a2 (p-1)/(p-2))^(1-p/2) infinite"
    return base ** (1 - p / 2), None


def _times(coef, factor):
    return 0.0 if coef == 0 else coef * factor


def stability_criterion(c: CriterionConstants) -> CriterionResult:
    """theta = 5^{p-1} [ ||A^-g||^p a1^p + alpha^p c_mu^p a1^p [t^{p a mu}/(p a mu)]^p
    + D2^p a2^{p-1} ah2^p + C_p D2^p F ah3^p + k D2^p (ah4^{p/2} + ah5^p) F ]
    with F = (2 a2 (p-1)/(p-2))^{1-p/2}, passing when theta < 1.

    Raises
    ------
    SingularExponentError
        For p = 2 unless ``p2_convention`` is enabled.
    """
    p, b = c.p, c.bounds
    if b.D2 is None or b.a2 is None:
        raise ValueError("stability criterion needs D2 and a2")
    F, fnote = _singular_factor(c)
    _, ah2, ah3, ah4, ah5 = c.a_hat
    w = 5 ** (p - 1)
    D2p = b.D2 ** p
    items = _neutral_items(c)
    items["drift"] = w * D2p * b.a2 ** (p - 1) * ah2 ** p
    items["diffusion"] = _times(w * c.C_p * D2p * ah3 ** p, F)
    items["jump"] = _times(w * c.k_p * D2p * (ah4 ** (p / 2) + ah5 ** p), F)
    notes = [f"||A^-gamma|| = {b.inv_power_norm:.12g} "
             f"({c.provenance.get('inv_power_norm', 'given')})",
             f"k(p) = {c.k_p:g}, C_p = {c.C_p:g}, evaluation time {c.t_eval:g}",
             f"D2 = {b.D2:g}, a2 = {b.a2:g}"]
    if fnote:
        notes.append(fnote)
    if b.h2_report:
        notes.append(b.h2_report)
    return _result("stability", items, notes)


def reference_deviation(result: CriterionResult, reference: float) -> dict:
    return {"reference": reference, "computed": result.theta,
            "abs_deviation": result.theta - reference,
            "rel_deviation": (result.theta - reference) / reference,
            "reference_pass": reference < 1, "computed_pass": result.passed,
            "verdicts_agree": (reference < 1) == result.passed}


def criteria_report(spec: ProblemSpec, constants: Optional[CriterionConstants] = None) -> dict:
    """Both criteria with items, the resolved constant set and reference deviations."""
    c = constants or resolve_constants(spec)
    ex = existence_criterion(c)
    out = {"problem": spec.name, "constants": c.to_dict(), "existence": ex.to_dict()}
    try:
        st = stability_criterion(c)
        out["stability"] = st.to_dict()
    except SingularExponentError as exc:
        st = None
        out["stability"] = {"name": "stability", "error": str(exc), "pass": False}
    ref = REFERENCE_THETAS.get(spec.name)
    if ref:
        out["existence"]["reference"] = reference_deviation(ex, ref["existence"])
        if st is not None:
            out["stability"]["reference"] = reference_deviation(st, ref["stability"])
    return out


# ------------------------------------------------------ integral inequality

@dataclass(frozen=True)
class InequalityParams:
    xi: tuple                  # xi_1 .. xi_7
    eta1: float
    eta2: float
    theta_delay: float = 0.0

    def __post_init__(self):
        xi = tuple(float(v) for v in self.xi)
        if len(xi) != 7 or any(v < 0 for v in xi):
            raise ValueError("xi must be seven nonnegative numbers")
        object.__setattr__(self, "xi", xi)
        if not (self.eta1 > 0 and self.eta2 > 0):
            raise ValueError("eta1 and eta2 must be positive")
        if self.theta_delay < 0:
            raise ValueError("theta_delay must be nonnegative")

    @property
    def feasibility(self) -> float:
        """xi_3 + xi_4/eta_1 + xi_5/eta_2 (must be < 1)."""
        x = self.xi
        return x[2] + x[3] / self.eta1 + x[4] / self.eta2

    @property
    def feasible(self) -> bool:
        return self.feasibility < 1

    def lhs(self, mu: float) -> float:
        """xi_3 e^{-mu th} + xi_4 e^{-mu th}/(eta_1 - mu) + xi_5 e^{-mu th}/(eta_2 - mu)."""
        x = self.xi
        s = x[2]
        if x[3]:
            s += x[3] / (self.eta1 - mu)
        if x[4]:
            s += x[4] / (self.eta2 - mu)
        return math.exp(-mu * self.theta_delay) * s


def _present(q: InequalityParams):
    """Rates of the channels that are present (xi_4 or xi_6, xi_5 or xi_7 nonzero)."""
    x = q.xi
    return [eta for main, sub, eta in ((x[3], x[5], q.eta1), (x[4], x[6], q.eta2))
            if main or sub]


def decay_root(q: InequalityParams) -> float:
    """Root mu of ``q.lhs(mu) = 1`` by bisection, below the smallest rate of
    the present channels (so in (0, min(eta_1, eta_2)) when both are present).

    The bisection result is polished over neighbouring floats to the one with
    the smallest residual, which matters when the root sits close to a pole.

    Raises
    ------
    NoRootError
        If xi_4 = xi_5 = 0, if the feasibility sum is >= 1, or if the left
        side stays below 1 on the whole interval.
    """
    if q.xi[3] == 0 and q.xi[4] == 0:
        raise NoRootError("xi_4 = xi_5 = 0: the left side is constant in mu")
    if not q.feasible:
        raise NoRootError(f"infeasible: xi_3 + xi_4/eta_1 + xi_5/eta_2 = {q.feasibility:.6g} >= 1")
    hi = np.nextafter(min(_present(q)), 0.0)
    h = lambda mu: q.lhs(mu) - 1.0
    if not h(hi) > 0:
        raise NoRootError("left side stays below 1 below the smallest channel rate")
    mu = optimize.bisect(h, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=4000)
    best, best_r = mu, abs(h(mu))
    for direction in (0.0, hi):
        cand = mu
        for _ in range(16):
            cand = np.nextafter(cand, direction)
            if not 0 < cand <= hi:
                break
            r = abs(h(cand))
            if r < best_r:
                best, best_r = cand, r
    return float(best)


def n_epsilon(q: InequalityParams, mu: float) -> float:
    """max{xi_1 + xi_2, (eta_1 - mu)/(xi_4 e^{mu th} - xi_6), (eta_2 - mu)/(xi_5 e^{mu th} - xi_7)}.

    A channel with both of its constants zero (xi_4 = xi_6 = 0, or
    xi_5 = xi_7 = 0) is absent and contributes no term.

    Raises
    ------
    DegenerateDenominatorError
        If a present channel has a vanishing denominator.
    """
    x = q.xi
    e = math.exp(mu * q.theta_delay)
    terms = [x[0] + x[1]]
    for main, sub, eta, label in ((x[3], x[5], q.eta1, "xi_4 e^{mu theta} = xi_6"),
                                  (x[4], x[6], q.eta2, "xi_5 e^{mu theta} = xi_7")):
        if main == 0 and sub == 0:
            continue
        den = main * e - sub
        if den == 0:
            raise DegenerateDenominatorError(label)
        terms.append((eta - mu) / den)
    return float(max(terms))


# ------------------------------------------------------------- Monte Carlo

@dataclass(frozen=True)
class MomentCurve:
    t: np.ndarray
    mean: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    stderr: np.ndarray
    paths: int
    p: float


def estimate_moment(ensemble: Sequence[Trajectory], p: float, level: float = 0.95) -> MomentCurve:
    """Per-node sample mean of ||x(t)||^p with a normal-approximation CI.

    Sums use exactly rounded (order-insensitive) summation.
    """
    ens = list(ensemble)
    if not ens:
        raise ValueError("ensemble must be nonempty")
    grid = ens[0].grid
    if any(tr.grid != grid for tr in ens):
        raise ValueError("all trajectories must share a grid")
    vals = np.stack([np.sum(tr.states ** 2, axis=1) ** (p / 2) for tr in ens])
    n = vals.shape[0]
    mean = np.empty(vals.shape[1])
    se = np.zeros(vals.shape[1])
    for i in range(vals.shape[1]):
        col = vals[:, i]
        if np.all(col == col[0]):
            mean[i] = col[0]
            continue
        m = math.fsum(col) / n
        mean[i] = m
        if n > 1:
            var = math.fsum((col - m) ** 2) / (n - 1)
            se[i] = math.sqrt(var / n)
    z = stats.norm.ppf(0.5 + level / 2)
    return MomentCurve(grid.times, mean, mean - z * se, mean + z * se, se, n, p)


@dataclass(frozen=True)
class DecayFit:
    mu_hat: float
    n_hat: float
    r_squared: float
    ci: tuple
    slope: float
    stderr: float
    window: tuple
    points: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ci"] = list(self.ci)
        d["window"] = list(self.window)
        return d


def fit_decay(t, curve, window: Optional[tuple] = None, level: float = 0.95) -> DecayFit:
    """Least-squares fit of log(curve) = log N - mu t on ``window``.

    ``mu_hat`` is the fitted rate clipped at 0 (``slope`` keeps the raw
    value); ``ci`` is the ``level`` Student-t interval for the rate.

    Raises
    ------
    FitDomainError
        If the curve is not strictly positive and finite on the window.
    """
    t = np.asarray(t, float)
    v = np.asarray(curve, float)
    if window is None:
        window = (float(t[0]), float(t[-1]))
    sel = (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)
    tw, vw = t[sel], v[sel]
    if tw.size < 2:
        raise FitDomainError("fit window holds fewer than two points")
    if not np.all(np.isfinite(vw)) or np.any(vw <= 0):
        raise FitDomainError("curve must be strictly positive and finite on the fit window")
    y = np.log(vw)
    res = stats.linregress(tw, y)
    slope, intercept = float(res.slope), float(res.intercept)
    pred = intercept + slope * tw
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    # a flat curve leaves only rounding noise in ss_tot; treat it as exact
    flat = ss_tot <= tw.size * (64 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(y))))) ** 2
    r2 = 1.0 if flat else 1.0 - ss_res / ss_tot
    r2 = min(1.0, max(0.0, r2))
    if tw.size > 2:
        half = stats.t.ppf(0.5 + level / 2, tw.size - 2) * float(res.stderr)
    else:
        half = math.inf
    return DecayFit(mu_hat=max(0.0, -slope), n_hat=math.exp(intercept), r_squared=r2,
                    ci=(-slope - half, -slope + half), slope=slope, stderr=float(res.stderr),
                    window=(float(window[0]), float(window[1])), points=int(tw.size))


@dataclass(frozen=True)
class MCConfig:
    paths: int = 1000
    dt: float = 0.05
    seed: int = 0
    method: str = "picard"
    tol: float = 1e-10
    max_iter: int = 100
    workers: int = 1
    fit_window: Optional[tuple] = None
    level: float = 0.95

    def __post_init__(self):
        if self.paths < 1:
            raise ValueError("paths must be >= 1")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True)
class StabilityReport:
    criterion: dict
    advisory: bool
    constants: dict
    envelope: dict
    fit: Optional[dict]
    curve: MomentCurve
    envelope_respected: Optional[bool]
    violations: int
    decay_ci_excludes_zero: Optional[bool]

    def to_dict(self) -> dict:
        return {"criterion": self.criterion, "advisory": self.advisory,
                "constants": self.constants, "envelope": self.envelope, "fit": self.fit,
                "envelope_respected": self.envelope_respected,
                "violations": self.violations,
                "decay_ci_excludes_zero": self.decay_ci_excludes_zero,
                "paths": self.curve.paths, "p": self.curve.p}


def _envelope_constants(spec: ProblemSpec, c: CriterionConstants, crit: Optional[CriterionResult]):
    """Lemma-style inequality parameters read off the stability estimate.

    Psi(t) = E||x(t)||^p obeys
      Psi(t) <= xi1 e^{-eta t} + xi2 e^{-eta t} + A1 sup Psi + A2 int e^{-a2 (t-s)} sup Psi ds
    with eta = min(p a1, a2); the kernel term is split evenly between both
    decay channels (xi4 = xi5 = A2/2) and xi6 = xi7 = 0.  The evaluation time
    inside A1 is frozen at ``t_eval``.
    """
    from .solver import _g_at_zero
    p, b = c.p, c.bounds
    w = 5 ** (p - 1)
    if crit is None:
        return None
    A1 = crit.items["neutral_norm"] + crit.items["neutral_smoothing"]
    A2 = crit.items["drift"] + crit.items["diffusion"] + crit.items["jump"]
    grid = spec.grid(spec.horizon)
    a0 = spec.phi0() + _g_at_zero(spec, grid)
    xi1 = w * b.D1 ** p * float(np.linalg.norm(a0)) ** p
    xi2 = w * b.D2 ** p * float(np.linalg.norm(spec.eta)) ** p
    eta = min(p * b.a1, b.a2)
    out = {"A_hat_1": A1, "A_hat_2": A2, "oplus_hat": max(A1, A2), "eta": eta,
           "xi": [xi1, xi2, A1, A2 / 2, A2 / 2, 0.0, 0.0], "t_eval_frozen": c.t_eval}
    if not eta > 0:
        out["status"] = "no envelope: a decay rate is zero"
        return out
    q = InequalityParams(tuple(out["xi"]), eta, eta, spec.delay)
    out["feasibility"] = q.feasibility
    try:
        mu = decay_root(q)
        N = n_epsilon(q, mu)
        out.update(status="lemma", mu=mu, N_eps=N)
    except (NoRootError, DegenerateDenominatorError) as exc:
        # the initial-data part xi1 + xi2 still has to sit under the curve at t = 0
        out.update(status=f"lemma inapplicable ({exc}); showing "
                          "max(xi1 + xi2, oplus_hat) e^(-eta t)",
                   mu=eta, N_eps=max(xi1 + xi2, A1, A2))
    return out


def verify_stability(spec: ProblemSpec, mc: MCConfig = MCConfig()) -> StabilityReport:
    """Simulate an ensemble, estimate E||x(t)||^p, fit its decay and compare
    against the criterion and the theoretical envelope N e^{-mu t}."""
    from .solver import run_ensemble
    c = resolve_constants(spec)
    try:
        crit = stability_criterion(c)
        crit_d = crit.to_dict()
    except SingularExponentError as exc:
        crit, crit_d = None, {"name": "stability", "error": str(exc), "pass": False}
    grid = spec.grid(mc.dt)
    results = run_ensemble(spec, grid, mc.paths, mc.seed, mc.method, mc.tol,
                           mc.max_iter, mc.workers)
    curve = estimate_moment([r.trajectory for r in results], spec.p, mc.level)
    env = _envelope_constants(spec, c, crit) or {"status": "no criterion"}
    respected, violations = None, 0
    if "N_eps" in env:
        bound = env["N_eps"] * np.exp(-env["mu"] * curve.t)
        over = curve.mean > bound * (1 + 1e-12)
        violations = int(np.count_nonzero(over))
        respected = violations == 0
    fit, excl = None, None
    try:
        f = fit_decay(curve.t, curve.mean, mc.fit_window, mc.level)
        fit = f.to_dict()
        excl = bool(f.ci[0] > 0)
    except FitDomainError as exc:
        fit = {"error": str(exc)}
    return StabilityReport(criterion=crit_d, advisory=crit is None or not crit.passed,
                           constants=c.to_dict(), envelope=env, fit=fit, curve=curve,
                           envelope_respected=respected, violations=violations,
                           decay_ci_excludes_zero=excl)


# ------------------------------------------------------------------ output

def write_moment_csv(curve: MomentCurve, path) -> None:
    """Columns ``t, mean, ci_low, ci_high``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "mean", "ci_low", "ci_high"])
        for row in zip(curve.t, curve.mean, curve.ci_low, curve.ci_high):
            w.writerow([repr(float(v)) for v in row])


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.floating, float)):
        v = float(o)
        return v if math.isfinite(v) else repr(v)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    return o


def write_json(obj: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
