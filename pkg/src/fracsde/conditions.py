"""Monte Carlo check of the integral-contractor inequalities.

For random grid functions ``x, y`` (and Wiener increments for the Gamma_3
term) the perturbed argument

    z = x + y + int S Gamma1 y + int S Gamma2 y + int S Gamma3 y dw + int int S Gamma4 y lambda du

is formed with the solver's quadrature, and each inequality's left side is
compared with ``a_hat_i E||y(t)||^p`` node by node.  Pairing used:
f with Gamma2 and a_hat_2, g with Gamma1 and a_hat_1 (through (-A)^gamma),
G with Gamma3 and a_hat_3, sigma with Gamma4 and a_hat_4 / a_hat_5.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ProblemSpec, Trajectory
from .noise import NoiseRealization, path_rng

__all__ = ["ConditionRow", "ContractorReport", "check_contractor_conditions"]

CHECK_STREAM = 7


@dataclass(frozen=True)
class ConditionRow:
    label: str
    a_hat: float
    max_lhs: float
    max_ratio: float
    passed: bool

    def to_dict(self) -> dict:
        r = self.max_ratio
        return {"label": self.label, "a_hat": self.a_hat, "max_lhs": self.max_lhs,
                "max_ratio": r if math.isfinite(r) else "inf", "pass": self.passed}


@dataclass(frozen=True)
class ContractorReport:
    rows: tuple
    samples: int
    lipschitz_paths_agree: object     # True/False, or None when contractors are nonzero
    passed: bool

    def to_dict(self) -> dict:
        return {"samples": self.samples, "pass": self.passed,
                "lipschitz_paths_agree": self.lipschitz_paths_agree,
                "inequalities": [r.to_dict() for r in self.rows]}


def _qhs_norm_sq(B, q):
    # ||B||_{L_Q}^2 = sum_k q_k ||B[:, k]||^2, B of shape (..., N, K)
    return np.einsum("...nk,k->...", B ** 2, q)


def _lhs_terms(spec, xt, zt, y, gam, st):
    """Per-node left-side integrands for one sample."""
    c = spec.coefficients
    p = spec.p
    phi, r = spec.phi, spec.delay
    out = {}
    d = c.f.on_grid(zt, phi, r) - c.f.on_grid(xt, phi, r)
    if gam["G2"] is not None:
        d = d - np.einsum("inm,im->in", gam["G2"], y)
    out["f"] = np.sum(d ** 2, axis=1) ** (p / 2)
    d = (c.g.on_grid(zt, phi, r) - c.g.on_grid(xt, phi, r)) * spec.generator.power(spec.gamma)
    if gam["G1"] is not None:
        d = d - np.einsum("inm,im->in", gam["G1"], y)
    out["g"] = np.sum(d ** 2, axis=1) ** (p / 2)
    q = np.asarray(spec.wiener.q_eigenvalues)
    if q.size:
        B = c.G.on_grid(zt, phi, r) - c.G.on_grid(xt, phi, r)
        if gam["G3"] is not None:
            B = B - np.einsum("inkm,im->ink", gam["G3"], y)
        out["G"] = _qhs_norm_sq(B, q) ** (p / 2)
    else:
        out["G"] = np.zeros(len(y))
    nodes, weights = st
    if nodes.size:
        D = c.sigma.on_grid(zt, phi, r, nodes) - c.sigma.on_grid(xt, phi, r, nodes)
        if gam["G4"] is not None:
            D = D - np.einsum("iqnm,im->iqn", gam["G4"], y)
        nsq = np.sum(D ** 2, axis=2)
        out["s2"] = nsq @ weights
        out["s2p"] = (nsq ** p) @ weights
    else:
        out["s2"] = out["s2p"] = np.zeros(len(y))
    return out


def check_contractor_conditions(spec: ProblemSpec, sample_count: int = 1000, seed: int = 0,
                                steps: int = 20, tolerance: float = 1e-9,
                                x_scale: float = 1.0, y_scale: float = 0.5) -> ContractorReport:
    """Empirical max of (left side) / (a_hat_i E||y||^p) for inequalities (i)-(v).

    ``x`` and ``y`` are i.i.d. Gaussian coefficient vectors at every node
    (standard deviations ``x_scale``, ``y_scale``).  An inequality passes
    when its ratio is at most ``1 + tolerance``; an ``a_hat_i = 0`` with a
    nonzero left side gives an infinite ratio and a FAIL.  With all
    contractors zero the check is also run through the plain Lipschitz form
    (argument ``x + y``), and the two evaluations must agree exactly.
    """
    from .solver import _apply_operators, _causal_conv, _contractor_operators, _setup
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    grid = spec.grid(spec.horizon / steps)
    st = _setup(spec, grid)
    rng = path_rng(seed, 0, CHECK_STREAM)
    n, K = spec.modes, spec.wiener.modes
    q = np.asarray(spec.wiener.q_eigenvalues)
    times = grid.times
    kset = spec.contractors
    zero = kset.all_zero

    acc = {k: np.zeros(grid.steps + 1) for k in ("f", "g", "G", "s2", "s2p", "y")}
    agree = True
    for _ in range(sample_count):
        x = x_scale * rng.standard_normal((grid.steps + 1, n))
        y = y_scale * rng.standard_normal((grid.steps + 1, n))
        dw = np.sqrt(q * grid.dt) * rng.standard_normal((grid.steps, K))
        xt = Trajectory(grid, x)
        noise = NoiseRealization(grid, dw, np.zeros(0), np.zeros(0), seed, 0)
        L = _contractor_operators(spec, xt, noise, st)
        if L is None:
            L = np.zeros((grid.steps, n, n))
        z = x + y + _causal_conv(st.S, _apply_operators(L, y))
        gam = {
            "G1": None if kset.gamma1.is_zero else np.asarray(kset.gamma1.on_grid(times, x)),
            "G2": None if kset.gamma2.is_zero else np.asarray(kset.gamma2.on_grid(times, x)),
            "G3": None if kset.gamma3.is_zero or not K
            else np.asarray(kset.gamma3.on_grid(times, x)),
            "G4": None if kset.gamma4.is_zero or not st.nodes.size
            else np.asarray(kset.gamma4.on_grid(times, x, st.nodes)),
        }
        terms = _lhs_terms(spec, xt, Trajectory(grid, z), y, gam, (st.nodes, st.weights))
        for k, v in terms.items():
            acc[k] += v
        acc["y"] += np.sum(y ** 2, axis=1) ** (spec.p / 2)
        if zero:
            lip = _lhs_terms(spec, xt, Trajectory(grid, x + y), y, gam,
                             (st.nodes, st.weights))
            for k, v in lip.items():
                agree = agree and np.array_equal(v, terms[k])

    m = {k: v / sample_count for k, v in acc.items()}
    p = spec.p
    lhs = {
        "(i) f, Gamma2": (m["f"], spec.a_hat[1]),
        "(ii) g, Gamma1": (m["g"], spec.a_hat[0]),
        "(iii) G, Gamma3": (m["G"], spec.a_hat[2]),
        "(iv) sigma, Gamma4": (m["s2"] ** (p / 2), spec.a_hat[3]),
        "(v) sigma, Gamma4": (m["s2p"] ** 0.5, spec.a_hat[4]),
    }
    rows = []
    for label, (left, a) in lhs.items():
        den = a * m["y"]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(left == 0, 0.0, left / den)
        r = float(np.max(ratio))
        rows.append(ConditionRow(label, a, float(np.max(left)), r, bool(r <= 1 + tolerance)))
    return ContractorReport(tuple(rows), sample_count, agree if zero else None,
                            all(r.passed for r in rows))
