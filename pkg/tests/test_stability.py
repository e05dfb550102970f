import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracsde.errors import DegenerateDenominatorError, FitDomainError, NoRootError, \
    SingularExponentError
from fracsde.grid import TimeGrid
from fracsde.model import Trajectory, damped_problem, example_dict, example_problem, \
    problem_from_dict
from fracsde.stability import (REFERENCE_THETAS, CriterionConstants, InequalityParams,
                               MCConfig, burkholder_constant, criteria_report, decay_root,
                               estimate_moment, existence_criterion, fit_decay, n_epsilon,
                               resolve_constants, stability_criterion, verify_stability,
                               write_json, write_moment_csv)
from _oracles import existence_theta_mp, stability_theta_mp


def oracle_args(c):
    b = c.bounds
    return dict(p=c.p, alpha=c.alpha, t=c.t_eval, C_p=c.C_p, k_p=c.k_p, a_hat=c.a_hat,
                inv_norm=b.inv_power_norm, c_mu=b.c_mu, mu=b.mu_smoothing)


def test_example_criteria_match_substitution():
    c = resolve_constants(example_problem())
    ex, stb = existence_criterion(c), stability_criterion(c)
    ref_e = float(existence_theta_mp(M=c.bounds.M, **oracle_args(c)))
    ref_s = float(stability_theta_mp(D2=c.bounds.D2, a2=c.bounds.a2, **oracle_args(c)))
    assert abs(ex.theta - ref_e) <= 1e-12
    assert abs(stb.theta - ref_s) <= 1e-12
    assert ex.passed and stb.passed


def test_items_sum_to_theta():
    c = resolve_constants(damped_problem())
    for r in (existence_criterion(c), stability_criterion(c)):
        assert r.theta == math.fsum(r.items.values())
        assert all(v >= 0 for v in r.items.values())


def test_report_states_conventions_and_deviation():
    rep = criteria_report(example_problem())
    ex, stb = rep["existence"], rep["stability"]
    assert ex["reference"]["reference"] == REFERENCE_THETAS["laplacian-example"]["existence"]
    assert stb["reference"]["reference"] == 0.00874
    assert ex["reference"]["verdicts_agree"] and stb["reference"]["verdicts_agree"]
    notes = " ".join(ex["notes"] + stb["notes"])
    assert "1/pi^(3/2)" in notes and "p = 2 convention" in notes and "k(p) = 1" in notes
    assert rep["constants"]["provenance"]["inv_power_norm"].startswith("override")


def test_zero_coefficients_give_zero_theta():
    d = example_dict(3)
    d["coefficients"] = {"a_hat": [0, 0, 0, 0, 0]}
    rep = criteria_report(problem_from_dict(d))
    assert rep["existence"]["theta"] == 0 and rep["stability"]["theta"] == 0


def test_p2_without_convention_is_singular():
    c = resolve_constants(example_problem())
    c = dataclasses.replace(c, p2_convention=False)
    with pytest.raises(SingularExponentError):
        stability_criterion(c)


def test_general_p_uses_singular_factor():
    d = example_dict(3)
    d["p"] = 4
    d["constants"]["C_p"] = None
    c = resolve_constants(problem_from_dict(d))
    assert c.C_p == pytest.approx(burkholder_constant(4)) == pytest.approx(36.0)
    r = stability_criterion(c)
    ref = float(stability_theta_mp(D2=c.bounds.D2, a2=c.bounds.a2, **oracle_args(c)))
    assert r.theta == pytest.approx(ref, rel=1e-12)


positive = st.floats(1e-4, 2.0)
BASE = resolve_constants(example_problem(3))


@given(a=st.lists(positive, min_size=5, max_size=5), k=st.integers(0, 4),
       factor=st.floats(1.01, 5.0), p=st.sampled_from([2.0, 2.5, 3.0, 4.0]))
def test_theta_monotone_in_each_constant(a, k, factor, p):
    c1 = dataclasses.replace(BASE, a_hat=tuple(a), p=p)
    bigger = list(a)
    bigger[k] *= factor
    c2 = dataclasses.replace(c1, a_hat=tuple(bigger))
    for crit in (existence_criterion, stability_criterion):
        r1, r2 = crit(c1), crit(c2)
        assert r2.theta >= r1.theta
        assert r1.theta == pytest.approx(sum(r1.items.values()), rel=1e-12)


# ------------------------------------------------------------- decay root

def test_decay_root_analytic_case():
    # xi_3 = xi_5 = 0, no delay: xi_4/(eta_1 - mu) = 1 gives mu = eta_1 - xi_4
    q = InequalityParams((1, 1, 0, 0.3, 0, 0, 0), 2.0, 5.0)
    assert abs(decay_root(q) - 1.7) <= 1e-12


@given(xi3=st.floats(0, 0.9), w4=st.floats(0.001, 0.999), eta1=st.floats(0.05, 10),
       eta2=st.floats(0.05, 10), theta=st.floats(0, 2), slack=st.floats(0.01, 0.99))
def test_decay_root_brackets_and_solves(xi3, w4, eta1, eta2, theta, slack):
    budget = (1 - xi3) * slack
    q = InequalityParams((0.5, 0.5, xi3, budget * w4 * eta1, budget * (1 - w4) * eta2, 0, 0),
                         eta1, eta2, theta)
    mu = decay_root(q)
    assert 0 < mu < min(eta1, eta2)
    # near a pole one ulp of mu moves the left side by slope * ulp
    x = q.xi
    slope = q.theta_delay * q.lhs(mu) + math.exp(-mu * q.theta_delay) * (
        x[3] / (eta1 - mu) ** 2 + x[4] / (eta2 - mu) ** 2)
    assert abs(q.lhs(mu) - 1) <= 1e-12 + 4 * slope * np.spacing(mu)


def test_decay_root_ignores_absent_channel():
    # xi_4 = xi_6 = 0: only eta_2 limits the rate
    q = InequalityParams((1, 1, 0, 0, 1.0, 0, 0), 1.0, 2.0)
    assert decay_root(q) == pytest.approx(1.0, abs=1e-12)


def test_decay_root_errors():
    with pytest.raises(NoRootError):
        decay_root(InequalityParams((1, 1, 0.5, 0, 0, 0, 0), 1, 1))
    with pytest.raises(NoRootError):
        decay_root(InequalityParams((1, 1, 0.5, 0.6, 0, 0, 0), 1, 1))
    with pytest.raises(ValueError):
        InequalityParams((1, 1, 1), 1, 1)


def test_n_epsilon():
    q = InequalityParams((1.0, 0.5, 0.0, 0.3, 0.0, 0.0, 0.0), 2.0, 5.0)
    mu = decay_root(q)
    # absent xi_5/xi_7 channel contributes nothing
    assert n_epsilon(q, mu) == pytest.approx(max(1.5, (2.0 - mu) / 0.3))
    degenerate = InequalityParams((1, 1, 0, 0.3, 0.2, 0.0, 0.2), 2.0, 5.0)
    with pytest.raises(DegenerateDenominatorError):
        n_epsilon(degenerate, 0.0)


# ------------------------------------------------------------------- fits

@given(N=st.floats(1e-3, 1e3), mu=st.floats(0.0, 5.0), n=st.integers(3, 60))
def test_fit_recovers_exact_exponentials(N, mu, n):
    t = np.linspace(0, 2, n)
    fit = fit_decay(t, N * np.exp(-mu * t))
    assert abs(fit.mu_hat - mu) <= 1e-10
    assert abs(fit.n_hat - N) <= 1e-10 * N
    assert fit.r_squared == pytest.approx(1.0)


def test_fit_window_and_clipping():
    t = np.linspace(0, 4, 41)
    v = np.where(t < 1, 10.0, 3 * np.exp(-2 * t))
    fit = fit_decay(t, v, window=(1.0, 4.0))
    assert fit.mu_hat == pytest.approx(2.0) and fit.points == 31
    grow = fit_decay(t, np.exp(0.5 * t))
    assert grow.mu_hat == 0.0 and grow.slope == pytest.approx(0.5)
    const = fit_decay(t, np.full_like(t, 2.0))
    assert const.mu_hat == 0.0 and const.r_squared == 1.0


def test_fit_domain_errors():
    t = np.linspace(0, 1, 5)
    with pytest.raises(FitDomainError):
        fit_decay(t, np.array([1.0, 0.5, 0.0, 0.1, 0.2]))
    with pytest.raises(FitDomainError):
        fit_decay(t, np.ones(5), window=(0.9, 1.0))


# -------------------------------------------------------------- moments

def test_moment_estimate_and_ci():
    g = TimeGrid(0.5, 2)
    ens = [Trajectory(g, np.full((3, 1), v)) for v in (1.0, 2.0, 3.0)]
    m = estimate_moment(ens, 2)
    assert m.mean == pytest.approx([14 / 3] * 3)
    assert np.all(m.ci_low < m.mean) and np.all(m.mean < m.ci_high)
    same = estimate_moment([ens[0]] * 4, 2)
    assert np.all(same.ci_low == same.ci_high)


def test_moment_order_insensitive():
    g = TimeGrid(0.1, 10)
    rng = np.random.default_rng(0)
    ens = [Trajectory(g, rng.standard_normal((11, 3)) * 10 ** rng.uniform(-8, 8))
           for _ in range(30)]
    a = estimate_moment(ens, 3)
    b = estimate_moment(ens[::-1], 3)
    assert np.array_equal(a.mean, b.mean)


def test_verify_stability_small_run(tmp_path):
    rep = verify_stability(damped_problem(), MCConfig(paths=40, dt=0.05, seed=1))
    assert not rep.advisory
    assert rep.envelope["status"] == "lemma"
    assert rep.envelope_respected
    assert rep.fit["mu_hat"] > 0
    write_json(rep.to_dict(), tmp_path / "r.json")
    write_moment_csv(rep.curve, tmp_path / "m.csv")
    assert (tmp_path / "m.csv").read_text().startswith("t,mean,ci_low,ci_high\n")


def test_envelope_fallback_covers_initial_data():
    # the quoted example has a non-decaying sine bound, so the lemma does not apply
    rep = verify_stability(example_problem(3), MCConfig(paths=5, dt=0.1))
    env = rep.envelope
    if env.get("status", "").startswith("lemma inapplicable"):
        assert env["N_eps"] >= env["xi"][0] + env["xi"][1]
