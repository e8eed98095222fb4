from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardy_sobolev.energy import (
    EnergyBreakdown,
    TrivialProfile,
    compose_energy,
    evaluate_energy,
    fiber_maximum,
    norm_bounds,
    phi_on_ray,
    rayleigh_quotient,
    single_term_sup,
    threshold_check,
)
from hardy_sobolev.params import InvalidParameters, ProblemParams, mountain_pass_threshold
from hardy_sobolev.profile import RadialProfile, bubble, profile_suite, scale
from hardy_sobolev.quadrature import build_log_grid

P = ProblemParams(3, 2.0, 1.0, 0.1)


@pytest.fixture(scope="module")
def suite(grid):
    return profile_suite(grid, 1, 50)


def test_zero_profile(grid):
    b = evaluate_energy(P, grid, RadialProfile(grid, np.zeros(grid.m)))
    assert b == EnergyBreakdown(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def test_exp_profile_closed_form(grid, exp_profile):
    b = evaluate_energy(P, grid, exp_profile)
    assert b.grad_term == pytest.approx(math.pi, rel=1e-5)
    assert b.hardy_term == pytest.approx(2 * math.pi, rel=1e-8)
    assert b.triple_norm_p == pytest.approx(math.pi - 0.2 * math.pi, rel=1e-5)
    # sobolev mass 4 pi int r^2 e^{-6r} = 8 pi / 216, hs mass 4 pi int r e^{-4r} = pi / 4
    assert b.sobolev_mass == pytest.approx(8 * math.pi / 216, rel=1e-8)
    assert b.hs_mass == pytest.approx(math.pi / 4, rel=1e-8)


def test_phi_composition(grid, suite):
    for u in suite[:10]:
        b = evaluate_energy(P, grid, u)
        assert b.phi == b.triple_norm_p / 2 - b.sobolev_mass / 6 - b.hs_mass / 4


def test_positive_part_in_masses(grid, exp_profile):
    b = evaluate_energy(P, grid, -exp_profile)
    assert b.sobolev_mass == 0.0 and b.hs_mass == 0.0
    assert b.grad_term > 0


def test_hardy_inequality(grid, suite):
    mu1 = P.mu1
    for u in suite:
        b = evaluate_energy(P, grid, u)
        assert mu1 * b.hardy_term <= b.grad_term * (1 + 1e-3)


@pytest.mark.parametrize("mu", [-1.0, 0.0, 0.125, 0.9 * 0.25])
def test_norm_sandwich(grid, suite, mu):
    pr = P.replace(mu=mu)
    for u in suite:
        b = evaluate_energy(pr, grid, u)
        lo, hi = norm_bounds(pr, b)
        tol = 1e-10 * b.grad_term
        assert lo - tol <= b.triple_norm_p <= hi + tol


def test_breakdown_json_roundtrip(grid, exp_profile):
    b = evaluate_energy(P, grid, exp_profile)
    import json

    assert EnergyBreakdown.from_dict(json.loads(b.to_json())) == b


# --- Rayleigh quotient -----------------------------------------------------

def test_quotient_homogeneous(grid, suite):
    for u in suite[:10]:
        q = rayleigh_quotient(P, grid, u)
        for c in (-3.0, 0.01, 7.5):
            assert rayleigh_quotient(P, grid, c * u) == pytest.approx(q, rel=1e-12)


@pytest.mark.parametrize("r", [0.2, 8.0])
def test_quotient_scale_invariant(grid, r):
    u = profile_suite(grid, 2, 1, ("scaled_bubble",))[0]
    assert rayleigh_quotient(P, grid, scale(u, r, 2.0)) == pytest.approx(rayleigh_quotient(P, grid, u), rel=1e-6)


def test_quotient_uses_absolute_value(grid, exp_profile):
    assert rayleigh_quotient(P, grid, -exp_profile) == rayleigh_quotient(P, grid, exp_profile)


def test_quotient_trivial(grid):
    with pytest.raises(TrivialProfile):
        rayleigh_quotient(P, grid, RadialProfile(grid, np.zeros(grid.m)))


# --- fiber map -------------------------------------------------------------

def test_single_term_closed_forms():
    pr = ProblemParams(3, 2.0, 1.0)
    b = compose_energy(pr, 1.0, 0.0, 1.0, 0.0)
    assert fiber_maximum(pr, b)[1] == pytest.approx(1 / 3, rel=1e-12)
    b = compose_energy(pr, 1.0, 0.0, 0.0, 1.0)
    assert fiber_maximum(pr, b)[1] == pytest.approx(1 / 4, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(0.1, 10.0), st.floats(-1.0, 0.2), st.floats(0.1, 1.9))
def test_single_term_sup_matches_numeric(N, M, mu, s):
    pr = ProblemParams(3, 2.0, s, mu)
    for weighted in (False, True):
        b = compose_energy(pr, N, 0.0, 0.0 if weighted else M, M if weighted else 0.0)
        t, sup = fiber_maximum(pr, b)
        closed = single_term_sup(pr, N, M, weighted)
        assert sup == pytest.approx(closed, rel=1e-8)
        assert float(phi_on_ray(pr, b, t)) == pytest.approx(closed, rel=1e-8)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(0.01, 10.0), st.floats(0.01, 10.0), st.floats(0.1, 1.9))
def test_two_terms_strictly_below(N, S, H, s):
    pr = ProblemParams(3, 2.0, s)
    b = compose_energy(pr, N, 0.0, S, H)
    t, sup = fiber_maximum(pr, b)
    assert sup < single_term_sup(pr, N, S, False)
    assert sup < single_term_sup(pr, N, H, True)
    # first-order condition, scaled by the size of the terms
    d = N * t ** (pr.p - 1) - S * t ** (pr.q_eff - 1) - H * t ** (pr.p_star_s - 1)
    assert abs(d) <= 1e-10 * N * t ** (pr.p - 1)
    # unimodal on 100 samples either side
    left = phi_on_ray(pr, b, np.linspace(0, t, 101))
    right = phi_on_ray(pr, b, np.linspace(t, 4 * t, 101))
    assert np.all(np.diff(left) > 0) and np.all(np.diff(right) < 0)


def test_fiber_on_real_profile(grid, exp_profile):
    b = evaluate_energy(P, grid, exp_profile)
    t, sup = fiber_maximum(P, b)
    ts = np.linspace(0.5 * t, 1.5 * t, 2001)
    assert sup == pytest.approx(float(np.max(phi_on_ray(P, b, ts))), rel=1e-9)


def test_fiber_errors():
    pr = ProblemParams(3, 2.0, 1.0)
    with pytest.raises(TrivialProfile):
        fiber_maximum(pr, compose_energy(pr, 0.0, 0.0, 1.0, 1.0))
    with pytest.raises(TrivialProfile):
        fiber_maximum(pr, compose_energy(pr, 1.0, 0.0, 0.0, 0.0))
    with pytest.raises(InvalidParameters):
        fiber_maximum(pr.replace(q=1.5), compose_energy(pr, 1.0, 0.0, 1.0, 1.0))


def test_fiber_q_equals_p():
    pr = ProblemParams(3, 2.0, 1.0, q=2.0)
    b = compose_energy(pr, 2.0, 0.0, 1.0, 1.0)
    t, sup = fiber_maximum(pr, b)
    ts = np.linspace(0.01, 3 * t, 30001)
    assert sup == pytest.approx(float(np.max(phi_on_ray(pr, b, ts))), rel=1e-7)


# --- threshold ------------------------------------------------------------

def test_threshold_equality_case():
    pr = ProblemParams(3, 2.0, 1.0)
    K0, Ks = 1.0, 0.1  # first branch of c_star is the smaller one
    assert mountain_pass_threshold(pr, K0, Ks) == pytest.approx(1 / 3)
    b = compose_energy(pr, 1.0, 0.0, 1.0, 0.0)  # quotient exactly 1/K0, no weighted mass
    assert mountain_pass_threshold(pr, K0, Ks) - fiber_maximum(pr, b)[1] == pytest.approx(0.0, abs=1e-15)


def test_threshold_check_rejects(grid, exp_profile):
    with pytest.raises(ValueError):
        threshold_check(P, -exp_profile, 1.0, 1.0)
    with pytest.raises(TrivialProfile):
        threshold_check(P, RadialProfile(grid, np.zeros(grid.m)), 1.0, 1.0)


def test_threshold_check_at_s0_extremal(grid):
    from hardy_sobolev.solvers import best_constants, minimize_hardy_sobolev

    K0, Ks = best_constants(P, grid)
    ext = minimize_hardy_sobolev(P.replace(s=0.0), grid)
    gap, ok = threshold_check(P, ext.profile, K0, Ks)
    assert ok and gap > 0
