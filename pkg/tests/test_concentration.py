from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import quad

from hardy_sobolev.concentration import (
    ConcentrationTriple,
    UnusableProfile,
    bubble_sequence,
    check_concentration_inequalities,
    concentration_triple,
    sequence_triple,
    tail_max,
    translation_sweep,
)
from hardy_sobolev.params import InvalidParameters, ProblemParams
from hardy_sobolev.profile import RadialProfile, ball_cutoff, bubble, profile_suite, scale
from hardy_sobolev.quadrature import InvalidGrid, build_log_grid, weighted_power_integral
from hardy_sobolev.solvers import best_constants, minimize_hardy_sobolev, solve_double_critical

P2 = ProblemParams(3, 2.0)
PS = ProblemParams(3, 2.0, 1.0, 0.1)


def _close(a: ConcentrationTriple, b: ConcentrationTriple, tol: float) -> None:
    for f in ("alpha", "beta", "gamma"):
        x, y = getattr(a, f), getattr(b, f)
        assert abs(x - y) <= tol * abs(y) + 1e-14, f


def test_zero_profile(grid):
    t = concentration_triple(PS, grid, RadialProfile(grid, np.zeros(grid.m)), 1.0)
    assert (t.alpha, t.beta, t.gamma) == (0.0, 0.0, 0.0)


def test_support_outside_ball(grid):
    r = grid.nodes
    u = RadialProfile(grid, np.where(r > 3.0, np.exp(-r), 0.0) * (1 - ball_cutoff(grid, 3.0).values))
    t = concentration_triple(ProblemParams(3, 2.0, 1.0, 0.0), grid, u, 1.0)
    assert (t.alpha, t.beta, t.gamma) == (0.0, 0.0, 0.0)


def test_bubble_ball_oracle(grid):
    # U = (1 + r^2)^{-1/2}: closed-form integrands on [0, 1]
    t = concentration_triple(P2, grid, bubble(P2, grid), 1.0)
    gamma = 4 * math.pi * quad(lambda r: r**4 / (1 + r * r) ** 3, 0, 1, epsabs=0, epsrel=1e-13)[0]
    alpha = 4 * math.pi * quad(lambda r: r**2 / (1 + r * r) ** 3, 0, 1, epsabs=0, epsrel=1e-13)[0]
    assert t.gamma == pytest.approx(gamma, rel=1e-8)
    assert t.alpha == pytest.approx(alpha, rel=1e-8)
    assert t.beta == pytest.approx(alpha, rel=1e-8)
    # regression anchor
    assert t.gamma == pytest.approx(0.5595089967, rel=1e-8)


def test_delta_window(grid, exp_profile):
    for d in (grid.r_min / 2, grid.r_max * 2, grid.r_max * 0.9999):
        with pytest.raises(InvalidGrid):
            concentration_triple(P2, grid, exp_profile, d)


def test_full_ball_matches_full_space(grid, exp_profile):
    t = concentration_triple(PS, grid, exp_profile, 9e5)
    assert t.alpha == pytest.approx(weighted_power_integral(grid, exp_profile, 6.0, 0.0), rel=1e-10)
    assert t.beta == pytest.approx(weighted_power_integral(grid, exp_profile, 4.0, 1.0), rel=1e-10)


@pytest.mark.parametrize("r", [0.25, 3.0, 40.0])
def test_scaling_covariance(grid, r):
    for u in profile_suite(grid, 5, 4, ("log_gaussian", "scaled_bubble", "exponential")):
        for d in (0.5, 2.0):
            _close(concentration_triple(PS, grid, scale(u, r, 2.0), d), concentration_triple(PS, grid, u, r * d), 1e-6)


def test_bubble_sequence_identity(grid):
    u = bubble(P2, grid)
    (v,) = bubble_sequence(u, [1.0], 2.0)
    assert np.array_equal(v.values, u.values)


@pytest.mark.parametrize("rates", [[1.0, 1.0], [2.0, 1.0], [0.0, 1.0], [-1.0]])
def test_bubble_sequence_rejects(grid, rates):
    with pytest.raises(ValueError):
        bubble_sequence(bubble(P2, grid), rates, 2.0)


def test_bubble_sequence_concentrates(grid):
    u = bubble(P2, grid)
    total = weighted_power_integral(grid, u, 6.0, 0.0)
    alphas = [concentration_triple(P2, grid, v, 1.0).alpha for v in bubble_sequence(u, [1, 4, 16, 64], 2.0)]
    assert all(b > a for a, b in zip(alphas, alphas[1:]))
    assert alphas[-1] < total and alphas[-1] > 0.99 * total


def test_alpha_of_scaled(grid):
    u = bubble(P2, grid)
    for r in (2.0, 10.0):
        (v,) = bubble_sequence(u, [r], 2.0)
        a = concentration_triple(P2, grid, v, 1.0).alpha
        assert a == pytest.approx(concentration_triple(P2, grid, u, r).alpha, rel=1e-6)


@pytest.fixture(scope="module")
def constants(grid):
    return best_constants(PS, grid)


def test_ratios_bounded(grid, constants):
    K0, Ks = constants
    for u in profile_suite(grid, 9, 12):
        for d in (0.5, 3.0, 50.0):
            try:
                a, b = check_concentration_inequalities(PS, grid, u, d, K0, Ks)
            except UnusableProfile:
                continue
            assert 0 <= a <= 1 + 1e-3 and 0 <= b <= 1 + 1e-3


def test_ratio_near_one_at_extremal(grid, constants):
    K0, Ks = constants
    ex = minimize_hardy_sobolev(PS, grid)
    a, b = check_concentration_inequalities(PS, grid, ex.profile, 1e5, K0, Ks)
    assert 0.99 < b <= 1 + 1e-3
    assert a < 1


def test_ratio_strict_off_extremal(grid, exp_profile, constants):
    a, b = check_concentration_inequalities(PS, grid, exp_profile, 10.0, *constants)
    assert a < 0.99 and b < 0.99


def test_ratio_zero_and_errors(grid, exp_profile, constants):
    zero = RadialProfile(grid, np.zeros(grid.m))
    assert check_concentration_inequalities(PS, grid, zero, 1.0, *constants) == (0.0, 0.0)
    with pytest.raises(InvalidParameters):
        check_concentration_inequalities(PS, grid, exp_profile, 1.0, 0.0, 1.0)
    # Hardy keeps gamma positive for mu < mu1, so only an underflowed profile trips it
    tiny = RadialProfile(grid, 1e-200 * np.exp(-grid.nodes))
    with pytest.raises(UnusableProfile):
        check_concentration_inequalities(PS, grid, tiny, 1.0, *constants)


def test_energy_balance_double_critical(grid):
    rep = solve_double_critical(PS, grid)
    e = rep.energy
    p, pstar, ps = PS.p, PS.p_star, PS.p_star_s
    lhs = (1 / p - 1 / pstar) * e.sobolev_mass + (1 / p - 1 / ps) * e.hs_mass
    assert lhs == pytest.approx(e.phi, rel=1e-6)
    assert e.sobolev_mass <= PS.n * e.phi


@pytest.fixture(scope="module")
def sweep(grid):
    pr = ProblemParams(3, 2.0, 0.0, -1.0)
    return translation_sweep(pr, grid, bubble(pr, grid), [0, 5, 10, 25, 50])


def test_translation_alpha_zero(grid, sweep):
    from hardy_sobolev.energy import rayleigh_quotient

    pr = ProblemParams(3, 2.0, 0.0, -1.0)
    assert sweep[0][1] == pytest.approx(rayleigh_quotient(pr, grid, bubble(pr, grid)), rel=1e-8)


def test_translation_monotone(grid, sweep):
    q = [row[1] for row in sweep]
    assert all(b <= a for a, b in zip(q, q[1:]))
    mu0 = 1.0 / best_constants(ProblemParams(3, 2.0), grid)[0]
    assert all(x > mu0 for x in q)


def test_translation_rejects(grid, exp_profile):
    with pytest.raises(InvalidParameters):
        translation_sweep(PS, grid, exp_profile, [0.0])
    with pytest.raises(InvalidParameters):
        translation_sweep(ProblemParams(3, 2.0, 0.0, 0.1), grid, exp_profile, [0.0])


def test_tail_max():
    assert tail_max([5, 1, 2, 3]) == 3
    assert tail_max([5, 1, 2, 3], 1.0) == 5
    assert tail_max([4.0]) == 4.0
    with pytest.raises(ValueError):
        tail_max([])
    with pytest.raises(ValueError):
        tail_max([1.0], 0.0)


def test_sequence_triple():
    ts = [ConcentrationTriple(float(i), 2.0 * i, 1.0, 1.0) for i in range(8)]
    assert sequence_triple(ts) == ConcentrationTriple(7.0, 14.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        sequence_triple([ConcentrationTriple(0, 0, 0, 1.0), ConcentrationTriple(0, 0, 0, 2.0)])
