"""The energy functional, its norm, Rayleigh quotients and the fiber map."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from .params import InvalidParameters, ProblemParams, mountain_pass_threshold
from .profile import RadialProfile
from .quadrature import RadialGrid, gradient_p_integral, weighted_power_integral


class TrivialProfile(ValueError):
    """The profile carries no mass where the operation needs some."""


@dataclass(frozen=True)
class EnergyBreakdown:
    grad_term: float
    hardy_term: float
    triple_norm_p: float
    sobolev_mass: float
    hs_mass: float
    phi: float

    def to_dict(self) -> dict[str, float]:
        return {k: float(v) for k, v in asdict(self).items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "EnergyBreakdown":
        return cls(**{k: float(d[k]) for k in cls.__dataclass_fields__})


def compose_energy(params: ProblemParams, grad: float, hardy: float, sob: float, hs: float) -> EnergyBreakdown:
    """Assemble the breakdown from its four raw integrals."""
    grad, hardy, sob, hs = float(grad), float(hardy), float(sob), float(hs)
    norm_p = grad - params.mu * hardy
    phi = norm_p / params.p - sob / params.q_eff - hs / params.p_star_s
    return EnergyBreakdown(grad, hardy, norm_p, sob, hs, phi)


def evaluate_energy(params: ProblemParams, grid: RadialGrid, u: RadialProfile) -> EnergyBreakdown:
    """All terms of Phi(u); the two masses are taken of the positive part.

    With ``params.q`` set, the unweighted mass uses that exponent in place
    of the critical one.
    """
    p = params.p
    v = np.asarray(u.values, dtype=float)
    if not np.any(v):
        return EnergyBreakdown(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    vp = np.maximum(v, 0.0)
    grad = gradient_p_integral(grid, v, p)
    hardy = weighted_power_integral(grid, v, p, p)
    sob = weighted_power_integral(grid, vp, params.q_eff, 0.0)
    hs = weighted_power_integral(grid, vp, params.p_star_s, params.s)
    return compose_energy(params, grad, hardy, sob, hs)


def norm_bounds(params: ProblemParams, b: EnergyBreakdown) -> tuple[float, float]:
    """Lower and upper bounds for the norm^p in terms of the gradient term."""
    mu_plus, mu_minus = max(params.mu, 0.0), max(-params.mu, 0.0)
    return (1 - mu_plus / params.mu1) * b.grad_term, (1 + mu_minus / params.mu1) * b.grad_term


def rayleigh_quotient(params: ProblemParams, grid: RadialGrid, u: RadialProfile) -> float:
    """norm^p over the weighted mass of |u| to the power p / p*(s)."""
    p, ps = params.p, params.p_star_s
    den = weighted_power_integral(grid, u, ps, params.s)
    if not den > 0:
        raise TrivialProfile("weighted mass vanishes, quotient undefined")
    num = gradient_p_integral(grid, u, p) - params.mu * weighted_power_integral(grid, u, p, p)
    return num / den ** (p / ps)


def phi_on_ray(params: ProblemParams, b: EnergyBreakdown, t: float | np.ndarray) -> float | np.ndarray:
    """Phi(t u) from the breakdown of u."""
    p, q, ps = params.p, params.q_eff, params.p_star_s
    t = np.asarray(t, dtype=float)
    return t**p * b.triple_norm_p / p - t**q * b.sobolev_mass / q - t**ps * b.hs_mass / ps


def single_term_sup(params: ProblemParams, norm_p: float, mass: float, weighted: bool) -> float:
    """Closed-form max over t of t^p N/p - t^e M/e for one nonlinearity."""
    p = params.p
    e = params.p_star_s if weighted else params.q_eff
    quotient = norm_p / mass ** (p / e)
    return (1.0 / p - 1.0 / e) * quotient ** (e / (e - p))


def fiber_maximum(params: ProblemParams, b: EnergyBreakdown) -> tuple[float, float]:
    """Maximiser t_max > 0 of t -> Phi(t u) and the value Phi(t_max u).

    t_max solves N = t^{q-p} S + t^{p*(s)-p} H, whose right side increases
    from 0 to infinity; each one-term root brackets it from above and the
    one-term roots at N/2 from below.  Both bounds can be attained to
    rounding, so the bracket is widened by a factor two each way.
    """
    p, q, ps = params.p, params.q_eff, params.p_star_s
    N, S, H = b.triple_norm_p, b.sobolev_mass, b.hs_mass
    if not N > 0:
        raise TrivialProfile("norm must be positive for mountain-pass geometry")
    if not (S > 0 or H > 0):
        raise TrivialProfile("both masses vanish, Phi is unbounded along the ray")
    if q < p:
        raise InvalidParameters("fiber maximum needs q >= p")
    if q == p:
        # the unweighted term only lowers the quadratic part
        N_eff = N - S
        if not (N_eff > 0 and H > 0):
            raise TrivialProfile("no interior maximum along the ray")
        t = (N_eff / H) ** (1.0 / (ps - p))
        return t, float(phi_on_ray(params, b, t))
    if H == 0:
        t = (N / S) ** (1.0 / (q - p))
        return t, single_term_sup(params, N, S, weighted=False)
    if S == 0:
        t = (N / H) ** (1.0 / (ps - p))
        return t, single_term_sup(params, N, H, weighted=True)

    def g(t: float) -> float:
        return t ** (q - p) * S + t ** (ps - p) * H - N

    hi = 2.0 * min((N / S) ** (1.0 / (q - p)), (N / H) ** (1.0 / (ps - p)))
    lo = 0.5 * min((N / (2 * S)) ** (1.0 / (q - p)), (N / (2 * H)) ** (1.0 / (ps - p)))
    t = brentq(g, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return t, float(phi_on_ray(params, b, t))


def threshold_check(params: ProblemParams, u: RadialProfile, K0: float, Ks: float) -> tuple[float, bool]:
    """Gap between c_star and the ray maximum of Phi along u."""
    if np.any(u.values < 0):
        raise ValueError("threshold_check requires u >= 0")
    if not np.any(u.values):
        raise TrivialProfile("threshold_check requires a nontrivial profile")
    b = evaluate_energy(params, u.grid, u)
    _, sup = fiber_maximum(params, b)
    gap = mountain_pass_threshold(params, K0, Ks) - sup
    return gap, bool(gap > 0)
