"""Ball-restricted concentration quantities, bubbling sequences and translations."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .params import InvalidParameters, ProblemParams
from .profile import RadialProfile, ball_cutoff, scale
from .quadrature import (
    InvalidGrid,
    RadialGrid,
    end_slopes,
    gradient_p_integral,
    t_derivative,
    translated_hardy_integral,
    weighted_power_integral,
)

_GREGORY = np.array([17.0, 59.0, 43.0, 49.0]) / 48.0
TAIL_FRACTION = 0.25


class UnusableProfile(ValueError):
    """The truncated profile has a non-positive norm, so the ratios are meaningless."""


@dataclass(frozen=True)
class ConcentrationTriple:
    alpha: float
    beta: float
    gamma: float
    delta: float

    def to_dict(self) -> dict[str, float]:
        return {k: float(v) for k, v in asdict(self).items()}


@lru_cache(maxsize=64)
def _partial_cell_weights(theta: float) -> np.ndarray:
    """Weights on offsets (-1, 0, 1, 2) for int_0^theta of the cubic interpolant."""
    x = np.array([-1.0, 0.0, 1.0, 2.0])
    moments = np.array([theta ** (i + 1) / (i + 1) for i in range(4)])
    return np.linalg.solve(np.vander(x, 4, increasing=True).T, moments)


def _prefix_weights(k: int) -> np.ndarray:
    """Unit-spacing weights for int_0^k over nodes 0..k."""
    w = np.ones(k + 1)
    if k >= 7:
        w[:4] = _GREGORY
        w[-4:] += _GREGORY[::-1] - 1.0
    else:
        w[0] = w[-1] = 0.5
    return w


def _ball_integral(grid: RadialGrid, f: np.ndarray, t_end: float) -> float:
    """int_{t_0}^{t_end} f dt with f sampled at the nodes."""
    h = grid.h
    pos = (t_end - grid.t[0]) / h
    k = min(int(math.floor(pos)), grid.m - 3)
    theta = pos - k
    total = float(np.dot(_prefix_weights(k), f[: k + 1])) if k > 0 else 0.0
    if theta > 0:
        lo = max(k - 1, 0)
        idx = np.arange(lo, lo + 4)
        total += float(np.dot(_partial_cell_weights(theta + (k - lo - 1)) - _partial_cell_weights(k - lo - 1.0), f[idx]))
    return h * total


def _head(coef: float, power: float) -> float:
    if coef == 0.0:
        return 0.0
    if power <= 0.0:
        return math.inf
    return coef / power


def concentration_triple(params: ProblemParams, grid: RadialGrid, u: RadialProfile, delta: float) -> ConcentrationTriple:
    """(alpha, beta, gamma) of u restricted to the ball of radius delta."""
    if not (grid.r_min < delta < grid.r_max):
        raise InvalidGrid(f"delta={delta!r} lies outside the grid window ({grid.r_min}, {grid.r_max})")
    if (math.log(delta) - grid.t[0]) / grid.h > grid.m - 3:
        raise InvalidGrid("delta is too close to r_max")
    v = np.asarray(u.values, dtype=float)
    if not np.any(v):
        return ConcentrationTriple(0.0, 0.0, 0.0, float(delta))
    n, p, s, mu = params.n, params.p, params.s, params.mu
    ps, pstar = params.p_star_s, params.p_star
    r, h = grid.nodes, grid.h
    sigma = grid.surface_factor
    td = math.log(delta)
    vp = np.maximum(v, 0.0)
    ut = t_derivative(v, h, 1, 4)
    k_head, _ = end_slopes(v, h)

    def head(a0: float, e: float, a: float) -> float:
        if k_head is None:
            return 0.0
        return _head(abs(a0) ** e * r[0] ** (n - a), n - a + e * k_head)

    alpha = _ball_integral(grid, vp**pstar * r**n, td) + head(vp[0], pstar, 0.0)
    beta = _ball_integral(grid, vp**ps * r ** (n - s), td) + head(vp[0], ps, s)
    grad = _ball_integral(grid, np.abs(ut) ** p * r ** (n - p), td)
    hardy = _ball_integral(grid, np.abs(v) ** p * r ** (n - p), td)
    if k_head is not None:
        grad += head(k_head * v[0], p, p)
        hardy += head(v[0], p, p)
    gamma = grad - mu * hardy
    return ConcentrationTriple(float(sigma * alpha), float(sigma * beta), float(sigma * gamma), float(delta))


def bubble_sequence(u: RadialProfile, rates: Sequence[float], p: float) -> list[RadialProfile]:
    """[scale(u, r_k)] for increasing positive rates r_k."""
    rates = [float(x) for x in rates]
    if any(not x > 0 for x in rates):
        raise ValueError("rates must be positive")
    if any(b <= a for a, b in zip(rates, rates[1:])):
        raise ValueError("rates must be strictly increasing")
    return [scale(u, x, p) for x in rates]


def check_concentration_inequalities(
    params: ProblemParams, grid: RadialGrid, u: RadialProfile, delta: float, K0: float, Ks: float
) -> tuple[float, float]:
    """alpha^{p/p*} / (K0 gamma) and beta^{p/p*(s)} / (Ks gamma) for u cut to B_delta.

    Both are at most one, being the defining inequalities of the best
    constants applied to the truncated profile.
    """
    if not (K0 > 0 and Ks > 0):
        raise InvalidParameters("best constants must be positive")
    v = u.times(ball_cutoff(grid, delta))
    if not np.any(v.values):
        return 0.0, 0.0
    # the whole support is inside the ball, so full-space quadrature applies
    p = params.p
    grad = gradient_p_integral(grid, v, p)
    gamma = grad - params.mu * weighted_power_integral(grid, v, p, p)
    if not gamma > 0:
        raise UnusableProfile(f"gamma={gamma:.3e} is not positive for the truncated profile")
    alpha = weighted_power_integral(grid, np.maximum(v.values, 0.0), params.p_star, 0.0)
    beta = weighted_power_integral(grid, np.maximum(v.values, 0.0), params.p_star_s, params.s)
    return float(alpha ** (p / params.p_star) / (K0 * gamma)), float(beta ** (p / params.p_star_s) / (Ks * gamma))


def translation_sweep(
    params: ProblemParams, grid: RadialGrid, u: RadialProfile, alphas: Iterable[float], n_angle: int = 256
) -> list[tuple[float, float]]:
    """Rows (alpha, quotient of u(x - alpha e_1)).

    Only the Hardy term feels the translation; the gradient and the
    critical mass are computed once.
    """
    if params.s != 0 or params.mu > 0:
        raise InvalidParameters("translation sweep needs s = 0 and mu <= 0")
    p = params.p
    grad = gradient_p_integral(grid, u, p)
    mass = weighted_power_integral(grid, u, params.p_star, 0.0)
    if not mass > 0:
        raise UnusableProfile("profile has no critical mass")
    rows = []
    for a in alphas:
        hardy = translated_hardy_integral(grid, u, float(a), p, n_angle=n_angle)
        rows.append((float(a), (grad - params.mu * hardy) / mass ** (p / params.p_star)))
    return rows


def tail_max(values: Sequence[float], fraction: float = TAIL_FRACTION) -> float:
    """Max over the last ``fraction`` of a sequence; a finite stand-in for limsup."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    vals = list(values)
    if not vals:
        raise ValueError("empty sequence")
    k = max(1, math.ceil(fraction * len(vals)))
    return float(max(vals[-k:]))


def sequence_triple(triples: Sequence[ConcentrationTriple], fraction: float = TAIL_FRACTION) -> ConcentrationTriple:
    """Componentwise tail max of the triples along a sequence (same delta)."""
    deltas = {t.delta for t in triples}
    if len(deltas) != 1:
        raise ValueError("all triples must share one delta")
    return ConcentrationTriple(
        tail_max([t.alpha for t in triples], fraction),
        tail_max([t.beta for t in triples], fraction),
        tail_max([t.gamma for t in triples], fraction),
        deltas.pop(),
    )
