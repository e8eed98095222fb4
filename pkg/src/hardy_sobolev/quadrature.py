"""Log-spaced radial grids and quadrature of radial integrals over R^n.

All integrals are written in the logarithmic variable t = log r, where the
dilation group of the problem acts by translation.  Nodes are uniform in t,
so a profile shifted by an integer number of cells has bit-identical
discrete integrals.

Mass integrals use the fourth-order endpoint-corrected trapezoid rule
(Gregory weights 17/48, 59/48, 43/48, 49/48).  The gradient integral uses
first differences on the cell midpoints, which is second order and, unlike
centred differences, has no odd-even null mode.

The window [r_min, r_max] is closed off by power-law end corrections: near
each end the profile is extrapolated as |u| ~ r^k with k the measured
log-log slope, and the resulting tail integrals are added in closed form.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any

import numpy as np
from scipy import special

_GREGORY = np.array([17.0, 59.0, 43.0, 49.0]) / 48.0


class InvalidGrid(ValueError):
    pass


class NonIntegrable(ValueError):
    """The requested integral diverges at the origin."""


def sphere_area(n: int) -> float:
    """Measure of the unit (n-1)-sphere, 2 pi^{n/2} / Gamma(n/2)."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def ball_volume(n: int) -> float:
    return sphere_area(n) / n


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Nodes r_i = r_min * exp(i*h), i = 0..m-1, for radial integrals in R^n."""

    r_min: float
    r_max: float
    m: int
    n: int
    t: np.ndarray = field(init=False, repr=False)
    nodes: np.ndarray = field(init=False, repr=False)
    h: float = field(init=False)
    t_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not (0 < self.r_min < self.r_max < math.inf):
            raise InvalidGrid(f"need 0 < r_min < r_max < inf, got [{self.r_min}, {self.r_max}]")
        if int(self.m) != self.m or self.m < 16:
            raise InvalidGrid(f"need m >= 16 nodes, got {self.m}")
        if int(self.n) != self.n or self.n < 1:
            raise InvalidGrid(f"dimension must be a positive integer, got {self.n}")
        t = np.linspace(math.log(self.r_min), math.log(self.r_max), int(self.m))
        h = (t[-1] - t[0]) / (self.m - 1)
        c = np.ones(self.m)
        c[:4] = _GREGORY
        c[-4:] = _GREGORY[::-1]
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "nodes", np.exp(t))
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "t_weights", h * c)
        for arr in (self.t, self.nodes, self.t_weights):
            arr.setflags(write=False)

    @property
    def weights(self) -> np.ndarray:
        """Weights for 1D integration in r: sum_i weights_i f(r_i) ~ int f dr."""
        return self.t_weights * self.nodes

    @property
    def surface_factor(self) -> float:
        return sphere_area(self.n)

    @property
    def midpoints(self) -> np.ndarray:
        """Geometric cell midpoints sqrt(r_i r_{i+1})."""
        return np.exp(0.5 * (self.t[1:] + self.t[:-1]))

    def with_dim(self, n: int) -> "RadialGrid":
        return RadialGrid(self.r_min, self.r_max, self.m, n)

    def refined(self, factor: int = 2) -> "RadialGrid":
        """Same window, cell width divided by ``factor``."""
        return RadialGrid(self.r_min, self.r_max, factor * (self.m - 1) + 1, self.n)

    def spec(self) -> dict[str, Any]:
        return {"r_min": self.r_min, "r_max": self.r_max, "m": int(self.m), "n": int(self.n)}

    def to_json(self) -> str:
        return json.dumps(self.spec())

    @classmethod
    def from_json(cls, text: str) -> "RadialGrid":
        d = json.loads(text)
        return cls(float(d["r_min"]), float(d["r_max"]), int(d["m"]), int(d["n"]))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, RadialGrid) and self.spec() == other.spec()

    def __hash__(self) -> int:
        return hash(tuple(self.spec().values()))


def build_log_grid(r_min: float = 1e-6, r_max: float = 1e6, m: int = 4096, n: int = 3) -> RadialGrid:
    return RadialGrid(float(r_min), float(r_max), int(m), int(n))


def _values(grid: RadialGrid, u: Any) -> np.ndarray:
    v = np.asarray(getattr(u, "values", u), dtype=float)
    if v.shape != grid.nodes.shape:
        raise InvalidGrid(f"profile has {v.shape} samples, grid has {grid.m} nodes")
    return v


def end_slopes(values: np.ndarray, h: float) -> tuple[float | None, float | None]:
    """Log-log slopes d log|u| / d log r at the first and last node.

    ``None`` at an end where the profile vanishes or changes sign, in which
    case no extrapolation is attempted there.
    """
    def slope(a: float, b: float) -> float | None:
        if a == 0.0 or b == 0.0 or (a > 0) != (b > 0):
            return None
        return (math.log(abs(b)) - math.log(abs(a))) / h

    head = slope(values[0], values[1])
    tail = slope(values[-2], values[-1])
    return head, tail


def _head_piece(coef: float, power: float) -> float:
    """int_{-inf}^{t0} coef * exp(power (t - t0)) dt."""
    if coef == 0.0:
        return 0.0
    if power <= 0.0:
        raise NonIntegrable("integrand is not integrable at the origin")
    return coef / power


def _tail_piece(coef: float, power: float) -> float:
    if coef == 0.0:
        return 0.0
    if power >= 0.0:
        return math.inf
    return coef / -power


def mass_integral(
    grid: RadialGrid,
    values: np.ndarray,
    m_exp: float,
    a: float,
    ends: tuple[float | None, float | None] | None | str = "auto",
) -> float:
    """sigma * int_0^inf |u|^{m_exp} r^{n-1-a} dr with power-law end corrections.

    ``ends`` is ``"auto"`` (measured slopes), ``None`` (window only) or an
    explicit pair of slopes d log|u|/d log r for the head and the tail.
    """
    n = grid.n
    r = grid.nodes
    au = np.abs(values)
    body = float(np.dot(grid.t_weights, au**m_exp * r ** (n - a)))
    if ends is None:
        return grid.surface_factor * body
    k_head, k_tail = end_slopes(values, grid.h) if ends == "auto" else ends
    extra = 0.0
    if k_head is not None:
        extra += _head_piece(au[0] ** m_exp * r[0] ** (n - a), n - a + m_exp * k_head)
    elif au[0] != 0.0 and a >= n:
        raise NonIntegrable(f"weight |x|^-{a} is not integrable in R^{n}")
    if k_tail is not None:
        extra += _tail_piece(au[-1] ** m_exp * r[-1] ** (n - a), n - a + m_exp * k_tail)
    return grid.surface_factor * (body + extra)


def weighted_power_integral(grid: RadialGrid, u: Any, m_exp: float, a: float, ends="auto") -> float:
    """Approximate int_{R^n} |u(x)|^{m_exp} |x|^{-a} dx for a radial profile."""
    values = _values(grid, u)
    if not np.any(values):
        return 0.0
    return mass_integral(grid, values, m_exp, a, ends)


def gradient_p_integral(grid: RadialGrid, u: Any, p: float, ends="auto") -> float:
    """Approximate int_{R^n} |grad u|^p dx = sigma int |du/dt|^p r^{n-p} dt."""
    values = _values(grid, u)
    if not np.any(np.diff(values)):
        return 0.0
    n, h = grid.n, grid.h
    du = np.diff(values) / h
    body = h * float(np.sum(np.abs(du) ** p * grid.midpoints ** (n - p)))
    if ends is None:
        return grid.surface_factor * body
    k_head, k_tail = end_slopes(values, h) if ends == "auto" else ends
    r = grid.nodes
    extra = 0.0
    if k_head is not None:
        extra += _head_piece(abs(k_head * values[0]) ** p * r[0] ** (n - p), n - p + p * k_head)
    if k_tail is not None:
        extra += _tail_piece(abs(k_tail * values[-1]) ** p * r[-1] ** (n - p), n - p + p * k_tail)
    return grid.surface_factor * (body + extra)


@lru_cache(maxsize=64)
def fd_weights(offsets: tuple[int, ...], deriv: int) -> np.ndarray:
    """Finite-difference weights on integer offsets (unit spacing)."""
    k = len(offsets)
    x = np.asarray(offsets, dtype=float)
    vander = np.vander(x, k, increasing=True).T
    rhs = np.zeros(k)
    rhs[deriv] = math.factorial(deriv)
    w = np.linalg.solve(vander, rhs)
    w.setflags(write=False)
    return w


def t_derivative(values: np.ndarray, h: float, deriv: int = 1, order: int = 2) -> np.ndarray:
    """Derivative in t = log r of uniform samples, one-sided at the ends."""
    m = values.size
    npts = 2 * ((deriv + 1) // 2) - 1 + order
    half = npts // 2
    side = deriv + order
    if m < max(npts, side):
        raise InvalidGrid("too few nodes for the requested stencil")
    out = np.empty(m)
    inner = np.zeros(m - 2 * half)
    for j, w in enumerate(fd_weights(tuple(range(-half, half + 1)), deriv)):
        inner += w * values[j : m - 2 * half + j]
    out[half : m - half] = inner
    for i in range(half):
        out[i] = np.dot(fd_weights(tuple(range(-i, side - i)), deriv), values[:side])
        offs = tuple(range(-(side - 1 - i), i + 1))
        out[m - 1 - i] = np.dot(fd_weights(offs, deriv), values[m - side :])
    return out / h**deriv


def radial_derivative(grid: RadialGrid, u: Any, order: int = 2) -> np.ndarray:
    """du/dr at the nodes via d/dt stencils of the given order, divided by r."""
    values = _values(grid, u)
    return t_derivative(values, grid.h, 1, order) / grid.nodes


@lru_cache(maxsize=16)
def _angular_rule(n: int, n_angle: int) -> tuple[np.ndarray, np.ndarray]:
    beta = (n - 3) / 2.0
    c, w = special.roots_jacobi(n_angle, beta, beta)
    # |S^{n-2}| carries the remaining sphere directions
    lower = 2.0 if n == 2 else sphere_area(n - 1)
    return c, w * lower


def _translated_head(
    u0: float, r0: float, k: float, alpha: float, p: float, n: int, c: np.ndarray, w: np.ndarray
) -> float:
    """int over |x| < r0 of (u0 (|x|/r0)^k)^p |x + alpha e1|^{-p} dx.

    Gauss-Legendre in tau = log(r/r0), reaching far enough below r0 to pass
    alpha and then let the power law die out.
    """
    power = n + p * k
    if power <= 0.0:
        raise NonIntegrable("integrand is not integrable at the origin")
    depth = 40.0 / min(power, max(power - p, 0.0) or power) if alpha < r0 else 40.0 / power
    depth = min(depth + max(0.0, math.log(r0 / alpha)), 700.0)
    x, wq = _legendre(128)
    tau = 0.5 * depth * (x - 1.0)
    rr = r0 * np.exp(tau)
    dist2 = rr[:, None] ** 2 + alpha**2 + 2.0 * alpha * rr[:, None] * c[None, :]
    ang = (np.maximum(dist2, 1e-300) ** (-p / 2.0)) @ w
    return float(u0**p * r0**n * 0.5 * depth * np.dot(wq, np.exp(power * tau) * ang))


@lru_cache(maxsize=4)
def _legendre(k: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(k)


def translated_hardy_integral(
    grid: RadialGrid, u: Any, alpha: float, p: float, n_angle: int = 256, ends="auto"
) -> float:
    """int_{R^n} |u(|x|)|^p |x + alpha e_1|^{-p} dx for radial u.

    Radius on the log grid, polar angle by Gauss-Jacobi in cos(theta) with
    the exact (1 - c^2)^{(n-3)/2} sphere weight.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if n_angle < 64:
        raise ValueError("at least 64 angular nodes are required")
    values = _values(grid, u)
    if not np.any(values):
        return 0.0
    if alpha == 0.0:
        return mass_integral(grid, values, p, p, ends)
    n = grid.n
    r = grid.nodes
    c, w = _angular_rule(n, n_angle)
    dist2 = r[:, None] ** 2 + alpha**2 + 2.0 * alpha * r[:, None] * c[None, :]
    ang = (np.maximum(dist2, 0.0) ** (-p / 2.0)) @ w
    body = float(np.dot(grid.t_weights, np.abs(values) ** p * r**n * ang))
    if ends is None:
        return body
    k_head, k_tail = end_slopes(values, grid.h) if ends == "auto" else ends
    au = np.abs(values)
    extra = 0.0
    sigma = grid.surface_factor
    if k_head is not None and au[0] != 0.0:
        extra += _translated_head(au[0], r[0], k_head, alpha, p, n, c, w)
    if k_tail is not None:
        extra += sigma * _tail_piece(au[-1] ** p * r[-1] ** (n - p), n - p + p * k_tail)
    return body + extra
