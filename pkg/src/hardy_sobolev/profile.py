"""Radial profiles and the structural operators acting on them.

A :class:`RadialProfile` is an immutable sample of u(|x|) on a
:class:`~hardy_sobolev.quadrature.RadialGrid`.  Every operator returns a new
profile on the same grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy.interpolate import CubicSpline

from .params import ProblemParams
from .quadrature import RadialGrid, InvalidGrid, ball_volume, end_slopes


@dataclass(frozen=True, eq=False)
class RadialProfile:
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.nodes.shape:
            raise InvalidGrid(f"{v.shape[0] if v.ndim else 0} samples for a {self.grid.m}-node grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("profile values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    def __mul__(self, c: float) -> "RadialProfile":
        return RadialProfile(self.grid, c * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "RadialProfile":
        return RadialProfile(self.grid, -self.values)

    def __add__(self, other: "RadialProfile") -> "RadialProfile":
        _same_grid(self, other)
        return RadialProfile(self.grid, self.values + other.values)

    def __sub__(self, other: "RadialProfile") -> "RadialProfile":
        _same_grid(self, other)
        return RadialProfile(self.grid, self.values - other.values)

    def times(self, other: "RadialProfile") -> "RadialProfile":
        """Pointwise product."""
        _same_grid(self, other)
        return RadialProfile(self.grid, self.values * other.values)

    def decay_ratio(self, p: float) -> float:
        """|u(r_max)| r_max^{(n-p)/p} / max|u|: zero for a truncation-free tail."""
        peak = float(np.max(np.abs(self.values)))
        if peak == 0.0:
            return 0.0
        n = self.grid.n
        return abs(self.values[-1]) * self.grid.r_max ** ((n - p) / p) / peak

    def check_decay(self, p: float, tol: float = 1e-6) -> bool:
        return self.decay_ratio(p) < tol


def from_function(grid: RadialGrid, f) -> RadialProfile:
    return RadialProfile(grid, f(grid.nodes))


def _same_grid(a: RadialProfile, b: RadialProfile) -> None:
    if a.grid != b.grid:
        raise InvalidGrid("profiles live on different grids")


def _log_interpolant(grid: RadialGrid, values: np.ndarray):
    """Cubic-spline interpolant in t = log r with power-law extrapolation.

    Strictly positive (or negative) data are interpolated in log|u|, where
    power laws are straight lines; otherwise u itself is interpolated.  A
    not-a-knot spline keeps fourth order through interior extrema, where a
    monotone (pchip) interpolant drops to second order.
    """
    t = grid.t
    k_head, k_tail = end_slopes(values, grid.h)
    sign = np.sign(values[0]) if values[0] != 0 else 1.0
    if np.all(values * sign > 0):
        inner = CubicSpline(t, np.log(values * sign), extrapolate=False)

        def f(x: np.ndarray) -> np.ndarray:
            out = np.empty_like(x)
            mid = (x >= t[0]) & (x <= t[-1])
            out[mid] = inner(x[mid])
            lo, hi = x < t[0], x > t[-1]
            lv0, lv1 = math.log(values[0] * sign), math.log(values[-1] * sign)
            out[lo] = lv0 + k_head * (x[lo] - t[0])
            out[hi] = lv1 + k_tail * (x[hi] - t[-1])
            return sign * np.exp(out)

        return f

    inner = CubicSpline(t, values, extrapolate=False)

    def g(x: np.ndarray) -> np.ndarray:
        out = np.zeros_like(x)
        mid = (x >= t[0]) & (x <= t[-1])
        out[mid] = inner(x[mid])
        lo, hi = x < t[0], x > t[-1]
        out[lo] = values[0] * (np.exp(k_head * (x[lo] - t[0])) if k_head is not None else 1.0)
        if k_tail is not None:
            out[hi] = values[-1] * np.exp(k_tail * (x[hi] - t[-1]))
        else:
            out[hi] = 0.0 if values[-1] == 0 else values[-1]
        return out

    return g


def scale(u: RadialProfile, r: float, p: float) -> RadialProfile:
    """Dilation x -> r^{(n-p)/p} u(r x), resampled on the same grid.

    Resampling is by cubic spline in (log r, log|u|); outside the window the
    measured end power laws are continued.
    """
    if not r > 0:
        raise ValueError(f"scale factor must be positive, got {r!r}")
    if r == 1.0:
        return u
    grid = u.grid
    weight = (grid.n - p) / p
    shift = math.log(r)
    steps = shift / grid.h
    k = round(steps)
    if abs(steps - k) < 1e-9:
        # integer shift: exact except for the extrapolated end cells
        f = _log_interpolant(grid, u.values)
        idx = np.arange(grid.m) + k
        vals = np.empty(grid.m)
        inside = (idx >= 0) & (idx < grid.m)
        vals[inside] = u.values[idx[inside]]
        vals[~inside] = f(grid.t[~inside] + shift)
    else:
        vals = _log_interpolant(grid, u.values)(grid.t + shift)
    return RadialProfile(grid, r**weight * vals)


def positive_part(u: RadialProfile) -> RadialProfile:
    return RadialProfile(u.grid, np.maximum(u.values, 0.0))


class _LevelSets:
    """Distribution function of the cubic-spline interpolant of u >= 0 in t.

    ``volume(L)`` returns meas{u > L} in units of the unit-ball volume, i.e.
    the sum of r^n over down-crossings minus the sum over up-crossings.
    The interpolant is split into monotone pieces at its own extrema, not at
    the node extrema, so peaks falling between nodes are resolved.  Beyond
    r_max the profile is continued by its measured power-law tail.
    """

    def __init__(self, grid: RadialGrid, values: np.ndarray) -> None:
        self.grid = grid
        self.v = values
        self.n = grid.n
        self.spline = CubicSpline(grid.t, values)
        d = np.sign(np.diff(values))
        # zero steps inherit the previous direction so plateaus do not split segments
        for i in range(1, d.size):
            if d[i] == 0:
                d[i] = d[i - 1]
        if d.size and d[0] == 0:
            nz = d[d != 0]
            d[d == 0] = nz[0] if nz.size else 1.0
        breaks = np.flatnonzero(np.diff(d)) + 1
        starts = np.concatenate(([0], breaks))
        stops = np.concatenate((breaks, [d.size]))
        t = grid.t
        ext = {int(i): self._extremum(int(i), -d[i]) for i in breaks}
        self.pieces = []
        for a, b in zip(starts, stops):
            a, b = int(a), int(b)
            ts, vs = list(t[a : b + 1]), list(values[a : b + 1])
            if a in ext:
                te, ve = ext[a]
                if te < t[a]:
                    ts.insert(0, te)
                    vs.insert(0, ve)
                elif te > t[a]:
                    ts[0], vs[0] = te, ve
            if b in ext:
                te, ve = ext[b]
                if te > t[b]:
                    ts.append(te)
                    vs.append(ve)
                elif te < t[b]:
                    ts[-1], vs[-1] = te, ve
            ts_a, vs_a = np.array(ts), np.array(vs)
            cells = np.clip(((0.5 * (ts_a[1:] + ts_a[:-1]) - t[0]) / grid.h).astype(int), 0, t.size - 2)
            self.pieces.append((ts_a, vs_a, cells, float(d[a])))
        self.extrema = np.array([ve for _, ve in ext.values()])
        self.k_tail = end_slopes(values, grid.h)[1]

    def _extremum(self, i: int, kind: float) -> tuple[float, float]:
        # kind = +1 for a local max at node i, -1 for a local min
        t = self.grid.t
        h = self.grid.h
        best_t, best_v = t[i], self.v[i]
        for cell in (i - 1, i):
            c3, c2, c1, c0 = self.spline.c[:, cell]
            roots = np.roots([3 * c3, 2 * c2, c1]) if (c3 or c2) else np.array([])
            for x in roots:
                if abs(x.imag) > 0 or not 0.0 < x.real < h:
                    continue
                x = x.real
                val = ((c3 * x + c2) * x + c1) * x + c0
                if kind * (val - best_v) > 0:
                    best_t, best_v = t[cell] + x, val
        return float(best_t), float(best_v)

    def _crossing(self, ts, vs, k, cells, level):
        t = self.grid.t
        c = self.spline.c[:, cells]
        lo = ts[k] - t[cells]
        hi = ts[k + 1] - t[cells]
        v0, v1 = vs[k], vs[k + 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(v1 != v0, (level - v0) / (v1 - v0), 0.5)
        x = lo + np.clip(frac, 0.0, 1.0) * (hi - lo)
        for _ in range(12):
            f = ((c[0] * x + c[1]) * x + c[2]) * x + c[3] - level
            df = (3 * c[0] * x + 2 * c[1]) * x + c[2]
            with np.errstate(divide="ignore", invalid="ignore"):
                step = np.where(df != 0, f / df, 0.0)
            x = np.clip(x - step, lo, hi)
        return t[cells] + x

    def volume(self, level: np.ndarray) -> np.ndarray:
        level = np.asarray(level, dtype=float)
        out = np.zeros_like(level)
        n = self.n
        for ts, vs, cells, direction in self.pieces:
            lo, hi = vs.min(), vs.max()
            # half-open in level so crossings at a shared extremum cancel
            inside = (level >= lo) & (level < hi)
            if not np.any(inside):
                continue
            lv = level[inside]
            if direction > 0:
                k = np.searchsorted(vs, lv, side="right") - 1
            else:
                k = vs.size - np.searchsorted(vs[::-1], lv, side="right") - 1
            k = np.clip(k, 0, vs.size - 2)
            tc = self._crossing(ts, vs, k, cells[k], lv)
            out[inside] += -direction * np.exp(n * tc)
        above = level < self.v[-1]
        if np.any(above & (level <= 0)):
            out[above & (level <= 0)] = np.inf
            above &= level > 0
        if np.any(above):
            k = self.k_tail
            if k is None or k >= 0:
                out[above] = np.inf
            else:
                r_end = self.grid.r_max
                out[above] += (r_end * (level[above] / self.v[-1]) ** (1.0 / k)) ** n
        return out


def decreasing_rearrangement(u: RadialProfile) -> RadialProfile:
    """Equimeasurable radially non-increasing rearrangement of u >= 0.

    Computes u_*(r) = inf{L >= 0 : meas{u > L} < |B_r|} from the level sets of
    the cubic-spline interpolant of u in log r.  A profile that is already
    non-increasing is returned unchanged.
    """
    v = u.values
    if np.any(v < 0):
        raise ValueError("decreasing_rearrangement requires u >= 0")
    if np.all(np.diff(v) <= 0):
        return u
    grid = u.grid
    ls = _LevelSets(grid, v)
    target = grid.nodes**grid.n
    levels = np.unique(np.concatenate(([0.0], v, ls.extrema)))[::-1]  # descending
    vol = ls.volume(levels)  # non-decreasing along ``levels``
    k = np.searchsorted(vol, target, side="left")
    hi = levels[np.clip(k - 1, 0, levels.size - 1)]
    lo = levels[np.clip(k, 0, levels.size - 1)]
    lo = np.where(k >= levels.size, 0.0, lo)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        big = ls.volume(mid) >= target
        lo = np.where(big, mid, lo)
        hi = np.where(big, hi, mid)
    out = np.minimum.accumulate(0.5 * (lo + hi))
    return RadialProfile(grid, out)


def distribution_volume(u: RadialProfile, level: float) -> float:
    """meas{|u| > level} for the cubic-spline interpolant of |u| in log r."""
    ls = _LevelSets(u.grid, np.abs(u.values))
    return ball_volume(u.grid.n) * float(ls.volume(np.array([float(level)]))[0])


def smoothstep5(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Quintic C^2 ramp 0 -> 1 on [0, 1] with first and second derivatives."""
    x = np.clip(x, 0.0, 1.0)
    s = x**3 * (10 - 15 * x + 6 * x**2)
    ds = 30 * x**2 * (1 - x) ** 2
    d2s = 60 * x * (1 - x) * (1 - 2 * x)
    return s, ds, d2s


def cutoff_values(r: np.ndarray, epsilon: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """eta_eps and its first two r-derivatives, evaluated analytically.

    eta = 1 on [2 eps, 1/(2 eps)], 0 outside [eps, 1/eps], with the quintic
    ramp h(|x|/eps) inside and h(1/(eps |x|)) outside.
    """
    if not (0 < epsilon < 0.5):
        raise ValueError("epsilon must lie in (0, 1/2)")
    r = np.asarray(r, dtype=float)
    eta = np.ones_like(r)
    d1 = np.zeros_like(r)
    d2 = np.zeros_like(r)

    inner = r < 2 * epsilon
    x = r[inner] / epsilon - 1.0
    s, ds, d2s = smoothstep5(x)
    eta[inner] = s
    d1[inner] = ds / epsilon
    d2[inner] = d2s / epsilon**2

    outer = r > 1.0 / (2 * epsilon)
    ro = r[outer]
    y = 1.0 / (epsilon * ro)
    s, ds, d2s = smoothstep5(y - 1.0)
    dy = -1.0 / (epsilon * ro**2)
    d2y = 2.0 / (epsilon * ro**3)
    eta[outer] = s
    d1[outer] = ds * dy
    d2[outer] = d2s * dy**2 + ds * d2y
    return eta, d1, d2


@dataclass(frozen=True, eq=False)
class CutoffProfile(RadialProfile):
    """A cutoff sampled together with its exact first and second r-derivatives."""

    d1: np.ndarray = None
    d2: np.ndarray = None
    epsilon: float = math.nan

    def __post_init__(self) -> None:
        super().__post_init__()
        for name in ("d1", "d2"):
            a = np.array(getattr(self, name), dtype=float)
            if a.shape != self.values.shape:
                raise InvalidGrid(f"{name} must match the profile shape")
            a.setflags(write=False)
            object.__setattr__(self, name, a)


def cutoff_annulus(grid: RadialGrid, epsilon: float) -> CutoffProfile:
    """eta_eps on the grid, carrying its analytic derivatives."""
    if not (0 < epsilon < 0.5):
        raise ValueError("epsilon must lie in (0, 1/2)")
    if epsilon <= grid.r_min or 1.0 / epsilon >= grid.r_max:
        raise InvalidGrid(f"cutoff support [{epsilon}, {1 / epsilon}] does not fit in the grid window")
    eta, d1, d2 = cutoff_values(grid.nodes, epsilon)
    return CutoffProfile(grid, eta, d1, d2, float(epsilon))


def ball_cutoff(grid: RadialGrid, delta: float, width: float = 0.5) -> RadialProfile:
    """Smooth radial cutoff equal to 1 on B_{width*delta} and 0 outside B_delta."""
    x = (delta - grid.nodes) / (delta * (1 - width))
    return RadialProfile(grid, smoothstep5(x)[0])


def bubble(params: ProblemParams, grid: RadialGrid) -> RadialProfile:
    """U(r) = (1 + r^{p/(p-1)})^{-(n-p)/p}, the s = mu = 0 extremal."""
    n, p = params.n, params.p
    r = grid.nodes
    return RadialProfile(grid, (1.0 + r ** (p / (p - 1))) ** (-(n - p) / p))


def hardy_bubble(params: ProblemParams, grid: RadialGrid) -> RadialProfile:
    """Bubble-shaped initializer with the Hardy exponents at both ends.

    r^{-g1} (1 + r^{p/(p-1)})^{-(g2 - g1)(p-1)/p}; equals :func:`bubble` when
    mu = 0.
    """
    n, p = params.n, params.p
    g1, g2 = params.hardy_exponents()
    k = p / (p - 1)
    r = grid.nodes
    vals = np.exp(-g1 * np.log(r) - (g2 - g1) / k * np.log1p(r**k))
    return RadialProfile(grid, vals)


# --- named, seeded test-profile generator ---------------------------------

PROFILE_KINDS = ("log_gaussian", "scaled_bubble", "exponential", "bump_with_dip", "signed")


def random_profile(grid: RadialGrid, rng: np.random.Generator, kind: str, p: float = 2.0) -> RadialProfile:
    """Draw one smooth finite-energy test profile of the given kind.

    log_gaussian   A exp(-(log r - c)^2 / (2 w^2))
    scaled_bubble  A (1 + (r/L)^{p/(p-1)})^{-(n-p)/p}
    exponential    A exp(-(r/L)^b)
    bump_with_dip  non-negative, non-monotone: a centred plateau, a dip, and
                   an outer log-gaussian shell
    signed         log_gaussian minus a displaced log_gaussian
    """
    n = grid.n
    t, r = grid.t, grid.nodes
    amp = rng.uniform(0.5, 2.0)
    if kind == "log_gaussian":
        c, w = rng.uniform(-2, 2), rng.uniform(0.4, 1.5)
        v = amp * np.exp(-((t - c) ** 2) / (2 * w * w))
    elif kind == "scaled_bubble":
        L = math.exp(rng.uniform(-2, 2))
        v = amp * (1 + (r / L) ** (p / (p - 1))) ** (-(n - p) / p)
    elif kind == "exponential":
        L, b = math.exp(rng.uniform(-1, 1)), rng.uniform(1.0, 2.0)
        v = amp * np.exp(-((r / L) ** b))
    elif kind == "bump_with_dip":
        L = math.exp(rng.uniform(-1, 1))
        core = np.exp(-((r / L) ** 2))
        c = math.log(L) + rng.uniform(1.0, 2.0)
        shell = rng.uniform(0.6, 1.5) * np.exp(-((t - c) ** 2) / (2 * rng.uniform(0.2, 0.5) ** 2))
        v = amp * (core + shell)
    elif kind == "signed":
        c, w = rng.uniform(-1, 1), rng.uniform(0.4, 1.0)
        d = rng.uniform(0.8, 2.0)
        v = amp * (np.exp(-((t - c) ** 2) / (2 * w * w)) - rng.uniform(0.3, 0.9) * np.exp(-((t - c - d) ** 2) / (2 * w * w)))
    else:
        raise ValueError(f"unknown profile kind {kind!r}")
    return RadialProfile(grid, v)


def profile_suite(
    grid: RadialGrid, seed: int, count: int, kinds: Iterable[str] = PROFILE_KINDS, p: float = 2.0
) -> list[RadialProfile]:
    """``count`` profiles cycling through ``kinds``, reproducible from ``seed``."""
    rng = np.random.default_rng(seed)
    kinds = tuple(kinds)
    return [random_profile(grid, rng, kinds[i % len(kinds)], p) for i in range(count)]


# --- two-column text format ------------------------------------------------

def write_profile(path: str | Path, u: RadialProfile, comments: Iterable[str] = ()) -> None:
    lines = [f"# {c}" for c in comments]
    lines.append(f"# grid {u.grid.to_json()}")
    lines.extend(f"{r!r} {v!r}" for r, v in zip(u.grid.nodes.tolist(), u.values.tolist()))
    Path(path).write_text("\n".join(lines) + "\n")


def read_profile(path: str | Path, n: int | None = None) -> RadialProfile:
    """Read a ``r value`` file; the grid is rebuilt from the node column."""
    import json

    spec = None
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line.startswith("# grid "):
                spec = json.loads(line[len("# grid "):])
            continue
        a, b = line.split()[:2]
        rows.append((float(a), float(b)))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.array(rows)
    r, v = data[:, 0], data[:, 1]
    dim = n if n is not None else (spec["n"] if spec else None)
    if dim is None:
        raise ValueError("dimension unknown: pass n or include a grid comment")
    if spec and int(spec["m"]) == len(r):
        grid = RadialGrid(float(spec["r_min"]), float(spec["r_max"]), int(spec["m"]), int(dim))
    else:
        grid = RadialGrid(float(r[0]), float(r[-1]), len(r), int(dim))
    if not np.allclose(grid.nodes, r, rtol=1e-10, atol=0):
        raise InvalidGrid(f"{path}: nodes are not log-uniform")
    return RadialProfile(grid, v)
