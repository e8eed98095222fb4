"""Pohozaev-type identities for radial profiles and the nonexistence scan."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .params import ProblemParams
from .profile import CutoffProfile, RadialProfile
from .quadrature import InvalidGrid, RadialGrid, t_derivative, weighted_power_integral

WORKERS_ENV = "HARDY_SOBOLEV_WORKERS"
_FD_ORDER = 4
_EDGE = 8


@dataclass(frozen=True)
class PohozaevReport:
    lhs: float = math.nan
    boundary: float = math.nan
    identity_residual: float = math.nan
    functional_value: float = math.nan
    q_coefficient_check: float = math.nan

    def to_dict(self) -> dict[str, float]:
        return {k: float(v) for k, v in asdict(self).items()}


def _phi(x: np.ndarray, p: float) -> np.ndarray:
    return np.abs(x) ** (p - 1.0) * np.sign(x)


def _eta_derivatives(grid: RadialGrid, eta: RadialProfile) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(eta, CutoffProfile):
        return eta.d1, eta.d2
    r, h = grid.nodes, grid.h
    et = t_derivative(eta.values, h, 1, _FD_ORDER)
    ett = t_derivative(eta.values, h, 2, _FD_ORDER)
    return et / r, (ett - et) / r**2


def identity_check(
    params: ProblemParams, grid: RadialGrid, u: RadialProfile, eta: RadialProfile
) -> PohozaevReport:
    """Both sides of the radial integration-by-parts identity.

    lhs = int |u'|^{p-2} u' (r (eta u)')' + ((n-p)/p) eta |u'|^p
    B   = int u |u'|^{p-2} u' eta' + r eta'' |u'|^{p-2} u' u + (1 + 1/p') r eta' |u'|^p

    with all integrals over R^n.  Derivatives of u are fourth-order differences
    in t; those of eta are analytic when eta is a :class:`CutoffProfile`.
    """
    n, p = params.n, params.p
    e = np.asarray(eta.values)
    if np.any(e[:_EDGE] != 0) or np.any(e[-_EDGE:] != 0):
        raise InvalidGrid("eta must vanish near both ends of the grid window")
    r, h = grid.nodes, grid.h
    v = np.asarray(u.values, dtype=float)
    ut = t_derivative(v, h, 1, _FD_ORDER)
    utt = t_derivative(v, h, 2, _FD_ORDER)
    d1, d2 = _eta_derivatives(grid, eta)
    et = r * d1
    ett = r * d1 + r * r * d2
    wtt = ett * v + 2 * et * ut + e * utt
    du = ut / r
    flux = _phi(du, p)
    adu_p = np.abs(du) ** p
    pp = p / (p - 1.0)

    t1 = flux * wtt / r
    t2 = (n - p) / p * e * adu_p
    b1 = v * flux * d1
    b2 = r * d2 * flux * v
    b3 = (1.0 + 1.0 / pp) * r * d1 * adu_p

    wts = grid.surface_factor * grid.t_weights * r**n

    def integral(f: np.ndarray) -> float:
        return float(np.dot(wts, f))

    lhs = integral(t1) + integral(t2)
    boundary = integral(b1) + integral(b2) + integral(b3)
    scale = sum(integral(np.abs(f)) for f in (t1, t2, b1, b2, b3))
    residual = abs(lhs - boundary) / scale if scale > 0 else 0.0
    return PohozaevReport(lhs=lhs, boundary=boundary, identity_residual=residual)


def _pieces(
    params: ProblemParams, grid: RadialGrid, u: RadialProfile, q: float, eta: RadialProfile | None, ends
) -> tuple[float, float, float]:
    """Hardy, Hardy-Sobolev and q-power integrals, optionally localised by eta."""
    p, s = params.p, params.s
    ps = params.p_star_s
    if eta is None:
        AH = params.mu * weighted_power_integral(grid, u, p, p, ends)
        AS = weighted_power_integral(grid, u, ps, s, ends)
        Aq = weighted_power_integral(grid, u, q, 0.0, ends)
        return AH, AS, Aq
    r = grid.nodes
    au = np.abs(u.values)
    w = grid.surface_factor * grid.t_weights * np.asarray(eta.values) * r**grid.n
    AH = params.mu * float(np.dot(w, au**p * r**-p))
    AS = float(np.dot(w, au**ps * r**-s))
    Aq = float(np.dot(w, au**q))
    return AH, AS, Aq


def _combine(params: ProblemParams, q: float, AH: float, AS: float, Aq: float) -> tuple[float, float]:
    """((n-p)/p) int u f - n int F - int x.grad_x F, and the sum of term sizes."""
    n, p, s = params.n, params.p, params.s
    ps = params.p_star_s
    uf = AH + AS + Aq
    F = AH / p + AS / ps + Aq / q
    xdF = -AH - s / ps * AS
    value = (n - p) / p * uf - n * F - xdF
    size = (n - p) / p * (abs(AH) + AS + Aq) + n * (abs(AH) / p + AS / ps + Aq / q) + abs(AH) + s / ps * AS
    return value, size


def pohozaev_functional(
    params: ProblemParams,
    grid: RadialGrid,
    u: RadialProfile,
    q: float,
    eta: RadialProfile | None = None,
    ends="auto",
) -> float:
    """The Pohozaev integral for f = mu|u|^{p-2}u|x|^{-p} + |u|^{p*(s)-2}u|x|^{-s} + |u|^{q-2}u.

    Evaluated term by term; the Hardy and Hardy-Sobolev terms cancel because
    their exponents are scale critical, leaving n (1/p* - 1/q) int |u|^q.
    With ``eta`` the integrand is localised by the cutoff.
    """
    if not q > 1:
        raise ValueError("q must exceed 1")
    if not np.any(u.values):
        return 0.0
    value, _ = _combine(params, q, *_pieces(params, grid, u, q, eta, ends))
    return value


def pohozaev_report(
    params: ProblemParams,
    grid: RadialGrid,
    u: RadialProfile,
    q: float,
    eta: RadialProfile | None = None,
) -> PohozaevReport:
    """Identity fields (when eta is given) plus the functional and its q-coefficient check."""
    base = identity_check(params, grid, u, eta) if eta is not None else PohozaevReport()
    if not np.any(u.values):
        return PohozaevReport(base.lhs, base.boundary, base.identity_residual, 0.0, 0.0)
    AH, AS, Aq = _pieces(params, grid, u, q, None, "auto")
    value, size = _combine(params, q, AH, AS, Aq)
    expected = params.n * (1.0 / params.p_star - 1.0 / q) * Aq
    check = abs(value - expected) / size if size > 0 else 0.0
    return PohozaevReport(base.lhs, base.boundary, base.identity_residual, value, check)


# --- nonexistence scan -----------------------------------------------------

@dataclass(frozen=True)
class ScanRow:
    q: float
    el_residual: float
    q_mass: float
    pohozaev_value: float
    q_mass_initial: float
    iterations: int
    status: str

    @property
    def collapse(self) -> float:
        """Initial over final q-mass."""
        return self.q_mass_initial / self.q_mass if self.q_mass > 0 else math.inf


SCAN_COLUMNS = ("q", "el_residual", "q_mass", "pohozaev_value", "q_mass_initial", "iterations", "status")


def default_scan_init(grid: RadialGrid) -> RadialProfile:
    """exp(-4 r): finite q-mass for every q, and concentrated enough that
    the ray through it has an interior maximum even when q = p."""
    return RadialProfile(grid, np.exp(-4.0 * grid.nodes))


def _scan_row(job: tuple) -> ScanRow:
    from .solvers import SolverFailure, SolverOptions, _Discrete, _ray_energy, solve_double_critical

    pdict, gspec, init_values, q, opts_dict = job
    grid = RadialGrid(gspec["r_min"], gspec["r_max"], gspec["m"], gspec["n"])
    params = ProblemParams(**pdict).replace(q=q)
    opts = SolverOptions.from_mapping(opts_dict)
    init = RadialProfile(grid, np.asarray(init_values))
    disc = _Discrete(params, grid)
    try:
        v0 = init.values / disc.norm_p(init.values) ** (1.0 / params.p)
        t0, _ = _ray_energy(params, disc, v0)
        m0 = disc.mass(t0 * v0, q, 0.0)
    except Exception as exc:  # noqa: BLE001 - recorded, never raised
        return ScanRow(q, math.nan, math.nan, math.nan, math.nan, 0, f"error: {exc}")
    status = "ok"
    try:
        rep = solve_double_critical(params, grid, opts, init=init, with_threshold=False)
        if not rep.converged:
            status = "not_converged"
    except SolverFailure as exc:
        rep, status = exc.report, f"failed: {exc}"
        if rep is None:
            return ScanRow(q, math.nan, math.nan, math.nan, m0, 0, status)
    except Exception as exc:  # noqa: BLE001
        return ScanRow(q, math.nan, math.nan, math.nan, m0, 0, f"error: {exc}")
    u = rep.profile
    q_mass = disc.mass(u.values, q, 0.0)
    value = pohozaev_functional(params, grid, u, q, ends=None)
    return ScanRow(q, rep.el_residual, q_mass, value, m0, rep.iterations, status)


def worker_count(default: int | None = None) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return default or max(1, min(4, os.cpu_count() or 1))


def nonexistence_scan(
    params: ProblemParams,
    grid: RadialGrid,
    q_values: Sequence[float],
    opts=None,
    init: RadialProfile | None = None,
    workers: int | None = None,
) -> list[ScanRow]:
    """Run the double-critical descent with |u|^{q-2}u in place of the
    critical Sobolev term, one row per q.

    Masses are those of the discrete window functional: a power-law tail
    whose q-mass diverges is cut at r_max.  Rows run in parallel.
    """
    from .solvers import SolverOptions

    for q in q_values:
        if not q > 1:
            raise ValueError(f"q must exceed 1, got {q!r}")
    grid = grid if grid.n == params.n else grid.with_dim(params.n)
    opts = opts or SolverOptions()
    init = init or default_scan_init(grid)
    pdict = {"n": params.n, "p": params.p, "s": params.s, "mu": params.mu}
    jobs = [(pdict, grid.spec(), np.asarray(init.values), float(q), opts.to_dict()) for q in q_values]
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(jobs) <= 1:
        return [_scan_row(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_scan_row, jobs))


def write_scan_csv(rows: Iterable[ScanRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SCAN_COLUMNS)
        for row in rows:
            w.writerow([repr(getattr(row, c)) if isinstance(getattr(row, c), float) else getattr(row, c) for c in SCAN_COLUMNS])
