"""Radial extremals, the double-critical ground state, and a shooting oracle.

Every solver works on one discrete functional: the staggered gradient sum
and the Gregory mass sums of :mod:`quadrature`, closed off at both ends by
power laws r^{-g1} (origin) and r^{-g2} (infinity) with the analytic Hardy
exponents.  Gradients are the exact adjoints of those sums, so the Euler-
Lagrange residual below vanishes at a discrete critical point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Any

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import LinAlgError, solveh_banded

from .energy import EnergyBreakdown, compose_energy, fiber_maximum
from .params import InvalidParameters, ProblemParams, mountain_pass_threshold
from .profile import RadialProfile, hardy_bubble
from .quadrature import RadialGrid, build_log_grid

_EDGE = 4  # nodes carrying Gregory end weights, excluded from residuals
_TINY = 1e-150


class NoExtremal(InvalidParameters):
    """The quotient has no radial minimiser in this parameter regime."""


class SolverFailure(RuntimeError):
    """A solve collapsed or broke down; ``report`` holds the last iterate."""

    def __init__(self, message: str, report: Any = None) -> None:
        super().__init__(message)
        self.report = report


class ShootingFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 5000
    tol: float = 1e-6
    stall_rtol: float = 1e-12
    armijo: float = 1e-4
    shrink: float = 0.5
    growth: float = 2.0
    max_step: float = 1.0
    stall_count: int = 5
    min_step: float = 1e-12
    eps_reg: float = 1e-12

    @classmethod
    def from_mapping(cls, d: dict[str, Any]) -> "SolverOptions":
        kinds = {f.name: f.type for f in fields(cls)}
        out = {}
        for k, v in d.items():
            if k not in kinds:
                raise InvalidParameters(f"unknown solver option {k!r}")
            out[k] = int(v) if kinds[k] in ("int", int) else float(v)
        return cls(**out)

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class ExtremalResult:
    profile: RadialProfile
    inv_constant: float
    el_residual: float
    iterations: int
    converged: bool
    history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def best_constant(self) -> float:
        return 1.0 / self.inv_constant


@dataclass(frozen=True)
class SolveReport:
    profile: RadialProfile
    energy: EnergyBreakdown
    el_residual: float
    threshold: float
    in_window: bool
    iterations: int = 0
    converged: bool = False
    K0: float = math.nan
    Ks: float = math.nan


def _phi(x: np.ndarray, e: float) -> np.ndarray:
    if e == 2.0:
        return x
    return np.abs(x) ** (e - 1.0) * np.sign(x)


class _Discrete:
    """The discrete functional pieces and their exact gradients."""

    def __init__(self, params: ProblemParams, grid: RadialGrid) -> None:
        if grid.n != params.n:
            grid = grid.with_dim(params.n)
        self.params = params
        self.grid = grid
        n, p = params.n, params.p
        g1, g2 = params.hardy_exponents()
        self.k_head, self.k_tail = -g1, -g2
        self.sigma = grid.surface_factor
        self.h = grid.h
        self.r = grid.nodes
        self.rho = grid.midpoints ** (n - p)
        r0, r1 = self.r[0], self.r[-1]
        self.g_head = self._head(abs(self.k_head) ** p * r0 ** (n - p), n - p + p * self.k_head)
        self.g_tail = self._tail(abs(self.k_tail) ** p * r1 ** (n - p), n - p + p * self.k_tail)
        self._mass_cache: dict[tuple[float, float], tuple[np.ndarray, float, float]] = {}

    @staticmethod
    def _head(coef: float, power: float) -> float:
        return coef / power if power > 0 else 0.0

    @staticmethod
    def _tail(coef: float, power: float) -> float:
        return coef / -power if power < 0 else 0.0

    def _mass_data(self, e: float, a: float) -> tuple[np.ndarray, float, float]:
        key = (e, a)
        if key not in self._mass_cache:
            n = self.params.n
            W = self.grid.t_weights * self.r ** (n - a)
            ch = self._head(self.r[0] ** (n - a), n - a + e * self.k_head)
            ct = self._tail(self.r[-1] ** (n - a), n - a + e * self.k_tail)
            self._mass_cache[key] = (W, ch, ct)
        return self._mass_cache[key]

    # -- integrals --------------------------------------------------------
    def grad_term(self, u: np.ndarray) -> float:
        p = self.params.p
        du = np.diff(u) / self.h
        body = self.h * float(np.dot(np.abs(du) ** p, self.rho))
        ends = self.g_head * abs(u[0]) ** p + self.g_tail * abs(u[-1]) ** p
        return self.sigma * (body + ends)

    def grad_term_gradient(self, u: np.ndarray) -> np.ndarray:
        p = self.params.p
        flux = _phi(np.diff(u) / self.h, p) * self.rho
        g = np.zeros_like(u)
        g[:-1] -= flux
        g[1:] += flux
        g *= p
        g[0] += p * self.g_head * _phi(u[0], p)
        g[-1] += p * self.g_tail * _phi(u[-1], p)
        return self.sigma * g

    def mass(self, u: np.ndarray, e: float, a: float) -> float:
        W, ch, ct = self._mass_data(e, a)
        au = np.abs(u)
        return self.sigma * (float(np.dot(W, au**e)) + ch * au[0] ** e + ct * au[-1] ** e)

    def mass_gradient(self, u: np.ndarray, e: float, a: float) -> np.ndarray:
        W, ch, ct = self._mass_data(e, a)
        g = e * W * _phi(u, e)
        g[0] += e * ch * _phi(u[0], e)
        g[-1] += e * ct * _phi(u[-1], e)
        return self.sigma * g

    def breakdown(self, u: np.ndarray) -> EnergyBreakdown:
        """Energy terms of the discrete functional (masses of u_+)."""
        p, s = self.params.p, self.params.s
        up = np.maximum(u, 0.0)
        return compose_energy(
            self.params,
            self.grad_term(u),
            self.mass(u, p, p),
            self.mass(up, self.params.q_eff, 0.0),
            self.mass(up, self.params.p_star_s, s),
        )

    def norm_p(self, u: np.ndarray) -> float:
        p = self.params.p
        return self.grad_term(u) - self.params.mu * self.mass(u, p, p)

    def norm_p_gradient(self, u: np.ndarray) -> np.ndarray:
        p = self.params.p
        return self.grad_term_gradient(u) - self.params.mu * self.mass_gradient(u, p, p)

    # -- preconditioner ---------------------------------------------------
    def hessian_banded(
        self, u: np.ndarray, eps: float, with_hardy: bool = True, screen: bool = False
    ) -> np.ndarray:
        """Upper banded form of the Hessian of the norm^p, floored.

        ``screen`` adds the Hessian of the unweighted p-mass, which keeps the
        inverse from spreading mass into the far window.
        """
        p, h = self.params.p, self.h
        du = np.diff(u) / h
        if p == 2.0:
            lin = np.ones_like(du)
            ends = np.ones(2)
        else:
            # local floors keep |.|^{p-2} finite without swamping small values
            au = np.abs(u)
            floor = eps * (au[:-1] + au[1:]) / h + _TINY
            lin = (du * du + floor * floor) ** ((p - 2.0) / 2.0)
            ue = au[[0, -1]]
            ends = (ue * ue + (eps * ue + _TINY) ** 2) ** ((p - 2.0) / 2.0)
        c = self.sigma * p * (p - 1.0) * lin * self.rho / h
        diag = np.zeros_like(u)
        diag[:-1] += c
        diag[1:] += c
        diag[0] += self.sigma * p * (p - 1.0) * self.g_head * ends[0]
        diag[-1] += self.sigma * p * (p - 1.0) * self.g_tail * ends[1]
        for coef, a in ((-self.params.mu if with_hardy else 0.0, p), (1.0 if screen else 0.0, 0.0)):
            if coef == 0.0:
                continue
            W, ch, ct = self._mass_data(p, a)
            if p == 2.0:
                hw = W.copy()
            else:
                au = np.abs(u)
                hw = W * (au * au + (eps * au + _TINY) ** 2) ** ((p - 2.0) / 2.0)
            hw[0] += ch
            hw[-1] += ct
            diag += coef * self.sigma * p * (p - 1.0) * hw
        # relative floor: entries span many decades across the window
        diag += eps * np.abs(diag)
        ab = np.zeros((2, u.size))
        ab[0, 1:] = -c
        ab[1] = diag
        return ab

    def precondition(self, u: np.ndarray, g: np.ndarray, eps: float, screen: bool = False) -> np.ndarray:
        """Solve P d = g with P the Hessian above.

        P is symmetrically scaled by |u| first so each component of d is
        resolved relative to the local size of u; without this the tail,
        many decades below the peak, sits at the rounding floor of the solve.
        """
        scale = np.maximum(np.abs(u), np.finfo(float).tiny ** 0.5)
        for with_hardy in (True, False):
            ab = self.hessian_banded(u, eps, with_hardy, screen)
            ab[0, 1:] *= scale[:-1] * scale[1:]
            ab[1] *= scale * scale
            try:
                return scale * solveh_banded(ab, scale * g)
            except (LinAlgError, ValueError):
                continue
        raise SolverFailure("preconditioner is not positive definite")


# --- residual --------------------------------------------------------------

def euler_lagrange_residual(
    params: ProblemParams,
    grid: RadialGrid,
    u: RadialProfile,
    lam: float,
    double_critical: bool = False,
) -> float:
    """Relative L2 residual of the radial equation, written in t = log r.

    -(r^{n-p} phi_p(u_t))_t - mu r^{n-p} phi_p(u) = lam r^{n-s} u_+^{p*(s)-1}
    [+ r^n u_+^{q-1} when ``double_critical``], which is the radial equation
    multiplied by r^n.  The flux uses the staggered first differences of the
    gradient quadrature; the norm is uniform in t over interior nodes.
    """
    n, p, s, mu = params.n, params.p, params.s, params.mu
    v = np.asarray(u.values, dtype=float)
    if not np.any(v):
        return 0.0
    r, h = grid.nodes, grid.h
    flux = _phi(np.diff(v) / h, p) * grid.midpoints ** (n - p)
    div = np.zeros_like(v)
    div[1:-1] = (flux[1:] - flux[:-1]) / h
    vp = np.maximum(v, 0.0)
    hardy = mu * r ** (n - p) * _phi(v, p)
    rhs = lam * r ** (n - s) * vp ** (params.p_star_s - 1.0)
    if double_critical:
        rhs = rhs + r**n * vp ** (params.q_eff - 1.0)
    sl = slice(_EDGE, v.size - _EDGE)
    res = -div[sl] - hardy[sl] - rhs[sl]
    size = np.abs(div[sl]) + np.abs(hardy[sl]) + np.abs(rhs[sl])
    den = float(np.linalg.norm(size))
    return float(np.linalg.norm(res)) / den if den > 0 else 0.0


# --- quotient minimisation -------------------------------------------------

def _minimize_quotient(
    params: ProblemParams, grid: RadialGrid, init: RadialProfile, opts: SolverOptions
) -> ExtremalResult:
    disc = _Discrete(params, grid)
    grid = disc.grid
    p, e, s = params.p, params.p_star_s, params.s
    u = np.abs(np.asarray(init.values, dtype=float))
    D = disc.mass(u, e, s)
    if not D > 0:
        raise ValueError("initial profile has zero weighted mass")
    u = u / D ** (1.0 / e)
    Q = disc.norm_p(u)
    history = [Q]
    step = 1.0
    res = math.inf
    it = 0
    stalls = 0
    for it in range(1, opts.max_iter + 1):
        gN = disc.norm_p_gradient(u)
        gD = disc.mass_gradient(u, e, s)
        g = gN - (p / e) * Q * gD
        # scaled so that a unit step is the normalised power iteration
        d = -(p - 1.0) * disc.precondition(u, g, opts.eps_reg)
        slope = float(np.dot(g, d))
        if not slope < 0:
            d, slope = -g, -float(np.dot(g, g))
        step = min(step * opts.growth, opts.max_step)
        accepted = False
        while step >= opts.min_step:
            w = np.abs(u + step * d)
            Dw = disc.mass(w, e, s)
            if Dw > 0:
                w = w / Dw ** (1.0 / e)
                Qw = disc.norm_p(w)
                if Qw <= Q + opts.armijo * step * slope:
                    accepted = True
                    break
            step *= opts.shrink
        if not accepted:
            break
        decrease = (Q - Qw) / abs(Q)
        u, Q = w, Qw
        history.append(Q)
        lam = Q  # mass normalised to one
        res = euler_lagrange_residual(params, grid, RadialProfile(grid, u), lam)
        stalls = stalls + 1 if decrease < opts.stall_rtol else 0
        if res < opts.tol or stalls >= opts.stall_count:
            break
    prof = RadialProfile(grid, u)
    res = euler_lagrange_residual(params, grid, prof, Q)
    return ExtremalResult(prof, Q, res, it, bool(res < opts.tol), tuple(history))


def minimize_hardy_sobolev(
    params: ProblemParams,
    grid: RadialGrid,
    init: RadialProfile | None = None,
    opts: SolverOptions | None = None,
) -> ExtremalResult:
    """Minimise the weighted Sobolev quotient over radial profiles.

    Preconditioned projected descent: the step direction is the gradient of
    the quotient mapped through the (tridiagonal) Hessian of the norm^p, the
    iterate is renormalised to unit weighted mass, and a backtracking line
    search enforces a monotone decrease of the quotient.  For p = 2 a unit
    step is exactly the normalised nonlinear power iteration.
    """
    if params.s == 0.0 and params.mu < 0.0:
        raise NoExtremal("no extremal for s = 0 and mu < 0: the infimum escapes by translation")
    return radial_constant(params, grid, init, opts)


def radial_constant(
    params: ProblemParams,
    grid: RadialGrid,
    init: RadialProfile | None = None,
    opts: SolverOptions | None = None,
) -> ExtremalResult:
    """Minimiser of the quotient restricted to radial profiles, any mu < mu1.

    For s = 0 and mu < 0 this is the radial constant only; the full infimum
    is not attained.
    """
    opts = opts or SolverOptions()
    grid = grid if grid.n == params.n else grid.with_dim(params.n)
    if init is None:
        init = hardy_bubble(params, grid)
    return _minimize_quotient(params, grid, init, opts)


def best_constants(
    params: ProblemParams, grid: RadialGrid, opts: SolverOptions | None = None
) -> tuple[float, float]:
    """Estimated (K0, Ks): inverses of the minimised radial quotients."""
    zero = ProblemParams(params.n, params.p, 0.0, params.mu)
    r0 = radial_constant(zero, grid, None, opts)
    rs = r0 if params.s == 0.0 else radial_constant(params.replace(q=None), grid, None, opts)
    return r0.best_constant, rs.best_constant


# --- double-critical ground state ------------------------------------------

def _ray_energy(params: ProblemParams, disc: _Discrete, v: np.ndarray) -> tuple[float, float]:
    """(t_max, J(v)) for the discrete functional, J(v) = max_t Phi(t v)."""
    p, q, s = params.p, params.q_eff, params.s
    vp = np.maximum(v, 0.0)
    N = disc.norm_p(v)
    S = disc.mass(vp, q, 0.0)
    H = disc.mass(vp, params.p_star_s, s)
    b = EnergyBreakdown(0.0, 0.0, N, S, H, 0.0)
    return fiber_maximum(params, b)


def _phi_gradient(params: ProblemParams, disc: _Discrete, w: np.ndarray) -> np.ndarray:
    p, q, ps = params.p, params.q_eff, params.p_star_s
    wp = np.maximum(w, 0.0)
    return (
        disc.norm_p_gradient(w) / p
        - disc.mass_gradient(wp, q, 0.0) / q
        - disc.mass_gradient(wp, ps, params.s) / ps
    )


def solve_double_critical(
    params: ProblemParams,
    grid: RadialGrid,
    opts: SolverOptions | None = None,
    init: RadialProfile | None = None,
    constants: tuple[float, float] | None = None,
    with_threshold: bool = True,
) -> SolveReport:
    """Nontrivial critical point of Phi by descent on the fibering map.

    The direction v >= 0 is kept at unit norm; each trial point is lifted to
    the ray maximiser t(v) v and the reduced energy J(v) = Phi(t(v) v) must
    decrease.  ``constants`` are (K0, Ks) for the threshold; estimated by
    radial minimisation when omitted.  The reported energy is that of the
    discrete functional being minimised, so the ray condition holds to
    rounding; masses whose power-law tail diverges are window-only.
    """
    opts = opts or SolverOptions()
    if not (0.0 < params.s < params.p):
        raise InvalidParameters("double-critical solve needs 0 < s < p")
    grid = grid if grid.n == params.n else grid.with_dim(params.n)
    disc = _Discrete(params, grid)
    v = np.abs(np.asarray((init or hardy_bubble(params, grid)).values, dtype=float))
    v = v / disc.norm_p(v) ** (1.0 / params.p)
    t, J = _ray_energy(params, disc, v)
    screen = params.q_eff <= params.p
    step = 1.0
    res = math.inf
    it = 0
    stalls = 0
    failure = None
    for it in range(1, opts.max_iter + 1):
        w = t * v
        g = _phi_gradient(params, disc, w)
        d = -params.p * (params.p - 1.0) * disc.precondition(w, g, opts.eps_reg, screen)
        slope = float(np.dot(g, d))
        if not slope < 0:
            d, slope = -g, -float(np.dot(g, g))
        step = min(step * opts.growth, opts.max_step)
        accepted = False
        while step >= opts.min_step:
            cand = np.abs(w + step * d)
            Nc = disc.norm_p(cand)
            if Nc > 0 and np.any(cand):
                vc = cand / Nc ** (1.0 / params.p)
                try:
                    tc, Jc = _ray_energy(params, disc, vc)
                except (ValueError, ArithmeticError):
                    step *= opts.shrink
                    continue
                if Jc <= J + opts.armijo * step * slope:
                    accepted = True
                    break
            step *= opts.shrink
        if not accepted:
            break
        decrease = (J - Jc) / abs(J)
        v, t, J = vc, tc, Jc
        res = euler_lagrange_residual(params, grid, RadialProfile(grid, t * v), 1.0, True)
        if not np.all(np.isfinite(v)) or t * float(np.max(v)) < 1e-300:
            failure = "iterate collapsed to zero"
            break
        stalls = stalls + 1 if decrease < opts.stall_rtol else 0
        if res < opts.tol or stalls >= opts.stall_count:
            break
    prof = RadialProfile(grid, t * v)
    res = euler_lagrange_residual(params, grid, prof, 1.0, True)
    energy = disc.breakdown(prof.values)
    if with_threshold:
        if constants is None:
            constants = best_constants(params, grid, opts)
        K0, Ks = constants
        threshold = mountain_pass_threshold(params, K0, Ks)
    else:
        K0 = Ks = threshold = math.nan
    in_window = bool(0.0 < energy.phi < threshold)
    report = SolveReport(prof, energy, res, threshold, in_window, it, bool(res < opts.tol), K0, Ks)
    if failure is not None:
        raise SolverFailure(failure, report)
    return report


# --- shooting oracle -------------------------------------------------------

def shoot_radial(
    params: ProblemParams,
    u0: float,
    lam: float,
    s_term_only: bool = True,
    grid: RadialGrid | None = None,
    rtol: float = 1e-10,
) -> RadialProfile:
    """Integrate the radial equation outward from r_min in t = log r.

    State (u, w) with w = r^{n-p} phi_p(u_t).  The solution starts on the
    regular branch u ~ u0 r^{-g1} (u ~ u0 when mu = 0) and is sampled at
    the grid nodes.  ``s_term_only`` drops the unweighted critical term.
    """
    if not u0 > 0:
        raise ValueError("u0 must be positive")
    grid = grid or build_log_grid(n=params.n)
    if grid.n != params.n:
        grid = grid.with_dim(params.n)
    n, p, s, mu = params.n, params.p, params.s, params.mu
    ps, q = params.p_star_s, params.q_eff
    g1, _ = params.hardy_exponents()
    pp = p / (p - 1.0)
    t0 = grid.t[0]
    r0 = grid.r_min
    ua = u0 * r0 ** (-g1)
    wa = r0 ** (n - p) * float(_phi(np.array(-g1 * ua), p))
    blow = 1e12 * max(ua, 1.0)

    def rhs(t: float, y: np.ndarray) -> list[float]:
        u, w = y
        r = math.exp(t)
        ut = float(_phi(np.array(w * r ** (p - n)), pp))
        up = max(u, 0.0)
        src = lam * r ** (n - s) * up ** (ps - 1.0)
        if not s_term_only:
            src += r**n * up ** (q - 1.0)
        wt = -mu * r ** (n - p) * float(_phi(np.array(u), p)) - src
        return [ut, wt]

    def blowup(t: float, y: np.ndarray) -> float:
        return blow - abs(y[0])

    blowup.terminal = True
    sol = solve_ivp(
        rhs, (t0, grid.t[-1]), [ua, wa], method="RK45", t_eval=grid.t,
        events=blowup, rtol=rtol, atol=1e-14 * max(ua, 1.0), dense_output=False,
    )
    if sol.status == 1 or sol.y.shape[1] < grid.m:
        raise ShootingFailure(f"solution blew up before r_max for u0={u0!r}")
    if not sol.success:
        raise ShootingFailure(sol.message)
    return RadialProfile(grid, sol.y[0])
