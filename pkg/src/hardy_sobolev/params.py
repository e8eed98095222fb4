"""Exponent arithmetic and threshold constants for the double-critical problem."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass


class InvalidParameters(ValueError):
    """Raised when (n, p, s, mu, q) fall outside the admissible range."""


def _check_np(n: int, p: float) -> None:
    if int(n) != n or n < 2:
        raise InvalidParameters(f"dimension n must be an integer >= 2, got {n!r}")
    if not (1.0 < p < n):
        raise InvalidParameters(f"need 1 < p < n, got p={p!r}, n={n!r}")


def critical_sobolev_exponent(n: int, p: float) -> float:
    """Return the critical Sobolev exponent n*p/(n-p)."""
    _check_np(n, p)
    return n * p / (n - p)


def hardy_sobolev_exponent(n: int, p: float, s: float) -> float:
    """Return p*(n-s)/(n-p); equals the Sobolev exponent when s == 0."""
    _check_np(n, p)
    if not (0.0 <= s < p):
        raise InvalidParameters(f"need 0 <= s < p, got s={s!r}, p={p!r}")
    return p * (n - s) / (n - p)


def hardy_best_constant(n: int, p: float) -> float:
    """Optimal Hardy constant ((n-p)/p)**p."""
    _check_np(n, p)
    return ((n - p) / p) ** p


@dataclass(frozen=True)
class ProblemParams:
    """Dimension, exponents and potential strength, validated on construction.

    ``q`` is the optional replacement exponent for the Sobolev nonlinearity
    used by the nonexistence scan.  ``None`` means the critical value.
    """

    n: int
    p: float
    s: float = 0.0
    mu: float = 0.0
    q: float | None = None

    def __post_init__(self) -> None:
        _check_np(self.n, self.p)
        if not (0.0 <= self.s < self.p):
            raise InvalidParameters(f"need 0 <= s < p, got s={self.s!r}")
        for name in ("p", "s", "mu"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParameters(f"{name} must be finite")
        if self.mu >= self.mu1:
            raise InvalidParameters(
                f"need mu < mu1 = {self.mu1:.6g}, got mu={self.mu!r}"
            )
        if self.q is not None and not (self.q > 1.0 and math.isfinite(self.q)):
            raise InvalidParameters(f"q must be a finite real > 1, got {self.q!r}")

    @property
    def p_star(self) -> float:
        return critical_sobolev_exponent(self.n, self.p)

    @property
    def p_star_s(self) -> float:
        return hardy_sobolev_exponent(self.n, self.p, self.s)

    @property
    def mu1(self) -> float:
        return hardy_best_constant(self.n, self.p)

    @property
    def q_eff(self) -> float:
        """Exponent of the unweighted nonlinearity (p_star unless overridden)."""
        return self.p_star if self.q is None else float(self.q)

    @property
    def scaling_exponent(self) -> float:
        """The weight (n-p)/p of the dilation group u -> r^{(n-p)/p} u(r x)."""
        return (self.n - self.p) / self.p

    def hardy_exponents(self) -> tuple[float, float]:
        """Roots g1 < (n-p)/p < g2 of g^{p-1} (n - p - g (p-1)) = mu.

        A radial solution of the Hardy-perturbed p-Laplace equation behaves
        like r^{-g1} at the origin and like r^{-g2} at infinity.  For p != 2
        the left side is only defined for g >= 0, so negative mu is handled
        through the odd extension g -> sign(g)|g|^{p-1}.
        """
        return hardy_exponents(self.n, self.p, self.mu)

    def replace(self, **changes) -> "ProblemParams":
        fields = {"n": self.n, "p": self.p, "s": self.s, "mu": self.mu, "q": self.q}
        fields.update(changes)
        return ProblemParams(**fields)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "s": self.s,
            "mu": self.mu,
            "q": self.q,
            "p_star": self.p_star,
            "p_star_s": self.p_star_s,
            "mu1": self.mu1,
        }


def hardy_exponents(n: int, p: float, mu: float) -> tuple[float, float]:
    _check_np(n, p)
    from scipy.optimize import brentq

    peak = (n - p) / p

    def f(g: float) -> float:
        return math.copysign(abs(g) ** (p - 1), g) * (n - p - g * (p - 1)) - mu

    mu1 = hardy_best_constant(n, p)
    if mu >= mu1:
        raise InvalidParameters("no real Hardy exponents for mu >= mu1")
    if p == 2.0:
        disc = math.sqrt((n - 2) ** 2 / 4.0 - mu)
        return (n - 2) / 2.0 - disc, (n - 2) / 2.0 + disc
    if mu == 0.0:
        return 0.0, (n - p) / (p - 1)

    # the small root is a cusp of |g|^{p-1}; solve for y = sign(g)|g|^{p-1} there
    def g_of(y: float) -> float:
        return math.copysign(abs(y) ** (1.0 / (p - 1)), y)

    def f1(y: float) -> float:
        return y * (n - p - g_of(y) * (p - 1)) - mu

    y_peak = peak ** (p - 1)
    y0 = mu / (n - p)  # linearisation, accurate for small |mu|
    lo, hi1 = y0 - abs(y0), min(y0 + abs(y0), y_peak)
    if not (f1(lo) < 0 < f1(hi1)):
        lo, hi1 = -1.0, y_peak
        while f1(lo) > 0:
            lo *= 2.0
    y1 = brentq(f1, lo, hi1, xtol=1e-300, rtol=4 * sys.float_info.epsilon, maxiter=500)
    # f(peak) = mu1 - mu > 0 and f decreases to -inf beyond
    hi = (n - p) / (p - 1)
    while f(hi) > 0:
        hi *= 2.0
    g2 = brentq(f, peak, hi, xtol=1e-15, rtol=4 * sys.float_info.epsilon, maxiter=500)
    return g_of(y1), g2


def mountain_pass_threshold(params: ProblemParams, K0: float, Ks: float) -> float:
    """Upper bound c_star for the admissible mountain-pass level.

    ``K0`` and ``Ks`` are the best constants (not their inverses) for the
    unweighted and weighted embeddings.
    """
    if not (K0 > 0 and Ks > 0) or not (math.isfinite(K0) and math.isfinite(Ks)):
        raise InvalidParameters("best constants must be positive and finite")
    n, p, s = params.n, params.p, params.s
    first = K0 ** (-n / p) / n
    second = (p - s) / (p * (n - s)) * Ks ** (-(n - s) / (p - s))
    return float(min(first, second))
