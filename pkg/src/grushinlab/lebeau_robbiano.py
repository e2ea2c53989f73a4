"""Explicit constants of the Lebeau–Robbiano iteration, the shift property
behind it, a finite-dimensional validator, and the dissipation/observation
composition giving the uniform-in-μ bound.

All constants are evaluated in mpmath (50 digits) because factors such as
``e^{2/(sT)^β}`` leave the double range for small ``T``; bounds are returned
as natural logarithms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import mpmath
import numpy as np

__all__ = [
    "PROOF",
    "STATEMENT",
    "INTERNAL",
    "BOUNDARY",
    "LRParams",
    "LRConstants",
    "ShiftReport",
    "SemigroupReport",
    "UniformBound",
    "normalize",
    "derive_constants",
    "kappa0",
    "kappa0_search",
    "kappa_for_scale",
    "verify_shift_property",
    "synthetic_semigroup_check",
    "adaptive_simpson",
    "uniform_cost_bound",
]

PROOF = "PROOF"
STATEMENT = "STATEMENT"
INTERNAL = "INTERNAL"
BOUNDARY = "BOUNDARY"
DPS = 50


@dataclass(frozen=True)
class LRParams:
    """Rates ``a`` (spectral), ``b`` (observation), ``c`` (dissipation) and constants.

    The estimates are ``C_rel e^{2aσ^δ}``, ``C_obs e^{2b/T^β}`` and
    ``C_dissip e^{−2cσT}``.
    """

    a: float
    b: float
    c: float
    beta: float
    delta: float
    C_rel: float = 1.0
    C_obs: float = 1.0
    C_dissip: float = 1.0
    Adm: float = 1.0
    T_max: float = 1.0
    kappa: float = 0.1
    variant: str = PROOF

    def __post_init__(self):
        for name in ("a", "b", "c", "beta", "C_rel", "C_obs", "C_dissip", "Adm", "T_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not 0 < self.kappa < 1:
            raise ValueError("kappa must lie in (0, 1)")
        if self.variant not in (PROOF, STATEMENT):
            raise ValueError(f"unknown variant {self.variant}")

    @property
    def normalized(self) -> bool:
        return abs(self.beta - self.delta / (1 - self.delta)) <= 1e-12 * max(1.0, self.beta)


def normalize(p: LRParams) -> LRParams:
    """Enforce ``β = δ/(1−δ)`` by weakening one estimate.

    If ``β`` is too small it is raised (``T^{−β} ≤ 1 + T^{−β'}``, absorbed as
    ``C_obs e^{2b}``); otherwise ``δ`` is raised to ``β/(1+β)``
    (``σ^δ ≤ 1 + σ^{δ'}``, absorbed as ``C_rel e^{2a}``).
    """
    if p.normalized:
        return p
    target = p.delta / (1 - p.delta)
    if p.beta < target:
        return replace(p, beta=target, C_obs=p.C_obs * math.exp(2 * p.b))
    return replace(p, delta=p.beta / (1 + p.beta), C_rel=p.C_rel * math.exp(2 * p.a))


def _factor(variant: str) -> int:
    return 1 if variant == PROOF else 2


def kappa0(a: float, b: float, c: float, variant: str = PROOF) -> float:
    """Closed form: ``s1 < s2 ⟺ κ F (a+b) < c(1−κ)`` with ``F = 1`` (proof) or 2 (statement)."""
    f = _factor(variant)
    return c / (c + f * (a + b))


def _s1_over_s2(kappa, a, b, c, beta, variant):
    f = _factor(variant)
    k = mpmath.mpf(kappa)
    return (k * (a + b) * f / (c * (1 - k))) ** (1 / mpmath.mpf(beta))


def kappa0_search(a: float, b: float, c: float, beta: float, variant: str = PROOF, tol: float = 1e-15) -> float:
    """Largest ``κ`` with ``s1(κ) < s2(κ)``, by bisection (the ratio is increasing in κ)."""
    with mpmath.workdps(DPS):
        lo, hi = mpmath.mpf(0), mpmath.mpf(1)
        while hi - lo > tol:
            mid = (lo + hi) / 2
            if _s1_over_s2(mid, a, b, c, beta, variant) < 1:
                lo = mid
            else:
                hi = mid
        return float((lo + hi) / 2)


def kappa_for_scale(x: float, a: float, b: float, c: float, beta: float) -> float:
    """``κ = r/(1+r)`` with ``r = x^β c/(a+b)``; ``κ → 0`` as ``x → 0``."""
    r = x**beta * c / (a + b)
    return r / (1 + r)


@dataclass(frozen=True)
class LRConstants:
    params: LRParams
    s1: mpmath.mpf
    s2: mpmath.mpf
    s: mpmath.mpf
    q: mpmath.mpf
    C1: mpmath.mpf
    C2: mpmath.mpf
    T_prime: mpmath.mpf
    f0: mpmath.mpf
    g0: mpmath.mpf
    kappa0: float

    @property
    def C2_arranged(self) -> mpmath.mpf:
        """``g0/f0``: the proof's arrangement ``C_dissip(Adm + 2f(T_max))/f0``."""
        return self.g0 / self.f0

    def log_f(self, T) -> mpmath.mpf:
        beta = mpmath.mpf(self.params.beta)
        return mpmath.log(self.f0) - 2 / (self.s2 * T) ** beta

    def log_g(self, T) -> mpmath.mpf:
        beta = mpmath.mpf(self.params.beta)
        return mpmath.log(self.g0) - 2 / (self.s1 * T) ** beta

    def log_bound(self, T) -> float:
        """``ln(4 C_rel C_obs e^{2/(sT)^β})``."""
        p = self.params
        with mpmath.workdps(DPS):
            v = mpmath.log(4 * mpmath.mpf(p.C_rel) * p.C_obs) + 2 / (self.s * mpmath.mpf(T)) ** p.beta
            return float(v)

    def bound(self) -> Callable[[float], float]:
        return self.log_bound


def derive_constants(params: LRParams) -> LRConstants:
    p = normalize(params)
    k0 = kappa0(p.a, p.b, p.c, p.variant)
    with mpmath.workdps(DPS):
        a, b, c = mpmath.mpf(p.a), mpmath.mpf(p.b), mpmath.mpf(p.c)
        beta, kappa = mpmath.mpf(p.beta), mpmath.mpf(p.kappa)
        f = _factor(p.variant)
        s2 = kappa / (a + b) ** (1 / beta)
        s1 = kappa ** ((beta + 1) / beta) * (f / (c * (1 - kappa))) ** (1 / beta)
        if not s1 < s2:
            raise ValueError(f"kappa={p.kappa} too large: s1 >= s2 (kappa0 = {k0:.15g})")
        q = (s1 / s2) ** (beta / (beta + 1))
        s = s2 * (1 - q)
        C1 = 2 / s1**beta * (1 - q)
        tail = mpmath.exp(-2 / (s2 * p.T_max) ** beta)
        C2 = 4 * mpmath.mpf(p.C_dissip) * p.Adm * p.C_rel * p.C_obs + 2 * mpmath.mpf(p.C_dissip) * tail
        T_prime = (C1 / mpmath.log(C2)) ** (1 / beta) if C2 > 1 else mpmath.mpf(p.T_max)
        f0 = 1 / (4 * mpmath.mpf(p.C_rel) * p.C_obs)
        g0 = p.C_dissip * (p.Adm + 2 * f0 * tail)
    return LRConstants(p, s1, s2, s, q, C1, C2, T_prime, f0, g0, k0)


@dataclass(frozen=True)
class ShiftReport:
    passed: bool
    first_violation: float | None
    max_excess: float  # max of log g(T) − log f(qT) over the grid
    excess_at_end: float


def verify_shift_property(k: LRConstants, T_end=None, points: int = 1000, span: float = 1e-4) -> ShiftReport:
    """Check ``g(T) ≤ f(qT)`` on a log grid over ``(span·T′, T′]`` (or up to ``T_end``)."""
    with mpmath.workdps(DPS):
        end = k.T_prime if T_end is None else mpmath.mpf(T_end)
        grid = [end * mpmath.mpf(span) ** (1 - mpmath.mpf(i) / (points - 1)) for i in range(points)]
        excess = [k.log_g(T) - k.log_f(k.q * T) for T in grid]
        # a relative log slack absorbs the round-off of the touching point
        slack = mpmath.mpf(10) ** -(DPS - 10) * max(1, abs(k.log_f(k.q * end)))
        first = next((float(T) for T, e in zip(grid, excess) if e > slack), None)
        return ShiftReport(first is None, first, float(max(excess)), float(excess[-1]))


# ---------------------------------------------------------------------------
# finite-dimensional validator
# ---------------------------------------------------------------------------

def adaptive_simpson(fun: Callable[[float], float], a: float, b: float, tol: float = 1e-12, depth: int = 50) -> float:
    """Adaptive Simpson rule with Richardson correction."""

    def simpson(fa, fm, fb, h):
        return h * (fa + 4 * fm + fb) / 6

    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = (a + b) / 2
        lm, rm = (a + m) / 2, (m + b) / 2
        flm, frm = fun(lm), fun(rm)
        left = simpson(fa, flm, fm, m - a)
        right = simpson(fm, frm, fb, b - m)
        if depth <= 0 or abs(left + right - whole) <= 15 * tol:
            return left + right + (left + right - whole) / 15
        return rec(a, m, fa, flm, fm, left, tol / 2, depth - 1) + rec(m, b, fm, frm, fb, right, tol / 2, depth - 1)

    fa, fb, fm = fun(a), fun(b), fun((a + b) / 2)
    return rec(a, b, fa, fm, fb, simpson(fa, fm, fb, b - a), tol, depth)


@dataclass(frozen=True)
class SemigroupReport:
    samples: int
    hypothesis_held: int
    conclusion_held: int
    violations: int
    worst_ratio: float  # max over hypothesis-holding samples of lhs/rhs of the conclusion


def synthetic_semigroup_check(
    spectrum: np.ndarray,
    B: np.ndarray,
    constants: LRConstants,
    samples: int = 1000,
    seed: int = 0,
    T_range: tuple[float, float] | None = None,
    rtol: float = 1e-9,
) -> SemigroupReport:
    """Test the telescoping estimate on the diagonal semigroup ``e^{−tA}``.

    For each random ``(y, T)`` the hypothesis
    ``f(t)‖e^{−tA}z‖² ≤ f(qt)‖z‖² + ∫‖Be^{−sA}z‖²`` is evaluated along the
    chain ``t_k = (1−q)q^k T`` that the estimate sums; when it holds at every
    link, the conclusion ``f((1−q)T)‖e^{−TA}y‖² ≤ ∫_0^T‖Be^{−tA}y‖²`` is
    checked. A violation is a sample where the hypothesis held and the
    conclusion failed.
    """
    lam = np.asarray(spectrum, dtype=float)
    if lam.ndim != 1 or np.any(lam < 0) or lam.size > 64:
        raise ValueError("spectrum must be a nonnegative vector of length <= 64")
    B = np.asarray(B, dtype=float)
    W = B.T @ B
    q = float(constants.q)
    beta = constants.params.beta
    s2 = float(constants.s2)
    log_f0 = float(mpmath.log(constants.f0))

    def f(t):
        x = log_f0 - 2.0 / (s2 * t) ** beta
        return math.exp(x) if x > -745 else 0.0

    def observed(y, lo, hi):
        if hi <= lo:
            return 0.0

        def integrand(s):
            z = np.exp(-lam * s) * y
            return float(z @ W @ z)

        scale = max(integrand(lo), 1e-300) * (hi - lo)
        return adaptive_simpson(integrand, lo, hi, tol=1e-13 * scale)

    rng = np.random.default_rng(seed)
    lo_T, hi_T = T_range if T_range is not None else (1e-3 * float(constants.T_prime), float(constants.T_prime))
    held = concl = bad = 0
    worst = 0.0
    for _ in range(samples):
        y = rng.standard_normal(lam.size)
        T = math.exp(rng.uniform(math.log(lo_T), math.log(hi_T)))
        ok = True
        hi = T
        k = 0
        while True:
            t = (1 - q) * q**k * T
            lo = max(hi - t, 0.0)
            zk = np.exp(-lam * lo) * y  # state at the start of the link
            ft = f(t)
            if ft == 0.0:
                break  # f(t_k) and all later links vanish: remainder is exactly bounded by 0
            lhs = ft * float(np.sum((np.exp(-lam * t) * zk) ** 2))
            rhs = f(q * t) * float(zk @ zk) + observed(y, lo, hi)
            if lhs > rhs * (1 + rtol):
                ok = False
                break
            hi = lo
            k += 1
            if k > 10_000:
                break
        if not ok:
            continue
        held += 1
        final = float(np.sum((np.exp(-lam * T) * y) ** 2))
        total = observed(y, 0.0, T)
        lhs = f((1 - q) * T) * final
        worst = max(worst, lhs / total if total > 0 else (math.inf if lhs > 0 else 0.0))
        if lhs <= total * (1 + 1e-8):
            concl += 1
        else:
            bad += 1
    return SemigroupReport(samples, held, concl, bad, worst)


# ---------------------------------------------------------------------------
# uniform-in-μ composition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UniformBound:
    gamma: float
    delta_gamma: float
    epsilon: float
    margin: float
    log_bound: float  # c_β / (T − T*)^{2β}


def uniform_cost_bound(T: float, T_star: float, R: float, mode: str = INTERNAL, beta: float = 1.0, d: int = 2, c_beta: float = 1.0) -> UniformBound:
    """Parameters of the dissipation/observation split and its exponent margin.

    ``R`` is the inner radius ``R1`` (internal) or the ball radius (boundary).
    A positive margin means the high-frequency dissipation beats the growth
    of the observation cost, so the composed bound is uniform in μ.
    """
    if not T > T_star:
        raise ValueError("need T > T_star")
    if mode not in (INTERNAL, BOUNDARY):
        raise ValueError(f"unknown mode {mode}")
    gamma = (T - T_star) / (T_star + 2 * T)
    dg = T * gamma
    if mode == INTERNAL:
        eps = R / 2 * (math.sqrt((1 - gamma) / (1 - 2 * gamma)) - 1)
        margin = 2 * d * (T - dg) - (1 + gamma) * (R + eps) ** 2
    else:
        eps = 0.0
        margin = 2 * d * T * (1 - gamma) - R**2 * (1 + gamma)
    return UniformBound(gamma, dg, eps, margin, c_beta / (T - T_star) ** (2 * beta))
