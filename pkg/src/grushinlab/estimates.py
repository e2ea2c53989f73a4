"""Sinh threshold, hyperbolic bounds, and audits of the energy-type
estimates on sampled trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import simpson

from .evolution import FDState, SpectralField, annulus_integrals, field_norms, solve_harmonic_heat
from .radial import smooth_cutoff

__all__ = [
    "SinhThreshold",
    "HyperbolicBounds",
    "Trajectory",
    "FDTrajectory",
    "AuditReport",
    "DISSIP_L2",
    "DISSIP_MU",
    "ENERGY",
    "GRAD",
    "CACCIOPPOLI",
    "find_a",
    "hyperbolic_bounds",
    "log_sinh",
    "spectral_trajectory",
    "inequality_audit",
    "RadialCutoff",
]

DISSIP_L2 = "DISSIP_L2"
DISSIP_MU = "DISSIP_MU"
ENERGY = "ENERGY"
GRAD = "GRAD"
CACCIOPPOLI = "CACCIOPPOLI"
KINDS = (DISSIP_L2, DISSIP_MU, ENERGY, GRAD, CACCIOPPOLI)
MIN_SAMPLES = 64


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SinhThreshold:
    alpha: float
    c: float
    t_alpha: float
    a: float

    @property
    def x_touch(self) -> float:
        """Point where ``sinh(2a x^α) = c x`` is attained with equality."""
        return (self.t_alpha / (2 * self.a)) ** (1 / self.alpha)

    def holds(self, x, a: float | None = None) -> np.ndarray:
        """``sinh(2 a x^α) ≥ c x``, compared in log form."""
        a = self.a if a is None else a
        x = np.asarray(x, dtype=float)
        return log_sinh(2 * a * x**self.alpha) >= np.log(self.c * x) - 1e-13


def log_sinh(z) -> np.ndarray:
    """``ln sinh z`` for ``z > 0`` without overflow."""
    z = np.asarray(z, dtype=float)
    small = z < 1e-3
    out = np.empty_like(z)
    zs = z[small]
    out[small] = np.log(zs) + np.log1p(zs * zs / 6)
    zl = z[~small]
    out[~small] = zl + np.log(-np.expm1(-2 * zl)) - math.log(2)
    return out if out.ndim else float(out)


def find_a(alpha: float, c: float) -> SinhThreshold:
    """Smallest ``a`` with ``sinh(2a x^α) ≥ c x`` for all ``x > 0``.

    Writing ``u = 2a x^α``, the condition is ``2a ≥ c^α max_u u·sinh(u)^{−α}``,
    and the maximizer solves ``tanh u = α u``.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if not c > 0:
        raise ValueError("c must be positive")
    # h(t) = tanh t − α t: positive near 0⁺, negative at 2/α
    h = lambda t: math.tanh(t) - alpha * t
    dh = lambda t: 1 / math.cosh(t) ** 2 - alpha if t < 350 else -alpha
    lo, hi = 1e-8, 2 / alpha
    t = hi
    for _ in range(200):
        step = h(t) / dh(t)
        nt = t - step
        if not lo < nt < hi:
            nt = (lo + hi) / 2
        if h(nt) > 0:
            lo = nt
        else:
            hi = nt
        if abs(nt - t) <= 1e-15 * nt:
            t = nt
            break
        t = nt
    ta = t
    lsinh = float(log_sinh(ta))
    a = math.exp(alpha * math.log(c) - alpha * lsinh) * ta / 2
    return SinhThreshold(alpha, c, ta, a)


@dataclass(frozen=True)
class HyperbolicBounds:
    x: float
    coth: float
    coth_bound: float  # 1 + 1/x
    ratio: float  # sinh(4x)/sinh(2x)², via 2 coth(2x)
    ratio_bound: float  # 2 + 1/x
    ratio_direct: float  # same ratio from log-sinh values


def hyperbolic_bounds(x: float) -> HyperbolicBounds:
    if not x > 0:
        raise ValueError("x must be positive")
    coth = 1 / math.tanh(x)
    ratio = 2 / math.tanh(2 * x)
    direct = math.exp(float(log_sinh(4 * x)) - 2 * float(log_sinh(2 * x)))
    out = HyperbolicBounds(x, coth, 1 + 1 / x, ratio, 2 + 1 / x, direct)
    if coth > out.coth_bound * (1 + 1e-15) or ratio > out.ratio_bound * (1 + 1e-15):
        raise AssertionError(f"hyperbolic bound violated at x={x}")
    return out


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    """Spectral solution samples ``y(t_i)`` of the harmonic-heat flow."""

    times: np.ndarray
    fields: tuple[SpectralField, ...] = field(repr=False)

    def __post_init__(self):
        if len(self.times) != len(self.fields):
            raise ValueError("times and fields differ in length")


def spectral_trajectory(y0: SpectralField, T: float, samples: int = 129) -> Trajectory:
    times = np.linspace(0.0, T, samples)
    return Trajectory(times, tuple(solve_harmonic_heat(y0, t) for t in times))


@dataclass(frozen=True)
class FDTrajectory:
    """Finite-difference samples plus the source ``F = ∂_t y − Δy + Vy`` that drove them."""

    times: np.ndarray
    states: tuple[FDState, ...] = field(repr=False)
    source: Callable[[float, np.ndarray], dict] | None = field(default=None, repr=False)


@dataclass(frozen=True)
class RadialCutoff:
    """Radial ``C^∞`` cutoff: 1 on ``[ρ1, ρ2]``, 0 outside ``(ρ0, ρ3)``."""

    rho0: float
    rho1: float
    rho2: float
    rho3: float

    def __call__(self, r, der: int = 0, h: float = 1e-5):
        r = np.asarray(r, dtype=float)

        def chi(x):
            up = smooth_cutoff(0.5 + 0.5 * (x - self.rho0) / (self.rho1 - self.rho0))
            down = smooth_cutoff(0.5 + 0.5 * (self.rho3 - x) / (self.rho3 - self.rho2))
            return up * down

        if der == 0:
            return chi(r)
        if der == 1:
            return (chi(r + h) - chi(r - h)) / (2 * h)
        return (chi(r + h) - 2 * chi(r) + chi(r - h)) / (h * h)

    def w2inf(self, d: int, samples: int = 20001) -> float:
        """``sup|χ| + sup|∇χ| + sup‖∇²χ‖`` (sum of sup norms, operator norm on the Hessian)."""
        r = np.linspace(self.rho0, self.rho3, samples)
        c1 = self(r, 1, h=1e-6)
        c2 = self(r, 2, h=1e-4)
        hess = np.maximum(np.abs(c2), np.abs(c1) / r) if d > 1 else np.abs(c2)
        return float(np.max(self(r)) + np.max(np.abs(c1)) + np.max(hess))


@dataclass(frozen=True)
class AuditReport:
    kind: str
    lhs: float
    rhs: float
    passed: bool
    slack: float
    detail: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else (0.0 if self.lhs == 0 else math.inf)


def _time_integral(times: np.ndarray, values: np.ndarray, lo: float, hi: float) -> float:
    sel = (times >= lo - 1e-12 * hi) & (times <= hi + 1e-12 * hi)
    t, v = times[sel], values[sel]
    return float(simpson(v, x=t))


def _pairs(n: int, stride: int) -> list[tuple[int, int]]:
    idx = list(range(0, n, stride)) + ([n - 1] if (n - 1) % stride else [])
    return [(i, j) for a, i in enumerate(idx) for j in idx[a + 1:]]


def inequality_audit(kind: str, traj, slack: float = 1e-3, **params) -> AuditReport:
    """Evaluate both sides of an energy-type estimate on a trajectory.

    * ``DISSIP_L2`` / ``DISSIP_MU``: every sampled pair ``s < t`` is checked
      against ``e^{−2λ(t−s)}`` (times ``1 + R²`` for the μ-norm); ``lam``
      defaults to the smallest eigenvalue present. The worst pair is reported.
    * ``ENERGY``: ``∫y(T)² ≤ (3/T)∫_{T/3}^{2T/3}∫y² + C_Ω ∫_0^T Θ∫F²`` with
      ``ω = Ω = B_R`` and ``C_Ω`` the inverse first Dirichlet eigenvalue
      (``poincare``); spectral trajectories have ``F = 0``.
    * ``GRAD``: ``∫|∇y(T)|² ≤ (3/T)∫_{T/3}^{2T/3}∫|∇y|² + 2‖ΔV‖_∞ ∫_{T/3}^{2T/3}∫y²``
      with ``‖ΔV‖_∞ = 2dμ²``.
    * ``CACCIOPPOLI``: ``∫_0^T ϑ∫_O|∇y|² ≤ ‖ϑ‖_{W^{1,∞}}‖χ‖_{W^{2,∞}} ∫_0^T∫_ω y²``
      for annuli ``O ⊂ ω`` given by a ``RadialCutoff`` (``cutoff``) and
      ``ϑ(t) = sin²(πt/2T)``.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown audit kind {kind}")
    times = np.asarray(traj.times, dtype=float)
    if times.size < MIN_SAMPLES:
        raise ValueError(f"trajectory has {times.size} samples; need at least {MIN_SAMPLES}")
    T = float(times[-1] - times[0])
    t0 = float(times[0])

    def done(lhs, rhs, **detail):
        return AuditReport(kind, float(lhs), float(rhs), bool(lhs <= rhs * (1 + slack)), slack, detail)

    if kind in (DISSIP_L2, DISSIP_MU):
        fields = traj.fields
        lam = params.get("lam", float(np.min(fields[0].modes.nu[fields[0].coeffs != 0])))
        if kind == DISSIP_L2:
            sq = np.array([f.l2**2 for f in fields])
            factor = 1.0
        else:
            sq = np.array([field_norms(f).mu_norm ** 2 for f in fields])
            factor = 1.0 + fields[0].modes.R ** 2
        worst, pair = -math.inf, (0, 0)
        for i, j in _pairs(times.size, params.get("stride", 4)):
            rhs = factor * math.exp(-2 * lam * (times[j] - times[i])) * sq[i]
            r = sq[j] / rhs if rhs > 0 else (0.0 if sq[j] == 0 else math.inf)
            if r > worst:
                worst, pair = r, (i, j)
        i, j = pair
        rhs = factor * math.exp(-2 * lam * (times[j] - times[i])) * sq[i]
        return done(sq[j], rhs, s=times[i], t=times[j], lam=lam)

    if kind == ENERGY:
        theta = smooth_cutoff(np.minimum(3 * (times - t0) / T, 1.0))
        if isinstance(traj, FDTrajectory):
            mass = traj.states[0].grid.mass
            y2 = np.array([s.l2() ** 2 for s in traj.states])
            if traj.source is not None:
                f2 = np.array(
                    [sum(float(np.dot(mass, np.broadcast_to(v, mass.shape) ** 2)) for v in traj.source(t, traj.states[0].grid.nodes).values()) for t in times]
                )
            else:
                f2 = np.zeros_like(times)
            R = traj.states[0].grid.R
            d = 2
        else:
            y2 = np.array([f.l2**2 for f in traj.fields])
            f2 = np.zeros_like(times)
            R, d = traj.fields[0].modes.R, traj.fields[0].modes.d
        poincare = params.get("poincare", _poincare(d, R))
        middle = _time_integral(times, y2, t0 + T / 3, t0 + 2 * T / 3)
        src = _time_integral(times, theta * f2, t0, t0 + T)
        rhs = 3 / T * middle + poincare * src
        return done(y2[-1], rhs, source_term=poincare * src, poincare=poincare)

    if kind == GRAD:
        fields = traj.fields
        mu, d = fields[0].mu, fields[0].modes.d
        norms = [field_norms(f) for f in fields]
        g2 = np.array([n.h1_seminorm**2 for n in norms])
        y2 = np.array([n.l2**2 for n in norms])
        lap_v = 2 * d * mu * mu
        rhs = 3 / T * _time_integral(times, g2, t0 + T / 3, t0 + 2 * T / 3) + 2 * lap_v * _time_integral(
            times, y2, t0 + T / 3, t0 + 2 * T / 3
        )
        return done(g2[-1], rhs, lap_v=lap_v)

    # CACCIOPPOLI
    chi: RadialCutoff = params["cutoff"]
    fields = traj.fields
    d = fields[0].modes.d
    vt = np.sin(math.pi * (times - t0) / (2 * T)) ** 2
    w1 = 1.0 + math.pi / (2 * T)
    w2 = chi.w2inf(d)
    inner = np.array([annulus_integrals(f, chi.rho1, chi.rho2).grad_sq for f in fields])
    outer = np.array([annulus_integrals(f, chi.rho0, chi.rho3).l2sq for f in fields])
    lhs = _time_integral(times, vt * inner, t0, t0 + T)
    rhs = w1 * w2 * _time_integral(times, outer, t0, t0 + T)
    return done(lhs, rhs, theta_w1inf=w1, chi_w2inf=w2)


def _poincare(d: int, R: float) -> float:
    """``1/λ_1(B_R)``: ``R²/j_{0,1}²`` (d = 2) or ``R²/π²`` (d = 3)."""
    from scipy.special import jn_zeros

    first = float(jn_zeros(0, 1)[0]) ** 2 if d == 2 else math.pi**2
    return R * R / first
