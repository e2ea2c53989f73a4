"""Carleman weights, integrand terms, and numerical audits.

Weights: ``φ = e^{4λ‖ψ‖∞} − η``, ``η = e^{λ(ψ+2‖ψ‖∞)}``, ``ϖ(t) = ϑ(t/T)`` with
``ϑ(u) = 1/(4u(1−u))`` and ``ϕ = ϖφ``. The terms ``G1``, ``G2`` and ``H`` are
returned in normalized form (divided by their natural scales ``λ²ϖη``,
``λ⁴ϖ³η³`` and ``λ²ϖη|ξ|²``), which stays finite for any λ even when
the raw values overflow.

Integral audits use tensor Gauss–Legendre quadrature graded toward the point
where ``ϕ`` is smallest (``t = T/2`` and the boundary maximizer of ψ): the factor
``e^{−2sϕ}`` concentrates there on scales far below any uniform grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq, minimize
from scipy.special import gamma as gamma_fn
from scipy.special import hyp1f1, jn_zeros, jv

from .estimates import find_a, log_sinh

__all__ = [
    "CarlemanAuditError",
    "Psi",
    "Potential",
    "Domain",
    "CarlemanWeights",
    "WeightValues",
    "CarlemanTerms",
    "AuditGrid",
    "PositivityReport",
    "ThresholdResult",
    "Manufactured",
    "InequalityReport",
    "OscillatorMode",
    "BDEReport",
    "CorollaryReport",
    "BASIS",
    "GENERIC",
    "POSITIVE_V",
    "canonical_psi",
    "constant_psi",
    "quadratic_potential",
    "constant_potential",
    "vartheta",
    "weight_eval",
    "check_weight_derivatives",
    "audit_grid",
    "carleman_terms",
    "verify_positivity",
    "positivity_sweep",
    "find_lambda0",
    "find_s0",
    "poly_trig",
    "bubble",
    "annular_bubble",
    "verify_inequality",
    "oscillator_ground_mode",
    "bde_weight",
    "heat_weight",
    "bde_identity_check",
    "bde_corollary_check",
    "dirichlet_first_eigenvalue",
]

BASIS = "BASIS"
GENERIC = "GENERIC"
POSITIVE_V = "POSITIVE_V"
VARIANTS = (BASIS, GENERIC, POSITIVE_V)

Field = Callable[[np.ndarray], np.ndarray]


class CarlemanAuditError(RuntimeError):
    def __init__(self, message: str, location=None):
        super().__init__(message if location is None else f"{message} at {location}")
        self.location = location


# ---------------------------------------------------------------------------
# ψ, V and the domain
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Psi:
    """Scalar field with derivative evaluators; arrays are ``(..., d)``.

    ``increment(x0, dx)`` returns ``ψ(x0 + dx) − ψ(x0)`` without cancellation
    when supplied; ``sup`` is ``‖ψ‖∞`` on the domain in use.
    """

    d: int
    value: Field
    grad: Field
    hess: Field
    grad_lap: Field
    bilap: Field
    sup: float
    name: str = "psi"
    increment: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = field(default=None, repr=False)

    def lap(self, x: np.ndarray) -> np.ndarray:
        return np.trace(self.hess(x), axis1=-2, axis2=-1)


def canonical_psi(d: int = 2, R: float = 1.0) -> Psi:
    """``ψ = ½‖x − 2R e₁‖²``: Hess ψ = I and ``‖∇ψ‖ ≥ R`` on the ball of radius R."""
    c = np.zeros(d)
    c[0] = 2 * R
    eye = np.eye(d)
    return Psi(
        d=d,
        value=lambda x: 0.5 * np.sum((x - c) ** 2, axis=-1),
        grad=lambda x: x - c,
        hess=lambda x: np.broadcast_to(eye, x.shape[:-1] + (d, d)),
        grad_lap=lambda x: np.zeros_like(x),
        bilap=lambda x: np.zeros(x.shape[:-1]),
        sup=0.5 * (3 * R) ** 2,
        name="canonical",
        increment=lambda x0, dx: np.sum(dx * (x0 - c), axis=-1) + 0.5 * np.sum(dx * dx, axis=-1),
    )


def constant_psi(d: int = 2, value: float = 1.0) -> Psi:
    """Degenerate ψ with vanishing gradient."""
    zeros = np.zeros((d, d))
    return Psi(
        d=d,
        value=lambda x: np.full(x.shape[:-1], value),
        grad=lambda x: np.zeros_like(x),
        hess=lambda x: np.broadcast_to(zeros, x.shape[:-1] + (d, d)),
        grad_lap=lambda x: np.zeros_like(x),
        bilap=lambda x: np.zeros(x.shape[:-1]),
        sup=float(value),
        name="constant",
        increment=lambda x0, dx: np.zeros(np.broadcast_shapes(x0.shape, dx.shape)[:-1]),
    )


@dataclass(frozen=True)
class Potential:
    value: Field
    grad: Field
    name: str = "V"
    w1inf: float = 0.0


def quadratic_potential(mu: float = 1.0, R: float = 1.0) -> Potential:
    """``V = μ²‖x‖²``; ``w1inf`` is ``sup|V| + sup|∇V|`` on the ball of radius R."""
    m2 = float(mu) ** 2
    return Potential(
        value=lambda x: m2 * np.sum(x * x, axis=-1),
        grad=lambda x: 2 * m2 * x,
        name=f"{mu}^2|x|^2",
        w1inf=m2 * (R * R + 2 * R),
    )


def constant_potential(c: float) -> Potential:
    return Potential(
        value=lambda x: np.full(x.shape[:-1], float(c)),
        grad=lambda x: np.zeros_like(x),
        name=f"const {c}",
        w1inf=abs(float(c)),
    )


@dataclass(frozen=True)
class Domain:
    """Ball of radius ``R`` (``R1 = 0``) or annulus ``R1 < |x| < R``."""

    d: int
    R: float = 1.0
    R1: float = 0.0

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError("d must be 2 or 3")
        if not 0 <= self.R1 < self.R:
            raise ValueError("need 0 <= R1 < R")

    def contains(self, x: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        r = np.linalg.norm(x, axis=-1)
        return (r <= self.R * (1 + tol)) & (r >= self.R1 * (1 - tol))


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------


def vartheta(u, der: int = 0) -> np.ndarray:
    """``ϑ(u) = (4u(1−u))^{−1}`` and its first two derivatives."""
    u = np.asarray(u, dtype=float)
    th = 1.0 / (4 * u * (1 - u))
    if der == 0:
        return th
    if der == 1:
        return -(4 - 8 * u) * th**2
    if der == 2:
        return 8 * th**2 + 2 * (4 - 8 * u) ** 2 * th**3
    raise ValueError("der must be 0, 1 or 2")


@dataclass(frozen=True)
class CarlemanWeights:
    T: float
    lam: float
    s: float
    psi: Psi

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.lam < 1 or self.s < 1:
            raise ValueError("need lam >= 1 and s >= 1")

    @property
    def d(self) -> int:
        return self.psi.d

    def varpi(self, t, der: int = 0) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any((t <= 0) | (t >= self.T)):
            raise ValueError("t must lie in (0, T)")
        return vartheta(t / self.T, der) / self.T**der

    def eta(self, x) -> np.ndarray:
        return np.exp(self.lam * (self.psi.value(x) + 2 * self.psi.sup))

    def phi(self, x) -> np.ndarray:
        return np.exp(4 * self.lam * self.psi.sup) - self.eta(x)


@dataclass(frozen=True)
class WeightValues:
    varpi: np.ndarray
    phi: np.ndarray
    eta: np.ndarray
    grad: np.ndarray  # ∇ϕ
    lap: np.ndarray  # Δϕ
    hess: np.ndarray  # Hess ϕ
    dt: np.ndarray  # ∂_t ϕ
    dtt: np.ndarray  # ∂_tt ϕ


def weight_eval(weights: CarlemanWeights, t, x) -> WeightValues:
    """Closed-form values and derivatives of ``ϕ`` at broadcast ``(t, x)``."""
    w = weights
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    vp = w.varpi(t)
    eta = w.eta(x)
    phi = np.exp(4 * w.lam * w.psi.sup) - eta
    g = w.psi.grad(x)
    hpsi = w.psi.hess(x)
    lap_psi = np.trace(hpsi, axis1=-2, axis2=-1)
    lam = w.lam
    grad_phi = -lam * eta[..., None] * g
    hess_phi = -eta[..., None, None] * (lam**2 * g[..., :, None] * g[..., None, :] + lam * hpsi)
    lap_phi = -eta * (lam**2 * np.sum(g * g, axis=-1) + lam * lap_psi)
    return WeightValues(
        varpi=vp * np.ones_like(phi),
        phi=phi,
        eta=eta,
        grad=vp[..., None] * grad_phi,
        lap=vp * lap_phi,
        hess=vp[..., None, None] * hess_phi,
        dt=w.varpi(t, 1) * phi,
        dtt=w.varpi(t, 2) * phi,
    )


def check_weight_derivatives(weights: CarlemanWeights, t, x, tol: float = 1e-5) -> dict[str, float]:
    """Compare closed forms with central differences; raise on mismatch.

    Spatial derivatives are differenced on ``−ϖη``, which differs from ``ϕ``
    by the x-independent ``ϖ e^{4λ‖ψ‖∞}``; differencing ``ϕ`` itself would lose
    all digits to that constant once λ is moderately large.
    """
    w = weights
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = w.d
    ex = weight_eval(w, t, x)
    scale_g = 1.0 / (w.lam * max(1.0, float(np.max(np.linalg.norm(w.psi.grad(x), axis=-1)))))
    hg, hh = 1e-4 * scale_g, 2e-3 * scale_g

    def part(tt, xx):
        return -w.varpi(tt) * w.eta(xx)

    eye = np.eye(d)
    grad_fd = np.stack([(part(t, x + hg * eye[i]) - part(t, x - hg * eye[i])) / (2 * hg) for i in range(d)], -1)
    hess_fd = np.empty(x.shape[:-1] + (d, d))
    for i in range(d):
        for j in range(d):
            ei, ej = hh * eye[i], hh * eye[j]
            hess_fd[..., i, j] = (
                part(t, x + ei + ej) - part(t, x + ei - ej) - part(t, x - ei + ej) + part(t, x - ei - ej)
            ) / (4 * hh * hh)
    ht = 1e-4 * w.T * np.minimum(t / w.T, 1 - t / w.T)
    vp = lambda tt: w.varpi(tt) * ex.phi
    dt_fd = (vp(t + ht) - vp(t - ht)) / (2 * ht)
    htt = 1e-3 * w.T * np.minimum(t / w.T, 1 - t / w.T)
    dtt_fd = (vp(t + htt) - 2 * vp(t) + vp(t - htt)) / htt**2

    def rel(a, b, axes):
        num = np.linalg.norm(np.reshape(a - b, a.shape[: a.ndim - axes] + (-1,)), axis=-1)
        den = np.linalg.norm(np.reshape(b, b.shape[: b.ndim - axes] + (-1,)), axis=-1)
        return num / np.maximum(den, np.finfo(float).tiny)

    errs = {
        "grad": rel(grad_fd, ex.grad, 1),
        "hess": rel(hess_fd, ex.hess, 2),
        "lap": np.abs(np.trace(hess_fd, axis1=-2, axis2=-1) - ex.lap) / np.abs(ex.lap).clip(np.finfo(float).tiny),
        "dt": np.abs(dt_fd - ex.dt) / np.abs(ex.dt).clip(np.finfo(float).tiny),
        "dtt": np.abs(dtt_fd - ex.dtt) / np.abs(ex.dtt).clip(np.finfo(float).tiny),
    }
    # a vanishing ψ-gradient makes the relative errors meaningless for x-derivatives
    flat = np.linalg.norm(w.psi.grad(x), axis=-1) == 0
    out = {}
    for name, e in errs.items():
        e = np.broadcast_to(e, np.broadcast_shapes(t.shape, x.shape[:-1]))
        if name in ("grad", "hess", "lap"):
            e = np.where(np.broadcast_to(flat, e.shape), 0.0, e)
        k = int(np.argmax(e))
        out[name] = float(e.flat[k])
        if e.flat[k] > tol:
            idx = np.unravel_index(k, e.shape)
            loc = (float(np.broadcast_to(t, e.shape)[idx]), np.broadcast_to(x, e.shape + (d,))[idx].tolist())
            raise CarlemanAuditError(f"finite-difference mismatch in {name}: {e.flat[k]:.3g}", loc)
    return out


# ---------------------------------------------------------------------------
# normalized integrand terms
# ---------------------------------------------------------------------------


def _spatial(psi: Psi, lam: float, x: np.ndarray) -> dict[str, np.ndarray]:
    """Per-point ψ data entering the normalized terms."""
    g = psi.grad(x)
    h = psi.hess(x)
    g2 = np.sum(g * g, axis=-1)
    lap = np.trace(h, axis1=-2, axis2=-1)
    glap = psi.grad_lap(x)
    A = lam**2 * g[..., :, None] * g[..., None, :] + lam * h
    a = lam**2 * g2 + lam * lap
    grad_a = 2 * lam**2 * np.einsum("...ij,...j->...i", h, g) + lam * glap
    lap_a = 2 * lam**2 * (np.sum(h * h, axis=(-2, -1)) + np.sum(g * glap, axis=-1)) + lam * psi.bilap(x)
    b = a * a + 2 * lam * np.sum(g * grad_a, axis=-1) + lap_a  # Δ²η = η b
    pv = psi.value(x)
    inv_eta = np.exp(-lam * (pv + 2 * psi.sup))
    phi_eta2 = np.exp(-2 * lam * pv) - inv_eta  # φ/η²
    gAg = np.einsum("...i,...ij,...j->...", g, A, g)
    hmin = np.linalg.eigvalsh(2 * A + a[..., None, None] * np.eye(psi.d)).min(axis=-1) / lam**2
    return dict(g=g, g2=g2, A=A, a=a, b=b, inv_eta=inv_eta, phi_eta2=phi_eta2, gAg=gAg, hmin=hmin)


def _g2_normalized(sp, lam, s, vp, dvp, ddvp) -> np.ndarray:
    """``G2/(λ⁴ϖ³η³)``; space arrays broadcast against time arrays."""
    g21 = (2 * sp["gAg"] - sp["g2"] * sp["a"]) / lam**2
    first = (dvp / vp**2) * (3 * sp["g2"] * sp["inv_eta"] / lam**2 + sp["phi_eta2"] * sp["a"] / lam**4)
    second = (ddvp / vp**3) * sp["phi_eta2"] * sp["inv_eta"] / lam**4 + 2 * sp["b"] * sp["inv_eta"] ** 2 / (
        lam**4 * vp**2
    )
    return g21 + first / s - second / (2 * s * s)


def _g1_tilde(sp, lam, V: Potential, x) -> np.ndarray:
    """``G1/(λ²ϖη) = (Va − λ∇V·∇ψ)/λ²``."""
    return (V.value(x) * sp["a"] - lam * np.sum(V.grad(x) * sp["g"], axis=-1)) / lam**2


@dataclass(frozen=True)
class AuditGrid:
    times: np.ndarray  # (nt,)
    points: np.ndarray  # (nx, d)


def audit_grid(domain: Domain, T: float, n_t: int = 64, n_r: int = 64, n_a: int = 64) -> AuditGrid:
    """Space-time sample grid on ``(0, T) × Ω̄``; radii include both boundaries."""
    # the normalized terms extend continuously to t ∈ {0, T}; sample close to both ends
    edge = np.array([1e-9, 1e-6, 1e-3])
    times = T * np.sort(np.concatenate([(np.arange(n_t) + 0.5) / n_t, edge, 1 - edge]))
    r = np.linspace(domain.R1, domain.R, n_r)
    if domain.d == 2:
        th = 2 * np.pi * np.arange(n_a) / n_a
        rr, tt = np.meshgrid(r, th, indexing="ij")
        pts = np.stack([rr * np.cos(tt), rr * np.sin(tt)], -1).reshape(-1, 2)
    else:
        pol = np.pi * (np.arange(n_a // 2) + 0.5) / (n_a // 2)
        az = 2 * np.pi * np.arange(n_a) / n_a
        rr, pp, aa = np.meshgrid(r, pol, az, indexing="ij")
        sp = np.sin(pp)
        pts = np.stack([rr * sp * np.cos(aa), rr * sp * np.sin(aa), rr * np.cos(pp)], -1).reshape(-1, 3)
        pts = np.vstack([pts, [[0.0, 0.0, domain.R], [0.0, 0.0, -domain.R]]])
    pts = np.unique(np.round(pts, 15), axis=0)
    return AuditGrid(times, pts)


@dataclass(frozen=True)
class CarlemanTerms:
    """Normalized samples on an audit grid, shaped ``(n_t, n_x)``.

    ``g1 = G1/(λ²ϖη)``, ``g2 = G2/(λ⁴ϖ³η³)`` and ``h = min_ξ H(ξ)/(λ²ϖη|ξ|²)``.
    """

    weights: CarlemanWeights
    grid: AuditGrid
    g1: np.ndarray
    g2: np.ndarray
    h: np.ndarray
    V: np.ndarray
    grad_V: np.ndarray
    fd_errors: dict = field(default_factory=dict)

    def raw(self):
        """Unnormalized ``(G1, G2, min H)``; may overflow for large λ."""
        w = self.weights
        vp = w.varpi(self.grid.times)[:, None]
        eta = w.eta(self.grid.points)[None, :]
        return (
            self.g1 * w.lam**2 * vp * eta,
            self.g2 * w.lam**4 * vp**3 * eta**3,
            self.h * w.lam**2 * vp * eta,
        )


def carleman_terms(
    weights: CarlemanWeights, V: Potential | None, grid: AuditGrid, fd_samples: int = 64, seed: int = 0
) -> CarlemanTerms:
    w = weights
    V = V if V is not None else constant_potential(0.0)
    x = grid.points
    t = grid.times
    errors = {}
    if fd_samples:
        rng = np.random.default_rng(seed)
        # time steps near t ∈ {0, T} fall below double resolution; difference interior times only
        inner = t[np.minimum(t, w.T - t) >= 1e-3 * w.T]
        ti = inner[rng.integers(0, inner.size, fd_samples)]
        xi = x[rng.integers(0, len(x), fd_samples)]
        errors = check_weight_derivatives(w, ti, xi)
    sp = _spatial(w.psi, w.lam, x)
    vp = w.varpi(t)[:, None]
    g2 = _g2_normalized(sp, w.lam, w.s, vp, w.varpi(t, 1)[:, None], w.varpi(t, 2)[:, None])
    g1 = np.broadcast_to(_g1_tilde(sp, w.lam, V, x)[None, :], g2.shape)
    h = np.broadcast_to(sp["hmin"][None, :], g2.shape)
    if not (np.all(np.isfinite(g2)) and np.all(np.isfinite(h))):
        raise CarlemanAuditError("non-finite G2 or H samples")
    return CarlemanTerms(w, grid, g1, g2, h, V.value(x), V.grad(x), errors)


# ---------------------------------------------------------------------------
# positivity of G2 and H
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PositivityReport:
    lam: float
    s: float
    T: float
    g2_min: float
    h_min: float
    g1_min: float
    g2_argmin: tuple
    c: float
    passed: bool


def verify_positivity(
    weights: CarlemanWeights,
    grid: AuditGrid,
    c: float = 1e-3,
    V: Potential | None = None,
    require_g1: bool = False,
    fd_samples: int = 16,
) -> PositivityReport:
    """Grid minima of the normalized ``G2`` and ``H``; pass if both are ≥ c.

    With ``require_g1`` the normalized ``G1`` of ``V`` must also be ≥ c, which
    is the extra condition used for positive potentials.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    terms = carleman_terms(weights, V, grid, fd_samples=fd_samples)
    k = int(np.argmin(terms.g2))
    i, j = np.unravel_index(k, terms.g2.shape)
    g2m, hm = float(terms.g2.flat[k]), float(terms.h.min())
    g1m = float(terms.g1.min())
    ok = g2m >= c and hm >= c and (g1m >= c or not require_g1)
    return PositivityReport(
        weights.lam, weights.s, weights.T, g2m, hm, g1m, (float(grid.times[i]), grid.points[j].tolist()), c, ok
    )


def positivity_sweep(psi: Psi, domain: Domain, T: float, s: float, lams, grid: AuditGrid | None = None, **kw):
    grid = grid if grid is not None else audit_grid(domain, T)
    return [verify_positivity(CarlemanWeights(T, float(l), s, psi), grid, **kw) for l in lams]


@dataclass(frozen=True)
class ThresholdResult:
    value: float
    reports: tuple
    lam: float | None = None


def _threshold(passes: Callable[[float], bool], lo: float, hi: float, iters: int = 30) -> float:
    """Smallest value in ``[lo, hi]`` passing, assuming monotone pass/fail."""
    if passes(lo):
        return lo
    x = lo
    while not passes(x * 2):
        x *= 2
        if x > hi:
            raise CarlemanAuditError(f"no passing value up to {hi}")
    a, b = x, x * 2
    for _ in range(iters):
        m = math.sqrt(a * b)
        if passes(m):
            b = m
        else:
            a = m
        if b / a < 1 + 1e-3:
            break
    return b


def find_lambda0(
    psi: Psi,
    domain: Domain,
    T: float,
    s0: float = 1.0,
    c: float = 1e-3,
    V: Potential | None = None,
    require_g1: bool = False,
    lam_max: float = 256.0,
    grid: AuditGrid | None = None,
) -> ThresholdResult:
    """Empirical ``λ̂₀``: smallest λ ≥ 1 whose positivity audit passes at
    ``s = (1 + 1/T)s0``, confirmed on ``[λ̂₀, 4λ̂₀]``.
    """
    grid = grid if grid is not None else audit_grid(domain, T, 24, 24, 32)
    s = (1 + 1 / T) * s0
    reports = {}

    def passes(lam):
        r = verify_positivity(CarlemanWeights(T, lam, s, psi), grid, c, V, require_g1, fd_samples=0)
        reports[lam] = r
        return r.passed

    lam0 = _threshold(passes, 1.0, lam_max)
    for lam in (2 * lam0, 4 * lam0):
        if not passes(lam):
            raise CarlemanAuditError(f"positivity lost at lam={lam} above lam0={lam0}")
    return ThresholdResult(lam0, tuple(reports[k] for k in sorted(reports)))


def find_s0(
    psi: Psi,
    domain: Domain,
    lam: float,
    configs,
    V_of: Callable[[float], Potential],
    variant: str = GENERIC,
    s_max: float = 1e4,
) -> ThresholdResult:
    """Empirical ``ŝ₀``: smallest ``s0 ≥ 1`` such that every ``(T, μ)`` in
    ``configs`` gets positive constants at ``s = (1 + 1/T + μ)s0``.
    """
    reports = {}

    def passes(s0):
        ok = True
        for T, mu in configs:
            w = CarlemanWeights(T, lam, (1 + 1 / T + mu) * s0, psi)
            cs = _constants(w, domain, V_of(mu), variant, mu, audit_grid(domain, T, 24, 24, 32))
            reports[(s0, T, mu)] = cs
            ok &= cs["valid"]
        return ok

    s0 = _threshold(passes, 1.0, s_max)
    return ThresholdResult(s0, tuple(reports[k] for k in sorted(reports)), lam)


# ---------------------------------------------------------------------------
# manufactured fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Manufactured:
    """``y(t, x)`` with analytic ``∂_t y``, ``∇y`` and ``Δy``.

    Callables take broadcast ``t`` of shape ``(..., 1)``, ``x`` of shape
    ``(..., d)`` and the deficit ``δ = R² − ‖x‖²`` (``None`` to compute it from
    x). Quadrature passes δ directly since it is tiny where the Carleman
    weight peaks and cannot be recovered from x without cancellation.
    """

    name: str
    R: float
    value: Callable
    dt: Callable
    grad: Callable
    lap: Callable
    factor: float = 1.0

    def scaled(self, c: float) -> "Manufactured":
        return Manufactured(self.name, self.R, self.value, self.dt, self.grad, self.lap, self.factor * c)


def poly_trig(coeffs, R: float, T: float, d: int, name: str = "poly_trig") -> Manufactured:
    """``y = sin(πt/T) Q(R² − ‖x‖²)`` for ``Q`` given by ascending coefficients."""
    Q = np.polynomial.Polynomial(coeffs)
    Q1, Q2 = Q.deriv(1), Q.deriv(2)
    k = np.pi / T

    def dl(x, delta):
        return R * R - np.sum(x * x, axis=-1) if delta is None else delta

    def lap(t, x, delta=None):
        e = dl(x, delta)
        return np.sin(k * t[..., 0]) * (4 * (R * R - e) * Q2(e) - 2 * d * Q1(e))

    return Manufactured(
        name,
        float(R),
        value=lambda t, x, delta=None: np.sin(k * t[..., 0]) * Q(dl(x, delta)),
        dt=lambda t, x, delta=None: k * np.cos(k * t[..., 0]) * Q(dl(x, delta)),
        grad=lambda t, x, delta=None: (-2 * np.sin(k * t[..., 0]) * Q1(dl(x, delta)))[..., None] * x,
        lap=lap,
    )


def bubble(d: int, R: float, T: float, power: int = 1) -> Manufactured:
    """``sin(πt/T)(R² − ‖x‖²)^p``; ``p = 2`` also has vanishing normal derivative."""
    return poly_trig((np.polynomial.Polynomial([0.0, 1.0]) ** power).coef, R, T, d, f"bubble{power}")


def annular_bubble(d: int, R1: float, R: float, T: float, power: int = 1) -> Manufactured:
    """``sin(πt/T)((‖x‖² − R1²)(R² − ‖x‖²))^p``, written in ``δ = R² − ‖x‖²``."""
    base = (np.polynomial.Polynomial([R * R - R1 * R1, -1.0]) * np.polynomial.Polynomial([0.0, 1.0])) ** power
    return poly_trig(base.coef, R, T, d, f"annular_bubble{power}")


# ---------------------------------------------------------------------------
# graded quadrature
# ---------------------------------------------------------------------------


def _panels(breaks: np.ndarray, order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = breaks[:-1, None], breaks[1:, None]
    nodes = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    weights = 0.5 * (b - a) * w[None, :]
    return nodes.ravel(), weights.ravel()


def _graded(width: float, length: float, ratio: float = 4.0) -> np.ndarray:
    """Breakpoints on ``[0, length]`` with geometric panels growing from ``width/1e3``."""
    lo = min(width * 1e-3, length * 1e-3)
    n = max(2, int(math.ceil(math.log(length / lo) / math.log(ratio))) + 1)
    return np.concatenate([[0.0], np.geomspace(lo, length, n)])


def _sym(breaks: np.ndarray) -> np.ndarray:
    return np.concatenate([-breaks[:0:-1], breaks])


def _boundary_max(psi: Psi, domain: Domain) -> np.ndarray:
    """Maximizer of ψ on the closed domain, required to lie on the outer sphere."""
    d, R = domain.d, domain.R

    def point(ang):
        if d == 2:
            return R * np.array([math.cos(ang[0]), math.sin(ang[0])])
        p, a = ang
        return R * np.array([math.sin(p) * math.cos(a), math.sin(p) * math.sin(a), math.cos(p)])

    if d == 2:
        th = np.linspace(0, 2 * np.pi, 2048, endpoint=False)
        cand = np.stack([R * np.cos(th), R * np.sin(th)], -1)
        k = int(np.argmax(psi.value(cand)))
        start = [th[k]]
    else:
        p, a = np.meshgrid(np.linspace(0, np.pi, 129), np.linspace(0, 2 * np.pi, 256, endpoint=False), indexing="ij")
        cand = R * np.stack([np.sin(p) * np.cos(a), np.sin(p) * np.sin(a), np.cos(p)], -1).reshape(-1, 3)
        k = int(np.argmax(psi.value(cand)))
        start = [p.ravel()[k], a.ravel()[k]]
    res = minimize(lambda ang: -float(psi.value(point(ang))), start, method="Nelder-Mead",
                   options=dict(xatol=1e-13, fatol=1e-16, maxiter=4000))
    x0 = point(res.x)
    g = psi.grad(x0)
    # tangential gradient should vanish at the constrained maximizer
    gt = g - np.dot(g, x0) / R**2 * x0
    if np.linalg.norm(gt) > 1e-6 * max(1.0, np.linalg.norm(g)):
        raise CarlemanAuditError("could not locate the boundary maximizer of psi", x0.tolist())
    if domain.R1 > 0:
        inner = cand * (domain.R1 / R)
        if psi.value(inner).max() > psi.value(x0) - 1e-12:
            raise CarlemanAuditError("psi maximal on the inner boundary; unsupported")
    return x0


def _frame(a: np.ndarray) -> np.ndarray:
    d = a.size
    q, _ = np.linalg.qr(np.column_stack([a, np.eye(d)]))
    q[:, 0] = a
    return q[:, 1:d]


@dataclass
class _Quad:
    """Tensor nodes: times, interior space, outer and inner boundary."""

    tau: np.ndarray
    wt: np.ndarray
    x: np.ndarray
    dx: np.ndarray
    wx: np.ndarray
    xb: np.ndarray
    dxb: np.ndarray
    wb: np.ndarray
    nb: np.ndarray
    gap: np.ndarray  # R² − ‖x‖² at interior nodes
    gapb: np.ndarray


def _quadrature(w: CarlemanWeights, domain: Domain, x0: np.ndarray, order: int) -> _Quad:
    d, R, R1 = domain.d, domain.R, domain.R1
    lam, s, psi = w.lam, w.s, w.psi
    eta_max = math.exp(lam * 3 * psi.sup)
    phi_min = math.exp(4 * lam * psi.sup) - eta_max
    gn = max(float(np.linalg.norm(psi.grad(x0))), 1e-12)
    # decay scales of e^{−2s(ϕ−ϕmin)} near (T/2, x0)
    w_rho = 1.0 / (2 * s * lam * eta_max * gn)
    w_ang = 1.0 / math.sqrt(2 * s * lam * eta_max * gn * R)
    w_tau = w.T / math.sqrt(8 * s * max(phi_min, 1e-300))
    tau, wt = _panels(_sym(_graded(w_tau, w.T / 2)), order)
    rho, wr = _panels(_graded(w_rho, R - R1), order)
    basis = _frame(x0 / R)
    if d == 2:
        al, wa = _panels(_sym(_graded(w_ang, np.pi)), order)
        dirs = np.cos(al)[:, None] * (x0 / R) + np.sin(al)[:, None] * basis[:, 0]
        # x − x0 along the unit sphere, written without cancellation
        ddir = -2 * np.sin(al / 2)[:, None] ** 2 * (x0 / R) + np.sin(al)[:, None] * basis[:, 0]
        wdir = wa
        jac = lambda r: r
    else:
        al, wa = _panels(_graded(w_ang, np.pi), order)
        be, wbeta = _panels(np.linspace(0, 2 * np.pi, 9), order)
        A, B = np.meshgrid(al, be, indexing="ij")
        perp = np.cos(B)[..., None] * basis[:, 0] + np.sin(B)[..., None] * basis[:, 1]
        dirs = (np.cos(A)[..., None] * (x0 / R) + np.sin(A)[..., None] * perp).reshape(-1, 3)
        ddir = (-2 * np.sin(A / 2)[..., None] ** 2 * (x0 / R) + np.sin(A)[..., None] * perp).reshape(-1, 3)
        wdir = (np.outer(wa * np.sin(al), wbeta)).ravel()
        jac = lambda r: r * r
    r = R - rho
    x = (r[:, None, None] * dirs[None, :, :]).reshape(-1, d)
    # x − x0 = r(dir − e) − ρ e, with e = x0/R
    dx = (r[:, None, None] * ddir[None, :, :] - rho[:, None, None] * (x0 / R)[None, None, :]).reshape(-1, d)
    wx = (wr[:, None] * jac(r)[:, None] * wdir[None, :]).ravel()
    gap = np.repeat(rho * (2 * R - rho), dirs.shape[0])
    xb = R * dirs
    dxb = R * ddir
    wb = wdir * jac(R)
    nb = dirs.copy()
    gapb = np.zeros(dirs.shape[0])
    if R1 > 0:
        xi = R1 * dirs
        xb = np.vstack([xb, xi])
        dxb = np.vstack([dxb, xi - x0])
        wb = np.concatenate([wb, wdir * jac(R1)])
        nb = np.vstack([nb, -dirs])
        gapb = np.concatenate([gapb, np.full(dirs.shape[0], R * R - R1 * R1)])
    return _Quad(tau, wt, x, dx, wx, xb, dxb, wb, nb, gap, gapb)


def _dpsi(psi: Psi, x0: np.ndarray, x: np.ndarray, dx: np.ndarray) -> np.ndarray:
    if psi.increment is not None:
        return psi.increment(x0, dx)
    return psi.value(x) - psi.value(x0)


def _constants(w: CarlemanWeights, domain: Domain, V: Potential, variant: str, mu: float, grid: AuditGrid,
               extra_x: np.ndarray | None = None, extra_t: np.ndarray | None = None) -> dict:
    """Pointwise constants of the reduction from the basis inequality.

    GENERIC: ``c2 = min (s³G2 + sG1 − s²|Δϕ|²)/(s³λ⁴ϖ³η³)`` and
    ``c = max((1 + 2‖∇ψ‖²∞)/c2, 2/cH)``. POSITIVE_V drops ``G1`` from ``c2``,
    needs ``c1 = min G̃1/(λ²ϖη) > 0`` and uses ``c = max((1+2G²)/c2, 1/c1, 2/cH)``.
    """
    lam, s = w.lam, w.s
    xs = grid.points if extra_x is None else np.vstack([grid.points, extra_x])
    ts = grid.times if extra_t is None else np.concatenate([grid.times, extra_t])
    sp = _spatial(w.psi, lam, xs)
    vp = w.varpi(ts)[:, None]
    g2 = _g2_normalized(sp, lam, s, vp, w.varpi(ts, 1)[:, None], w.varpi(ts, 2)[:, None])
    lap_term = sp["a"] ** 2 * sp["inv_eta"] / (lam**4 * vp) / s
    g1t = _g1_tilde(sp, lam, V, xs)
    if variant == GENERIC:
        gamma = g2 + g1t * sp["inv_eta"] ** 2 / (lam**2 * vp**2) / s**2 - lap_term
    else:
        gamma = g2 - lap_term
    c2 = float(gamma.min())
    cH = float(sp["hmin"].min())
    G = float(np.sqrt(sp["g2"].max()))
    c1 = float(g1t.min())
    out = dict(c2=c2, cH=cH, c1=c1, G=G, valid=c2 > 0 and cH > 0)
    if variant == POSITIVE_V and mu > 0:
        out["valid"] = out["valid"] and c1 > 0
    if out["valid"]:
        c = max((1 + 2 * G * G) / c2, 2 / cH)
        if variant == POSITIVE_V and mu > 0:
            c = max(c, 1 / c1)
        out["c"] = c
    else:
        out["c"] = math.inf
    return out


@dataclass(frozen=True)
class InequalityReport:
    variant: str
    lhs: float
    rhs: float
    ratio: float
    c: float
    constants: dict
    terms: dict
    richardson: float
    converged: bool
    s: float
    lam: float
    T: float
    mu: float

    @property
    def passed(self) -> bool:
        return self.converged and self.ratio <= 1.0


def _integrals(w: CarlemanWeights, domain: Domain, y: Manufactured, V: Potential, variant: str, mu: float,
               x0: np.ndarray, q: _Quad, chunk: int = 16) -> dict:
    lam, s, psi, T = w.lam, w.s, w.psi, w.T
    S = psi.sup
    eta0 = math.exp(lam * (float(psi.value(x0)) + 2 * S))
    Vfun = V if variant != POSITIVE_V else Potential(lambda x: mu**2 * V.value(x), lambda x: mu**2 * V.grad(x))

    def space(x, dx):
        sp = _spatial(psi, lam, x)
        eta = np.exp(lam * (psi.value(x) + 2 * S))
        phi = math.exp(4 * lam * S) - eta
        dphi = -eta0 * np.expm1(lam * _dpsi(psi, x0, x, dx))  # φ − φ(x0) ≥ 0
        return sp, eta, phi, np.maximum(dphi, 0.0)

    spI, etaI, phiI, dphiI = space(q.x, q.dx)
    spB, etaB, phiB, dphiB = space(q.xb, q.dxb)
    VI, gVI = Vfun.value(q.x), Vfun.grad(q.x)
    dnpsi = np.sum(spB["g"] * q.nb, axis=-1)
    # deficits relative to the manufactured field's own radius
    gI = q.gap + (y.R**2 - domain.R**2)
    gB = q.gapb + (y.R**2 - domain.R**2)
    names = ("zero", "grad", "mu", "F", "bnd", "b_bnd", "b_g1", "b_g2", "b_h", "b_lap")
    acc = dict.fromkeys(names, 0.0)
    fac2 = y.factor**2
    for k0 in range(0, q.tau.size, chunk):
        tau = q.tau[k0 : k0 + chunk]
        wt = q.wt[k0 : k0 + chunk]
        u2 = (2 * tau / T) ** 2
        vp = (1 / (1 - u2))[:, None]
        dvp = (8 * (tau / T) / T)[:, None] * vp**2
        ddvp = (8 * vp**2 + 2 * 64 * (tau / T)[:, None] ** 2 * vp**3) / T**2
        t = (T / 2 + tau)[:, None, None]
        # e^{−2s(ϕ − ϕmin)} with ϕ − ϕmin = (ϖ−1)φ + (φ − φ(x0))
        EI = np.exp(-2 * s * ((u2 / (1 - u2))[:, None] * phiI[None, :] + dphiI[None, :]))
        EB = np.exp(-2 * s * ((u2 / (1 - u2))[:, None] * phiB[None, :] + dphiB[None, :]))
        yv = y.value(t, q.x[None], gI[None])
        gy = y.grad(t, q.x[None], gI[None])
        f = y.dt(t, q.x[None], gI[None]) - y.lap(t, q.x[None], gI[None]) + VI[None] * yv
        wI = wt[:, None] * q.wx[None, :] * EI
        dny = np.sum(y.grad(t, q.xb[None], gB[None]) * q.nb[None], axis=-1)
        wB = wt[:, None] * q.wb[None, :] * EB
        ve = vp * etaI[None, :]
        acc["zero"] += np.sum(wI * ve**3 * yv**2)
        acc["grad"] += np.sum(wI * ve * np.sum(gy * gy, axis=-1))
        acc["mu"] += np.sum(wI * ve * yv**2)
        acc["F"] += np.sum(wI * f**2)
        veB = vp * etaB[None, :]
        acc["bnd"] += np.sum(wB * veB * np.maximum(dnpsi, 0.0)[None, :] * dny**2)
        if variant == BASIS:
            acc["b_bnd"] += np.sum(wB * (-lam * veB * dnpsi[None, :]) * dny**2)
            g1 = ve * (VI[None] * spI["a"][None] - lam * np.sum(gVI * spI["g"], axis=-1)[None])
            acc["b_g1"] += np.sum(wI * g1 * yv**2)
            g2 = _g2_normalized(spI, lam, s, vp, dvp, ddvp) * lam**4 * ve**3
            acc["b_g2"] += np.sum(wI * g2 * yv**2)
            # ∇w e^{sϕ} = ∇y − s∇ϕ y, and H(ξ) = ϖη(2ξᵀAξ + a|ξ|²)
            xi = gy + (s * lam * ve * yv)[..., None] * spI["g"][None]
            Hx = ve * (2 * np.einsum("...i,...ij,...j->...", xi, spI["A"][None], xi) + spI["a"][None] * np.sum(xi * xi, -1))
            acc["b_h"] += np.sum(wI * Hx)
            acc["b_lap"] += np.sum(wI * (ve * spI["a"][None]) ** 2 * yv**2)
    out = {k: v * fac2 for k, v in acc.items()}
    if variant == BASIS:
        lhs = s * out["b_bnd"] + s * out["b_g1"] + s**3 * out["b_g2"] + s * out["b_h"]
        rhs = out["F"] + s * s * out["b_lap"]
    else:
        lhs = s**3 * lam**4 * out["zero"] + s * lam**2 * out["grad"]
        if variant == POSITIVE_V:
            lhs += s * lam**2 * mu**2 * out["mu"]
        rhs = out["F"] + s * lam * out["bnd"]
    out["lhs"], out["rhs"] = lhs, rhs
    return out


def verify_inequality(
    y: Manufactured,
    V: Potential,
    weights: CarlemanWeights,
    domain: Domain,
    variant: str = GENERIC,
    mu: float = 0.0,
    orders: tuple[int, int] = (6, 9),
    grid: AuditGrid | None = None,
    tolerance: float = 0.01,
) -> InequalityReport:
    """Both sides of a Carleman inequality on a manufactured field.

    BASIS checks the conjugated identity-level inequality with constant 1.
    GENERIC and POSITIVE_V multiply the right side by the constant obtained
    from the pointwise minima (see ``_constants``); for POSITIVE_V the operator
    uses ``μ²V``. Quadrature is repeated at two Gauss orders; a relative
    disagreement above ``tolerance`` marks the report unconverged.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant}")
    w = weights
    if w.lam * w.psi.sup > 70:
        raise ValueError("lam*sup(psi) too large for double-precision weights")
    x0 = _boundary_max(w.psi, domain)
    grid = grid if grid is not None else audit_grid(domain, w.T, 32, 32, 48)
    runs = []
    for order in orders:
        q = _quadrature(w, domain, x0, order)
        runs.append((_integrals(w, domain, y, V, variant, mu, x0, q), q))
    res, q = runs[-1]
    if variant == BASIS:
        consts = dict(c=1.0, valid=True)
        c = 1.0
    else:
        step = max(1, q.x.shape[0] // 4096)
        consts = _constants(w, domain, V, variant, mu, grid, extra_x=q.x[::step], extra_t=w.T / 2 + q.tau)
        c = consts["c"]

    def ratio(r):
        if r["lhs"] == 0 and r["rhs"] == 0:
            return 0.0
        return r["lhs"] / (c * r["rhs"]) if c * r["rhs"] > 0 else math.inf

    r_lo, r_hi = ratio(runs[0][0]), ratio(res)
    if r_lo == r_hi:
        gap = 0.0
    else:
        gap = abs(r_lo - r_hi) / max(abs(r_hi), 1e-300)
        for key in ("lhs", "rhs"):
            a, b = runs[0][0][key], res[key]
            gap = max(gap, abs(a - b) / max(abs(b), 1e-300) if b != a else 0.0)
    return InequalityReport(
        variant, res["lhs"], c * res["rhs"], r_hi, c, consts,
        {k: v for k, v in res.items() if k not in ("lhs", "rhs")},
        gap, bool(gap <= tolerance and consts["valid"]), w.s, w.lam, w.T, mu,
    )


# ---------------------------------------------------------------------------
# sinh-weight energy inequality
# ---------------------------------------------------------------------------


def dirichlet_first_eigenvalue(d: int, R: float) -> float:
    """First Dirichlet eigenvalue of −Δ on the ball of radius R."""
    if d == 2:
        j = float(jn_zeros(0, 1)[0])
    else:
        order = d / 2 - 1
        j = brentq(lambda z: jv(order, z), 1.0, 6.0)
    return j * j / (R * R)


@dataclass(frozen=True)
class OscillatorMode:
    """Radial ground state of ``−Δ + μ²‖x‖²`` on the ball ``B_r``, Dirichlet at r."""

    d: int
    r: float
    mu: float
    nu: float

    def _a(self):
        return self.d / 4 - self.nu / (4 * self.mu)

    def f(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        z = self.mu * rho * rho
        return np.exp(-z / 2) * hyp1f1(self._a(), self.d / 2, z)

    def df(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        z = self.mu * rho * rho
        a, b = self._a(), self.d / 2
        m0 = hyp1f1(a, b, z)
        m1 = (a / b) * hyp1f1(a + 1, b + 1, z)
        return np.exp(-z / 2) * 2 * self.mu * rho * (m1 - m0 / 2)


def oscillator_ground_mode(d: int, r: float, mu: float) -> OscillatorMode:
    """Lowest ν with ``e^{−μρ²/2}₁F₁(d/4 − ν/4μ; d/2; μρ²)`` vanishing at ρ = r."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    lam1 = dirichlet_first_eigenvalue(d, r)
    lo = max(d * mu, lam1) * (1 - 1e-9)
    hi = lam1 + mu * mu * r * r + 1.0
    grid = np.linspace(lo, hi, 400)
    vals = [OscillatorMode(d, r, mu, float(n)).f(r) for n in grid]
    for k in range(len(grid) - 1):
        if vals[k] == 0:
            return OscillatorMode(d, r, mu, float(grid[k]))
        if vals[k] * vals[k + 1] < 0:
            nu = brentq(lambda n: float(OscillatorMode(d, r, mu, n).f(r)), grid[k], grid[k + 1], xtol=1e-14, rtol=1e-15)
            return OscillatorMode(d, r, mu, nu)
    raise CarlemanAuditError("ground oscillator eigenvalue not bracketed")


def _theta(t, mu):
    """``μ coth(2μt)``, with the ``1/(2t)`` limit at μ = 0."""
    t = np.asarray(t, dtype=float)
    z = 2 * mu * t
    small = np.abs(z) < 1e-4
    zs = np.where(small, 1.0, z)
    series = 1 + z * z / 3 - z**4 / 45
    return np.where(small, series / (2 * t), mu / np.tanh(zs))


def bde_weight(t, x, mu: float, r: float) -> np.ndarray:
    """``exp(−(μ/2)coth(2μt)(r² − ‖x‖²))``."""
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * _theta(t, mu) * (r * r - np.sum(x * x, axis=-1)))


def heat_weight(t, x, r: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.exp(-(r * r - np.sum(x * x, axis=-1)) / (4 * np.asarray(t, dtype=float)))


@dataclass(frozen=True)
class BDEReport:
    lhs: float
    rhs: float
    source_term: float
    boundary_term: float
    F_max: float
    passed: bool
    mu: float
    T: float
    r: float
    nu: float


def _sphere_area(d: int) -> float:
    return 2 * math.pi ** (d / 2) / gamma_fn(d / 2)


def _bde_fields(mode: OscillatorMode, growth: float):
    d, mu, r, nu = mode.d, mode.mu, mode.r, mode.nu

    def g(t):
        return np.exp(-nu * t) * (1 + growth * t)

    def w(t, rho):
        return g(t) * mode.f(np.abs(rho)) * np.exp(-0.5 * _theta(t, mu) * (r * r - rho * rho))

    return g, w


def _bde_sides(mode: OscillatorMode, T: float, growth: float, nt_panels: int, nr: int, order: int):
    d, mu, r, nu = mode.d, mode.mu, mode.r, mode.nu
    g, w = _bde_fields(mode, growth)
    area = _sphere_area(d)
    lsT = float(log_sinh(2 * mu * T))
    # radial quadrature on [0, r]
    rho, wr = _panels(np.linspace(0, r, nr + 1), order)
    wr = wr * rho ** (d - 1) * area
    # final-time side, divided by sinh(2μT)²
    th = float(_theta(T, mu))
    E = np.exp(-0.5 * th * (r * r - rho * rho))
    yT = g(T) * mode.f(rho)
    dyT = g(T) * mode.df(rho)
    wT = yT * E
    dwT = E * (dyT + th * rho * yT)
    lhs = np.sum(wr * (dwT**2 - mu**2 * r**2 * np.exp(-2 * lsT) * wT**2))
    # time quadrature, geometric toward t = 0 where w decays like e^{−c/t}
    tb = np.concatenate([[0.0], np.geomspace(T * 1e-6, T, nt_panels)])
    t, wt = _panels(tb, order)
    tt, rr = t[:, None], rho[None, :]
    ht = 1e-5 * tt
    # the weight varies on the boundary-layer scale 2t/r near ρ = r
    hr = 1e-4 * np.minimum(r, 2 * tt / r)
    w0 = w(tt, rr)
    dt_w = (w(tt + ht, rr) - w(tt - ht, rr)) / (2 * ht)
    wp, wm = w(tt, rr + hr), w(tt, rr - hr)
    dr_w = (wp - wm) / (2 * hr)
    lap_w = (wp - 2 * w0 + wm) / hr**2 + (d - 1) / rr * dr_w
    thet = _theta(tt, mu)
    inv_sh2 = np.exp(-2 * log_sinh(2 * mu * tt))
    F = dt_w - lap_w + thet * (2 * rr * dr_w + d * w0) - r * r * mu * mu * inv_sh2 * w0
    ratio_sq = np.exp(2 * (log_sinh(2 * mu * t) - lsT))
    source = np.sum(wt * ratio_sq * np.sum(wr[None, :] * F**2, axis=1))
    dn = g(t) * mode.df(r)  # the weight equals 1 on the sphere, and y vanishes there
    ratio_b = np.exp(log_sinh(4 * mu * t) - 2 * lsT)
    boundary = mu * r * np.sum(wt * ratio_b * area * r ** (d - 1) * dn**2)
    return float(lhs), float(source), float(boundary), float(np.max(np.abs(F))), wT, wr, dwT


def bde_identity_check(
    mode: OscillatorMode, T: float, growth: float = 0.0, rtol: float = 1e-3, nt_panels: int = 40, nr: int = 32,
    order: int = 8,
) -> BDEReport:
    """Sinh-weight energy inequality for ``w = y·bde_weight`` with
    ``y = e^{−νt}(1 + growth·t) f(‖x‖)``.

    ``F`` is obtained by applying the transformed operator to ``w`` with
    central differences. Both sides are divided by ``sinh(2μT)²``.
    """
    lhs, source, boundary, fmax, *_ = _bde_sides(mode, T, growth, nt_panels, nr, order)
    rhs = source + boundary
    return BDEReport(lhs, rhs, source, boundary, fmax, bool(lhs <= rhs * (1 + rtol)), mode.mu, T, mode.r, mode.nu)


@dataclass(frozen=True)
class CorollaryReport:
    a: float
    T: float
    K: float
    l2: float
    l2_bound: float
    grad: float
    grad_bound: float
    passed: bool


def bde_corollary_check(d: int, R: float, r: float, mu: float, alpha: float, growth: float = 0.0) -> CorollaryReport:
    """Final-time bounds at ``T = aμ^{α−1}`` with ``a`` from ``find_a(α, 2R c_R^{−1/2})``.

    ``K = 1 − μ²R²/(c_R sinh(2μT)²) ≥ 3/4``, the L² bound has constant
    ``4/(3c_R)`` and the gradient bound constant ``4/3``.
    """
    if not 0 < r <= R:
        raise ValueError("need 0 < r <= R")
    cR = dirichlet_first_eigenvalue(d, R)
    a = find_a(alpha, 2 * R / math.sqrt(cR)).a
    T = a * mu ** (alpha - 1)
    K = 1 - mu * mu * R * R / cR * math.exp(-2 * float(log_sinh(2 * mu * T)))
    mode = oscillator_ground_mode(d, r, mu)
    _, source, boundary, _, wT, wr, dwT = _bde_sides(mode, T, growth, 40, 32, 8)
    rhs = source + boundary
    l2 = float(np.sum(wr * wT**2))
    grad = float(np.sum(wr * dwT**2))
    l2_bound = 4 / (3 * cR) * rhs
    grad_bound = 4 / 3 * rhs
    ok = K >= 0.75 - 1e-12 and l2 <= l2_bound * (1 + 1e-3) and grad <= grad_bound * (1 + 1e-3)
    return CorollaryReport(a, T, K, l2, l2_bound, grad, grad_bound, bool(ok))
