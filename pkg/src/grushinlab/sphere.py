"""Real spherical harmonics on S¹ and S², region quadrature, and the
spectral-inequality constant of a subregion.

Index conventions (``l`` runs from 1 to ``multiplicity(m, d)``):

* d = 2: ``l = 1`` is ``cos(mθ)/√π`` (or ``1/√(2π)`` when ``m = 0``),
  ``l = 2`` is ``sin(mθ)/√π``.
* d = 3: ``l = 1..2m+1`` maps to the order ``q = l - m - 1 ∈ [-m, m]``;
  ``q > 0`` carries ``cos(qφ)``, ``q < 0`` carries ``sin(|q|φ)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath
import numpy as np
from scipy.special import gammaln, lpmv

from .linalg import NotPositiveDefinite, pencil_max

__all__ = [
    "AngularMode",
    "AngularRegion",
    "multiplicity",
    "angular_modes",
    "evaluate",
    "angular_mass",
    "angular_gram",
    "spectral_inequality_constant",
    "fit_log_linear",
    "sphere_measure",
]

FULL_SPHERE = "FULL_SPHERE"
ARC = "ARC"
CAP_PATCH = "CAP_PATCH"


def multiplicity(m: int, d: int) -> int:
    """Dimension of the degree-``m`` eigenspace of the Laplace–Beltrami operator."""
    if d not in (2, 3):
        raise ValueError(f"dimension must be 2 or 3, got {d}")
    if m < 0:
        raise ValueError("degree must be nonnegative")
    if m == 0:
        return 1
    return math.comb(m + d - 1, d - 1) - math.comb(m + d - 3, d - 1)


def sphere_measure(d: int) -> float:
    return 2 * math.pi if d == 2 else 4 * math.pi


@dataclass(frozen=True, order=True)
class AngularMode:
    d: int
    m: int
    l: int

    def __post_init__(self):
        if not 1 <= self.l <= multiplicity(self.m, self.d):
            raise ValueError(f"l={self.l} outside 1..{multiplicity(self.m, self.d)} for m={self.m}")

    @property
    def beltrami(self) -> int:
        return self.m * (self.m + self.d - 2)

    @property
    def order(self) -> int:
        """Signed azimuthal order ``q`` (d = 3) or ``±m`` (d = 2; ``-m`` for sine)."""
        if self.d == 2:
            return -self.m if self.l == 2 else self.m
        return self.l - self.m - 1


def angular_modes(d: int, m_max: int) -> list[AngularMode]:
    """All modes with degree ``m < m_max``, by degree then index."""
    return [AngularMode(d, m, l) for m in range(m_max) for l in range(1, multiplicity(m, d) + 1)]


def _rotation_to(axis: np.ndarray) -> np.ndarray:
    """Rotation matrix sending e_z to ``axis``."""
    z = np.asarray(axis, dtype=float)
    z = z / np.linalg.norm(z)
    helper = np.array([1.0, 0.0, 0.0]) if abs(z[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    x = helper - np.dot(helper, z) * z
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return np.column_stack([x, y, z])


def _gl(a: float, b: float, n: int, panels: int = 1):
    x, w = np.polynomial.legendre.leggauss(n)
    edges = np.linspace(a, b, panels + 1)
    lo, hi = edges[:-1], edges[1:]
    half = (hi - lo) / 2
    pts = (lo[:, None] + half[:, None] * (x[None, :] + 1)).ravel()
    wts = (half[:, None] * w[None, :]).ravel()
    return pts, wts


@dataclass(frozen=True)
class AngularRegion:
    """Subset of the unit sphere with a product quadrature rule.

    ``ARC(theta1, theta2)`` for d = 2 (angles in radians, ``theta1 < theta2``).
    ``CAP_PATCH`` for d = 3: polar range ``(a, b) ⊂ [0, π]`` and azimuth range
    ``(c, e)`` measured in the frame whose north pole is ``axis``.
    """

    d: int
    kind: str
    theta1: float = 0.0
    theta2: float = 0.0
    polar: tuple[float, float] = (0.0, math.pi)
    azimuth: tuple[float, float] = (0.0, 2 * math.pi)
    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    order: int = 48
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in (FULL_SPHERE, ARC, CAP_PATCH):
            raise ValueError(f"unknown region kind {self.kind}")
        if self.d not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        if self.kind == ARC and (self.d != 2 or not self.theta2 > self.theta1):
            raise ValueError("ARC needs d = 2 and theta1 < theta2")
        if self.kind == ARC and self.theta2 - self.theta1 > 2 * math.pi + 1e-12:
            raise ValueError("arc longer than the circle")
        if self.kind == CAP_PATCH:
            a, b = self.polar
            c, e = self.azimuth
            if self.d != 3 or not (0 <= a < b <= math.pi) or not (c < e <= c + 2 * math.pi + 1e-12):
                raise ValueError("CAP_PATCH needs d = 3, 0 <= a < b <= pi and a positive azimuth range")
        nodes, weights = self._quadrature()
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def full(cls, d: int, order: int = 48) -> "AngularRegion":
        return cls(d, FULL_SPHERE, order=order)

    @classmethod
    def arc(cls, theta1: float, theta2: float, order: int = 48) -> "AngularRegion":
        return cls(2, ARC, theta1=theta1, theta2=theta2, order=order)

    @classmethod
    def patch(cls, polar, azimuth, axis=(0.0, 0.0, 1.0), order: int = 48) -> "AngularRegion":
        return cls(3, CAP_PATCH, polar=tuple(polar), azimuth=tuple(azimuth), axis=tuple(axis), order=order)

    @property
    def measure(self) -> float:
        if self.kind == FULL_SPHERE:
            return sphere_measure(self.d)
        if self.kind == ARC:
            return self.theta2 - self.theta1
        a, b = self.polar
        c, e = self.azimuth
        return (math.cos(a) - math.cos(b)) * (e - c)

    def _quadrature(self):
        n = self.order
        if self.d == 2:
            if self.kind == FULL_SPHERE:
                th = 2 * math.pi * np.arange(2 * n) / (2 * n)
                w = np.full(2 * n, 2 * math.pi / (2 * n))
            else:
                th, w = _gl(self.theta1, self.theta2, n, panels=max(1, int(np.ceil((self.theta2 - self.theta1) / 0.5))))
            return np.column_stack([np.cos(th), np.sin(th)]), w
        a, b = (0.0, math.pi) if self.kind == FULL_SPHERE else self.polar
        c, e = (0.0, 2 * math.pi) if self.kind == FULL_SPHERE else self.azimuth
        # Gauss–Legendre in cos(polar), trapezoid in azimuth when periodic
        z, wz = _gl(math.cos(b), math.cos(a), n)
        if math.isclose(e - c, 2 * math.pi):
            ph = c + (e - c) * np.arange(2 * n) / (2 * n)
            wp = np.full(2 * n, (e - c) / (2 * n))
        else:
            ph, wp = _gl(c, e, n)
        zz, pp = np.meshgrid(z, ph, indexing="ij")
        s = np.sqrt(np.clip(1 - zz**2, 0, None))
        pts = np.stack([s * np.cos(pp), s * np.sin(pp), zz], axis=-1).reshape(-1, 3)
        if self.kind == CAP_PATCH:
            pts = pts @ _rotation_to(np.array(self.axis)).T
        return pts, np.outer(wz, wp).ravel()

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(points)
        if self.kind == FULL_SPHERE:
            return np.ones(len(p), dtype=bool)
        if self.kind == ARC:
            th = np.arctan2(p[:, 1], p[:, 0])
            rel = np.mod(th - self.theta1, 2 * math.pi)
            return rel < (self.theta2 - self.theta1)
        local = p @ _rotation_to(np.array(self.axis))
        pol = np.arccos(np.clip(local[:, 2], -1, 1))
        az = np.mod(np.arctan2(local[:, 1], local[:, 0]) - self.azimuth[0], 2 * math.pi)
        return (pol > self.polar[0]) & (pol < self.polar[1]) & (az < self.azimuth[1] - self.azimuth[0])


def _legendre_norm(m: int, q: int) -> float:
    return math.sqrt((2 * m + 1) / (4 * math.pi) * math.exp(gammaln(m - q + 1) - gammaln(m + q + 1)))


def evaluate(mode: AngularMode, points) -> np.ndarray:
    """Values of the real orthonormal harmonic at unit vectors ``points``."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    if p.shape[-1] != mode.d:
        raise ValueError("point dimension does not match the mode")
    if mode.d == 2:
        th = np.arctan2(p[:, 1], p[:, 0])
        return _circle_values(mode, th)
    z = np.clip(p[:, 2], -1.0, 1.0)
    ph = np.arctan2(p[:, 1], p[:, 0])
    q = mode.order
    aq = abs(q)
    base = _legendre_norm(mode.m, aq) * lpmv(aq, mode.m, z)
    if q == 0:
        return base
    trig = np.cos(aq * ph) if q > 0 else np.sin(aq * ph)
    return math.sqrt(2.0) * base * trig


def _circle_values(mode: AngularMode, th: np.ndarray) -> np.ndarray:
    if mode.m == 0:
        return np.full_like(th, 1.0 / math.sqrt(2 * math.pi), dtype=float)
    f = np.cos if mode.l == 1 else np.sin
    return f(mode.m * th) / math.sqrt(math.pi)


def _arc_integral(a: int, fa: str, b: int, fb: str, t1: float, t2: float) -> float:
    """``∫_{t1}^{t2} fa(aθ) fb(bθ) dθ`` for fa, fb in {cos, sin}, in closed form."""

    def prim_cos(k, t):  # ∫ cos(kθ)
        return t if k == 0 else math.sin(k * t) / k

    def prim_sin(k, t):  # ∫ sin(kθ)
        return 0.0 if k == 0 else -math.cos(k * t) / k

    def between(prim, k):
        return prim(k, t2) - prim(k, t1)

    s, d = a + b, a - b
    if fa == "cos" and fb == "cos":
        return 0.5 * (between(prim_cos, d) + between(prim_cos, s))
    if fa == "sin" and fb == "sin":
        return 0.5 * (between(prim_cos, d) - between(prim_cos, s))
    if fa == "sin" and fb == "cos":
        return 0.5 * (between(prim_sin, s) + between(prim_sin, d))
    return _arc_integral(b, fb, a, fa, t1, t2)


def _circle_factor(mode: AngularMode) -> tuple[str, float]:
    if mode.m == 0:
        return "cos", 1.0 / math.sqrt(2 * math.pi)
    return ("cos" if mode.l == 1 else "sin"), 1.0 / math.sqrt(math.pi)


def angular_mass(a: AngularMode, b: AngularMode, region: AngularRegion) -> float:
    """``∫_region Y_a Y_b dσ``."""
    if a.d != b.d or a.d != region.d:
        raise ValueError("modes and region must share the dimension")
    if region.kind == FULL_SPHERE:
        return 1.0 if a == b else 0.0
    if region.d == 2:
        fa, ca = _circle_factor(a)
        fb, cb = _circle_factor(b)
        return ca * cb * _arc_integral(a.m, fa, b.m, fb, region.theta1, region.theta2)
    return float(np.sum(region.weights * evaluate(a, region.nodes) * evaluate(b, region.nodes)))


def angular_gram(modes: list[AngularMode], region: AngularRegion) -> np.ndarray:
    """Matrix of ``angular_mass`` over a mode list."""
    n = len(modes)
    if region.kind == FULL_SPHERE:
        return np.eye(n)
    if region.d == 2:
        out = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                out[i, j] = out[j, i] = angular_mass(modes[i], modes[j], region)
        return out
    vals = np.vstack([evaluate(m, region.nodes) for m in modes])
    g = (vals * region.weights) @ vals.T
    return (g + g.T) / 2


# ---------------------------------------------------------------------------
# spectral inequality constant
# ---------------------------------------------------------------------------

def _centered_arc_blocks(M: int, half: mpmath.mpf):
    """Gram blocks of the cos and sin families on the arc ``(-half, half)``.

    Rotating the arc to be centred at θ = 0 does not change the spectral
    constant (the span of degrees < M is rotation invariant) and splits the
    Gram matrix into an even (cos) and an odd (sin) block.
    """

    def cc(a, b):
        def part(k):
            return 2 * half if k == 0 else 2 * mpmath.sin(k * half) / k

        return (part(a - b) + part(a + b)) / 2

    def ss(a, b):
        def part(k):
            return 2 * half if k == 0 else 2 * mpmath.sin(k * half) / k

        return (part(a - b) - part(a + b)) / 2

    pi = mpmath.pi
    norm = [1 / mpmath.sqrt(2 * pi)] + [1 / mpmath.sqrt(pi)] * (M - 1)
    even = np.empty((M, M), dtype=object)
    for i in range(M):
        for j in range(M):
            even[i, j] = norm[i] * norm[j] * cc(i, j)
    odd = np.empty((M - 1, M - 1), dtype=object)
    for i in range(1, M):
        for j in range(1, M):
            odd[i - 1, j - 1] = ss(i, j) / pi
    return even, odd


def _eye(n: int):
    out = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            out[i, j] = mpmath.mpf(1 if i == j else 0)
    return out


def _arc_constant(M: int, length: float, dps: int) -> mpmath.mpf:
    with mpmath.workdps(dps):
        half = mpmath.mpf(length) / 2
        even, odd = _centered_arc_blocks(M, half)
        best = pencil_max(_eye(M), even).value
        if M > 1:
            best = max(best, pencil_max(_eye(M - 1), odd).value)
        return +best


@lru_cache(maxsize=512)
def _arc_constant_adaptive(M: int, length: float) -> float:
    """Evaluate at increasing precision until two levels agree to 1e-12."""
    dps = 30 + 2 * M
    prev = None
    for _ in range(8):
        try:
            cur = _arc_constant(M, length, dps)
        except NotPositiveDefinite:
            cur = None
        if cur is not None and prev is not None and abs(cur - prev) <= mpmath.mpf(10) ** -12 * abs(cur):
            return float(cur)
        prev = cur
        dps *= 2
    raise NotPositiveDefinite(f"arc Gram constant unstable in precision at M={M}")


def spectral_inequality_constant(M: int, region: AngularRegion, d: int | None = None) -> float:
    """``max ‖y‖²_sphere / ‖y‖²_region`` over ``y`` in the span of degrees ``< M``.

    Arcs are handled in extended precision from closed-form Gram entries;
    d = 3 patches use the region quadrature in double precision, and a
    numerically singular region Gram raises ``NotPositiveDefinite`` with a
    condition estimate.
    """
    d = region.d if d is None else d
    if d != region.d:
        raise ValueError("region dimension mismatch")
    if region.kind == FULL_SPHERE:
        raise ValueError("the spectral constant is only meaningful for a proper subregion")
    if M < 1:
        raise ValueError("M must be at least 1")
    if region.kind == ARC:
        return _arc_constant_adaptive(int(M), float(region.theta2 - region.theta1))
    modes = angular_modes(d, M)
    g = angular_gram(modes, region)
    res = pencil_max(np.eye(len(modes)), g)
    if res.condition > 1e13:
        raise NotPositiveDefinite("region Gram numerically singular", condition=res.condition)
    return float(res.value)


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r2: float
    slope_stderr: float


def fit_log_linear(x, y) -> LinearFit:
    """Least-squares line through ``(x, y)`` with R² and slope standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - a @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    dof = max(len(x) - 2, 1)
    sxx = float(((x - x.mean()) ** 2).sum())
    stderr = math.sqrt(ss_res / dof / sxx) if sxx > 0 else math.inf
    return LinearFit(float(coef[0]), float(coef[1]), r2, stderr)
