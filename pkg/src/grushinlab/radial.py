"""Radial reduction of ``-Δ + μ²|x|²`` on the ball, one angular degree at a time.

For each angular degree ``m`` the eigenfunctions are ``f(r) Y_m(θ)`` where
``f`` solves the Sturm–Liouville problem

    -(r^{d-1} f')' / r^{d-1} + (m(m+d-2)/r² + μ²r²) f = ν f,   f(R) = 0,

with no flux through the origin. The problem is discretized by finite
volumes on a cell-centred grid, symmetrized, and solved with Sturm
bisection + inverse iteration.
"""

from __future__ import annotations

import hashlib
import math
import os
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .linalg import EigenSolverError, tridiagonal_lowest

__all__ = [
    "RadialProblem",
    "RadialGrid",
    "RadialMode",
    "QuasimodeProfile",
    "RadialCache",
    "solve_modes",
    "ground_eigenvalue",
    "gaussian_quasimode",
    "smooth_cutoff",
    "interval_gram",
    "profile_spline",
    "set_default_cache",
]

GRID_KINDS = ("staggered", "uniform")


@dataclass(frozen=True)
class RadialProblem:
    d: int
    R: float
    mu: float
    m: int

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.d}")
        if not self.R > 0:
            raise ValueError("radius must be positive")
        if not self.mu >= 0:
            raise ValueError("mu must be nonnegative")
        if self.m < 0 or int(self.m) != self.m:
            raise ValueError("angular degree must be a nonnegative integer")

    @property
    def centrifugal(self) -> float:
        return self.m * (self.m + self.d - 2)


@dataclass(frozen=True)
class RadialGrid:
    """Cell-centred radial grid with exact cell volumes as weights.

    ``staggered``: ``r_i = (i - 1/2) h`` with ``h = R/(n + 1/2)``; the
    Dirichlet node sits at ``r_{n+1} = R``.
    ``uniform``: ``r_i = i h`` with ``h = R/(n + 1)``.

    The weight of node ``i`` is the measure of its control volume under
    ``r^{d-1} dr``; the half cell between the last face and ``R`` is
    lumped into the last node so the weights sum to ``R^d/d`` exactly.
    """

    n: int
    R: float
    d: int
    kind: str = "staggered"
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    faces: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)
    h: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in GRID_KINDS:
            raise ValueError(f"grid kind must be one of {GRID_KINDS}")
        if self.n < 16:
            raise ValueError(f"grid too coarse: n={self.n} < 16")
        n, R, d = self.n, float(self.R), self.d
        idx = np.arange(1, n + 1, dtype=float)
        if self.kind == "staggered":
            h = R / (n + 0.5)
            nodes = (idx - 0.5) * h
            faces = idx * h  # face i sits between node i and node i+1
            lower = np.concatenate([[0.0], faces[:-1]])
        else:
            h = R / (n + 1)
            nodes = idx * h
            faces = (idx + 0.5) * h
            lower = np.concatenate([[0.0], faces[:-1]])
        upper = faces.copy()
        upper[-1] = R
        weights = (upper**d - lower**d) / d
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "faces", faces)
        object.__setattr__(self, "weights", weights)

    def integrate(self, values: np.ndarray) -> float:
        """``∫_0^R g r^{d-1} dr`` for nodal samples ``g``."""
        return float(np.dot(self.weights, values))


@dataclass(frozen=True)
class RadialMode:
    problem: RadialProblem
    k: int
    eigenvalue: float
    profile: np.ndarray = field(repr=False)
    boundary_slope: float
    grid: RadialGrid = field(repr=False)

    @property
    def nu(self) -> float:
        return self.eigenvalue


def _assemble(problem: RadialProblem, grid: RadialGrid):
    """Symmetrized tridiagonal form of the finite-volume operator."""
    d = grid.d
    r = grid.nodes
    w = grid.weights
    gaps = np.diff(np.concatenate([r, [grid.R]]))
    flux = grid.faces ** (d - 1) / gaps  # flux coefficient of face i (i = 1..n)
    stiff_diag = flux.copy()
    stiff_diag[1:] += flux[:-1]
    potential = problem.centrifugal / r**2 + problem.mu**2 * r**2
    diag = stiff_diag / w + potential
    off = -flux[:-1] / np.sqrt(w[:-1] * w[1:])
    return diag, off


def _refine_tail(x: np.ndarray, nu: float, diag: np.ndarray, off: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    """Rebuild the decaying tail of an eigenvector by backward recurrence.

    Inverse iteration leaves an absolute rounding floor of about
    ``eps * max|x|`` on every component, which swamps exponentially small
    tails. Running the three-term recurrence inward from the Dirichlet end
    is stable there (the wanted solution grows in that direction), so the
    tail beyond the last component above ``floor * max|x|`` is replaced by
    the recurrence solution matched at that component.
    """
    big = np.flatnonzero(np.abs(x) >= floor * np.max(np.abs(x)))
    j = int(big[-1])
    n = x.size
    if j >= n - 2:
        return x
    b = np.zeros(n + 1)
    b[n - 1] = 1.0
    for i in range(n - 1, j, -1):
        right = off[i] * b[i + 1] if i < n - 1 else 0.0
        b[i - 1] = -((diag[i] - nu) * b[i] + right) / off[i - 1]
        if abs(b[i - 1]) > 1e250:
            b[i - 1:n] *= 1e-250
    out = x.copy()
    out[j + 1:] = b[j + 1:n] * (x[j] / b[j])
    return out


def _solve_raw(problem: RadialProblem, grid: RadialGrid, k_max: int):
    diag, off = _assemble(problem, grid)
    vals, vecs = tridiagonal_lowest(diag, off, k_max)
    vecs = np.vstack([_refine_tail(v, nu, diag, off) for v, nu in zip(vecs, vals)])
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    profiles = vecs / np.sqrt(grid.weights)[None, :]
    for j in range(k_max):
        p = profiles[j]
        big = np.flatnonzero(np.abs(p) > 1e-3 * np.max(np.abs(p)))
        if p[big[0]] < 0:
            profiles[j] = -p
    return vals, profiles


def _boundary_slopes(profiles: np.ndarray, grid: RadialGrid) -> np.ndarray:
    # nodes n, n-1 sit at R - h, R - 2h for both grid kinds
    h = grid.R - grid.nodes[-1]
    return (-4.0 * profiles[:, -1] + profiles[:, -2]) / (2.0 * h)


class RadialCache:
    """On-disk eigen-decomposition cache, one binary file per key."""

    MAGIC = b"GRLB"
    VERSION = 1
    _HEADER = struct.Struct("<4sIIddIIIB")

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root) / "radial"

    def _key(self, problem: RadialProblem, grid: RadialGrid, k_max: int):
        kind = GRID_KINDS.index(grid.kind)
        return (problem.d, float(problem.R), float(problem.mu), problem.m, grid.n, k_max, kind)

    def _path(self, key) -> Path:
        digest = hashlib.sha256(repr(key).encode()).hexdigest()[:24]
        return self.root / f"{digest}.bin"

    def load(self, problem: RadialProblem, grid: RadialGrid, k_max: int):
        key = self._key(problem, grid, k_max)
        path = self._path(key)
        if not path.exists():
            return None
        raw = path.read_bytes()
        if len(raw) < self._HEADER.size:
            return None
        magic, version, d, R, mu, m, n, k, kind = self._HEADER.unpack_from(raw)
        if magic != self.MAGIC or version != self.VERSION or (d, R, mu, m, n, k, kind) != key:
            return None
        body = np.frombuffer(raw, dtype="<f8", offset=self._HEADER.size)
        if body.size != k + k * n:
            return None
        return body[:k].copy(), body[k:].reshape(k, n).copy()

    def store(self, problem, grid, k_max, values, profiles) -> None:
        key = self._key(problem, grid, k_max)
        self.root.mkdir(parents=True, exist_ok=True)
        d, R, mu, m, n, k, kind = key
        header = self._HEADER.pack(self.MAGIC, self.VERSION, d, R, mu, m, n, k, kind)
        payload = np.concatenate([values, profiles.ravel()]).astype("<f8").tobytes()
        tmp = self._path(key).with_suffix(".tmp")
        tmp.write_bytes(header + payload)
        tmp.replace(self._path(key))


_default_cache: RadialCache | None = None


def set_default_cache(root: str | os.PathLike | None) -> None:
    """Enable (or disable with ``None``) the on-disk cache for ``solve_modes``."""
    global _default_cache
    _default_cache = RadialCache(root) if root is not None else None


@lru_cache(maxsize=4096)
def _cached_solve(problem: RadialProblem, grid: RadialGrid, k_max: int):
    cache = _default_cache
    hit = cache.load(problem, grid, k_max) if cache is not None else None
    if hit is not None:
        return hit
    vals, profiles = _solve_raw(problem, grid, k_max)
    if cache is not None:
        cache.store(problem, grid, k_max, vals, profiles)
    vals.setflags(write=False)
    profiles.setflags(write=False)
    return vals, profiles


def solve_modes(problem: RadialProblem, grid: RadialGrid, k_max: int) -> list[RadialMode]:
    """Lowest ``k_max`` radial eigenpairs for one angular degree."""
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    if grid.d != problem.d or not math.isclose(grid.R, problem.R):
        raise ValueError("grid and problem disagree on (d, R)")
    if 4 * k_max >= grid.n:
        raise ValueError(f"grid too coarse for k_max={k_max}: need n > {4 * k_max}")
    vals, profiles = _cached_solve(problem, grid, k_max)
    if np.any(np.diff(vals) <= 0):
        raise EigenSolverError("radial eigenvalues not strictly increasing", float(np.min(np.diff(vals))))
    slopes = _boundary_slopes(profiles, grid)
    return [
        RadialMode(problem, j + 1, float(vals[j]), profiles[j], float(slopes[j]), grid)
        for j in range(k_max)
    ]


def _richardson(values: list[float], hs: list[float]) -> float:
    """Eliminate the h² (and h⁴ with three levels) error terms."""
    if len(values) == 1:
        return values[0]
    powers = [2, 4][: len(values) - 1]
    a = np.array([[1.0] + [h**p for p in powers] for h in hs])
    return float(np.linalg.solve(a, np.array(values))[0])


def ground_eigenvalue(d: int, R: float, mu: float, grid: RadialGrid, richardson: int = 0) -> float:
    """Lowest eigenvalue over all angular degrees (attained at ``m = 0``).

    ``richardson`` = 1 or 2 adds that many grid doublings and extrapolates.
    """
    problem = RadialProblem(d, R, mu, 0)
    grids = [grid] + [RadialGrid(grid.n * 2**j, grid.R, grid.d, grid.kind) for j in range(1, richardson + 1)]
    vals = [solve_modes(problem, g, 1)[0].eigenvalue for g in grids]
    return _richardson(vals, [g.h for g in grids])


def smooth_cutoff(s: np.ndarray) -> np.ndarray:
    """C^∞ transition: 0 for s ≤ 1/2, 1 at s = 1.

    ``θ(s) = ρ(2s - 1)`` with ``ρ(u) = e^{-1/u} / (e^{-1/u} + e^{-1/(1-u)})``.
    """
    u = np.clip(2.0 * np.asarray(s, dtype=float) - 1.0, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
        b = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class QuasimodeProfile:
    d: int
    R: float
    mu: float
    profile: np.ndarray = field(repr=False)
    normalizer: float  # C_μ
    grid: RadialGrid = field(repr=False)


def gaussian_quasimode(
    d: int,
    R: float,
    mu: float,
    grid: RadialGrid,
    cutoff_theta: Callable[[np.ndarray], np.ndarray] = smooth_cutoff,
) -> QuasimodeProfile:
    """Truncated Gaussian ``C μ^{d/4} (e^{-μr²/2} - θ(r/R) e^{-μR²/2})``.

    Normalized to unit radial norm on the grid; returned profile is directly
    comparable with ``RadialMode.profile`` at ``m = 0``.
    """
    if not mu > 0:
        raise ValueError("the Gaussian quasimode needs mu > 0")
    r = grid.nodes
    shape = np.exp(-mu * r**2 / 2) - cutoff_theta(r / R) * math.exp(-mu * R**2 / 2)
    c = 1.0 / math.sqrt(grid.integrate(shape**2) * mu ** (d / 2))
    return QuasimodeProfile(d, R, mu, c * mu ** (d / 4) * shape, c, grid)


def profile_spline(profile: np.ndarray, grid: RadialGrid, m: int) -> CubicSpline:
    """Cubic spline through the nodal profile on ``[-R, R]``.

    Uses the parity ``f(-r) = (-1)^m f(r)`` and the Dirichlet value at R,
    so the spline is well behaved at the origin.
    """
    r = np.concatenate([grid.nodes, [grid.R]])
    f = np.concatenate([profile, [0.0]])
    sign = -1.0 if m % 2 else 1.0
    rr = np.concatenate([-r[::-1], r])
    ff = np.concatenate([sign * f[::-1], f])
    if grid.kind == "uniform":
        rr = np.concatenate([-r[::-1], [0.0], r])
        ff = np.concatenate([sign * f[::-1], [0.0 if m % 2 else _origin_value(profile, grid)], f])
    return CubicSpline(rr, ff, axis=-1)


def _origin_value(profile, grid) -> float:
    r = grid.nodes[:3]
    return float(np.polyval(np.polyfit(r**2, profile[:3], 2), 0.0))


def _gauss_panels(a: float, b: float, breaks: np.ndarray, order: int = 6):
    x, w = np.polynomial.legendre.leggauss(order)
    inner = breaks[(breaks > a) & (breaks < b)]
    edges = np.concatenate([[a], inner, [b]])
    lo, hi = edges[:-1], edges[1:]
    half = (hi - lo) / 2
    pts = (lo[:, None] + half[:, None] * (x[None, :] + 1)).ravel()
    wts = (half[:, None] * w[None, :]).ravel()
    return pts, wts


def interval_gram(
    profiles: np.ndarray,
    ms: np.ndarray,
    grid: RadialGrid,
    r1: float,
    r2: float,
    power: int = 0,
) -> np.ndarray:
    """``∫_{r1}^{r2} f_j f_k r^{d-1+power} dr`` for a stack of profiles.

    Each profile is interpolated by a parity-aware cubic spline and
    integrated with composite Gauss–Legendre panels aligned to the grid, so
    partial cells at the interval ends are handled to high order.
    """
    if not 0 <= r1 < r2 <= grid.R * (1 + 1e-12):
        raise ValueError("need 0 <= r1 < r2 <= R")
    pts, wts = _gauss_panels(r1, min(r2, grid.R), np.concatenate([grid.nodes, [grid.R]]))
    vals = np.vstack([profile_spline(p, grid, int(m))(pts) for p, m in zip(profiles, ms)])
    wr = wts * pts ** (grid.d - 1 + power)
    return (vals * wr) @ vals.T
