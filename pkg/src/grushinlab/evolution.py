"""Spectral propagation of the harmonic-heat and Grushin equations, a
Crank–Nicolson finite-difference oracle, and the norms used by the
observability statements.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping

import numpy as np
from scipy.linalg import solve_banded

from .modes import ModeSet
from .radial import _gauss_panels, interval_gram, profile_spline

__all__ = [
    "SpectralField",
    "TensorGrushinField",
    "FieldNorms",
    "DiscretizationFault",
    "PolarGrid",
    "FDState",
    "solve_harmonic_heat",
    "solve_grushin",
    "fd_oracle",
    "field_norms",
    "field_to_fd",
    "fd_from_function",
    "fd_difference",
    "moment_matrix",
    "annulus_integrals",
    "AnnulusIntegrals",
    "export_field_csv",
    "random_field",
]


class DiscretizationFault(ArithmeticError):
    """A quantity that must be nonnegative came out clearly negative."""


@dataclass(frozen=True)
class SpectralField:
    modes: ModeSet = field(repr=False)
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (len(self.modes),):
            raise ValueError(f"need {len(self.modes)} coefficients, got shape {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @property
    def mu(self) -> float:
        return self.modes.mu

    @property
    def l2(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def with_coeffs(self, c: np.ndarray) -> "SpectralField":
        return SpectralField(self.modes, c)

    def radial_components(self, nodes: np.ndarray) -> dict[tuple[int, int], np.ndarray]:
        """``Σ_k c_{mlk} f_{mk}(r)`` at ``nodes`` for every angular mode ``(m, l)``."""
        out: dict[tuple[int, int], np.ndarray] = {}
        for (m, l, k), c in zip(self.modes.labels, self.coeffs):
            spline = _spline(self.modes, m, k)
            out.setdefault((m, l), np.zeros_like(nodes, dtype=float))
            out[(m, l)] = out[(m, l)] + c * spline(nodes)
        return out


@lru_cache(maxsize=4096)
def _spline(modes: ModeSet, m: int, k: int):
    return profile_spline(modes.block(m).profiles[k - 1], modes.grid, m)


def random_field(modes: ModeSet, rng: np.random.Generator, decay: float = 0.0) -> SpectralField:
    """Gaussian coefficients damped by ``e^{-decay·ν}`` and normalized to unit L² norm."""
    c = rng.standard_normal(len(modes)) * np.exp(-decay * (modes.nu - modes.nu[0]))
    return SpectralField(modes, c / np.linalg.norm(c))


def solve_harmonic_heat(y0: SpectralField, T: float) -> SpectralField:
    """Exact evolution of the truncated system: ``c ↦ e^{-νT} c``."""
    if T < 0:
        raise ValueError("T must be nonnegative")
    return y0.with_coeffs(y0.coeffs * np.exp(-y0.modes.nu * T))


@dataclass(frozen=True)
class TensorGrushinField:
    """``y(x, x̃) = Σ_p y_p(x) φ_p(x̃)`` with ``φ_p = √(2/L) sin(pπx̃/L)``."""

    L: float
    fibers: tuple[tuple[int, SpectralField], ...]

    def __post_init__(self):
        ps = [p for p, _ in self.fibers]
        if len(set(ps)) != len(ps) or any(p < 1 for p in ps):
            raise ValueError("fiber indices must be distinct positive integers")
        for p, f in self.fibers:
            if not math.isclose(f.mu, p * math.pi / self.L, rel_tol=1e-12):
                raise ValueError(f"fiber {p} has mu={f.mu}, expected {p * math.pi / self.L}")

    @staticmethod
    def frequency(p: int, L: float = math.pi) -> float:
        return p * math.pi / L

    @property
    def l2(self) -> float:
        return math.sqrt(sum(f.l2**2 for _, f in self.fibers))

    def evaluate_tilde(self, p: int, xt: np.ndarray) -> np.ndarray:
        return math.sqrt(2.0 / self.L) * np.sin(p * math.pi * np.asarray(xt) / self.L)


def solve_grushin(y0: TensorGrushinField, T: float) -> TensorGrushinField:
    """Each fiber evolves by the harmonic-heat flow at its own ``μ_p``."""
    return TensorGrushinField(y0.L, tuple((p, solve_harmonic_heat(f, T)) for p, f in y0.fibers))


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FieldNorms:
    l2: float
    h1_seminorm: float
    mu_norm: float
    weighted: float  # μ² ∫ |x|² y²


@lru_cache(maxsize=64)
def _moment_blocks(modes: ModeSet) -> dict[int, np.ndarray]:
    """``X_jk = ∫_0^R f_j f_k r^{d+1} dr`` per degree."""
    return {
        b.m: interval_gram(b.profiles, np.full(b.size, b.m), modes.grid, 0.0, modes.R, power=2)
        for b in modes.blocks
    }


def moment_matrix(modes: ModeSet) -> np.ndarray:
    """``∫ |x|² ϖ_j ϖ_k`` over the whole mode set (zero across angular modes)."""
    blocks = _moment_blocks(modes)
    n = len(modes)
    out = np.zeros((n, n))
    groups: dict[tuple[int, int], list[int]] = {}
    for i, (m, l, _) in enumerate(modes.labels):
        groups.setdefault((m, l), []).append(i)
    for (m, _), idx in groups.items():
        ks = [modes.labels[i][2] - 1 for i in idx]
        out[np.ix_(idx, idx)] = blocks[m][np.ix_(ks, ks)]
    return out


def field_norms(fld: SpectralField, tol: float = 1e-8) -> FieldNorms:
    """L², H¹-seminorm, μ-norm, and the weighted moment of a spectral field.

    ``‖∇y‖² = Σ c_j c_k (ν_j δ_jk − μ² X_jk)``: the Green identity for the
    eigenbasis, with the moment matrix ``X`` taken by quadrature.
    """
    c = fld.coeffs
    mu2 = fld.mu**2
    weighted = mu2 * float(c @ moment_matrix(fld.modes) @ c) if mu2 > 0 else 0.0
    h1sq = float(np.dot(fld.modes.nu, c * c)) - weighted
    scale = max(float(np.dot(fld.modes.nu, c * c)), 1e-300)
    if h1sq < -tol * scale:
        raise DiscretizationFault(f"negative squared gradient norm {h1sq:.3e}")
    h1sq = max(h1sq, 0.0)
    l2 = float(np.linalg.norm(c))
    return FieldNorms(l2, math.sqrt(h1sq), math.sqrt(h1sq + mu2 * l2 * l2), weighted)


@dataclass(frozen=True)
class AnnulusIntegrals:
    l2sq: float  # ∫ y²
    grad_sq: float  # ∫ |∇y|²
    moment: float  # ∫ |x|² y²


def annulus_integrals(fld: SpectralField, r1: float, r2: float, order: int = 8) -> AnnulusIntegrals:
    """Integrals over ``{r1 < |x| < r2}`` by direct radial quadrature.

    Each angular component ``g_{ml}(r)`` is rebuilt from the profile
    splines; ``|∇y|²`` integrates to ``Σ ∫ (g′² + m(m+d−2) g²/r²) r^{d−1} dr``.
    Independent of the eigenvalue bookkeeping used by ``field_norms``.
    """
    modes = fld.modes
    d = modes.d
    pts, wts = _gauss_panels(r1, r2, np.concatenate([modes.grid.nodes, [modes.R]]), order)
    w = wts * pts ** (d - 1)
    vals: dict[tuple[int, int], np.ndarray] = {}
    ders: dict[tuple[int, int], np.ndarray] = {}
    for (m, l, k), c in zip(modes.labels, fld.coeffs):
        if c == 0:
            continue
        sp = _spline(modes, m, k)
        vals[(m, l)] = vals.get((m, l), 0.0) + c * sp(pts)
        ders[(m, l)] = ders.get((m, l), 0.0) + c * sp(pts, 1)
    l2sq = grad = mom = 0.0
    for (m, l), g in vals.items():
        l2sq += float(np.dot(w, g * g))
        mom += float(np.dot(w * pts**2, g * g))
        grad += float(np.dot(w, ders[(m, l)] ** 2 + m * (m + d - 2) * g * g / pts**2))
    return AnnulusIntegrals(l2sq, grad, mom)


def export_field_csv(fld: SpectralField, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "l", "k", "nu", "coeff"])
        for (m, l, k), nu, c in zip(fld.modes.labels, fld.modes.nu, fld.coeffs):
            w.writerow([m, l, k, f"{nu:.17g}", f"{c:.17g}"])


# ---------------------------------------------------------------------------
# finite-difference oracle (d = 2)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolarGrid:
    """Vertex grid ``r_j = j h``, ``j = 0..n-1``, ``h = R/n``, Dirichlet at ``r_n = R``.

    Control volume of node 0 is ``[0, h/2]`` (measure ``h²/8`` under
    ``r dr``); node ``j ≥ 1`` owns ``[r_j − h/2, r_j + h/2]`` (measure
    ``r_j h``).
    """

    n: int
    R: float
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    mass: np.ndarray = field(init=False, repr=False, compare=False)
    h: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 16:
            raise ValueError("grid too coarse")
        h = self.R / self.n
        r = np.arange(self.n) * h
        mass = r * h
        mass[0] = h * h / 8
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "nodes", r)
        object.__setattr__(self, "mass", mass)


@dataclass(frozen=True)
class FDState:
    grid: PolarGrid
    values: Mapping[tuple[int, int], np.ndarray]
    t: float = 0.0
    dt: float = 0.0

    def l2(self) -> float:
        return math.sqrt(sum(float(np.dot(self.grid.mass, v * v)) for v in self.values.values()))


def _fd_operator(grid: PolarGrid, m: int, mu: float, first: int):
    """Stiffness + potential of the radial operator as (lower, diag, upper) on nodes ``first..n-1``."""
    h, r = grid.h, grid.nodes
    faces = (np.arange(grid.n) + 0.5) * h  # face between node j and j+1
    flux = faces / h
    diag = flux.copy()
    diag[1:] += flux[:-1]
    pot = np.zeros(grid.n)
    pot[1:] = (m * m / r[1:] ** 2 + mu * mu * r[1:] ** 2) * grid.mass[1:]
    pot[0] = mu * mu * (h / 2) ** 4 / 4  # exact ∫ μ²r² r dr over the origin cell
    diag = diag + pot
    off = -flux[:-1]
    return diag[first:], off[first:]


def fd_oracle(
    y0: FDState,
    mu: float,
    T: float,
    dt: float,
    source: Callable[[float, np.ndarray], Mapping[tuple[int, int], np.ndarray]] | None = None,
    snapshots: int = 0,
):
    """Crank–Nicolson on each angular component of the radial operator.

    ``source(t, r)`` returns nodal source values per angular mode. Returns
    the final ``FDState``, or ``(times, states)`` when ``snapshots > 0``
    (that many equally spaced recordings including ``t = 0`` and ``T``).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    grid = y0.grid
    steps = max(1, int(round(T / dt)))
    dt = T / steps
    keys = sorted(y0.values)
    first = {key: 0 if key[0] == 0 else 1 for key in keys}
    ops = {}
    for key in keys:
        diag, off = _fd_operator(grid, key[0], mu, first[key])
        mass = grid.mass[first[key]:]
        lhs = np.zeros((3, diag.size))
        lhs[0, 1:] = dt / 2 * off
        lhs[1] = mass + dt / 2 * diag
        lhs[2, :-1] = dt / 2 * off
        ops[key] = (diag, off, mass, lhs)
    u = {key: np.array(y0.values[key][first[key]:], dtype=float) for key in keys}
    record = set()
    if snapshots:
        record = {int(round(j * steps / (snapshots - 1))) for j in range(snapshots)}
    times, states = [], []

    def snap(step):
        vals = {}
        for key in keys:
            full = np.zeros(grid.n)
            full[first[key]:] = u[key]
            vals[key] = full
        times.append(step * dt)
        states.append(FDState(grid, vals, step * dt, dt))

    if 0 in record:
        snap(0)
    f_old = source(0.0, grid.nodes) if source else None
    for step in range(1, steps + 1):
        t_new = step * dt
        f_new = source(t_new, grid.nodes) if source else None
        for key in keys:
            diag, off, mass, lhs = ops[key]
            x = u[key]
            ku = diag * x
            ku[:-1] += off * x[1:]
            ku[1:] += off * x[:-1]
            rhs = mass * x - dt / 2 * ku
            if source:
                fo = np.asarray(f_old.get(key, 0.0) * np.ones(grid.n))[first[key]:]
                fn = np.asarray(f_new.get(key, 0.0) * np.ones(grid.n))[first[key]:]
                rhs = rhs + dt / 2 * mass * (fo + fn)
            try:
                u[key] = solve_banded((1, 1), lhs, rhs, check_finite=False)
            except np.linalg.LinAlgError as exc:
                raise np.linalg.LinAlgError(f"Crank–Nicolson solve failed at step {step}, mode {key}") from exc
        f_old = f_new
        if step in record:
            snap(step)
    if snapshots:
        return np.array(times), states
    snap(steps)
    return states[-1]


def field_to_fd(fld: SpectralField, grid: PolarGrid) -> FDState:
    """Sample a d = 2 spectral field on the vertex grid (origin value 0 for m ≥ 1)."""
    if fld.modes.d != 2:
        raise ValueError("the finite-difference oracle is two-dimensional")
    vals = fld.radial_components(grid.nodes)
    for (m, _), v in vals.items():
        if m > 0:
            v[0] = 0.0
    return FDState(grid, vals)


def fd_from_function(grid: PolarGrid, components: Mapping[tuple[int, int], Callable[[np.ndarray], np.ndarray]]) -> FDState:
    return FDState(grid, {key: np.asarray(f(grid.nodes), dtype=float) for key, f in components.items()})


def fd_difference(a: FDState, b: FDState) -> float:
    keys = set(a.values) | set(b.values)
    z = np.zeros(a.grid.n)
    return math.sqrt(sum(float(np.dot(a.grid.mass, (a.values.get(k, z) - b.values.get(k, z)) ** 2)) for k in keys))
