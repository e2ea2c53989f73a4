"""Observation Gramians, observability costs, null controls, and cost sweeps.

Throughout, the *cost* reported by this module is the squared constant
``K = K_T²``: the largest eigenvalue of the pencil ``(E, G)`` with ``E``
the final-energy form and ``G`` the time-integrated observation form.
Values are carried as natural logarithms because ``E`` underflows for
large ``ν T``: matrices are stored scaled by ``e^{2 ν_0 T}`` with ``ν_0``
the smallest eigenvalue present, and the scale is added back in log form.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .evolution import moment_matrix
from .linalg import NotPositiveDefinite, cholesky, pencil_max, pencil_max_resolved, sturm_count
from .modes import ModeSet, build_mode_set
from .radial import RadialGrid, RadialProblem, _assemble, interval_gram, solve_modes
from .sphere import AngularRegion, LinearFit, angular_gram, fit_log_linear, multiplicity

__all__ = [
    "ANNULAR_SECTOR",
    "FULL_ANNULUS",
    "BOUNDARY_ARC",
    "FULL_BOUNDARY",
    "WHOLE_BALL",
    "L2",
    "MU_NORM",
    "ObservationRegion",
    "GramianSystem",
    "CostResult",
    "CostCurve",
    "SweepConfig",
    "ControlResult",
    "QuasimodeBound",
    "InnerSector",
    "observation_matrix",
    "assemble_gramian",
    "observability_cost",
    "brute_force_cost",
    "cost_sweep",
    "min_norm_null_control",
    "quasimode_lower_bound",
    "inner_sector_for_ball",
    "fit_blowup",
]

ANNULAR_SECTOR = "ANNULAR_SECTOR"
FULL_ANNULUS = "FULL_ANNULUS"
BOUNDARY_ARC = "BOUNDARY_ARC"
FULL_BOUNDARY = "FULL_BOUNDARY"
WHOLE_BALL = "WHOLE_BALL"
KINDS = (ANNULAR_SECTOR, FULL_ANNULUS, BOUNDARY_ARC, FULL_BOUNDARY, WHOLE_BALL)
INTERNAL = (ANNULAR_SECTOR, FULL_ANNULUS, WHOLE_BALL)
BOUNDARY = (BOUNDARY_ARC, FULL_BOUNDARY)
DECOUPLED = (FULL_ANNULUS, FULL_BOUNDARY, WHOLE_BALL)
L2 = "L2"
MU_NORM = "MU_NORM"


@dataclass(frozen=True)
class ObservationRegion:
    kind: str
    d: int
    R: float
    R1: float = 0.0
    R2: float = 0.0
    angular: AngularRegion | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown region kind {self.kind}")
        if self.kind in (ANNULAR_SECTOR, FULL_ANNULUS) and not 0 < self.R1 < self.R2 <= self.R:
            raise ValueError("annular regions need 0 < R1 < R2 <= R")
        if self.kind in (ANNULAR_SECTOR, BOUNDARY_ARC):
            if self.angular is None or self.angular.d != self.d:
                raise ValueError("sector and arc regions need an angular region of matching dimension")

    @classmethod
    def sector(cls, R1, R2, angular: AngularRegion, R: float = 1.0):
        return cls(ANNULAR_SECTOR, angular.d, R, R1, R2, angular)

    @classmethod
    def annulus(cls, R1, R2, d: int = 2, R: float = 1.0):
        return cls(FULL_ANNULUS, d, R, R1, R2)

    @classmethod
    def boundary_arc(cls, angular: AngularRegion, R: float = 1.0):
        return cls(BOUNDARY_ARC, angular.d, R, angular=angular)

    @classmethod
    def full_boundary(cls, d: int = 2, R: float = 1.0):
        return cls(FULL_BOUNDARY, d, R)

    @classmethod
    def whole_ball(cls, d: int = 2, R: float = 1.0):
        return cls(WHOLE_BALL, d, R)

    @property
    def is_boundary(self) -> bool:
        return self.kind in BOUNDARY

    @property
    def t_star(self) -> float:
        """Squared distance to the degeneracy over ``2d``."""
        if self.kind in (ANNULAR_SECTOR, FULL_ANNULUS):
            return self.R1**2 / (2 * self.d)
        if self.kind in BOUNDARY:
            return self.R**2 / (2 * self.d)
        return 0.0

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(points)
        r = np.linalg.norm(p, axis=1)
        if self.kind == WHOLE_BALL:
            return r < self.R
        if self.kind in BOUNDARY:
            on = np.isclose(r, self.R)
            return on if self.kind == FULL_BOUNDARY else on & self.angular.contains(p / np.where(r > 0, r, 1)[:, None])
        inside = (r > self.R1) & (r < self.R2)
        if self.kind == FULL_ANNULUS:
            return inside
        return inside & self.angular.contains(p / np.where(r > 0, r, 1)[:, None])


# ---------------------------------------------------------------------------
# Gramians
# ---------------------------------------------------------------------------

def _angular_factor(modes: ModeSet, region: ObservationRegion) -> np.ndarray:
    if region.angular is None:
        ang = modes.angular
        return np.array([[1.0 if a == b else 0.0 for b in ang] for a in ang])
    return angular_gram(modes.angular, region.angular)


def observation_matrix(modes: ModeSet, region: ObservationRegion) -> np.ndarray:
    """``⟨Bϖ_j, Bϖ_k⟩`` for every pair of modes."""
    if modes.d != region.d or not math.isclose(modes.R, region.R):
        raise ValueError("mode set and region disagree on (d, R)")
    n = len(modes)
    if region.kind == WHOLE_BALL:
        return np.eye(n)
    if region.is_boundary:
        s = modes.slopes
        if not np.all(np.isfinite(s)):
            raise ValueError("missing boundary slopes")
        return np.outer(s, s) * region.R ** (region.d - 1) * _angular_factor(modes, region)
    if region.kind == FULL_ANNULUS:
        out = np.zeros((n, n))
        groups: dict[tuple[int, int], list[int]] = {}
        for i, (m, l, _) in enumerate(modes.labels):
            groups.setdefault((m, l), []).append(i)
        cache: dict[int, np.ndarray] = {}
        for (m, _), idx in groups.items():
            if m not in cache:
                b = modes.block(m)
                cache[m] = interval_gram(b.profiles, np.full(b.size, m), modes.grid, region.R1, region.R2)
            ks = [modes.labels[i][2] - 1 for i in idx]
            out[np.ix_(idx, idx)] = cache[m][np.ix_(ks, ks)]
        return out
    radial = interval_gram(modes.profiles, modes.degrees, modes.grid, region.R1, region.R2)
    return radial * _angular_factor(modes, region)


def _time_kernel(nu: np.ndarray, T: float) -> np.ndarray:
    """``(1 − e^{−(ν_j+ν_k)T}) / (ν_j+ν_k)``."""
    s = nu[:, None] + nu[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.where(s > 0, -np.expm1(-s * T) / np.where(s > 0, s, 1.0), T)
    return k


def _energy(nu: np.ndarray, T: float, shift: float, core: np.ndarray | None) -> np.ndarray:
    dd = np.exp(-(nu - shift) * T)
    if core is None:
        return np.diag(dd * dd)
    return dd[:, None] * core * dd[None, :]


@dataclass(frozen=True, eq=False)
class GramianSystem:
    """Pencil ``(E, G)``; the true final-energy matrix is ``e · exp(log_scale)``."""

    modes: ModeSet = field(repr=False)
    region: ObservationRegion
    T: float
    target: str
    b: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)
    e: np.ndarray = field(repr=False)
    log_scale: float

    @property
    def mu(self) -> float:
        return self.modes.mu

    def energy(self) -> np.ndarray:
        return self.e * math.exp(self.log_scale)


def mu_norm_core(modes: ModeSet) -> np.ndarray:
    """``diag(ν + μ²) − μ² X``: the squared μ-norm on eigen-coordinates."""
    mu2 = modes.mu**2
    core = np.diag(modes.nu + mu2)
    if mu2 > 0:
        core = core - mu2 * moment_matrix(modes)
    return (core + core.T) / 2


def assemble_gramian(modes: ModeSet, region: ObservationRegion, T: float, target: str = L2) -> GramianSystem:
    if target not in (L2, MU_NORM):
        raise ValueError(f"unknown target {target}")
    if region.is_boundary and target != MU_NORM:
        raise ValueError("boundary observation is measured against the mu-norm target")
    if T < 0:
        raise ValueError("T must be nonnegative")
    b = observation_matrix(modes, region)
    b = (b + b.T) / 2
    g = b * _time_kernel(modes.nu, T)
    shift = float(modes.nu.min())
    core = mu_norm_core(modes) if target == MU_NORM else None
    e = _energy(modes.nu, T, shift, core)
    return GramianSystem(modes, region, T, target, b, g, e, -2.0 * shift * T)


@dataclass(frozen=True)
class CostResult:
    log_k: float  # ln of the pencil value K = K_T²
    rank: int
    condition: float
    vector: np.ndarray | None = field(default=None, repr=False)
    witness: np.ndarray | None = field(default=None, repr=False)

    @property
    def k(self) -> float:
        return math.exp(self.log_k) if self.log_k < 709 else math.inf

    @property
    def finite(self) -> bool:
        return math.isfinite(self.log_k)


def observability_cost(system: GramianSystem, method: str = "cholesky", rcond: float = 1e-10) -> CostResult:
    """Squared observability constant on the truncated subspace.

    ``cholesky``: ``G`` factored directly; breakdown returns ``+∞`` with a
    near-null witness. ``resolved``: the pencil restricted to the range of
    ``G`` resolved to relative level ``rcond`` (still a lower bound).
    """
    n = system.g.shape[0]
    if system.T == 0:
        return CostResult(math.inf, 0, math.inf, witness=np.eye(n)[0])
    try:
        if method == "cholesky":
            res = pencil_max(system.e, system.g)
        elif method == "resolved":
            res = pencil_max_resolved(system.e, system.g, rcond)
        else:
            raise ValueError(f"unknown method {method}")
    except NotPositiveDefinite as exc:
        return CostResult(math.inf, 0, math.inf, witness=exc.witness)
    if not res.value > 0:
        return CostResult(-math.inf, res.rank or n, res.condition, res.vector)
    return CostResult(math.log(res.value) + system.log_scale, res.rank or n, res.condition, res.vector)


def brute_force_cost(
    system: GramianSystem, samples: int = 10_000, seed: int = 0, refine: int = 20
) -> float:
    """Log of ``sup c'Ec / c'Gc`` by random search plus local refinement.

    Independent of the pencil solver: evaluates the Rayleigh quotient on
    random unit vectors, then polishes the best ``refine`` candidates with
    a quasi-Newton ascent.
    """
    rng = np.random.default_rng(seed)
    e, g = system.e, system.g
    n = e.shape[0]
    dscale = 1.0 / np.sqrt(np.diag(g))
    es = e * np.outer(dscale, dscale)
    gs = g * np.outer(dscale, dscale)
    x = rng.standard_normal((samples, n))
    num = np.einsum("ij,jk,ik->i", x, es, x)
    den = np.einsum("ij,jk,ik->i", x, gs, x)
    q = num / den
    order = np.argsort(q)[::-1][:refine]

    def neg(v):
        return -float(v @ es @ v) / float(v @ gs @ v)

    best = float(q[order[0]])
    for i in order:
        r = minimize(neg, x[i], method="BFGS", options={"gtol": 1e-12, "maxiter": 2000})
        best = max(best, -float(r.fun))
    return math.log(best) + system.log_scale


# ---------------------------------------------------------------------------
# null control by duality
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ControlResult:
    """``u(t) = Σ_k q_k e^{−(T−t)ν_k} B ϖ_k``, cost ``‖u‖²_{L²} = qᵀ G q``."""

    q: np.ndarray
    cost: float
    final_state: np.ndarray
    residual: float


def _duhamel_final(system: GramianSystem, c0: np.ndarray, q: np.ndarray, order: int = 64, panels: int = 16) -> np.ndarray:
    """Final state of the controlled truncated system by Gauss quadrature in time."""
    nu, T = system.modes.nu, system.T
    x, w = np.polynomial.legendre.leggauss(order)
    # geometric panels toward t = T, where the kernels e^{−ν(T−t)} concentrate
    edges = T - T * np.concatenate([[1.0], np.geomspace(1.0, 1e-12, panels)[1:], [0.0]])
    edges = np.unique(edges)
    acc = np.zeros_like(c0)
    for a, bnd in zip(edges[:-1], edges[1:]):
        t = a + (bnd - a) * (x + 1) / 2
        wt = w * (bnd - a) / 2
        kern = np.exp(-np.outer(T - t, nu))  # (nt, N)
        u = kern * q[None, :]  # u coefficients in the observed basis
        acc += ((kern * wt[:, None]).T * (system.b @ u.T)).sum(axis=1)
    return np.exp(-nu * T) * c0 + acc


def min_norm_null_control(system: GramianSystem, y0: np.ndarray) -> ControlResult:
    """Minimal-norm control steering ``y0`` to zero on the truncated system."""
    c0 = np.asarray(y0, dtype=float)
    if c0.shape != (system.g.shape[0],):
        raise ValueError("initial coefficients do not match the mode set")
    if not np.any(c0):
        return ControlResult(np.zeros_like(c0), 0.0, np.zeros_like(c0), 0.0)
    if system.target != L2:
        raise ValueError("null control is formulated for the L2 target")
    try:
        low = cholesky(system.g)
    except NotPositiveDefinite as exc:
        raise NotPositiveDefinite("singular Gramian: no control on the truncated set", exc.witness) from None
    half = system.log_scale / 2
    rhs = -np.exp(-(system.modes.nu * system.T + half)) * c0  # scaled free state
    z = np.linalg.solve(low, rhs)
    qs = np.linalg.solve(low.T, z)
    # one step of iterative refinement against the unfactored G
    r = rhs - system.g @ qs
    qs = qs + np.linalg.solve(low.T, np.linalg.solve(low, r))
    q = qs * math.exp(half)
    cost = float(q @ system.g @ q)
    final = _duhamel_final(system, c0, q)
    return ControlResult(q, cost, final, float(np.linalg.norm(final) / np.linalg.norm(c0)))


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Block:
    m: int
    nu: np.ndarray
    b: np.ndarray
    core: np.ndarray | None


class _BlockEngine:
    """Per-degree Gram blocks for regions that decouple angular modes.

    For full annuli, full boundaries and the whole ball the angular factor
    is the identity, so the pencil splits into one block per ``(m, l)``;
    all ``l`` of a degree share the radial block, so each degree is solved
    once at the largest truncation and sub-blocks are read off.
    """

    def __init__(self, d, R, mu, region: ObservationRegion, target, grid: RadialGrid, nu_cap: float):
        self.d, self.R, self.mu = d, R, mu
        self.region, self.target, self.grid, self.nu_cap = region, target, grid, nu_cap
        self._blocks: dict[int, _Block | None] = {}

    def block(self, m: int) -> _Block | None:
        if m in self._blocks:
            return self._blocks[m]
        if m > 0 and self.block(m - 1) is None:
            self._blocks[m] = None
            return None
        problem = RadialProblem(self.d, self.R, self.mu, m)
        diag, off = _assemble(problem, self.grid)
        count = int(sturm_count(diag, off, [self.nu_cap])[0])
        if count == 0:
            self._blocks[m] = None
            return None
        if 4 * count >= self.grid.n:
            raise ValueError(f"grid n={self.grid.n} too coarse for {count} radial modes at m={m}")
        modes = solve_modes(problem, self.grid, count)
        nu = np.array([x.nu for x in modes])
        prof = np.vstack([x.profile for x in modes])
        ms = np.full(count, m)
        reg = self.region
        if reg.kind == WHOLE_BALL:
            b = np.eye(count)
        elif reg.kind == FULL_ANNULUS:
            b = interval_gram(prof, ms, self.grid, reg.R1, reg.R2)
        else:
            s = np.array([x.boundary_slope for x in modes])
            b = np.outer(s, s) * self.R ** (self.d - 1)
        core = None
        if self.target == MU_NORM:
            x2 = interval_gram(prof, ms, self.grid, 0.0, self.R, power=2)
            core = np.diag(nu + self.mu**2) - self.mu**2 * x2
            core = (core + core.T) / 2
        blk = _Block(m, nu, (b + b.T) / 2, core)
        self._blocks[m] = blk
        return blk

    def log_cost(self, T: float, nu_max: float, rcond: float, stop_ratio: float = 1e-8) -> tuple[float, int]:
        """Max over degrees of the block cost; stops after two negligible blocks."""
        best, size, quiet, m = -math.inf, 0, 0, 0
        if T <= 0:
            return math.inf, 0
        while True:
            blk = self.block(m)
            if blk is None or blk.nu[0] > nu_max:
                break
            k = int((blk.nu <= nu_max).sum())
            nu = blk.nu[:k]
            g = blk.b[:k, :k] * _time_kernel(nu, T)
            e = _energy(nu, T, nu[0], None if blk.core is None else blk.core[:k, :k])
            try:
                res = pencil_max_resolved(e, g, rcond)
                val = math.log(res.value) - 2 * nu[0] * T if res.value > 0 else -math.inf
            except NotPositiveDefinite:
                val = math.inf
            size += k * multiplicity(m, self.d)
            if val < best + math.log(stop_ratio):
                quiet += 1
                if quiet >= 2:
                    break
            else:
                quiet = 0
            best = max(best, val)
            m += 1
        return best, size


@dataclass(frozen=True)
class SweepConfig:
    """``axis = "mu"``: K(μ) at fixed ``T``. ``axis = "T"``: sup over ``mu_ladder`` of K at each T.

    Truncation levels are ``ν_max = f · ν_ground(μ)`` for ``f`` in ``factors``.
    """

    d: int
    R: float
    axis: str
    values: tuple[float, ...]
    T: float = 0.0
    mu_ladder: tuple[float, ...] = ()
    factors: tuple[float, ...] = (128.0, 256.0, 512.0)
    n: int = 256
    target: str = L2
    rcond: float = 1e-13
    tolerance: float = 0.05

    def __post_init__(self):
        if self.axis not in ("mu", "T"):
            raise ValueError("axis must be 'mu' or 'T'")
        if len(self.factors) < 2:
            raise ValueError("need at least two truncation levels")
        if self.axis == "T" and not self.mu_ladder:
            raise ValueError("a T sweep needs a mu ladder")


@dataclass(frozen=True)
class CostCurve:
    axis: str
    values: np.ndarray
    factors: tuple[float, ...]
    log_k: np.ndarray  # (points, levels)
    sizes: np.ndarray  # (points, levels)
    converged: np.ndarray  # (points,)
    fit: LinearFit | None
    t_star: float = 0.0

    @property
    def final(self) -> np.ndarray:
        return self.log_k[:, -1]

    @property
    def ratios(self) -> np.ndarray:
        """Relative change of K between the last two truncation levels."""
        return np.abs(np.expm1(self.log_k[:, -1] - self.log_k[:, -2]))

    def write_csv(self, path) -> None:
        slope = f"{self.fit.slope:.17g}" if self.fit else ""
        r2 = f"{self.fit.r2:.17g}" if self.fit else ""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["axis_value", "truncation", "K", "converged", "slope_fit", "fit_r2", "log_K", "modes"])
            for i, v in enumerate(self.values):
                for j, f in enumerate(self.factors):
                    lk = self.log_k[i, j]
                    k = math.exp(lk) if lk < 709 else math.inf
                    w.writerow([f"{v:.17g}", f"{f:.17g}", f"{k:.17g}", int(self.converged[i]), slope, r2, f"{lk:.17g}", int(self.sizes[i, j])])


def _ground(d, R, mu, grid) -> float:
    return solve_modes(RadialProblem(d, R, mu, 0), grid, 1)[0].nu


def _fiber_costs(cfg: SweepConfig, region: ObservationRegion, mu: float, Ts: Sequence[float], grid: RadialGrid):
    """(len(Ts), levels) log costs and mode counts for one frequency."""
    nu0 = _ground(cfg.d, cfg.R, mu, grid)
    caps = [f * nu0 for f in cfg.factors]
    out = np.empty((len(Ts), len(caps)))
    sizes = np.empty((len(Ts), len(caps)), dtype=int)
    if region.kind in DECOUPLED:
        eng = _BlockEngine(cfg.d, cfg.R, mu, region, cfg.target, grid, max(caps))
        for i, T in enumerate(Ts):
            for j, cap in enumerate(caps):
                out[i, j], sizes[i, j] = eng.log_cost(T, cap, cfg.rcond)
        return out, sizes
    full = build_mode_set(cfg.d, cfg.R, mu, max(caps), grid=grid)
    for j, cap in enumerate(caps):
        ms = full.restrict(cap) if cap < max(caps) else full
        for i, T in enumerate(Ts):
            sysm = assemble_gramian(ms, region, T, cfg.target)
            out[i, j] = observability_cost(sysm, "resolved", cfg.rcond).log_k
            sizes[i, j] = len(ms)
    return out, sizes


def cost_sweep(cfg: SweepConfig, region: ObservationRegion, workers: int = 1) -> CostCurve:
    """Observability cost along a μ or T axis, at every truncation level.

    Sweep points are independent; with ``workers > 1`` they are computed in
    a process pool and collected in input order.
    """
    if region.d != cfg.d or not math.isclose(region.R, cfg.R):
        raise ValueError("region and sweep disagree on (d, R)")
    grid = RadialGrid(cfg.n, cfg.R, cfg.d)
    if cfg.axis == "mu":
        mus, Ts = list(cfg.values), [cfg.T]
    else:
        mus, Ts = list(cfg.mu_ladder), list(cfg.values)
    jobs = [(cfg, region, mu, Ts, grid) for mu in mus]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_fiber_job, jobs))
    else:
        results = [_fiber_job(j) for j in jobs]
    if cfg.axis == "mu":
        log_k = np.vstack([r[0][0] for r in results])
        sizes = np.vstack([r[1][0] for r in results])
    else:
        stacked = np.stack([r[0] for r in results])  # (mu, T, level)
        log_k = stacked.max(axis=0)
        sizes = np.stack([r[1] for r in results]).max(axis=0)
    conv = np.abs(np.expm1(log_k[:, -1] - log_k[:, -2])) < cfg.tolerance
    vals = np.asarray(cfg.values, dtype=float)
    fit = None
    t_star = region.t_star
    if cfg.axis == "mu" and len(vals) >= 2 and np.all(np.isfinite(log_k[:, -1])):
        fit = fit_log_linear(vals, log_k[:, -1])
    elif cfg.axis == "T":
        fit = fit_blowup(vals, log_k[:, -1], t_star)
    return CostCurve(cfg.axis, vals, tuple(cfg.factors), log_k, sizes, conv, fit, t_star)


def _fiber_job(job):
    cfg, region, mu, Ts, grid = job
    return _fiber_costs(cfg, region, mu, Ts, grid)


def fit_blowup(T: Sequence[float], log_k: Sequence[float], t_star: float) -> LinearFit | None:
    """Least squares of ``ln ln K`` against ``−ln(T − T*)``; the slope is the blow-up exponent."""
    T = np.asarray(T, dtype=float)
    lk = np.asarray(log_k, dtype=float)
    ok = (T > t_star) & (lk > 0) & np.isfinite(lk)
    if ok.sum() < 2:
        return None
    return fit_log_linear(-np.log(T[ok] - t_star), np.log(lk[ok]))


# ---------------------------------------------------------------------------
# quasimode lower bound and inner sectors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuasimodeBound:
    mu: np.ndarray
    log_bound: np.ndarray  # ln(e^{−2νT} 2ν / ∫_region ϖ²)
    nu: np.ndarray
    log_mass: np.ndarray
    fit: LinearFit | None


def quasimode_lower_bound(
    mu_ladder: Sequence[float], T: float, region: ObservationRegion, grid: RadialGrid | None = None
) -> QuasimodeBound:
    """Single-mode lower bound for the squared cost on each fiber.

    The ground mode alone gives ``K ≥ e^{−2νT} 2ν / ((1 − e^{−2νT}) ∫_ω ϖ²)``;
    the reported curve drops the factor ``1/(1 − e^{−2νT}) ≥ 1``.
    """
    if region.kind not in (ANNULAR_SECTOR, FULL_ANNULUS):
        raise ValueError("quasimode bounds are for internal annular regions")
    grid = grid if grid is not None else RadialGrid(2048, region.R, region.d)
    mus = np.asarray(mu_ladder, dtype=float)
    nus, masses, bounds = [], [], []
    ang = 1.0 if region.angular is None else region.angular.measure / (2 * math.pi if region.d == 2 else 4 * math.pi)
    for mu in mus:
        mode = solve_modes(RadialProblem(region.d, region.R, float(mu), 0), grid, 1)[0]
        mass = interval_gram(mode.profile[None, :], np.array([0]), grid, region.R1, region.R2)[0, 0] * ang
        lm = math.log(mass)
        nus.append(mode.nu)
        masses.append(lm)
        bounds.append(math.inf if T == 0 else -2 * mode.nu * T + math.log(2 * mode.nu) - lm)
    bounds = np.array(bounds)
    fit = fit_log_linear(mus, bounds) if len(mus) >= 2 and np.all(np.isfinite(bounds)) else None
    return QuasimodeBound(mus, bounds, np.array(nus), np.array(masses), fit)


@dataclass(frozen=True)
class InnerSector:
    r_star: float
    alpha_bound: float
    alpha: float
    region: ObservationRegion
    t_star: float


def inner_sector_for_ball(x_star, delta: float, R: float = 1.0, samples: int = 10_000, seed: int = 0) -> InnerSector:
    """Annular sector ``{rθ : r* < r < r*+α, ⟨θ, x*⟩ > r*(1−α²)}`` inside ``B_δ(x*)``.

    Uses half the admissible bound ``(δ/2)·min(1, 1/(√2 r*))`` as a safety margin,
    and checks the inclusion on random samples of the sector.
    """
    x = np.asarray(x_star, dtype=float)
    d = x.size
    r_star = float(np.linalg.norm(x))
    if not r_star > 0:
        raise ValueError("x_star must be nonzero")
    if r_star + delta > R:
        raise ValueError("the ball B_delta(x_star) leaves B_R")
    bound = delta / 2 * min(1.0, 1.0 / (math.sqrt(2) * r_star))
    alpha = bound / 2
    half = math.acos(1 - alpha**2)
    axis = x / r_star
    if d == 2:
        c = math.atan2(axis[1], axis[0])
        ang = AngularRegion.arc(c - half, c + half)
    else:
        ang = AngularRegion.patch((0.0, half), (0.0, 2 * math.pi), axis=tuple(axis))
    region = ObservationRegion.sector(r_star, r_star + alpha, ang, R=R)
    rng = np.random.default_rng(seed)
    r = rng.uniform(r_star, r_star + alpha, samples)
    if d == 2:
        th = rng.uniform(c - half, c + half, samples)
        pts = r[:, None] * np.column_stack([np.cos(th), np.sin(th)])
    else:
        z = rng.uniform(math.cos(half), 1.0, samples)
        ph = rng.uniform(0, 2 * math.pi, samples)
        s = np.sqrt(1 - z * z)
        local = np.column_stack([s * np.cos(ph), s * np.sin(ph), z])
        from .sphere import _rotation_to

        pts = r[:, None] * (local @ _rotation_to(axis).T)
    dist = np.linalg.norm(pts - x[None, :], axis=1)
    if np.any(dist >= delta):
        raise AssertionError(f"sector leaves B_delta: max distance {dist.max():.6g}")
    return InnerSector(r_star, bound, alpha, region, r_star**2 / (2 * d))
