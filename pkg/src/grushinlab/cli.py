"""Experiment harness: one subcommand per experiment, one process per run.

Every run writes ``<outdir>/<experiment>/<timestamp>/`` containing
``data.csv`` (the contract, floats at 17 significant digits), ``plot.svg``
and ``manifest.json`` (config hash, versions, wall time, fitted constants).

Configuration comes from a TOML file (``--config``) and/or flags; flags win.
Global keys live at the top level of the file, per-experiment keys under a
table named after the subcommand, e.g. ``[cost-sweep]``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable

import numpy as np

log = logging.getLogger("grushinlab")

TEST, PRODUCTION = "TEST", "PRODUCTION"
SUBCOMMANDS = (
    "spectrum",
    "evolve",
    "grushin-evolve",
    "cost-sweep",
    "control",
    "quasimode-bound",
    "carleman-check",
    "spectral-ineq",
    "lr-constants",
    "uniform-bound",
    "audits",
)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    d: int = 2
    R: float = 1.0
    outdir: str = "results"
    cache_dir: str | None = None
    threads: int = 1
    tier: str = TEST
    params: dict[str, Any] = field(default_factory=dict)

    def validate(self) -> None:
        if self.experiment not in SUBCOMMANDS:
            raise ConfigError(f"unknown experiment {self.experiment}")
        if self.d not in (2, 3):
            raise ConfigError("d must be 2 or 3")
        if not self.R > 0:
            raise ConfigError("R must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.tier not in (TEST, PRODUCTION):
            raise ConfigError("tier must be TEST or PRODUCTION")

    def hash(self) -> str:
        blob = json.dumps(
            {"experiment": self.experiment, "d": self.d, "R": self.R, "tier": self.tier, "params": self.params},
            sort_keys=True,
            default=str,
        )
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class Outcome:
    header: list[str]
    rows: list[list[Any]]
    constants: dict[str, Any] = field(default_factory=dict)
    plot: Callable | None = None
    ok: bool = True
    message: str = ""


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def parse_ladder(spec, points: int = 7) -> list[float]:
    """``"a:b"`` (geometric, ``points`` values), ``"a:b:n"`` or a comma list."""
    if isinstance(spec, (list, tuple)):
        return [float(v) for v in spec]
    spec = str(spec)
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) not in (2, 3):
            raise ConfigError(f"bad ladder {spec}")
        lo, hi = float(parts[0]), float(parts[1])
        n = int(parts[2]) if len(parts) == 3 else points
        if not 0 < lo < hi:
            raise ConfigError(f"bad ladder {spec}")
        return [float(v) for v in np.geomspace(lo, hi, n)]
    return [float(v) for v in spec.split(",") if v.strip()]


def parse_region(spec: str, d: int, R: float):
    """``annulus:R1,R2``, ``sector:R1,R2,θ1,θ2``, ``arc:θ1,θ2`` (boundary),
    ``boundary`` or ``ball``.
    """
    from .observability import ObservationRegion
    from .sphere import AngularRegion

    kind, _, rest = str(spec).partition(":")
    vals = [float(v) for v in rest.split(",") if v.strip()]
    try:
        if kind == "annulus" and len(vals) == 2:
            return ObservationRegion.annulus(vals[0], vals[1], d=d, R=R)
        if kind == "sector" and len(vals) == 4:
            return ObservationRegion.sector(vals[0], vals[1], AngularRegion.arc(vals[2], vals[3]), R=R)
        if kind == "arc" and len(vals) == 2:
            return ObservationRegion.boundary_arc(AngularRegion.arc(vals[0], vals[1]), R=R)
        if kind == "boundary" and not vals:
            return ObservationRegion.full_boundary(d=d, R=R)
        if kind == "ball" and not vals:
            return ObservationRegion.whole_ball(d=d, R=R)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"bad region {spec}")


def _p(cfg: ExperimentConfig, key: str, default=None, cast=None):
    v = cfg.params.get(key, default)
    if v is None:
        return None
    try:
        return cast(v) if cast else v
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key}: {v!r}") from None


def _floats(spec) -> list[float]:
    if isinstance(spec, (list, tuple)):
        return [float(v) for v in spec]
    return [float(v) for v in str(spec).split(",") if v.strip()]


def _tier_n(cfg: ExperimentConfig, test: int, production: int) -> int:
    return int(_p(cfg, "n", test if cfg.tier == TEST else production, int))


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def run_spectrum(cfg: ExperimentConfig) -> Outcome:
    from .radial import RadialGrid, RadialProblem, solve_modes
    from .sphere import multiplicity

    mu = _p(cfg, "mu", 0.0, float)
    kmax = _p(cfg, "kmax", 5, int)
    only_m = _p(cfg, "m", None, int)
    grid = RadialGrid(_tier_n(cfg, 512, 2048), cfg.R, cfg.d)
    degrees = [only_m] if only_m is not None else range(kmax)
    found = []
    for m in degrees:
        for k, mode in enumerate(solve_modes(RadialProblem(cfg.d, cfg.R, mu, m), grid, kmax), start=1):
            found.append((mode.nu, m, k))
    found.sort()
    rows = [[m, k, nu, multiplicity(m, cfg.d)] for nu, m, k in found[:kmax]]

    def plot(ax):
        ax.plot(range(1, len(rows) + 1), [r[2] for r in rows], "o-")
        ax.set_xlabel("index")
        ax.set_ylabel("eigenvalue")

    return Outcome(["m", "k", "nu", "multiplicity"], rows, {"lowest": rows[0][2]}, plot)


def _modes(cfg: ExperimentConfig, mu: float, nu_max: float):
    from .modes import build_mode_set
    from .radial import RadialGrid

    return build_mode_set(cfg.d, cfg.R, mu, nu_max, grid=RadialGrid(_tier_n(cfg, 256, 1024), cfg.R, cfg.d))


def run_evolve(cfg: ExperimentConfig) -> Outcome:
    from .evolution import PolarGrid, fd_difference, fd_oracle, field_to_fd, random_field, solve_harmonic_heat

    mu = _p(cfg, "mu", 5.0, float)
    T = _p(cfg, "T", 0.1, float)
    nu_max = _p(cfg, "nu_max", max(60.0, 4 * cfg.d * mu), float)
    samples = _p(cfg, "samples", 11, int)
    modes = _modes(cfg, mu, nu_max)
    y0 = random_field(modes, np.random.default_rng(_p(cfg, "seed", 0, int)), _p(cfg, "decay", 0.0, float))
    times = np.linspace(0, T, samples)
    rows = [[t, solve_harmonic_heat(y0, t).l2] for t in times]
    header = ["t", "l2_spectral"]
    consts = {"modes": len(modes)}
    if _p(cfg, "fd", False, bool) and cfg.d == 2:
        grid = PolarGrid(_p(cfg, "fd_n", 400, int), cfg.R)
        dt = _p(cfg, "dt", T / 2000, float)
        ref = fd_oracle(field_to_fd(y0, grid), mu, T, dt)
        gap = fd_difference(ref, field_to_fd(solve_harmonic_heat(y0, T), grid))
        consts["fd_relative_gap"] = gap

    def plot(ax):
        ax.semilogy(times, [r[1] for r in rows], "o-")
        ax.set_xlabel("t")
        ax.set_ylabel("L2 norm")

    return Outcome(header, rows, consts, plot)


def run_grushin_evolve(cfg: ExperimentConfig) -> Outcome:
    from .evolution import TensorGrushinField, random_field, solve_grushin

    L = _p(cfg, "L", math.pi, float)
    pmax = _p(cfg, "p_max", 4, int)
    T = _p(cfg, "T", 0.1, float)
    rng = np.random.default_rng(_p(cfg, "seed", 0, int))
    fibers = []
    for p in range(1, pmax + 1):
        mu = TensorGrushinField.frequency(p, L)
        modes = _modes(cfg, mu, _p(cfg, "nu_factor", 8.0, float) * max(cfg.d * mu, 6.0))
        fibers.append((p, random_field(modes, rng)))
    y0 = TensorGrushinField(L, tuple(fibers))
    yT = solve_grushin(y0, T)
    rows = [[p, f.mu, f.l2, g.l2] for (p, f), (_, g) in zip(y0.fibers, yT.fibers)]

    def plot(ax):
        ax.semilogy([r[0] for r in rows], [r[3] for r in rows], "o-")
        ax.set_xlabel("fiber p")
        ax.set_ylabel("final L2 norm")

    return Outcome(["p", "mu", "l2_initial", "l2_final"], rows, {"l2_initial": y0.l2, "l2_final": yT.l2}, plot)


def run_cost_sweep(cfg: ExperimentConfig) -> Outcome:
    from .observability import L2, MU_NORM, SweepConfig, cost_sweep

    region = parse_region(_p(cfg, "region", "annulus:0.5,0.8"), cfg.d, cfg.R)
    axis = _p(cfg, "axis", "mu")
    target = MU_NORM if region.is_boundary or _p(cfg, "target", "l2") == "mu" else L2
    factors = tuple(_floats(_p(cfg, "factors", "128,256,512")))
    n = _tier_n(cfg, 2048, 4096)
    ladder = parse_ladder(_p(cfg, "mu_ladder", "50:200"), _p(cfg, "points", 5, int))
    if axis == "mu":
        sc = SweepConfig(cfg.d, cfg.R, "mu", tuple(ladder), T=_p(cfg, "T", 0.05, float), factors=factors, n=n,
                         target=target)
    elif axis == "T":
        sc = SweepConfig(cfg.d, cfg.R, "T", tuple(_floats(_p(cfg, "T_values", "0.08,0.1,0.12"))),
                         mu_ladder=tuple(ladder), factors=factors, n=n, target=target)
    else:
        raise ConfigError("axis must be mu or T")
    curve = cost_sweep(sc, region, workers=cfg.threads)
    rows = []
    for i, v in enumerate(curve.values):
        for j, f in enumerate(curve.factors):
            lk = curve.log_k[i, j]
            rows.append([v, f, math.exp(lk) if lk < 709 else math.inf, bool(curve.converged[i]),
                         curve.fit.slope if curve.fit else "", curve.fit.r2 if curve.fit else "", lk,
                         int(curve.sizes[i, j])])
    consts = {"t_star": curve.t_star, "converged_fraction": float(np.mean(curve.converged))}
    if curve.fit:
        consts.update(slope=curve.fit.slope, fit_r2=curve.fit.r2)
        if axis == "mu":
            consts["predicted_slope"] = region.R1**2 - 2 * cfg.d * sc.T

    def plot(ax):
        ax.plot(curve.values, curve.log_k[:, -1], "o-")
        ax.set_xlabel(axis)
        ax.set_ylabel("log K")

    return Outcome(["axis_value", "truncation", "K", "converged", "slope_fit", "fit_r2", "log_K", "modes"], rows,
                   consts, plot)


def run_control(cfg: ExperimentConfig) -> Outcome:
    from .evolution import random_field
    from .observability import assemble_gramian, min_norm_null_control, observability_cost

    region = parse_region(_p(cfg, "region", "annulus:0.5,0.8"), cfg.d, cfg.R)
    mu = _p(cfg, "mu", 2.0, float)
    T = _p(cfg, "T", 0.2, float)
    modes = _modes(cfg, mu, _p(cfg, "nu_max", 60.0, float))
    system = assemble_gramian(modes, region, T)
    y0 = random_field(modes, np.random.default_rng(_p(cfg, "seed", 0, int))).coeffs
    res = min_norm_null_control(system, y0)
    cost = observability_cost(system)
    rows = [[m, l, k, nu, c, q] for (m, l, k), nu, c, q in zip(modes.labels, modes.nu, y0, res.q)]
    consts = {"control_cost": res.cost, "residual": res.residual, "log_K": cost.log_k,
              "duality_ratio": res.cost / (cost.k * float(y0 @ y0))}

    def plot(ax):
        ax.semilogy(modes.nu, np.abs(res.q) + 1e-300, "o")
        ax.set_xlabel("eigenvalue")
        ax.set_ylabel("|q|")

    return Outcome(["m", "l", "k", "nu", "y0", "q"], rows, consts, plot, ok=res.residual < 1e-6)


def run_quasimode(cfg: ExperimentConfig) -> Outcome:
    from .observability import quasimode_lower_bound
    from .radial import RadialGrid

    region = parse_region(_p(cfg, "region", "annulus:0.5,1.0"), cfg.d, cfg.R)
    T = _p(cfg, "T", 0.02, float)
    ladder = parse_ladder(_p(cfg, "mu_ladder", "100:400"), _p(cfg, "points", 7, int))
    qb = quasimode_lower_bound(ladder, T, region, RadialGrid(_tier_n(cfg, 2048, 4096), cfg.R, cfg.d))
    rows = [[m, nu, lm, lb] for m, nu, lm, lb in zip(qb.mu, qb.nu, qb.log_mass, qb.log_bound)]
    predicted = region.R1**2 - 2 * cfg.d * T
    consts = {"slope": qb.fit.slope if qb.fit else None, "predicted_slope": predicted}

    def plot(ax):
        ax.plot(qb.mu, qb.log_bound, "o-")
        ax.set_xlabel("mu")
        ax.set_ylabel("log lower bound")

    return Outcome(["mu", "nu", "log_mass", "log_bound"], rows, consts, plot)


def run_carleman(cfg: ExperimentConfig) -> Outcome:
    from . import carleman as cl

    Ts = _floats(_p(cfg, "T", "0.1,1"))
    mus = _floats(_p(cfg, "mu", "0,2,10"))
    variant = str(_p(cfg, "variant", cl.GENERIC)).upper()
    if variant not in cl.VARIANTS:
        raise ConfigError(f"unknown variant {variant}")
    power = _p(cfg, "power", 1, int)
    R1 = _p(cfg, "R1", 0.5 if variant == cl.POSITIVE_V else 0.0, float)
    dom = cl.Domain(cfg.d, cfg.R, R1)
    psi = cl.canonical_psi(cfg.d, cfg.R)
    base_V = cl.quadratic_potential(1.0, cfg.R)
    V_of = (lambda mu: base_V) if variant == cl.POSITIVE_V else (lambda mu: cl.quadratic_potential(mu, cfg.R))
    lam = _p(cfg, "lam", None, float)
    if lam is None:
        kw = dict(V=base_V, require_g1=True) if variant == cl.POSITIVE_V else {}
        lam = max(cl.find_lambda0(psi, dom, T, 1.0, **kw).value for T in Ts)
    s0 = _p(cfg, "s0", None, float)
    if s0 is None:
        s0 = cl.find_s0(psi, dom, lam, [(T, mu) for T in Ts for mu in mus], V_of,
                        cl.GENERIC if variant == cl.BASIS else variant).value
    rows = []
    for T in Ts:
        for mu in mus:
            w = cl.CarlemanWeights(T, lam, (1 + 1 / T + mu) * s0, psi)
            pos = cl.verify_positivity(w, cl.audit_grid(dom, T, 32, 32, 48))
            y = cl.annular_bubble(cfg.d, R1, cfg.R, T, power) if R1 > 0 else cl.bubble(cfg.d, cfg.R, T, power)
            rep = cl.verify_inequality(y, V_of(mu), w, dom, variant, mu=mu)
            rows.append(["inequality", T, mu, lam, w.s, pos.g2_min, pos.h_min, rep.lhs, rep.rhs, rep.ratio,
                         rep.passed])
    if cfg.d in (2, 3) and _p(cfg, "bde", True, bool):
        for T in Ts:
            for mu in [m for m in mus if m > 0]:
                b = cl.bde_identity_check(cl.oscillator_ground_mode(cfg.d, cfg.R, mu), T)
                rows.append(["bde", T, mu, "", "", "", "", b.lhs, b.rhs, b.lhs / b.rhs if b.rhs else 0.0, b.passed])
    ok = all(r[-1] for r in rows)

    def plot(ax):
        ineq = [r for r in rows if r[0] == "inequality"]
        ax.semilogy([r[4] for r in ineq], [abs(r[9]) + 1e-300 for r in ineq], "o")
        ax.set_xlabel("s")
        ax.set_ylabel("ratio")

    return Outcome(["check", "T", "mu", "lam", "s", "g2_min", "h_min", "lhs", "rhs", "ratio", "passed"], rows,
                   {"lambda0": lam, "s0": s0, "variant": variant}, plot, ok=ok)


def run_spectral_ineq(cfg: ExperimentConfig) -> Outcome:
    from .sphere import AngularRegion, fit_log_linear, spectral_inequality_constant

    length = _p(cfg, "arc_length", math.pi / 4, float)
    lo, hi = _p(cfg, "M_min", 2, int), _p(cfg, "M_max", 24, int)
    region = AngularRegion.arc(0.0, length)
    Ms = list(range(lo, hi + 1))
    Cs = [spectral_inequality_constant(M, region) for M in Ms]
    fit = fit_log_linear(Ms, np.log(Cs))
    rows = [[M, C, math.log(C)] for M, C in zip(Ms, Cs)]

    def plot(ax):
        ax.plot(Ms, np.log(Cs), "o-")
        ax.set_xlabel("M")
        ax.set_ylabel("log C(M)")

    return Outcome(["M", "C", "log_C"], rows, {"slope": fit.slope, "fit_r2": fit.r2, "C_rel": Cs[0]}, plot)


def run_lr_constants(cfg: ExperimentConfig) -> Outcome:
    from . import lebeau_robbiano as lr

    beta = _p(cfg, "beta", 2.0, float)
    delta = _p(cfg, "delta", beta / (1 + beta), float)
    variant = str(_p(cfg, "variant", "proof")).upper()
    try:
        params = lr.LRParams(
            a=_p(cfg, "a", 1.0, float), b=_p(cfg, "b", 1.0, float), c=_p(cfg, "c", 1.0, float), beta=beta,
            delta=delta, C_rel=_p(cfg, "C_rel", 1.0, float), C_obs=_p(cfg, "C_obs", 1.0, float),
            C_dissip=_p(cfg, "C_dissip", 1.0, float), Adm=_p(cfg, "Adm", 1.0, float),
            T_max=_p(cfg, "T_max", 1.0, float), kappa=_p(cfg, "kappa", 0.1, float),
            variant={"PROOF": lr.PROOF, "STATEMENT": lr.STATEMENT}.get(variant, variant),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    k = lr.derive_constants(params)
    shift = lr.verify_shift_property(k)
    names = ("s1", "s2", "s", "q", "C1", "C2", "C2_arranged", "T_prime", "f0", "g0", "kappa0")
    rows = [[n, float(getattr(k, n))] for n in names]
    rows.append(["shift_passed", float(shift.passed)])
    Ts = np.geomspace(float(k.T_prime) * 1e-3, float(k.T_prime), 50)

    def plot(ax):
        ax.semilogx(Ts, [k.log_bound(t) for t in Ts])
        ax.set_xlabel("T")
        ax.set_ylabel("log cost bound")

    return Outcome(["name", "value"], rows, {r[0]: r[1] for r in rows}, plot, ok=shift.passed)


def run_uniform_bound(cfg: ExperimentConfig) -> Outcome:
    from . import lebeau_robbiano as lr

    mode = str(_p(cfg, "mode", "internal")).upper()
    mode = {"INTERNAL": lr.INTERNAL, "BOUNDARY": lr.BOUNDARY}.get(mode, mode)
    R1 = _p(cfg, "R1", 0.5, float)
    r = R1 if mode == lr.INTERNAL else cfg.R
    t_star = r * r / (2 * cfg.d)
    points = _p(cfg, "points", 100, int)
    beta = _p(cfg, "beta", 1.0, float)
    Ts = np.linspace(t_star, 2 * t_star, points + 1)[1:]
    rows = []
    for T in Ts:
        u = lr.uniform_cost_bound(float(T), t_star, r, mode, beta=beta, d=cfg.d)
        rows.append([T, u.gamma, u.delta_gamma, u.epsilon, u.margin, u.log_bound])
    ok = all(row[4] > 0 for row in rows)

    def plot(ax):
        ax.plot(Ts, [row[4] for row in rows])
        ax.set_xlabel("T")
        ax.set_ylabel("margin")

    return Outcome(["T", "gamma", "delta_gamma", "epsilon", "margin", "log_bound"], rows, {"t_star": t_star}, plot,
                   ok=ok)


def run_audits(cfg: ExperimentConfig) -> Outcome:
    from . import estimates as es
    from .carleman import dirichlet_first_eigenvalue
    from .evolution import random_field

    mu = _p(cfg, "mu", 5.0, float)
    T = _p(cfg, "T", 0.1, float)
    modes = _modes(cfg, mu, _p(cfg, "nu_max", 80.0, float))
    y0 = random_field(modes, np.random.default_rng(_p(cfg, "seed", 0, int)))
    traj = es.spectral_trajectory(y0, T, _p(cfg, "samples", 129, int))
    rows = []
    for kind in (es.DISSIP_L2, es.DISSIP_MU, es.ENERGY, es.GRAD):
        rep = es.inequality_audit(kind, traj)
        rows.append([kind, rep.lhs, rep.rhs, rep.ratio, rep.passed])
    chi = es.RadialCutoff(0.3, 0.4, 0.6, 0.7)
    rep = es.inequality_audit(es.CACCIOPPOLI, traj, cutoff=chi)
    rows.append([es.CACCIOPPOLI, rep.lhs, rep.rhs, rep.ratio, rep.passed])
    alpha = _p(cfg, "alpha", 0.5, float)
    c = 2 * cfg.R / math.sqrt(dirichlet_first_eigenvalue(cfg.d, cfg.R))
    th = es.find_a(alpha, c)
    xs = np.geomspace(1e-3, 1e3, 2001) * th.x_touch
    minimal = bool(np.all(th.holds(xs)) and not np.all(th.holds(xs, 0.99 * th.a)))
    rows.append(["find_a", th.a, th.x_touch, th.t_alpha, minimal])
    try:
        worst = max(es.hyperbolic_bounds(float(x)).ratio / (2 + 1 / x) for x in np.geomspace(1e-3, 350, 400))
        rows.append(["hyperbolic", worst, 1.0, worst, True])
    except AssertionError:
        rows.append(["hyperbolic", math.nan, 1.0, math.nan, False])
    ok = all(r[-1] for r in rows)

    def plot(ax):
        ax.bar(range(len(rows)), [abs(float(r[3])) for r in rows])
        ax.set_xticks(range(len(rows)), [r[0] for r in rows], rotation=30)
        ax.set_ylabel("lhs/rhs")

    return Outcome(["kind", "lhs", "rhs", "ratio", "passed"], rows, {"a": th.a, "alpha": alpha, "c": c}, plot, ok=ok)


RUNNERS: dict[str, Callable[[ExperimentConfig], Outcome]] = {
    "spectrum": run_spectrum,
    "evolve": run_evolve,
    "grushin-evolve": run_grushin_evolve,
    "cost-sweep": run_cost_sweep,
    "control": run_control,
    "quasimode-bound": run_quasimode,
    "carleman-check": run_carleman,
    "spectral-ineq": run_spectral_ineq,
    "lr-constants": run_lr_constants,
    "uniform-bound": run_uniform_bound,
    "audits": run_audits,
}


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def write_csv(path: Path, header: list[str], rows: list[list[Any]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _write_plot(path: Path, plot: Callable | None, title: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "grushinlab"
    fig, ax = plt.subplots(figsize=(6, 4))
    if plot is not None:
        plot(ax)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _versions() -> dict[str, str]:
    import mpmath
    import scipy

    from . import __version__

    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "mpmath": mpmath.__version__, "grushinlab": __version__}


def _json_safe(v):
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def run_experiment(cfg: ExperimentConfig) -> tuple[int, Path | None]:
    """Execute one experiment and write its artifacts; returns (status, run dir)."""
    cfg.validate()
    if cfg.cache_dir:
        from .radial import set_default_cache

        set_default_cache(cfg.cache_dir)
    root = Path(cfg.outdir)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory not writable: {exc}") from None
    if not os.access(root, os.W_OK):
        raise ConfigError(f"output directory not writable: {root}")
    start = time.perf_counter()
    out = RUNNERS[cfg.experiment](cfg)
    wall = time.perf_counter() - start
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")
    run_dir = root / cfg.experiment / stamp
    run_dir.mkdir(parents=True, exist_ok=False)
    write_csv(run_dir / "data.csv", out.header, out.rows)
    _write_plot(run_dir / "plot.svg", out.plot, cfg.experiment)
    manifest = {
        "experiment": cfg.experiment,
        "config_hash": cfg.hash(),
        "config": {"d": cfg.d, "R": cfg.R, "tier": cfg.tier, "threads": cfg.threads, "params": cfg.params},
        "versions": _versions(),
        "wall_time_s": wall,
        "constants": out.constants,
        "status": "ok" if out.ok else "failed",
        "message": out.message,
    }
    with open(run_dir / "manifest.json", "w") as fh:
        json.dump(_json_safe(manifest), fh, indent=2, sort_keys=True)
    return (0 if out.ok else 1), run_dir


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

_FLAGS = {
    "spectrum": ["mu", "kmax", "m", "n"],
    "evolve": ["mu", "T", "nu-max", "seed", "decay", "samples", "fd", "fd-n", "dt", "n"],
    "grushin-evolve": ["L", "p-max", "T", "seed", "nu-factor", "n"],
    "cost-sweep": ["region", "axis", "T", "T-values", "mu-ladder", "points", "factors", "target", "n"],
    "control": ["region", "mu", "T", "nu-max", "seed", "n"],
    "quasimode-bound": ["region", "T", "mu-ladder", "points", "n"],
    "carleman-check": ["T", "mu", "variant", "power", "R1", "lam", "s0", "bde"],
    "spectral-ineq": ["arc-length", "M-min", "M-max"],
    "lr-constants": ["a", "b", "c", "beta", "delta", "kappa", "variant", "C-rel", "C-obs", "C-dissip", "Adm", "T-max"],
    "uniform-bound": ["mode", "R1", "points", "beta"],
    "audits": ["mu", "T", "nu-max", "seed", "samples", "alpha", "n"],
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grushinlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="TOML file; flags override its keys")
        sp.add_argument("--d", type=int)
        sp.add_argument("--R", type=float)
        sp.add_argument("--outdir")
        sp.add_argument("--cache-dir")
        sp.add_argument("--threads", type=int)
        sp.add_argument("--tier", choices=[TEST, PRODUCTION])
        sp.add_argument("-v", "--verbose", action="store_true")
        for flag in _FLAGS[name]:
            sp.add_argument(f"--{flag}", dest=f"p_{flag.replace('-', '_')}")
    return parser


def _load_toml(path: str) -> dict:
    if sys.version_info >= (3, 11):
        import tomllib
    else:
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _coerce(v: str):
    low = v.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    data = _load_toml(args.config) if args.config else {}
    params = dict(data.get(args.experiment, {}))
    params = {k.replace("-", "_"): v for k, v in params.items()}
    for k, v in vars(args).items():
        if k.startswith("p_") and v is not None:
            params[k[2:]] = _coerce(v)
    env_threads = os.environ.get("GRLB_THREADS")
    cfg = ExperimentConfig(
        experiment=args.experiment,
        d=args.d if args.d is not None else int(data.get("d", 2)),
        R=args.R if args.R is not None else float(data.get("R", 1.0)),
        outdir=args.outdir or data.get("outdir", "results"),
        cache_dir=args.cache_dir or data.get("cache_dir") or os.environ.get("GRLB_CACHE_DIR"),
        threads=args.threads or int(data.get("threads", env_threads or 1)),
        tier=args.tier or data.get("tier", TEST),
        params=params,
    )
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        status, run_dir = run_experiment(cfg)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"grushinlab: error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"grushinlab: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(run_dir)
    return status


if __name__ == "__main__":
    sys.exit(main())
