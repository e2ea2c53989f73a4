"""Acceptance criteria 1-10. Each test records one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the verdicts are printed in
the terminal summary, or run this file directly to print them as it goes.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from grushinlab import carleman as cl
from grushinlab import estimates as es
from grushinlab import lebeau_robbiano as lr
from grushinlab.evolution import (
    FDState,
    PolarGrid,
    fd_difference,
    fd_oracle,
    field_to_fd,
    random_field,
    solve_harmonic_heat,
)
from grushinlab.modes import build_mode_set
from grushinlab.observability import (
    ObservationRegion,
    SweepConfig,
    assemble_gramian,
    brute_force_cost,
    cost_sweep,
    min_norm_null_control,
    observability_cost,
    quasimode_lower_bound,
)
from grushinlab.radial import RadialGrid, RadialProblem, ground_eigenvalue, solve_modes
from grushinlab.sphere import AngularRegion, fit_log_linear, spectral_inequality_constant

from conftest import VERDICTS
from oracles import bessel_zero


def record(k: int, ok: bool, detail: str, started: float) -> None:
    line = f"CRITERION {k:2d}: {'PASS' if ok else 'FAIL'}  ({time.perf_counter() - started:.1f} s)  {detail}"
    VERDICTS[k] = line
    print(line, flush=True)
    assert ok, line


MUS = (1.0, 10.0, 50.0, 100.0)


@pytest.fixture(scope="module")
def grid2048():
    return RadialGrid(2048, 1.0, 2)


def test_criterion_01_ground_state_bounds(grid2048):
    t0 = time.perf_counter()
    eps = abs(ground_eigenvalue(2, 1.0, 0.0, grid2048, richardson=1) - bessel_zero(0, 1) ** 2)
    excess = np.array([ground_eigenvalue(2, 1.0, mu, grid2048, richardson=1) - 2 * mu for mu in MUS])
    # smallest nonincreasing upper envelope of the measured excess
    kappa_hat = np.maximum.accumulate(excess[::-1])[::-1]
    ok = (
        eps <= 1e-4
        and bool(np.all(excess >= -eps))
        and bool(np.all(excess <= kappa_hat))
        and kappa_hat[-1] <= 1e-3 + eps
        and kappa_hat[0] > kappa_hat[1] > kappa_hat[-1]
    )
    record(1, ok, f"eps_disc={eps:.2e} nu-2mu={np.array2string(excess, precision=4)} "
                  f"kappa_hat(100)={kappa_hat[-1]:.2e}", t0)


def test_criterion_02_spectral_gap(grid2048):
    t0 = time.perf_counter()
    gaps = []
    for mu in MUS:
        second_radial = solve_modes(RadialProblem(2, 1.0, mu, 0), grid2048, 2)[1].nu
        first_angular = solve_modes(RadialProblem(2, 1.0, mu, 1), grid2048, 1)[0].nu
        nu2 = min(second_radial, first_angular)
        gaps.append((nu2 - 2 * mu) / (2 * mu))
    gaps = np.array(gaps)
    record(2, bool(np.all(gaps >= 1 - 1e-2)), f"(nu2-2mu)/(2mu)={np.array2string(gaps, precision=4)}", t0)


def test_criterion_03_minimal_time_dichotomy():
    t0 = time.perf_counter()
    region = ObservationRegion.annulus(0.5, 0.8, d=2, R=1.0)
    below = cost_sweep(SweepConfig(2, 1.0, "mu", (50.0, 71.0, 100.0, 141.0, 200.0), T=0.04, n=2048), region)
    slope = below.fit.slope
    predicted = 0.25 - 4 * 0.04
    ok_below = abs(slope - predicted) <= 0.2 * predicted and bool(np.all(below.converged))
    # above T*: the cost of the Grushin system restricted to fibers mu' <= mu
    ladder = (1.0, 2.0, 5.0, 10.0, 20.0, 35.0, 50.0, 71.0, 100.0, 141.0, 200.0)
    above = cost_sweep(SweepConfig(2, 1.0, "mu", ladder, T=0.12, n=2048), region)
    window = np.array([v >= 50 for v in ladder])
    cumulative = np.maximum.accumulate(above.final)[window]
    variation = float(np.exp(cumulative.max() - cumulative.min()) - 1)
    per_fiber = above.final[window]
    ok_above = variation < 0.1 and bool(np.all(above.converged[window])) and bool(np.all(np.diff(per_fiber) <= 0))
    record(
        3,
        ok_above and ok_below,
        f"T=0.04 slope={slope:.5f} (target {predicted:.3f}); T=0.12 sup-cost variation={variation:.2e}, "
        f"unconverged mu={[v for v, c in zip(ladder, above.converged) if not c]}",
        t0,
    )


def test_criterion_04_quasimode_lower_bound():
    t0 = time.perf_counter()
    region = ObservationRegion.annulus(0.5, 1.0, d=2, R=1.0)
    grid = RadialGrid(2048, 1.0, 2)
    errs = []
    for T in (0.02, 0.04):
        qb = quasimode_lower_bound(np.geomspace(100, 400, 7), T, region, grid)
        predicted = 0.25 - 4 * T
        errs.append(abs(qb.fit.slope - predicted) / predicted)
    record(4, max(errs) <= 0.1, f"relative slope errors={[round(e, 4) for e in errs]}", t0)


def test_criterion_05_spectral_inequality_growth():
    t0 = time.perf_counter()
    region = AngularRegion.arc(0.0, math.pi / 4)
    Ms = np.arange(2, 25)
    logC = np.log([spectral_inequality_constant(int(M), region) for M in Ms])
    fit = fit_log_linear(Ms, logC)
    record(5, fit.r2 >= 0.99 and fit.slope > 0, f"slope={fit.slope:.4f} R2={fit.r2:.6f}", t0)


def test_criterion_06_carleman_audits():
    t0 = time.perf_counter()
    Ts, mus = (0.1, 1.0), (0.0, 2.0, 10.0)
    psi = cl.canonical_psi(2, 1.0)
    ball, ring = cl.Domain(2, 1.0), cl.Domain(2, 1.0, 0.5)
    V_ring = cl.quadratic_potential(1.0, 1.0)
    notes, ok = [], True

    lam0 = max(cl.find_lambda0(psi, ball, T, 1.0).value for T in Ts)
    lam0_pos = max(cl.find_lambda0(psi, ring, T, 1.0, V=V_ring, require_g1=True).value for T in Ts)
    lam = max(lam0, lam0_pos)
    for T in Ts:
        for factor in (1.0, 2.0, 4.0):
            rep = cl.verify_positivity(cl.CarlemanWeights(T, factor * lam, (1 + 1 / T), psi), cl.audit_grid(ball, T))
            ok &= rep.passed
    configs = [(T, mu) for T in Ts for mu in mus]
    s0 = cl.find_s0(psi, ball, lam, configs, lambda mu: cl.quadratic_potential(mu, 1.0), cl.GENERIC).value
    s0_pos = cl.find_s0(psi, ring, lam, configs, lambda mu: V_ring, cl.POSITIVE_V).value
    s0 = max(s0, s0_pos)
    notes.append(f"lambda0={lam:.5f} s0={s0:.5f}")

    worst = 0.0
    for T, mu in configs:
        w = cl.CarlemanWeights(T, lam, (1 + 1 / T + mu) * s0, psi)
        for p in (1, 2):
            rep = cl.verify_inequality(cl.bubble(2, 1.0, T, p), cl.quadratic_potential(mu, 1.0), w, ball, cl.GENERIC, mu)
            ok &= rep.passed
            worst = max(worst, rep.ratio)
        rep = cl.verify_inequality(cl.annular_bubble(2, 0.5, 1.0, T, 1), V_ring, w, ring, cl.POSITIVE_V, mu)
        ok &= rep.passed
        worst = max(worst, rep.ratio)
    notes.append(f"max ratio={worst:.2e}")

    for T in Ts:
        for mu in (1.0, 5.0, 10.0):
            b = cl.bde_identity_check(cl.oscillator_ground_mode(2, 1.0, mu), T)
            ok &= b.passed
    notes.append("bde ok" if ok else "bde/inequality failure")
    record(6, bool(ok), " ".join(notes), t0)


def _random_lr(rng) -> lr.LRParams:
    a, b, c = np.exp(rng.uniform(-1.5, 1.5, 3))
    beta = float(np.exp(rng.uniform(-0.7, 1.1)))
    delta = beta / (1 + beta)
    variant = lr.PROOF if rng.random() < 0.5 else lr.STATEMENT
    kappa = lr.kappa0(a, b, c, variant) * rng.uniform(0.05, 0.95)
    Cs = np.exp(rng.uniform(0, 2, 4))
    return lr.LRParams(a, b, c, beta, delta, Cs[0], Cs[1], Cs[2], Cs[3], T_max=float(rng.uniform(0.5, 2)),
                       kappa=kappa, variant=variant)


def test_criterion_07_lebeau_robbiano_consistency():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    shift_fail = 0
    for _ in range(100):
        shift_fail += not lr.verify_shift_property(lr.derive_constants(_random_lr(rng))).passed
    violations, held = 0, 0
    for i in range(8):
        N = int(rng.integers(4, 33))
        spectrum = np.sort(rng.uniform(1, 100, N))
        B = rng.standard_normal((N, N)) * (rng.random((N, N)) < 0.3)
        k = lr.derive_constants(_random_lr(rng))
        rep = lr.synthetic_semigroup_check(spectrum, B, k, samples=60, seed=i)
        violations += rep.violations
        held += rep.hypothesis_held
    ok = shift_fail == 0 and violations == 0
    record(7, ok, f"shift failures={shift_fail}/100, implication violations={violations} ({held} premises held)", t0)


def test_criterion_08_uniform_bound_composition():
    t0 = time.perf_counter()
    ok, details = True, []
    for mode, r in ((lr.INTERNAL, 0.5), (lr.BOUNDARY, 1.0)):
        t_star = r * r / 4
        Ts = np.linspace(t_star, 2 * t_star, 101)[1:]
        m = np.array([lr.uniform_cost_bound(float(T), t_star, r, mode, d=2).margin for T in Ts])
        ok &= bool(np.all(m > 0) and np.all(np.diff(m) > 0) and m[0] < 0.02 * m[-1])
        details.append(f"{mode} margin in [{m[0]:.2e}, {m[-1]:.2e}]")
    record(8, ok, "; ".join(details), t0)


def test_criterion_09_oracle_equivalences():
    t0 = time.perf_counter()
    # spectral vs Crank-Nicolson
    modes = build_mode_set(2, 1.0, 5.0, 200.0, grid=RadialGrid(1024, 1.0, 2))
    modes = modes.restrict(float(np.sort(modes.nu)[19]))
    y0 = random_field(modes, np.random.default_rng(3), decay=0.02)
    grid = PolarGrid(1024, 1.0)
    ref = fd_oracle(field_to_fd(y0, grid), 5.0, 0.1, 1e-4)
    spec = field_to_fd(solve_harmonic_heat(y0, 0.1), grid)
    zero = FDState(grid, {k: 0 * v for k, v in spec.values.items()})
    gap = fd_difference(ref, spec) / fd_difference(spec, zero)
    # pencil vs random search on small mode sets
    ratios = []
    for mu, region in ((0.0, ObservationRegion.whole_ball(2)), (2.0, ObservationRegion.annulus(0.3, 0.9))):
        small = build_mode_set(2, 1.0, mu, 60.0).restrict(40.0)
        assert len(small) <= 8
        system = assemble_gramian(small, region, 1.0 if mu == 0 else 0.2)
        ratios.append(math.exp(brute_force_cost(system) - observability_cost(system).log_k))
    # control duality: worst unit initial state costs exactly K
    ms = build_mode_set(2, 1.0, 2.0, 80.0)
    system = assemble_gramian(ms, ObservationRegion.annulus(0.5, 0.8), 0.2)
    K = observability_cost(system).k
    decay = np.exp(-ms.nu * system.T)
    # minimal control cost is y0ᵀ D G⁻¹ D y0 with D = e^{−νT}
    C = decay[:, None] * np.linalg.solve(system.g, np.diag(decay))
    C = (C + C.T) / 2
    _, v = np.linalg.eigh(C)
    ctrl = min_norm_null_control(system, v[:, -1])
    duality = abs(ctrl.cost - K) / K
    ok = gap <= 1e-3 and all(0.99 <= r <= 1.0 + 1e-9 for r in ratios) and duality <= 1e-6 and ctrl.residual <= 1e-6
    record(9, ok, f"CN gap={gap:.2e} brute/pencil={[round(r, 5) for r in ratios]} duality gap={duality:.2e} "
                  f"residual={ctrl.residual:.1e}", t0)


def _fd_energy_trajectory():
    grid = PolarGrid(256, 1.0)
    y0 = FDState(grid, {(0, 1): (1 - grid.nodes**2) * np.cos(grid.nodes), (1, 1): grid.nodes * (1 - grid.nodes**2)})

    def source(t, r):
        return {(0, 1): np.sin(3 * t) * (1 - r * r), (1, 1): t * r * (1 - r)}

    times, states = fd_oracle(y0, 2.0, 0.2, 2e-4, source=source, snapshots=129)
    return es.FDTrajectory(times, tuple(states), source)


def test_criterion_10_appendix_audits():
    t0 = time.perf_counter()
    failures = []
    for d, mu, seed in ((2, 0.0, 0), (2, 2.0, 1), (2, 5.0, 2), (3, 2.0, 3)):
        ms = build_mode_set(d, 1.0, mu, 80.0 + 2 * d * mu)
        traj = es.spectral_trajectory(random_field(ms, np.random.default_rng(seed)), 0.1)
        for kind in (es.DISSIP_L2, es.DISSIP_MU, es.ENERGY, es.GRAD):
            if not es.inequality_audit(kind, traj).passed:
                failures.append((kind, d, mu))
        if d == 2:
            rep = es.inequality_audit(es.CACCIOPPOLI, traj, cutoff=es.RadialCutoff(0.3, 0.4, 0.6, 0.7))
            if not rep.passed:
                failures.append((es.CACCIOPPOLI, d, mu))
    if not es.inequality_audit(es.ENERGY, _fd_energy_trajectory()).passed:
        failures.append(("ENERGY-FD", 2, 2.0))
    not_minimal = []
    for alpha in (0.5, 0.2, 0.1, 0.05):
        th = es.find_a(alpha, 2 / bessel_zero(0, 1))
        xs = th.x_touch * np.geomspace(1e-4, 1e4, 40001)
        if not (np.all(th.holds(xs)) and not np.all(th.holds(xs, 0.99 * th.a))):
            not_minimal.append(alpha)
    hyper_bad = 0
    for x in np.geomspace(1e-3, 350, 500):
        try:
            es.hyperbolic_bounds(float(x))
        except AssertionError:
            hyper_bad += 1
    ok = not failures and not not_minimal and hyper_bad == 0
    record(10, ok, f"audit failures={failures} non-minimal a={not_minimal} hyperbolic violations={hyper_bad}", t0)


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v"]))
