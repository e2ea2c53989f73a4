import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from grushinlab.modes import build_mode_set
from grushinlab.observability import (
    MU_NORM,
    ObservationRegion,
    SweepConfig,
    assemble_gramian,
    brute_force_cost,
    cost_sweep,
    fit_blowup,
    inner_sector_for_ball,
    min_norm_null_control,
    observability_cost,
    observation_matrix,
    quasimode_lower_bound,
)
from grushinlab.radial import RadialGrid
from grushinlab.sphere import AngularRegion

from oracles import scalar_cost


@pytest.fixture(scope="module")
def single():
    return build_mode_set(2, 1.0, 0.0, 6.0)


@given(st.floats(0.01, 2.0))
def test_single_mode_whole_ball(T):
    ms = build_mode_set(2, 1.0, 0.0, 6.0)
    nu = float(ms.nu[0])
    system = assemble_gramian(ms, ObservationRegion.whole_ball(2), T)
    assert system.g[0, 0] == pytest.approx(-math.expm1(-2 * nu * T) / (2 * nu), rel=1e-12)
    assert system.energy()[0, 0] == pytest.approx(math.exp(-2 * nu * T), rel=1e-12)
    assert observability_cost(system).k == pytest.approx(scalar_cost(nu, T), rel=1e-10)


def test_scalar_limit_small_nu():
    # the nu -> 0 limit of the scalar formula is 1/(b^2 T)
    assert scalar_cost(1e-9, 0.5) == pytest.approx(scalar_cost(0.0, 0.5), rel=1e-6)


def test_full_annulus_decouples():
    ms = build_mode_set(2, 1.0, 1.0, 80.0)
    b = observation_matrix(ms, ObservationRegion.annulus(0.4, 0.9))
    for i, (m, l, _) in enumerate(ms.labels):
        for j, (m2, l2, _) in enumerate(ms.labels):
            if (m, l) != (m2, l2):
                assert b[i, j] == 0.0


def test_sector_below_annulus_on_diagonal():
    ms = build_mode_set(2, 1.0, 1.0, 80.0)
    full = assemble_gramian(ms, ObservationRegion.annulus(0.4, 0.9), 0.3)
    sector = assemble_gramian(ms, ObservationRegion.sector(0.4, 0.9, AngularRegion.arc(0.0, 2.0)), 0.3)
    assert np.all(np.diag(sector.g) <= np.diag(full.g) * (1 + 1e-12))


def test_nested_sectors_cost_monotone():
    ms = build_mode_set(2, 1.0, 1.0, 60.0)
    costs = [
        observability_cost(assemble_gramian(ms, ObservationRegion.sector(0.3, 0.9, AngularRegion.arc(0.0, a)), 0.5)).log_k
        for a in (1.0, 2.0, 4.0)
    ]
    assert costs[0] >= costs[1] >= costs[2]


@pytest.mark.parametrize("mu,region", [(0.0, "ball"), (2.0, "annulus"), (1.0, "sector")])
def test_pencil_vs_brute_force(mu, region):
    ms = build_mode_set(2, 1.0, mu, 60.0).restrict(40.0)
    assert len(ms) <= 8
    reg = {
        "ball": ObservationRegion.whole_ball(2),
        "annulus": ObservationRegion.annulus(0.3, 0.9),
        "sector": ObservationRegion.sector(0.3, 0.9, AngularRegion.arc(0.0, 3.0)),
    }[region]
    system = assemble_gramian(ms, reg, 0.3)
    ratio = math.exp(brute_force_cost(system) - observability_cost(system).log_k)
    assert 0.99 <= ratio <= 1 + 1e-9


def test_zero_time_infinite(single):
    assert observability_cost(assemble_gramian(single, ObservationRegion.whole_ball(2), 0.0)).log_k == math.inf


def test_boundary_requires_mu_norm(single):
    with pytest.raises(ValueError):
        assemble_gramian(single, ObservationRegion.full_boundary(2), 0.5)
    system = assemble_gramian(single, ObservationRegion.full_boundary(2), 0.5, target=MU_NORM)
    assert observability_cost(system).finite


def test_null_control_zero_and_single(single):
    system = assemble_gramian(single, ObservationRegion.whole_ball(2), 0.4)
    zero = min_norm_null_control(system, np.zeros(1))
    assert zero.cost == 0.0
    res = min_norm_null_control(system, np.array([2.0]))
    assert res.cost == pytest.approx(scalar_cost(float(single.nu[0]), 0.4) * 4.0, rel=1e-9)
    assert res.residual < 1e-10


def test_null_control_duality():
    ms = build_mode_set(2, 1.0, 2.0, 80.0)
    system = assemble_gramian(ms, ObservationRegion.annulus(0.5, 0.8), 0.2)
    decay = np.exp(-ms.nu * system.T)
    C = decay[:, None] * np.linalg.solve(system.g, np.diag(decay))
    _, v = np.linalg.eigh((C + C.T) / 2)
    res = min_norm_null_control(system, v[:, -1])
    assert res.cost == pytest.approx(observability_cost(system).k, rel=1e-6)
    assert res.residual < 1e-6


def test_region_validation():
    with pytest.raises(ValueError):
        ObservationRegion.annulus(0.8, 0.5)
    with pytest.raises(ValueError):
        ObservationRegion.annulus(0.5, 1.2)


def test_t_star():
    assert ObservationRegion.annulus(0.5, 0.8).t_star == pytest.approx(0.0625)
    assert ObservationRegion.full_boundary(3).t_star == pytest.approx(1 / 6)


def test_quasimode_zero_time_and_decay():
    region = ObservationRegion.annulus(0.5, 1.0)
    grid = RadialGrid(1024, 1.0, 2)
    assert quasimode_lower_bound([50.0], 0.0, region, grid).log_bound[0] == math.inf
    late = quasimode_lower_bound(np.geomspace(50, 200, 5), 0.2, region, grid)
    assert late.fit.slope < 0


def test_quasimode_slope_below_threshold():
    region = ObservationRegion.annulus(0.5, 1.0)
    qb = quasimode_lower_bound(np.geomspace(100, 400, 7), 0.02, region, RadialGrid(2048, 1.0, 2))
    assert qb.fit.slope == pytest.approx(0.25 - 0.08, rel=0.1)


def test_cost_sweep_small_above_threshold():
    region = ObservationRegion.annulus(0.5, 0.8)
    curve = cost_sweep(SweepConfig(2, 1.0, "mu", (20.0, 40.0), T=0.2, n=512), region)
    assert curve.converged.all()
    assert curve.final[1] <= curve.final[0]


def test_cost_sweep_csv(tmp_path):
    region = ObservationRegion.annulus(0.5, 0.8)
    curve = cost_sweep(SweepConfig(2, 1.0, "mu", (20.0, 30.0), T=0.1, n=512), region)
    curve.write_csv(tmp_path / "c.csv")
    head = (tmp_path / "c.csv").read_text().splitlines()
    assert head[0] == "axis_value,truncation,K,converged,slope_fit,fit_r2,log_K,modes"
    assert len(head) == 1 + 2 * len(curve.factors)


def test_sweep_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(2, 1.0, "x", (1.0,))
    with pytest.raises(ValueError):
        SweepConfig(2, 1.0, "mu", (1.0,), T=0.1, factors=(128.0,))
    with pytest.raises(ValueError):
        SweepConfig(2, 1.0, "T", (0.1,))


def test_fit_blowup_recovers_exponent():
    t_star = 0.1
    T = t_star + np.geomspace(1e-3, 1e-1, 8)
    log_k = 0.5 / (T - t_star) ** 1.5
    fit = fit_blowup(T, log_k, t_star)
    assert fit.slope == pytest.approx(1.5, rel=1e-9)


def test_inner_sector_example():
    s = inner_sector_for_ball((0.5, 0.0), 0.2)
    assert s.alpha_bound == pytest.approx(0.1)
    assert 2 * 2 * s.t_star == pytest.approx(s.r_star**2)
    assert s.region.kind == "ANNULAR_SECTOR"


def test_inner_sector_3d():
    s = inner_sector_for_ball((0.0, 0.3, 0.4), 0.3)
    assert s.r_star == pytest.approx(0.5)
    with pytest.raises(ValueError):
        inner_sector_for_ball((0.9, 0.0), 0.2)
