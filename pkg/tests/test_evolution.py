import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import j0

from grushinlab.evolution import (
    FDState,
    PolarGrid,
    SpectralField,
    TensorGrushinField,
    annulus_integrals,
    export_field_csv,
    fd_difference,
    fd_from_function,
    fd_oracle,
    field_norms,
    field_to_fd,
    random_field,
    solve_grushin,
    solve_harmonic_heat,
)
from grushinlab.modes import build_mode_set
from grushinlab.radial import RadialGrid

from oracles import bessel_zero


@pytest.fixture(scope="module")
def modes5():
    return build_mode_set(2, 1.0, 5.0, 90.0, grid=RadialGrid(512, 1.0, 2))


def test_single_mode_evolution(modes5):
    c = np.zeros(len(modes5))
    c[3] = 1.0
    y = solve_harmonic_heat(SpectralField(modes5, c), 0.3)
    assert y.coeffs[3] == pytest.approx(math.exp(-modes5.nu[3] * 0.3), rel=1e-15)
    assert np.count_nonzero(y.coeffs) == 1


@given(st.floats(0.0, 0.5), st.floats(0.0, 0.5), st.integers(0, 1000))
def test_semigroup_property(t, s, seed):
    ms = build_mode_set(2, 1.0, 1.0, 60.0)
    y0 = random_field(ms, np.random.default_rng(seed))
    a = solve_harmonic_heat(solve_harmonic_heat(y0, t), s).coeffs
    b = solve_harmonic_heat(y0, t + s).coeffs
    assert np.allclose(a, b, rtol=1e-12, atol=1e-300)


def test_decay_bound(modes5):
    y0 = random_field(modes5, np.random.default_rng(0))
    for t in np.linspace(0, 0.5, 11):
        assert solve_harmonic_heat(y0, t).l2 <= math.exp(-2 * 5.0 * t) * y0.l2 * (1 + 1e-12)


def test_negative_time_rejected(modes5):
    with pytest.raises(ValueError):
        solve_harmonic_heat(random_field(modes5, np.random.default_rng(0)), -1.0)


def test_fd_oracle_bessel_mode():
    grid = PolarGrid(512, 1.0)
    j = bessel_zero(0, 1)
    y0 = fd_from_function(grid, {(0, 1): lambda r: j0(j * r)})
    T = 0.05
    out = fd_oracle(y0, 0.0, T, 1e-4)
    exact = FDState(grid, {(0, 1): math.exp(-j * j * T) * y0.values[(0, 1)]})
    assert fd_difference(out, exact) / exact.l2() <= 1e-4


def test_fd_oracle_zero_and_monotone():
    grid = PolarGrid(128, 1.0)
    zero = fd_from_function(grid, {(0, 1): lambda r: 0 * r})
    assert fd_oracle(zero, 3.0, 0.1, 1e-3).l2() == 0.0
    y0 = fd_from_function(grid, {(0, 1): lambda r: 1 - r * r, (2, 1): lambda r: r * r * (1 - r)})
    _, states = fd_oracle(y0, 3.0, 0.1, 1e-3, snapshots=101)
    norms = [s.l2() for s in states]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(norms, norms[1:]))


def test_fd_rejects_bad_dt():
    grid = PolarGrid(64, 1.0)
    with pytest.raises(ValueError):
        fd_oracle(fd_from_function(grid, {(0, 1): lambda r: 1 - r}), 0.0, 0.1, 0.0)


def test_spectral_vs_crank_nicolson():
    ms = build_mode_set(2, 1.0, 5.0, 200.0, grid=RadialGrid(1024, 1.0, 2))
    ms = ms.restrict(float(ms.nu[19]))
    y0 = random_field(ms, np.random.default_rng(7), decay=0.02)
    grid = PolarGrid(1024, 1.0)
    ref = fd_oracle(field_to_fd(y0, grid), 5.0, 0.1, 1e-4)
    spec = field_to_fd(solve_harmonic_heat(y0, 0.1), grid)
    assert fd_difference(ref, spec) / spec.l2() <= 1e-3


def test_grushin_single_fiber_and_parseval():
    L = math.pi
    fibers = []
    rng = np.random.default_rng(1)
    for p in (1, 2, 3):
        ms = build_mode_set(2, 1.0, TensorGrushinField.frequency(p, L), 60.0)
        fibers.append((p, random_field(ms, rng)))
    y0 = TensorGrushinField(L, tuple(fibers))
    yT = solve_grushin(y0, 0.1)
    assert yT.l2 == pytest.approx(math.sqrt(sum(f.l2**2 for _, f in yT.fibers)), rel=1e-10)
    for (p, f0), (_, f1) in zip(y0.fibers, yT.fibers):
        assert np.allclose(f1.coeffs, f0.coeffs * np.exp(-f0.modes.nu * 0.1))
    # ground rates are nondecreasing in the fiber frequency
    ground = [f.modes.nu[0] for _, f in y0.fibers]
    assert ground == sorted(ground)


def test_grushin_fiber_mismatch():
    ms = build_mode_set(2, 1.0, 2.0, 40.0)
    with pytest.raises(ValueError):
        TensorGrushinField(math.pi, ((1, random_field(ms, np.random.default_rng(0))),))


def test_field_norms_mu_zero_eigenmode():
    ms = build_mode_set(2, 1.0, 0.0, 60.0)
    for i in range(4):
        c = np.zeros(len(ms))
        c[i] = 1.0
        n = field_norms(SpectralField(ms, c))
        assert n.h1_seminorm**2 == pytest.approx(ms.nu[i], rel=1e-12)
        assert n.mu_norm == pytest.approx(n.h1_seminorm)


@pytest.mark.parametrize("mu", [0.0, 2.0, 5.0])
def test_field_norms_vs_direct_quadrature(mu):
    ms = build_mode_set(2, 1.0, mu, 60.0 + 4 * mu, grid=RadialGrid(512, 1.0, 2))
    y = random_field(ms, np.random.default_rng(4))
    n = field_norms(y)
    direct = annulus_integrals(y, 0.0, 1.0)
    assert direct.l2sq == pytest.approx(n.l2**2, rel=1e-5)
    assert direct.grad_sq == pytest.approx(n.h1_seminorm**2, rel=1e-3)
    assert mu * mu * direct.moment == pytest.approx(n.weighted, rel=1e-4, abs=1e-12)


def test_single_mode_h1_plus_moment_is_nu():
    ms = build_mode_set(2, 1.0, 4.0, 80.0, grid=RadialGrid(512, 1.0, 2))
    c = np.zeros(len(ms))
    c[0] = 1.0
    direct = annulus_integrals(SpectralField(ms, c), 0.0, 1.0)
    assert direct.grad_sq + 16.0 * direct.moment == pytest.approx(ms.nu[0], rel=1e-6)


def test_mu_norm_dissipation():
    ms = build_mode_set(2, 1.0, 3.0, 80.0)
    y0 = random_field(ms, np.random.default_rng(2))
    lam = ms.nu[0]
    m0 = field_norms(y0).mu_norm
    for t in np.linspace(0, 0.3, 7):
        assert field_norms(solve_harmonic_heat(y0, t)).mu_norm <= math.sqrt(2) * math.exp(-lam * t) * m0 * (1 + 1e-12)


def test_export_csv(tmp_path):
    ms = build_mode_set(2, 1.0, 1.0, 30.0)
    y = random_field(ms, np.random.default_rng(0))
    export_field_csv(y, tmp_path / "f.csv")
    rows = (tmp_path / "f.csv").read_text().splitlines()
    assert rows[0] == "m,l,k,nu,coeff"
    assert len(rows) == len(ms) + 1
    assert float(rows[1].split(",")[-1]) == y.coeffs[0]


def test_coefficient_shape_checked():
    ms = build_mode_set(2, 1.0, 1.0, 30.0)
    with pytest.raises(ValueError):
        SpectralField(ms, np.zeros(len(ms) + 1))
