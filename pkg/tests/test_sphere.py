import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from grushinlab.sphere import (
    AngularMode,
    AngularRegion,
    angular_gram,
    angular_mass,
    angular_modes,
    evaluate,
    fit_log_linear,
    multiplicity,
    spectral_inequality_constant,
)


@pytest.mark.parametrize("m,d,beta", [(0, 2, 1), (0, 3, 1), (1, 2, 2), (7, 2, 2), (2, 3, 5), (4, 3, 9)])
def test_multiplicity(m, d, beta):
    assert multiplicity(m, d) == beta


@given(st.integers(1, 60))
def test_multiplicity_sums(M):
    assert sum(multiplicity(m, 2) for m in range(M)) == 2 * M - 1
    assert sum(multiplicity(m, 3) for m in range(M)) == M * M


def test_circle_values():
    assert evaluate(AngularMode(2, 0, 1), [[0.3, math.sqrt(1 - 0.09)]])[0] == pytest.approx(1 / math.sqrt(2 * math.pi))
    assert evaluate(AngularMode(2, 1, 1), [[1.0, 0.0]])[0] == pytest.approx(1 / math.sqrt(math.pi))


def _sphere_quadrature(d, n=64):
    if d == 2:
        th = 2 * math.pi * (np.arange(4 * n) + 0.5) / (4 * n)
        return np.column_stack([np.cos(th), np.sin(th)]), np.full(th.size, 2 * math.pi / th.size)
    z, wz = np.polynomial.legendre.leggauss(n)
    ph = 2 * math.pi * (np.arange(2 * n) + 0.5) / (2 * n)
    Z, P = np.meshgrid(z, ph, indexing="ij")
    s = np.sqrt(1 - Z**2)
    pts = np.column_stack([(s * np.cos(P)).ravel(), (s * np.sin(P)).ravel(), Z.ravel()])
    return pts, (wz[:, None] * np.full(ph.size, 2 * math.pi / ph.size)[None, :]).ravel()


@pytest.mark.parametrize("d", [2, 3])
def test_orthonormality_by_independent_quadrature(d):
    modes = angular_modes(d, 6)
    pts, w = _sphere_quadrature(d)
    vals = np.vstack([evaluate(m, pts) for m in modes])
    gram = (vals * w) @ vals.T
    assert np.allclose(gram, np.eye(len(modes)), atol=1e-8)


def test_angular_mass_examples():
    full = AngularRegion.full(2)
    a, b = AngularMode(2, 1, 1), AngularMode(2, 2, 2)
    assert angular_mass(a, a, full) == pytest.approx(1.0)
    assert angular_mass(a, b, full) == pytest.approx(0.0, abs=1e-14)
    assert angular_mass(a, a, AngularRegion.arc(0.0, math.pi)) == pytest.approx(0.5, abs=1e-14)


@given(st.floats(-3.0, 3.0), st.floats(0.1, 6.0))
def test_arc_gram_closed_form_vs_quadrature(t1, length):
    region = AngularRegion.arc(t1, t1 + length)
    modes = angular_modes(2, 5)
    x, w = np.polynomial.legendre.leggauss(80)
    th = t1 + (x + 1) * length / 2
    pts = np.column_stack([np.cos(th), np.sin(th)])
    vals = np.vstack([evaluate(m, pts) for m in modes])
    ref = (vals * (w * length / 2)) @ vals.T
    assert np.allclose(angular_gram(modes, region), ref, atol=1e-11)


def test_cap_patch_full_sphere():
    patch = AngularRegion.patch((0.0, math.pi), (0.0, 2 * math.pi))
    modes = angular_modes(3, 4)
    assert np.allclose(angular_gram(modes, patch), np.eye(len(modes)), atol=1e-10)
    assert patch.measure == pytest.approx(4 * math.pi)


@given(st.floats(0.2, 6.0))
def test_constant_mode_spectral_constant(length):
    region = AngularRegion.arc(0.0, length)
    assert spectral_inequality_constant(1, region) == pytest.approx(2 * math.pi / length, rel=1e-10)


def test_spectral_constant_monotone_in_M():
    region = AngularRegion.arc(0.0, math.pi / 2)
    cs = [spectral_inequality_constant(M, region) for M in range(1, 8)]
    assert all(c >= 1 for c in cs)
    assert all(b >= a for a, b in zip(cs, cs[1:]))


def test_spectral_constant_d3_patch():
    cap = AngularRegion.patch((0.0, math.pi / 3), (0.0, 2 * math.pi))
    c1 = spectral_inequality_constant(1, cap)
    assert c1 == pytest.approx(4 * math.pi / cap.measure, rel=1e-8)
    assert spectral_inequality_constant(3, cap) > c1


def test_full_sphere_rejected():
    with pytest.raises(ValueError):
        spectral_inequality_constant(3, AngularRegion.full(2))


def test_fit_log_linear_exact_line():
    x = np.arange(10.0)
    fit = fit_log_linear(x, 3 * x - 1)
    assert fit.slope == pytest.approx(3.0)
    assert fit.intercept == pytest.approx(-1.0)
    assert fit.r2 == pytest.approx(1.0)


@pytest.mark.parametrize("bad", [dict(d=2, kind="ARC", theta1=1.0, theta2=0.5), dict(d=3, kind="ARC", theta2=1.0)])
def test_region_validation(bad):
    with pytest.raises(ValueError):
        AngularRegion(**bad)


def test_mode_validation():
    with pytest.raises(ValueError):
        AngularMode(2, 1, 3)
