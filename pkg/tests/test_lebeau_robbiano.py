import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from grushinlab import lebeau_robbiano as lr

from oracles import lr_closed_forms


def _params(**kw):
    base = dict(a=1.0, b=1.0, c=1.0, beta=2.0, delta=2 / 3, kappa=0.1, variant=lr.PROOF)
    return lr.LRParams(**(base | kw))


def test_proof_example():
    k = lr.derive_constants(_params())
    s2, s1, q, s = lr_closed_forms(1, 1, 1, 2, 0.1, 1)
    assert float(k.s2) == pytest.approx(0.1 / math.sqrt(2), rel=1e-14)
    assert float(k.s2) == pytest.approx(s2, rel=1e-14)
    assert float(k.s1) == pytest.approx(s1, rel=1e-14)
    assert float(k.s1) == pytest.approx(0.033333, abs=1e-6)
    assert float(k.q) == pytest.approx(q, rel=1e-14)
    assert float(k.s) == pytest.approx(s, rel=1e-14)


def test_statement_example():
    k = lr.derive_constants(_params(variant=lr.STATEMENT))
    assert float(k.s1) == pytest.approx(0.047140, abs=1e-6)
    assert float(k.s) == pytest.approx(0.016748, abs=1e-6)


def test_small_kappa_asymptotics():
    # s/κ → (a+b)^{−1/β}, approached at the rate q ≈ (2κ)^{1/3}
    errs = []
    for kap in (1e-3, 1e-6, 1e-9, 1e-12):
        k = lr.derive_constants(_params(kappa=kap))
        errs.append(abs(float(k.s) * 2**0.5 / kap - 1))
        assert errs[-1] == pytest.approx((2 * kap) ** (1 / 3), rel=1e-2)
    assert errs == sorted(errs, reverse=True)


def test_kappa0_examples():
    assert lr.kappa0(1, 1, 1) == pytest.approx(1 / 3)
    assert lr.kappa0_search(1, 1, 1, 2.0) == pytest.approx(1 / 3, abs=1e-12)


@given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.3, 5))
def test_kappa0_search_matches_closed_form(a, b, c, beta):
    k0 = lr.kappa0_search(a, b, c, beta)
    assert 0 < k0 < 1
    assert k0 == pytest.approx(lr.kappa0(a, b, c), rel=1e-9)


def test_kappa0_decreasing_in_rate_ratio():
    vals = [lr.kappa0(x, x, 1.0) for x in (0.5, 1, 2, 4)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_kappa_too_large_rejected():
    with pytest.raises(ValueError):
        lr.derive_constants(_params(kappa=0.5))


@pytest.mark.parametrize("bad", [dict(a=0.0), dict(delta=1.0), dict(kappa=1.0), dict(variant="NOPE")])
def test_param_validation(bad):
    with pytest.raises(ValueError):
        _params(**bad)


def test_normalize_raises_delta():
    p = lr.normalize(_params(delta=0.5))
    assert p.delta == pytest.approx(2 / 3)
    assert p.C_rel == pytest.approx(math.exp(2))
    q = lr.normalize(_params(beta=0.5, delta=2 / 3))
    assert q.beta == pytest.approx(2.0)


def test_scale_consistency():
    k1 = lr.derive_constants(_params())
    k2 = lr.derive_constants(_params(a=2.0, b=2.0, kappa=0.05))
    beta = 2.0
    # s2^beta (a + b) scales as kappa^beta only
    assert float(k1.s2**beta * 2) / 0.1**beta == pytest.approx(float(k2.s2**beta * 4) / 0.05**beta, rel=1e-14)


def test_shift_property_and_sharpness():
    k = lr.derive_constants(_params(C_rel=3.0, C_obs=2.0, C_dissip=2.0, Adm=2.0))
    assert k.g0 > k.f0
    rep = lr.verify_shift_property(k)
    assert rep.passed
    assert abs(rep.excess_at_end) <= 1e-6 * abs(float(k.log_f(k.q * k.T_prime)))
    assert not lr.verify_shift_property(k, T_end=1.05 * float(k.T_prime)).passed


def test_shift_property_g0_below_f0():
    k = lr.derive_constants(_params(C_rel=0.1, C_obs=0.1, C_dissip=0.5, Adm=0.5))
    assert k.g0 <= k.f0
    assert lr.verify_shift_property(k, T_end=k.params.T_max).passed


def test_semigroup_identity_observation():
    k = lr.derive_constants(_params())
    lam = np.linspace(1, 50, 8)
    rep = lr.synthetic_semigroup_check(lam, np.eye(8), k, samples=100)
    assert rep.hypothesis_held == rep.samples
    assert rep.violations == 0


def test_semigroup_zero_observation_no_false_positive():
    k = lr.derive_constants(_params())
    rep = lr.synthetic_semigroup_check(np.linspace(1, 50, 6), np.zeros((6, 6)), k, samples=50)
    assert rep.violations == 0
    # any conclusion that holds does so only because f has underflowed to zero
    assert rep.worst_ratio == 0.0


def test_semigroup_random_system():
    rng = np.random.default_rng(5)
    k = lr.derive_constants(_params())
    lam = np.sort(rng.uniform(1, 100, 16))
    B = rng.standard_normal((16, 16))
    rep = lr.synthetic_semigroup_check(lam, B, k, samples=200)
    assert rep.violations == 0


def test_semigroup_rejects_large_system():
    k = lr.derive_constants(_params())
    with pytest.raises(ValueError):
        lr.synthetic_semigroup_check(np.ones(65), np.eye(65), k)


def test_adaptive_simpson():
    assert lr.adaptive_simpson(math.sin, 0.0, math.pi) == pytest.approx(2.0, abs=1e-11)


def test_uniform_bound_examples():
    t_star = 0.0625
    u = lr.uniform_cost_bound(2 * t_star, t_star, 0.5)
    assert u.gamma == pytest.approx(0.2)
    assert u.delta_gamma == pytest.approx(2 * t_star / 5)
    T = 1.5 * 0.25
    b = lr.uniform_cost_bound(T, 0.25, 1.0, lr.BOUNDARY)
    g = b.gamma
    assert b.margin == pytest.approx(2 * 2 * T * (1 - g) - (1 + g), rel=1e-12)
    assert b.margin > 0
    with pytest.raises(ValueError):
        lr.uniform_cost_bound(t_star, t_star, 0.5)
