"""Independent reference values used by the tests.

Everything here is computed without touching grushinlab internals: Bessel
zeros through mpmath, closed-form scalar pencils and dense linear algebra
through numpy.
"""

from __future__ import annotations

import math

import mpmath
import numpy as np


def bessel_zero(order: int, k: int) -> float:
    """k-th positive zero of J_order."""
    return float(mpmath.besseljzero(order, k))


def spherical_bessel_zero(order: int, k: int) -> float:
    """k-th positive zero of j_order; j_0 zeros are kπ."""
    if order == 0:
        return k * math.pi
    return float(mpmath.besseljzero(order + 0.5, k))


def scalar_cost(nu: float, T: float, b2: float = 1.0) -> float:
    """Pencil value of a single mode: 2ν e^{−2νT} / (b²(1 − e^{−2νT}))."""
    if nu == 0:
        return 1.0 / (b2 * T)
    return 2 * nu * math.exp(-2 * nu * T) / (b2 * -math.expm1(-2 * nu * T))


def dense_pencil_max(e: np.ndarray, g: np.ndarray) -> float:
    """Largest generalized eigenvalue of (e, g) via a Cholesky-free eigh."""
    w, u = np.linalg.eigh((g + g.T) / 2)
    half = u / np.sqrt(w)
    m = half.T @ e @ half
    return float(np.linalg.eigvalsh((m + m.T) / 2)[-1])


def lr_closed_forms(a, b, c, beta, kappa, factor):
    """s2, s1, q, s from the displayed formulas, evaluated at 50 digits."""
    with mpmath.workdps(50):
        a, b, c, beta, kappa = map(mpmath.mpf, (a, b, c, beta, kappa))
        s2 = kappa / (a + b) ** (1 / beta)
        s1 = kappa ** ((beta + 1) / beta) * (factor / (c * (1 - kappa))) ** (1 / beta)
        q = (s1 / s2) ** (beta / (beta + 1))
        return float(s2), float(s1), float(q), float(s2 * (1 - q))


def tanh_fixed_point(alpha: float) -> float:
    """Positive root of tanh(t) = α t by bisection (α < 1)."""
    lo, hi = 1e-6, 1 / alpha + 1
    for _ in range(200):
        mid = (lo + hi) / 2
        if math.tanh(mid) > alpha * mid:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def carleman_raw(T, lam, s, sup, center, V, t, x, dps: int = 40):
    """Raw G1, G2 and min_ξ H for ψ = ½‖x − center‖² by mpmath differentiation of ϕ.

    ϕ(t, x) = ϖ(t)(e^{4λ sup} − e^{λ(ψ + 2 sup)}), ϖ(t) = T²/(4t(T − t)).
    G1 = −VΔϕ + ∇V·∇ϕ,
    G2 = −2∇ϕᵀ(Hess ϕ)∇ϕ + |∇ϕ|²Δϕ + (3∇ϕ·∇∂tϕ − ∂tϕΔϕ)/s − (∂ttϕ − 2Δ²ϕ)/(2s²),
    H(ξ) = −2ξᵀ(Hess ϕ)ξ − Δϕ|ξ|².
    ``V`` is a callable on mpmath coordinates.
    """
    d = len(x)
    with mpmath.workdps(dps):
        T, lam, s, sup = map(mpmath.mpf, (T, lam, s, sup))
        c = [mpmath.mpf(v) for v in center]

        def phi(tt, *xx):
            psi = sum((xi - ci) ** 2 for xi, ci in zip(xx, c)) / 2
            vp = T**2 / (4 * tt * (T - tt))
            return vp * (mpmath.exp(4 * lam * sup) - mpmath.exp(lam * (psi + 2 * sup)))

        pt = [mpmath.mpf(t)] + [mpmath.mpf(v) for v in x]

        def D(*orders):
            return mpmath.diff(phi, pt, orders)

        def e(i, k=1):
            o = [0] * (d + 1)
            o[i + 1] = k
            return o

        grad = [D(*e(i)) for i in range(d)]
        hess = [[D(*[a + b for a, b in zip(e(i), e(j))]) for j in range(d)] for i in range(d)]
        lap = sum(hess[i][i] for i in range(d))
        dt = D(1, *([0] * d))
        dtt = D(2, *([0] * d))
        grad_dt = [D(*([1] + e(i)[1:])) for i in range(d)]
        bilap = sum(D(*[a + b for a, b in zip(e(i, 2), e(j, 2))]) for i in range(d) for j in range(d))
        g2 = (
            -2 * sum(grad[i] * hess[i][j] * grad[j] for i in range(d) for j in range(d))
            + sum(g * g for g in grad) * lap
            + (3 * sum(a * b for a, b in zip(grad, grad_dt)) - dt * lap) / s
            - (dtt - 2 * bilap) / (2 * s * s)
        )
        xs = pt[1:]
        h = mpmath.mpf("1e-12")
        Vx = V(xs)
        gradV = [(V([v + (h if k == i else 0) for k, v in enumerate(xs)]) - V([v - (h if k == i else 0) for k, v in enumerate(xs)])) / (2 * h) for i in range(d)]
        g1 = -Vx * lap + sum(a * b for a, b in zip(gradV, grad))
        Hm = mpmath.matrix([[-2 * hess[i][j] - (lap if i == j else 0) for j in range(d)] for i in range(d)])
        hmin = min(mpmath.eigsy(Hm, eigvals_only=True))
        return float(g1), float(g2), float(hmin)
