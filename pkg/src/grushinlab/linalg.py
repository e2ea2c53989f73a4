"""Dense and tridiagonal symmetric eigensolvers.

Two families live here:

* Sturm-sequence bisection plus inverse iteration for the lowest eigenpairs
  of a symmetric tridiagonal matrix (used by the radial solver).
* Householder tridiagonalization followed by the implicit-shift QL
  iteration for small dense symmetric matrices, plus a generalized
  eigenvalue routine for pencils ``(E, G)`` with ``G`` positive definite.

The dense routines work on float64 arrays and on object arrays holding
``mpmath.mpf`` scalars, so the same code serves double and extended
precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded, solve_triangular


class EigenSolverError(RuntimeError):
    """Raised when an iterative eigensolver fails to converge."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(f"{message} (residual norm {residual:.3e})")
        self.residual = residual


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Cholesky breakdown; ``witness`` spans a (numerical) null direction."""

    def __init__(self, message: str, witness: np.ndarray | None = None, condition: float = math.inf):
        super().__init__(message)
        self.witness = witness
        self.condition = condition


# ---------------------------------------------------------------------------
# tridiagonal: Sturm bisection + inverse iteration
# ---------------------------------------------------------------------------

def sturm_count(diag, off, shifts) -> np.ndarray:
    """Number of eigenvalues strictly below each shift.

    Counts negative pivots of the LDL^T factorization of ``T - x I``.
    A scalar loop per shift is used: for the short shift batches needed
    here it beats the vectorized alternative by a wide margin.
    """
    shifts = np.atleast_1d(np.asarray(shifts, dtype=float)).tolist()
    d = diag.tolist() if isinstance(diag, np.ndarray) else list(diag)
    off2 = (np.asarray(off, dtype=float) ** 2).tolist()
    tail = list(zip(d[1:], off2))
    head = d[0]
    tiny = 1e-290
    out = []
    for x in shifts:
        q = head - x
        c = 1 if q < 0 else 0
        for a, b2 in tail:
            if q == 0.0:
                q = -tiny
            q = (a - x) - b2 / q
            if q < 0:
                c += 1
        out.append(c)
    return np.array(out, dtype=np.int64)


def _gershgorin(diag: np.ndarray, off: np.ndarray) -> tuple[float, float]:
    rad = np.zeros_like(diag)
    rad[:-1] += np.abs(off)
    rad[1:] += np.abs(off)
    return float(np.min(diag - rad)), float(np.max(diag + rad))


def tridiagonal_lowest(
    diag: np.ndarray,
    off: np.ndarray,
    k: int,
    rtol: float = 1e-7,
    max_inverse_steps: int = 12,
) -> tuple[np.ndarray, np.ndarray]:
    """Lowest ``k`` eigenpairs of a symmetric tridiagonal matrix.

    Bisection on Sturm counts isolates each eigenvalue in a bracket of
    relative width ``rtol``; inverse iteration from the bracket midpoint
    then yields the eigenvector, and its Rayleigh quotient (which must
    fall inside the bracket) gives the eigenvalue to working precision.

    Returns ``(values, vectors)`` with ``vectors`` of shape ``(k, n)`` and
    unit Euclidean norm rows.
    """
    diag = np.asarray(diag, dtype=float)
    off = np.asarray(off, dtype=float)
    n = diag.size
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside [1, {n}]")
    lo0, hi0 = _gershgorin(diag, off)
    # shrink the upper end: we only need the lowest k eigenvalues
    hi = lo0 + 1.0
    while sturm_count(diag, off, [hi])[0] < k and hi < hi0:
        hi = lo0 + 4.0 * (hi - lo0)
    hi = min(hi, hi0) + abs(hi0) * 1e-14 + 1e-300
    lo_b = np.full(k, lo0 - abs(lo0) * 1e-14 - 1e-300)
    hi_b = np.full(k, hi)
    target = np.arange(1, k + 1)
    scale = max(abs(lo0), abs(hi), 1.0)
    for _ in range(400):
        width = hi_b - lo_b
        narrow = width <= rtol * np.maximum(np.abs(hi_b), 1e-3 * scale)
        if np.all(narrow):
            counts = sturm_count(diag, off, np.concatenate([lo_b, hi_b]))
            isolated = (counts[:k] == target - 1) & (counts[k:] == target)
            if np.all(isolated):
                break
            narrow &= isolated
        mid = 0.5 * (lo_b + hi_b)
        below = sturm_count(diag, off, mid) >= target
        hi_b = np.where(below | narrow, np.where(narrow, hi_b, mid), hi_b)
        lo_b = np.where(below | narrow, lo_b, mid)
    else:
        raise EigenSolverError("bisection did not converge", float(np.max(hi_b - lo_b)))

    ab = np.zeros((3, n))
    ab[0, 1:] = off
    ab[2, :-1] = off
    rng = np.random.default_rng(12345)
    values = np.empty(k)
    vectors = np.empty((k, n))
    for j in range(k):
        sigma = 0.5 * (lo_b[j] + hi_b[j])
        x = rng.standard_normal(n)
        x /= np.linalg.norm(x)
        resid = math.inf
        for _ in range(max_inverse_steps):
            ab[1] = diag - sigma
            try:
                y = solve_banded((1, 1), ab, x, check_finite=False)
            except np.linalg.LinAlgError:
                sigma = sigma * (1 + 1e-15) + 1e-300
                continue
            nrm = np.linalg.norm(y)
            if not np.isfinite(nrm) or nrm == 0:
                sigma = sigma * (1 + 1e-15) + 1e-300
                continue
            x = y / nrm
            tx = diag * x
            tx[:-1] += off * x[1:]
            tx[1:] += off * x[:-1]
            rq = float(x @ tx)
            resid = float(np.linalg.norm(tx - rq * x))
            if resid <= 1e-12 * scale:
                break
        if resid > 1e-7 * scale:
            raise EigenSolverError(f"inverse iteration stalled for eigenvalue {j + 1}", resid)
        for i in range(j):
            # eigenvalues are simple here, but keep the basis orthonormal
            x -= (vectors[i] @ x) * vectors[i]
        x /= np.linalg.norm(x)
        tx = diag * x
        tx[:-1] += off * x[1:]
        tx[1:] += off * x[:-1]
        rq = float(x @ tx)
        slack = 1e-12 * scale
        if not lo_b[j] - slack <= rq <= hi_b[j] + slack:
            raise EigenSolverError(f"eigenvalue {j + 1} escaped its Sturm bracket", abs(rq - sigma))
        values[j] = rq
        vectors[j] = x
    return values, vectors


# ---------------------------------------------------------------------------
# dense symmetric: Householder + implicit QL
# ---------------------------------------------------------------------------

def _sqrt_for(a: np.ndarray):
    if a.dtype == object:
        import mpmath

        return mpmath.sqrt
    return math.sqrt


def _eps_for(a: np.ndarray):
    if a.dtype == object:
        import mpmath

        return mpmath.mpf(2) ** (-mpmath.mp.prec)
    return np.finfo(float).eps


def householder_tridiagonalize(a: np.ndarray, want_q: bool = False):
    """Reduce a symmetric matrix to tridiagonal form ``Q^T A Q``.

    Returns ``(diag, off, Q)``; ``Q`` is ``None`` unless requested.
    """
    a = np.array(a, dtype=a.dtype, copy=True)
    n = a.shape[0]
    sqrt = _sqrt_for(a)
    zero = a.dtype.type(0) if a.dtype != object else a[0, 0] * 0
    q = None
    if want_q:
        q = np.eye(n, dtype=a.dtype) if a.dtype != object else _object_eye(n, zero)
    for k in range(n - 2):
        x = a[k + 1:, k].copy()
        norm_x = sqrt(np.dot(x, x))
        if norm_x == 0:
            continue
        alpha = -norm_x if x[0] >= 0 else norm_x
        v = x
        v[0] = v[0] - alpha
        vv = np.dot(v, v)
        if vv == 0:
            continue
        beta = 2 / vv
        sub = a[k + 1:, k + 1:]
        p = beta * (sub @ v)
        kk = beta * np.dot(v, p) / 2
        w = p - kk * v
        sub -= np.outer(v, w) + np.outer(w, v)
        a[k + 1:, k + 1:] = sub
        a[k + 1:, k] = zero
        a[k, k + 1:] = zero
        a[k + 1, k] = alpha
        a[k, k + 1] = alpha
        if q is not None:
            qs = q[:, k + 1:]
            q[:, k + 1:] = qs - np.outer(qs @ v, beta * v)
    diag = np.array([a[i, i] for i in range(n)], dtype=a.dtype)
    off = np.array([a[i + 1, i] for i in range(n - 1)], dtype=a.dtype)
    return diag, off, q


def _object_eye(n: int, zero):
    out = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            out[i, j] = zero + (1 if i == j else 0)
    return out


def tridiagonal_ql(diag, off, z: np.ndarray | None = None, max_iter: int = 60):
    """Implicit-shift QL iteration on a symmetric tridiagonal matrix.

    ``z`` (if given) is updated in place so that its columns become the
    eigenvectors of the matrix whose tridiagonal form was ``Q^T A Q`` with
    ``z = Q`` on entry. Returns the unsorted eigenvalues.
    """
    d = list(diag)
    n = len(d)
    e = list(off) + [d[0] * 0]
    anorm = max(abs(x) for x in d) + max((abs(x) for x in e), default=0)
    if isinstance(d[0], (float, np.floating)):
        eps, sqrt = np.finfo(float).eps, math.sqrt
    else:
        eps, sqrt = _eps_for(np.empty(0, dtype=object)), _mp_sqrt()
    # absolute deflation floor: entries this far below the matrix norm
    # cannot move any eigenvalue at working precision
    floor = eps * eps * anorm
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd or abs(e[m]) <= floor:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_iter:
                raise EigenSolverError("QL iteration did not converge", float(abs(e[l])))
            g = (d[l + 1] - d[l]) / (2 * e[l])
            r = sqrt(g * g + 1)
            g = d[m] - d[l] + e[l] / (g + (r if g >= 0 else -r))
            s = c = d[0] * 0 + 1
            p = d[0] * 0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = sqrt(f * f + g * g)
                e[i + 1] = r
                if r == 0:
                    d[i + 1] -= p
                    e[m] = d[0] * 0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if z is not None:
                    zi = z[:, i].copy()
                    zi1 = z[:, i + 1].copy()
                    z[:, i + 1] = s * zi + c * zi1
                    z[:, i] = c * zi - s * zi1
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = d[0] * 0
    return d


def _mp_sqrt():
    import mpmath

    return mpmath.sqrt


def symmetric_eigh(a: np.ndarray, vectors: bool = False):
    """Eigen-decomposition of a small dense symmetric matrix.

    Eigenvalues are returned in ascending order (as a float64 array for
    float input, an object array otherwise); eigenvectors as columns.
    """
    a = np.asarray(a)
    if a.dtype != object:
        a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if n == 1:
        vals = a[0].copy()
        return (vals, np.ones((1, 1), dtype=a.dtype)) if vectors else vals
    diag, off, q = householder_tridiagonalize(a, want_q=vectors)
    vals = tridiagonal_ql(diag, off, z=q)
    order = sorted(range(n), key=lambda i: vals[i])
    vals = np.array([vals[i] for i in order], dtype=a.dtype)
    if vectors:
        return vals, q[:, order]
    return vals


# ---------------------------------------------------------------------------
# symmetric-definite pencil
# ---------------------------------------------------------------------------

def cholesky(g: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor; raises ``NotPositiveDefinite`` on breakdown."""
    if g.dtype != object:
        try:
            return np.linalg.cholesky(g)
        except np.linalg.LinAlgError:
            raise NotPositiveDefinite("Cholesky breakdown") from None
    n = g.shape[0]
    sqrt = _mp_sqrt()
    zero = g[0, 0] * 0
    low = np.empty((n, n), dtype=object)
    low[:] = zero
    for j in range(n):
        s = g[j, j] - sum((low[j, p] ** 2 for p in range(j)), zero)
        if s <= 0:
            raise NotPositiveDefinite(f"Cholesky breakdown at pivot {j}")
        low[j, j] = sqrt(s)
        for i in range(j + 1, n):
            t = g[i, j] - sum((low[i, p] * low[j, p] for p in range(j)), zero)
            low[i, j] = t / low[j, j]
    return low


def _lower_solve(low: np.ndarray, b: np.ndarray) -> np.ndarray:
    if low.dtype != object:
        return solve_triangular(low, b, lower=True, check_finite=False)
    n = low.shape[0]
    b = np.array(b, dtype=object, copy=True)
    x = np.empty_like(b)
    for i in range(n):
        acc = b[i]
        for p in range(i):
            acc = acc - low[i, p] * x[p]
        x[i] = acc / low[i, i]
    return x


@dataclass(frozen=True)
class PencilResult:
    """Largest generalized eigenpair of ``E c = lam G c``."""

    value: float
    vector: np.ndarray
    condition: float
    rank: int | None = None


def pencil_max(e: np.ndarray, g: np.ndarray) -> PencilResult:
    """Largest eigenvalue of the symmetric-definite pencil ``(E, G)``.

    ``G`` is Jacobi-equilibrated, Cholesky-factored, and the reduced
    matrix ``L^-1 E' L^-T`` is diagonalized with Householder + QL. The
    returned vector is in the original coordinates, normalized so that
    ``c^T G c = 1``.
    """
    e = np.asarray(e)
    g = np.asarray(g)
    obj = e.dtype == object or g.dtype == object
    if obj:
        import mpmath

        e = np.array(e, dtype=object)
        g = np.array(g, dtype=object)
        dscale = np.array([1 / mpmath.sqrt(g[i, i]) for i in range(g.shape[0])], dtype=object)
    else:
        e = np.asarray(e, dtype=float)
        g = np.asarray(g, dtype=float)
        gd = np.diag(g)
        if np.any(gd <= 0):
            bad = int(np.argmin(gd))
            w = np.zeros(g.shape[0])
            w[bad] = 1.0
            raise NotPositiveDefinite("nonpositive diagonal in G", witness=w)
        dscale = 1.0 / np.sqrt(gd)
    ge = g * np.outer(dscale, dscale)
    ee = e * np.outer(dscale, dscale)
    try:
        low = cholesky(ge)
    except NotPositiveDefinite:
        vals, vecs = symmetric_eigh(ge, vectors=True)
        w = vecs[:, 0] * dscale
        raise NotPositiveDefinite(
            "G is not numerically positive definite", witness=np.asarray(w), condition=math.inf
        ) from None
    # C = L^-1 E' L^-T
    tmp = _lower_solve(low, ee)
    c = _lower_solve(low, tmp.T).T
    c = (c + c.T) / 2
    vals, vecs = symmetric_eigh(c, vectors=True)
    top = vals[-1]
    u = vecs[:, -1]
    # back-transform: c_orig = D L^-T u
    if obj:
        n = low.shape[0]
        x = np.empty(n, dtype=object)
        for i in reversed(range(n)):
            acc = u[i]
            for p in range(i + 1, n):
                acc = acc - low[p, i] * x[p]
            x[i] = acc / low[i, i]
        diag_l = [abs(low[i, i]) for i in range(n)]
        cond = float((max(diag_l) / min(diag_l)) ** 2)
    else:
        x = solve_triangular(low.T, u, lower=False, check_finite=False)
        dl = np.abs(np.diag(low))
        cond = float((dl.max() / dl.min()) ** 2)
    return PencilResult(value=top, vector=x * dscale, condition=cond)


def pencil_max_resolved(e: np.ndarray, g: np.ndarray, rcond: float = 1e-10) -> PencilResult:
    """Largest eigenvalue of ``(E, G)`` on the numerically resolved part of ``G``.

    After Jacobi equilibration, ``G' = V diag(w) V^T`` is diagonalized and
    only directions with ``w > rcond * max(w)`` are kept. The pencil is
    then solved exactly on that subspace, so the value is the supremum of
    the Rayleigh quotient over a genuine subspace (a lower bound for the
    unrestricted value) whose conditioning is bounded by ``1/rcond``.
    """
    e = np.asarray(e, dtype=float)
    g = np.asarray(g, dtype=float)
    gd = np.diag(g)
    if np.any(gd <= 0):
        bad = int(np.argmin(gd))
        w = np.zeros(g.shape[0])
        w[bad] = 1.0
        raise NotPositiveDefinite("nonpositive diagonal in G", witness=w)
    dscale = 1.0 / np.sqrt(gd)
    ge = g * np.outer(dscale, dscale)
    ee = e * np.outer(dscale, dscale)
    ge = (ge + ge.T) / 2
    w, v = symmetric_eigh(ge, vectors=True)
    keep = w > rcond * w[-1]
    basis = v[:, keep] / np.sqrt(w[keep])
    # re-form G on the kept basis: its computed eigenvectors are only
    # G-orthonormal up to rounding, which matters for the smallest kept w
    gb = basis.T @ ge @ basis
    low = cholesky((gb + gb.T) / 2)
    t = solve_triangular(low, basis.T @ ee @ basis, lower=True, check_finite=False)
    c = solve_triangular(low, t.T, lower=True, check_finite=False).T
    vals, vecs = symmetric_eigh((c + c.T) / 2, vectors=True)
    x = basis @ solve_triangular(low.T, vecs[:, -1], lower=False, check_finite=False)
    return PencilResult(
        value=float(vals[-1]),
        vector=x * dscale,
        condition=float(w[-1] / w[keep][0]),
        rank=int(keep.sum()),
    )
