"""Dense linear-algebra kernels shared by every filter variant.

All factors follow one convention at module boundaries: Cholesky-like factors
of covariances are lower triangular (``P = L @ L.T``).  The rank-one update
and the triangularizers work on upper factors internally, mirroring how the
array-form updates are usually written; callers transpose at the boundary.

Everything here is a pure function of its inputs and deterministic: identical
inputs give bit-identical outputs.
"""

import math

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    DowndateNotPD,
    HyperbolicBreakdown,
    NonFiniteInput,
    NotPositiveDefinite,
    SingularTriangular,
)


def cholesky_lower(a: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of a symmetric positive-definite matrix.

    The input is symmetrized as ``(A + A.T) / 2`` first; ODE integration of a
    covariance drifts it off symmetry and the factorization should not be
    sensitive to that.

    Raises:
        NotPositiveDefinite: on a nonpositive pivot or non-finite entries.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise NotPositiveDefinite("matrix has non-finite entries")
    sym = 0.5 * (a + a.T)
    try:
        return np.linalg.cholesky(sym)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None


def chol_update_rank1(r: np.ndarray, u: np.ndarray, sign: int) -> np.ndarray:
    """Rank-one update/downdate of an upper-triangular Cholesky factor.

    Returns upper-triangular ``R'`` with ``R'.T @ R' = R.T @ R + sign * u @ u.T``
    and positive diagonal.  A matrix ``u`` of shape ``(n, p)`` applies ``p``
    consecutive single-column updates, left to right.

    Updates use Givens rotations on the stacked ``[R; u.T]`` rows; downdates
    use hyperbolic rotations in the mixed (stable) form.

    Raises:
        DowndateNotPD: ``sign == -1`` and the downdated matrix is not
            positive definite.  For the square-root filters built on this
            routine that is the estimator's shutoff condition.
        NotPositiveDefinite: the input factor has a nonpositive pivot.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    r = np.array(r, dtype=float)
    n = r.shape[0]
    u = np.asarray(u, dtype=float)
    cols = u.reshape(n, 1) if u.ndim == 1 else u
    if cols.shape[0] != n:
        raise ValueError("update vector length does not match factor size")
    for j in range(cols.shape[1]):
        _update_single(r, cols[:, j].copy(), sign)
    return r


def _update_single(r: np.ndarray, u: np.ndarray, sign: int) -> None:
    n = r.shape[0]
    for k in range(n):
        rkk = r[k, k]
        uk = u[k]
        if not rkk > 0.0 or not np.isfinite(rkk):
            raise NotPositiveDefinite(f"factor pivot {k} is not positive")
        if sign > 0:
            rad = math.hypot(rkk, uk)
            c = rkk / rad
            s = uk / rad
            r[k, k] = rad
            if k + 1 < n:
                row = r[k, k + 1 :].copy()
                tail = u[k + 1 :]
                r[k, k + 1 :] = c * row + s * tail
                u[k + 1 :] = c * tail - s * row
        else:
            rho = uk / rkk
            rad2 = (1.0 - rho) * (1.0 + rho)
            if not rad2 > 0.0 or not np.isfinite(rad2):
                raise DowndateNotPD(f"downdate pivot {k} lost positivity")
            denom = math.sqrt(rad2)
            c = 1.0 / denom
            s = rho * c
            r[k, k] = rkk * denom
            if k + 1 < n:
                row = r[k, k + 1 :]
                tail = u[k + 1 :]
                newrow = c * row - s * tail
                r[k, k + 1 :] = newrow
                u[k + 1 :] = tail * denom - rho * newrow


def qr_r_factor(a: np.ndarray) -> np.ndarray:
    """Triangular factor ``R`` (upper, diag >= 0) with ``R.T @ R = A.T @ A``.

    ``A`` must be tall (p >= n).  Rank deficiency is benign and shows up as
    zero diagonal entries; callers treat those as a downstream factorization
    failure.

    Raises:
        NonFiniteInput: NaN or infinite entries in ``A``.
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] < a.shape[1]:
        raise ValueError(f"expected a tall matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise NonFiniteInput("matrix has non-finite entries")
    r, _ = _triangularize(a, a.shape[0], want_q=False)
    return r


def jqr_r_factor(a: np.ndarray, signs: np.ndarray, want_q: bool = False):
    """Hyperbolic (J-orthogonal) triangularization of a tall matrix.

    Computes upper-triangular ``R`` (diag >= 0) with ``R.T @ R = A.T @ J @ A``
    where ``J = diag(signs)``.  The accumulated transform ``Q`` satisfies
    ``Q.T @ J @ Q = J`` and ``Q @ A = [R; 0]``; pass ``want_q=True`` to get it
    back as ``(R, Q)``.

    ``signs`` must be +/-1 with every +1 ahead of every -1, and at least as
    many +1 rows as columns; the filters guarantee this by reordering the
    sigma weights so the single negative weight sits last.

    Each column is reduced by one Householder reflection per sign class
    (orthogonal, hence J-preserving within a class) followed by a single
    hyperbolic rotation between the two class representatives, applied in the
    mixed form to bound element growth.

    Raises:
        HyperbolicBreakdown: a rotation would have to eliminate an entry at
            least as large as its pivot, i.e. ``A.T @ J @ A`` is not positive
            definite in working precision.
        NonFiniteInput: NaN or infinite entries in ``A``.
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] < a.shape[1]:
        raise ValueError(f"expected a tall matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise NonFiniteInput("matrix has non-finite entries")
    signs = np.asarray(signs)
    p, n = a.shape
    if signs.shape != (p,) or not np.all(np.abs(signs) == 1):
        raise ValueError("signs must be a vector of +/-1 matching the row count")
    n_plus = int(np.sum(signs > 0))
    if np.any(signs[:n_plus] < 0) or np.any(signs[n_plus:] > 0):
        raise ValueError("signs must be +1s followed by -1s")
    if n_plus < n:
        raise ValueError("need at least as many +1 rows as columns")
    r, q = _triangularize(a, n_plus, want_q=want_q)
    return (r, q) if want_q else r


def _triangularize(a: np.ndarray, n_plus: int, want_q: bool):
    """Shared column-by-column reduction; rows past ``n_plus`` carry sign -1."""
    p, n = a.shape
    q = np.eye(p) if want_q else None
    for col in range(n):
        _reflect_rows(a, q, col, n_plus, col)
        if n_plus < p:
            _reflect_rows(a, q, n_plus, p, col)
            g = a[n_plus, col]
            if g != 0.0:
                f = a[col, col]
                if abs(f) <= abs(g):
                    raise HyperbolicBreakdown(
                        f"column {col}: |pivot| {abs(f):.3e} <= |entry| {abs(g):.3e}"
                    )
                _hyperbolic_rows(a, q, col, n_plus, col)
    r = np.triu(a[:n, :n])
    neg = np.diag(r) < 0.0
    if neg.any():
        r[neg] = -r[neg]
        if q is not None:
            q[:n][neg] = -q[:n][neg]
    return r, q


def _reflect_rows(a, q, i0, i1, col) -> None:
    """Householder reflection of rows ``i0:i1`` zeroing column ``col`` below ``i0``."""
    if i1 - i0 < 2:
        return
    x = a[i0:i1, col]
    if not x[1:].any():
        return
    norm = np.linalg.norm(x)
    alpha = -math.copysign(norm, x[0]) if x[0] != 0.0 else -norm
    v = x.copy()
    v[0] -= alpha
    beta = 2.0 / (v @ v)
    block = a[i0:i1, col:]
    block -= np.outer(beta * v, v @ block)
    a[i0 + 1 : i1, col] = 0.0
    a[i0, col] = alpha
    if q is not None:
        qb = q[i0:i1]
        qb -= np.outer(beta * v, v @ qb)


def _hyperbolic_rows(a, q, ip, im, col) -> None:
    """Mixed-form hyperbolic rotation zeroing ``a[im, col]`` against ``a[ip, col]``."""
    f = a[ip, col]
    g = a[im, col]
    rho = g / f
    denom = math.sqrt((1.0 - rho) * (1.0 + rho))
    c = 1.0 / denom
    s = rho * c
    x = a[ip, col:].copy()
    y = a[im, col:]
    xn = c * x - s * y
    a[ip, col:] = xn
    a[im, col:] = y * denom - rho * xn
    a[im, col] = 0.0
    if q is not None:
        xq = q[ip].copy()
        yq = q[im]
        xqn = c * xq - s * yq
        q[ip] = xqn
        q[im] = yq * denom - rho * xqn


def phi_map(m: np.ndarray) -> np.ndarray:
    """Lower-triangularizing map: strictly-lower part plus half the diagonal.

    For symmetric ``M`` this gives ``phi_map(M) + phi_map(M).T == M`` exactly,
    which is what makes it the right-hand-side generator for the covariance
    factor ODE.
    """
    m = np.asarray(m, dtype=float)
    out = np.tril(m)
    np.fill_diagonal(out, 0.5 * np.diagonal(m))
    return out


def tri_solve(
    l: np.ndarray, b: np.ndarray, lower: bool = True, trans: bool = False
) -> np.ndarray:
    """Solve ``L @ Y = B`` (or ``L.T @ Y = B`` with ``trans=True``) by substitution.

    Never forms an explicit inverse.

    Raises:
        SingularTriangular: zero entry on the factor diagonal.
    """
    l = np.asarray(l, dtype=float)
    if np.any(np.diagonal(l) == 0.0):
        raise SingularTriangular("triangular factor has a zero diagonal entry")
    return solve_triangular(l, b, lower=lower, trans=1 if trans else 0, check_finite=False)
