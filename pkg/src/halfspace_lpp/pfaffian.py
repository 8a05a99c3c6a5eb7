"""Pfaffians of skew-symmetric matrices: exact small-size expansion and an
O(n^3) skew tridiagonalization, plus the det-based square-root route used by
the Fredholm evaluators."""

import numpy as np

from .errors import DimensionError, NumericError, RegimeError, SizeError

_COMBINATORIAL_MAX = 12
_PIVOT_EPS = 1e-13  # below this the column is zero and Pf short-circuits to 0


class SkewMatrix:
    """Even-dimension dense skew-symmetric matrix over R or C.

    Built either from raw entries (validated to 1e-12 relative skewness, then
    exactly antisymmetrized) or from the strict upper triangle, which is skew
    by construction.
    """

    def __init__(self, entries):
        a = np.array(entries)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError("skew matrix must be square")
        if a.shape[0] % 2 != 0:
            raise DimensionError("skew matrix dimension must be even")
        scale = max(np.max(np.abs(a)), 1.0)
        if np.max(np.abs(a + a.T)) > 1e-12 * scale:
            raise NumericError("entries are not skew-symmetric within 1e-12")
        a = 0.5 * (a - a.T)
        np.fill_diagonal(a, 0.0)
        self.entries = a
        self.dim = a.shape[0]

    @classmethod
    def from_upper(cls, dim, upper):
        """Build from the strict upper triangle, row-major."""
        a = np.zeros((dim, dim), dtype=np.result_type(np.asarray(upper).dtype, float))
        iu = np.triu_indices(dim, k=1)
        a[iu] = upper
        a -= a.T
        obj = cls.__new__(cls)
        obj.entries = a
        obj.dim = dim
        return obj

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def _as_skew_array(a):
    if isinstance(a, SkewMatrix):
        return a.entries
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError("skew matrix must be square")
    if a.shape[0] % 2 != 0:
        raise DimensionError("skew matrix dimension must be even")
    return a


def pfaffian_combinatorial(a):
    """Pfaffian as the signed sum over perfect matchings. dim <= 12 only."""
    m = _as_skew_array(a)
    n = m.shape[0]
    if n > _COMBINATORIAL_MAX:
        raise SizeError(
            f"combinatorial Pfaffian limited to dim <= {_COMBINATORIAL_MAX}; "
            "use pfaffian_fast")
    if n == 0:
        return 1.0

    def expand(rows):
        # pair the first live row with each partner; sign alternates with the
        # number of skipped rows, matching the matching-sum definition
        if len(rows) == 2:
            return m[rows[0], rows[1]]
        first, rest = rows[0], rows[1:]
        total = 0.0
        sign = 1.0
        for idx, partner in enumerate(rest):
            remaining = rest[:idx] + rest[idx + 1:]
            total += sign * m[first, partner] * expand(remaining)
            sign = -sign
        return total

    return expand(tuple(range(n)))


def pfaffian_fast(a):
    """Pfaffian by skew tridiagonalization with partial pivoting, O(n^3).

    Works for real and complex entries (pivot size is judged by modulus).
    The sign of every row/column swap is accumulated; the Pfaffian is the
    signed product of superdiagonal entries of the tridiagonal factor.
    """
    m = np.array(_as_skew_array(a))  # working copy
    if not np.all(np.isfinite(m)):
        raise NumericError("non-finite entries")
    n = m.shape[0]
    if n == 0:
        return 1.0
    if not np.iscomplexobj(m):
        m = m.astype(float)
    value = 1.0 + 0.0j if np.iscomplexobj(m) else 1.0
    for k in range(0, n - 1, 2):
        col = np.abs(m[k + 1:, k])
        rel = int(np.argmax(col))
        if col[rel] <= _PIVOT_EPS:
            return 0.0 * value
        piv = k + 1 + rel
        if piv != k + 1:
            m[[k + 1, piv], :] = m[[piv, k + 1], :]
            m[:, [k + 1, piv]] = m[:, [piv, k + 1]]
            value = -value
        value = value * m[k, k + 1]
        if k + 2 < n:
            # Gauss congruence zeroing column k below row k+1; the trailing
            # block update a (x) t - t (x) a keeps it skew-symmetric
            t = m[k + 2:, k] / m[k + 1, k]
            a_row = m[k + 1, k + 2:].copy()
            m[k + 2:, k + 2:] += np.outer(a_row, t) - np.outer(t, a_row)
    return value if np.iscomplexobj(m) else float(value)


def block_j(npoints: int) -> np.ndarray:
    """Block-diagonal matrix of 2x2 blocks [[0, 1], [-1, 0]]."""
    j = np.zeros((2 * npoints, 2 * npoints))
    for i in range(npoints):
        j[2 * i, 2 * i + 1] = 1.0
        j[2 * i + 1, 2 * i] = -1.0
    return j


def pfaffian_of_difference(j_disc, k_disc, det_floor=-1e-10,
                           homotopy_points=None):
    """Pf(J - K) through Pf(J - K)^2 = det(I + J K), positive branch.

    The sign is fixed by continuity of t -> Pf(J - tK) from Pf(J) = 1; for
    CDF-valued kernels the determinant never crosses zero, which callers can
    verify by passing ``homotopy_points``.
    """
    j = _as_skew_array(j_disc)
    k = _as_skew_array(k_disc)
    if j.shape != k.shape:
        raise DimensionError("J and K blocks must have matching shape")
    jk = j @ k
    eye = np.eye(jk.shape[0])
    if homotopy_points:
        for t in homotopy_points:
            d = np.linalg.det(eye + t * jk)
            if np.real(d) <= 0 and abs(np.imag(d)) < 1e-8:
                raise RegimeError(
                    f"det(I + t J K) is nonpositive at t={t}: sign of the "
                    "square root is not the positive branch")
    det = np.linalg.det(eye + jk)
    if np.iscomplexobj(det):
        if abs(det.imag) > 1e-8 * max(1.0, abs(det.real)):
            raise NumericError("determinant has a large imaginary part")
        det = det.real
    if det < det_floor:
        raise RegimeError(
            f"det(I + J K) = {det} is negative beyond tolerance; the "
            "discretization is too coarse for a real square root")
    return float(np.sqrt(max(det, 0.0)))
