"""Hot numeric loops: numba-compiled when available, pure numpy otherwise.

The backend is chosen once at import time.  ``HSLPP_BACKEND=numpy`` forces
the fallback path; ``HSLPP_BACKEND=numba`` insists on numba and raises if it
cannot be imported.  Both backends draw every random weight from the same
counter-based stream (see :mod:`._rng`), so sampled tables are bit-identical
no matter the backend or thread count.
"""

import math
import os

import numpy as np

from . import _rng

_GOLD = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK = 0xFFFFFFFFFFFFFFFF

_requested = os.environ.get("HSLPP_BACKEND", "").strip().lower()

if _requested == "numpy":
    _HAVE_NUMBA = False
else:
    try:
        import numba
        from numba import njit, prange

        _HAVE_NUMBA = True
    except ImportError:  # pragma: no cover
        if _requested == "numba":
            raise
        _HAVE_NUMBA = False

BACKEND = "numba" if _HAVE_NUMBA else "numpy"


def set_num_threads(n: int) -> None:
    if _HAVE_NUMBA and n > 0:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


# ---------------------------------------------------------------------------
# scalar counter RNG
# ---------------------------------------------------------------------------
# Two textually separate versions of the same arithmetic: the numba one uses
# wrapping uint64 ops, the python one masks explicitly (plain python ints do
# not wrap).  `_u01` is bound to whichever matches the active backend.


def _u01_numba_src(seed, domain, k1, k2, k3):
    h = np.uint64(seed) ^ np.uint64(domain)
    for k in (np.uint64(k1), np.uint64(k2), np.uint64(k3)):
        h = h + np.uint64(_GOLD)
        h = h ^ (h >> np.uint64(30))
        h = h * np.uint64(_MIX1)
        h = h ^ (h >> np.uint64(27))
        h = h * np.uint64(_MIX2)
        h = h ^ (h >> np.uint64(31))
        h = h ^ k
    h = h + np.uint64(_GOLD)
    h = h ^ (h >> np.uint64(30))
    h = h * np.uint64(_MIX1)
    h = h ^ (h >> np.uint64(27))
    h = h * np.uint64(_MIX2)
    h = h ^ (h >> np.uint64(31))
    return (np.float64(h >> np.uint64(11)) + 1.0) * 2.0 ** -53


def _u01_python(seed, domain, k1, k2, k3):
    h = int(seed) ^ int(domain)
    for k in (int(k1), int(k2), int(k3), None):
        h = (h + _GOLD) & _MASK
        h ^= h >> 30
        h = (h * _MIX1) & _MASK
        h ^= h >> 27
        h = (h * _MIX2) & _MASK
        h ^= h >> 31
        if k is not None:
            h ^= k
    return ((h >> 11) + 1) * 2.0 ** -53


# ---------------------------------------------------------------------------
# half-space LPP dynamic programming
# ---------------------------------------------------------------------------
# Weight laws, keyed by ``model``:
#   0: exponential, rate alpha on the diagonal, 1 elsewhere
#   1: exponential row variant, rate alpha on the first row, 1 elsewhere
#   2: geometric, parameter a_n*a_m off-diagonal, c*a_n on the diagonal


def _make_lpp_points(u01):
    def impl(model, nmax, mmax, pts_n, pts_m, alpha, a_par, c_par,
             seed, domain, rep0, reps, out):
        npts = pts_n.shape[0]
        for r in range(reps):
            rep = rep0 + r
            row = np.zeros(nmax + 1)
            for mm in range(1, mmax + 1):
                for nn in range(mm, nmax + 1):
                    u = u01(seed, domain, nn, mm, rep)
                    if model == 2:
                        q = c_par * a_par[nn] if nn == mm else a_par[nn] * a_par[mm]
                        w = np.floor(np.log(u) / np.log(q)) if q > 0.0 else 0.0
                    else:
                        if model == 0:
                            rate = alpha if nn == mm else 1.0
                        else:
                            rate = alpha if mm == 1 else 1.0
                        w = -np.log(u) / rate
                    if nn == mm:
                        row[nn] = w + row[nn]
                    else:
                        prev = row[nn - 1]
                        if row[nn] > prev:
                            prev = row[nn]
                        row[nn] = w + prev
                for p in range(npts):
                    if pts_m[p] == mm:
                        out[r, p] = row[pts_n[p]]

    return impl


def _make_lpp_symmetric(u01):
    def impl(nmax, alpha, seed, domain, rep0, reps, out):
        # full-quadrant LPP with symmetric weights w_ij = w_ji; the weight is
        # keyed by the sorted index pair so both triangles read the same value
        for r in range(reps):
            rep = rep0 + r
            row = np.zeros(nmax + 1)
            for mm in range(1, nmax + 1):
                for nn in range(1, nmax + 1):
                    hi = nn if nn > mm else mm
                    lo = nn + mm - hi
                    u = u01(seed, domain, hi, lo, rep)
                    rate = alpha if nn == mm else 1.0
                    w = -np.log(u) / rate
                    prev = row[nn - 1]
                    if row[nn] > prev:
                        prev = row[nn]
                    row[nn] = w + prev
            out[r] = row[nmax]

    return impl


# ---------------------------------------------------------------------------
# truncated geometric sampling for partition dynamics
# ---------------------------------------------------------------------------

UNBOUNDED = np.int64(2 ** 62)


def _tgeom_finite01_src(u, t, m):
    # smallest j in [0, m] with (1 - t^(j+1)) / (1 - t^(m+1)) >= u; 0 < t < 1
    amt = 1.0 - t ** (m + 1)
    val = 1.0 - u * amt
    if val <= 0.0:
        return m
    j = int(math.ceil(math.log(val) / math.log(t) - 1.0 - 1e-12))
    if j < 0:
        j = 0
    if j > m:
        j = m
    return j


def _make_tgeom(tg01):
    def impl(u, t, lo, hi):
        # inverse-CDF draw from weights t^k on {lo..hi}; hi == UNBOUNDED
        # means a plain geometric tail (requires t < 1 there)
        if hi >= UNBOUNDED:
            if t <= 0.0:
                return int(lo)
            return int(lo) + int(math.floor(math.log(u) / math.log(t)))
        m = int(hi) - int(lo)
        if m <= 0 or t <= 0.0:
            return int(lo)
        if t == 1.0:
            j = int(u * (m + 1))
            if j > m:
                j = m
            return int(lo) + j
        if t > 1.0:
            # reverse the support so the ratio drops below 1
            return int(lo) + m - tg01(u, 1.0 / t, m)
        return int(lo) + tg01(u, t, m)

    return impl


def _make_step_corner(u01, tgeom):
    def impl(nu, kappa, prod, length, seed, domain, sid, rep, out):
        # independent truncated geometrics with ratio prod on the interlacing
        # windows [max(nu_r, kappa_r), min(nu_{r-1}, kappa_{r-1})]
        for r in range(1, length + 1):
            lo = nu[r] if nu[r] > kappa[r] else kappa[r]
            if r == 1:
                hi = UNBOUNDED
            else:
                hi = nu[r - 1] if nu[r - 1] < kappa[r - 1] else kappa[r - 1]
            u = u01(seed, domain, sid, np.uint64(r) + np.uint64(rep) * np.uint64(4294967296), 1)
            out[r] = tgeom(u, prod, lo, hi)

    return impl


def _make_step_diagonal(u01, tgeom):
    def impl(kappa, ac, a_over_c, length, seed, domain, sid, rep, out):
        # odd coordinates carry ratio a*c, even ones a/c, on [kappa_r, kappa_{r-1}]
        for r in range(1, length + 1):
            lo = kappa[r]
            hi = UNBOUNDED if r == 1 else kappa[r - 1]
            t = ac if (r % 2 == 1) else a_over_c
            u = u01(seed, domain, sid, np.uint64(r) + np.uint64(rep) * np.uint64(4294967296), 2)
            out[r] = tgeom(u, t, lo, hi)

    return impl


def _make_run_path(step_corner, step_diagonal):
    def impl(a_par, c_par, heights, marks_n, marks_m, lmax, seed, domain,
             rep0, reps, out_first, out_parts, keep_parts):
        # push-block growth row by row; partitions live on the current staircase
        nmax = heights.shape[0] - 1
        m1 = 0
        for n in range(1, nmax + 1):
            if heights[n] > m1:
                m1 = heights[n]
        nmarks = marks_n.shape[0]
        for r in range(reps):
            rep = rep0 + r
            parts = np.zeros((nmax + 1, lmax + 2), dtype=np.int64)
            scratch = np.zeros(lmax + 2, dtype=np.int64)
            for mm in range(1, m1 + 1):
                length = mm if mm < lmax else lmax
                sid = np.uint64(mm) * np.uint64(1048576) + np.uint64(mm)
                if c_par > 0.0:
                    ac = a_par[mm] * c_par
                    aoc = a_par[mm] / c_par
                    step_diagonal(parts[mm], ac, aoc, length, seed, domain, sid, rep, scratch)
                else:
                    # c = 0: the half-weight forces pi = (k1, k1, k3, k3, ...)
                    for q in range(1, length + 1):
                        scratch[q] = parts[mm, q] if q % 2 == 1 else parts[mm, q - 1]
                for q in range(1, length + 1):
                    parts[mm, q] = scratch[q]
                for p in range(nmarks):
                    if marks_n[p] == mm and marks_m[p] == mm:
                        out_first[r, p] = parts[mm, 1]
                        if keep_parts:
                            for q in range(out_parts.shape[2]):
                                out_parts[r, p, q] = parts[mm, q + 1]
                for nn in range(mm + 1, nmax + 1):
                    if heights[nn] < mm:
                        break
                    length = mm if mm < lmax else lmax
                    prod = a_par[nn] * a_par[mm]
                    sid = np.uint64(nn) * np.uint64(1048576) + np.uint64(mm)
                    step_corner(parts[nn - 1], parts[nn], prod, length, seed, domain, sid, rep, scratch)
                    for q in range(1, length + 1):
                        parts[nn, q] = scratch[q]
                    for p in range(nmarks):
                        if marks_n[p] == nn and marks_m[p] == mm:
                            out_first[r, p] = parts[nn, 1]
                            if keep_parts:
                                for q in range(out_parts.shape[2]):
                                    out_parts[r, p, q] = parts[nn, q + 1]

    return impl


# ---------------------------------------------------------------------------
# backend wiring
# ---------------------------------------------------------------------------

if _HAVE_NUMBA:
    _u01 = njit(cache=True, inline="always")(_u01_numba_src)
    _tg01 = njit(cache=True)(_tgeom_finite01_src)
    _tgeom = njit(cache=True)(_make_tgeom(_tg01))
    _step_corner = njit(cache=True)(_make_step_corner(_u01, _tgeom))
    _step_diagonal = njit(cache=True)(_make_step_diagonal(_u01, _tgeom))
    _lpp_points_serial = njit(cache=True)(_make_lpp_points(_u01))
    _lpp_sym_serial = njit(cache=True)(_make_lpp_symmetric(_u01))
    _run_path_serial = njit(cache=True)(_make_run_path(_step_corner, _step_diagonal))

    @njit(cache=True, parallel=True)
    def _lpp_points_par(model, nmax, mmax, pts_n, pts_m, alpha, a_par, c_par,
                        seed, domain, reps, out):
        nchunk = numba.get_num_threads()
        chunk = (reps + nchunk - 1) // nchunk
        for c in prange(nchunk):
            lo = c * chunk
            hi = min(reps, lo + chunk)
            if hi > lo:
                _lpp_points_serial(model, nmax, mmax, pts_n, pts_m, alpha,
                                   a_par, c_par, seed, domain, lo, hi - lo,
                                   out[lo:hi])

    @njit(cache=True, parallel=True)
    def _lpp_sym_par(nmax, alpha, seed, domain, reps, out):
        nchunk = numba.get_num_threads()
        chunk = (reps + nchunk - 1) // nchunk
        for c in prange(nchunk):
            lo = c * chunk
            hi = min(reps, lo + chunk)
            if hi > lo:
                _lpp_sym_serial(nmax, alpha, seed, domain, lo, hi - lo, out[lo:hi])

    @njit(cache=True, parallel=True)
    def _run_path_par(a_par, c_par, heights, marks_n, marks_m, lmax, seed,
                      domain, reps, out_first, out_parts, keep_parts):
        nchunk = numba.get_num_threads()
        chunk = (reps + nchunk - 1) // nchunk
        for c in prange(nchunk):
            lo = c * chunk
            hi = min(reps, lo + chunk)
            if hi > lo:
                _run_path_serial(a_par, c_par, heights, marks_n, marks_m,
                                 lmax, seed, domain, lo, hi - lo,
                                 out_first[lo:hi], out_parts[lo:hi], keep_parts)
else:
    _u01 = _u01_python
    _tg01 = _tgeom_finite01_src
    _tgeom = _make_tgeom(_tg01)
    _step_corner = _make_step_corner(_u01, _tgeom)
    _step_diagonal = _make_step_diagonal(_u01, _tgeom)
    _lpp_points_serial = _make_lpp_points(_u01)
    _lpp_sym_serial = _make_lpp_symmetric(_u01)
    _run_path_serial = _make_run_path(_step_corner, _step_diagonal)


_DOMAINS = {0: _rng.DOMAIN_LPP_EXP, 1: _rng.DOMAIN_LPP_ROW, 2: _rng.DOMAIN_LPP_GEO}


def _a_array(a_par, nmax):
    a_arr = np.zeros(nmax + 1)
    if np.ndim(a_par):
        vals = np.asarray(a_par, dtype=float)
        if vals.size < nmax:
            raise ValueError("need at least nmax column parameters")
        a_arr[1:] = vals[:nmax]
    else:
        a_arr[1:] = float(a_par)
    return a_arr


def lpp_points(model: int, pts, alpha: float, a_par, c_par: float,
               seed: int, reps: int) -> np.ndarray:
    """Sample ``reps`` replicas of the LPP times at the given (n, m) points.

    Returns shape (reps, len(pts)).  Points must satisfy n >= m >= 1.
    """
    pts_n = np.asarray([p[0] for p in pts], dtype=np.int64)
    pts_m = np.asarray([p[1] for p in pts], dtype=np.int64)
    nmax = int(pts_n.max())
    mmax = int(pts_m.max())
    domain = _DOMAINS[model]
    a_arr = _a_array(a_par, nmax)
    out = np.zeros((reps, len(pts)))
    if _HAVE_NUMBA:
        _lpp_points_par(model, nmax, mmax, pts_n, pts_m, float(alpha), a_arr,
                        float(c_par), np.uint64(seed), np.uint64(domain), reps, out)
        return out
    # vectorized over replicas; the site loop stays in python
    rep_ids = np.arange(reps, dtype=np.uint64)
    row = np.zeros((reps, nmax + 1))
    for mm in range(1, mmax + 1):
        for nn in range(mm, nmax + 1):
            u = _rng.uniform_open_closed(np.uint64(seed), domain, nn, mm, rep_ids)
            if model == 2:
                q = c_par * a_arr[nn] if nn == mm else a_arr[nn] * a_arr[mm]
                w = np.floor(np.log(u) / math.log(q)) if q > 0 else np.zeros(reps)
            else:
                diag_rate = (model == 0 and nn == mm) or (model == 1 and mm == 1)
                w = -np.log(u) / (alpha if diag_rate else 1.0)
            if nn == mm:
                row[:, nn] = w + row[:, nn]
            else:
                row[:, nn] = w + np.maximum(row[:, nn - 1], row[:, nn])
        for p in range(len(pts)):
            if pts_m[p] == mm:
                out[:, p] = row[:, pts_n[p]]
    return out


def lpp_table(model: int, nmax: int, alpha: float, a_par, c_par: float,
              seed: int, rep: int = 0) -> np.ndarray:
    """Full triangular table of LPP times (entries n >= m >= 1) for one replica."""
    domain = _DOMAINS[model]
    a_arr = _a_array(a_par, nmax)
    pts = [(nn, mm) for mm in range(1, nmax + 1) for nn in range(mm, nmax + 1)]
    pts_n = np.asarray([p[0] for p in pts], dtype=np.int64)
    pts_m = np.asarray([p[1] for p in pts], dtype=np.int64)
    out = np.zeros((1, len(pts)))
    _lpp_points_serial(model, nmax, nmax, pts_n, pts_m, float(alpha), a_arr,
                       float(c_par), np.uint64(seed), np.uint64(domain),
                       rep, 1, out)
    table = np.zeros((nmax + 1, nmax + 1))
    for p, (nn, mm) in enumerate(pts):
        table[nn, mm] = out[0, p]
    return table


def lpp_symmetric_quadrant(nmax: int, alpha: float, seed: int, reps: int) -> np.ndarray:
    """LPP time to (nmax, nmax) in the symmetrized full-quadrant environment."""
    out = np.zeros(reps)
    if _HAVE_NUMBA:
        _lpp_sym_par(nmax, float(alpha), np.uint64(seed),
                     np.uint64(_rng.DOMAIN_LPP_EXP), reps, out)
    else:
        _lpp_sym_serial(nmax, float(alpha), np.uint64(seed),
                        np.uint64(_rng.DOMAIN_LPP_EXP), 0, reps, out)
    return out


def run_path_batch(a_par, c_par, heights, marks, lmax, seed, reps,
                   keep_parts=False):
    """Batched push-block sampling along a zig-zag path.

    Returns (first_coords, partitions): shapes (reps, nmarks) and, when
    ``keep_parts``, (reps, nmarks, lmax).
    """
    heights = np.asarray(heights, dtype=np.int64)
    marks_n = np.asarray([m[0] for m in marks], dtype=np.int64)
    marks_m = np.asarray([m[1] for m in marks], dtype=np.int64)
    nmax = heights.shape[0] - 1
    a_arr = _a_array(a_par, nmax)
    out_first = np.zeros((reps, len(marks)), dtype=np.int64)
    out_parts = np.zeros((reps, len(marks), lmax if keep_parts else 1), dtype=np.int64)
    domain = np.uint64(_rng.DOMAIN_SCHUR)
    if _HAVE_NUMBA:
        _run_path_par(a_arr, float(c_par), heights, marks_n, marks_m, lmax,
                      np.uint64(seed), domain, reps, out_first, out_parts,
                      keep_parts)
    else:
        _run_path_serial(a_arr, float(c_par), heights, marks_n, marks_m, lmax,
                         np.uint64(seed), domain, 0, reps, out_first,
                         out_parts, keep_parts)
    return out_first, (out_parts if keep_parts else None)


def tgeom_from_u(u: float, ratio: float, lo: int, hi) -> int:
    """Truncated geometric draw (hi=None for an unbounded top coordinate)."""
    hi_val = UNBOUNDED if hi is None else np.int64(hi)
    return int(_tgeom(float(u), float(ratio), np.int64(lo), hi_val))
