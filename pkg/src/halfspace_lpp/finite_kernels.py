"""Finite-size correlation kernels for half-space LPP.

``ExpKernel`` evaluates the exponential-weight kernel along a space-like
path, with the three diagonal-rate regimes (above, at and below the critical
rate 1/2) carrying their distinct residue blocks.  ``GeoKernel`` evaluates
the geometric-weight kernel on the integer lattice with the deformed
(|zw| > 1) contour system and explicit residue corrections per boundary
regime.  ``RescaledExpKernel`` is the one-point kernel under the fluctuation
scalings whose Fredholm Pfaffians converge to the GSE / GOE / GUE / Gaussian
laws.

Numerical strategy: every double integral is precomputed as an
(x, y)-independent core over graded ray or circle nodes and evaluated on
point grids by matrix products.  The exponential kernel's residue blocks
decay only through exp(-|x-y| z), which truncated rays cannot resolve for
nearby points; those blocks are instead evaluated exactly as residue sums
over small circles enclosing the poles right of the contour.
"""

import math
from dataclasses import dataclass

import numpy as np

from .contours import (CircleContour, DifferenceKernel, DoubleContourKernel,
                       RayContour, SingleContourKernel)
from .errors import ContourError, DomainError
from .limit_kernels import KernelValue, MatrixKernel, _real

_PI3 = np.pi / 3.0
_PI4 = np.pi / 4.0
_PI6 = np.pi / 6.0

SUPERCRITICAL = "supercritical"
CRITICAL = "critical"
SUBCRITICAL = "subcritical"
_ALPHA_SNAP = 1e-6


@dataclass(frozen=True)
class SpaceLikePath:
    """Strictly increasing ns, strictly decreasing ms, with n_i >= m_i."""

    ns: tuple
    ms: tuple

    def __post_init__(self):
        ns = tuple(int(n) for n in np.atleast_1d(self.ns))
        ms = tuple(int(m) for m in np.atleast_1d(self.ms))
        object.__setattr__(self, "ns", ns)
        object.__setattr__(self, "ms", ms)
        if len(ns) != len(ms) or not ns:
            raise DomainError("ns and ms must be nonempty and equally long")
        if any(n <= 0 for n in ns) or any(m <= 0 for m in ms):
            raise DomainError("path coordinates must be positive")
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise DomainError("ns must be strictly increasing")
        if any(b >= a for a, b in zip(ms, ms[1:])):
            raise DomainError("ms must be strictly decreasing")
        if any(n < m for n, m in zip(ns, ms)):
            raise DomainError("need n_i >= m_i along the path")

    @property
    def k(self):
        return len(self.ns)


@dataclass(frozen=True)
class GeomParams:
    """Column parameters in (0,1) plus the boundary parameter c, c*a_i < 1."""

    a: tuple
    c: float

    def __post_init__(self):
        a = tuple(float(v) for v in np.atleast_1d(self.a))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "c", float(self.c))
        if not a or any(not (0.0 < v < 1.0) for v in a):
            raise DomainError("column parameters must lie in (0, 1)")
        if self.c <= 0:
            raise DomainError("boundary parameter must be positive")
        if any(self.c * v >= 1.0 for v in a):
            raise DomainError("need c * a_i < 1 for all i")

    @property
    def amax(self):
        return max(self.a)

    @property
    def regime(self):
        if self.c < 1.0:
            return SUBCRITICAL
        if self.c > 1.0:
            return SUPERCRITICAL
        return CRITICAL

    def a_at(self, ell):
        if ell > len(self.a):
            raise DomainError(f"need at least {ell} column parameters")
        return self.a[ell - 1]


@dataclass(frozen=True)
class AlphaRegime:
    """Diagonal rate plus an explicit regime tag (criticality is the
    caller's statement, not a float comparison)."""

    alpha: float
    regime: str

    def __post_init__(self):
        if self.alpha <= 0:
            raise DomainError("diagonal rate must be positive")
        if self.regime not in (SUPERCRITICAL, CRITICAL, SUBCRITICAL):
            raise DomainError(f"unknown regime {self.regime!r}")
        if self.regime == CRITICAL and abs(self.alpha - 0.5) > _ALPHA_SNAP:
            raise DomainError("critical regime requires alpha = 1/2")
        if self.regime == SUPERCRITICAL and self.alpha <= 0.5:
            raise DomainError("supercritical regime requires alpha > 1/2")
        if self.regime == SUBCRITICAL and self.alpha >= 0.5:
            raise DomainError("subcritical regime requires alpha < 1/2")

    @classmethod
    def from_alpha(cls, alpha, regime=None):
        alpha = float(alpha)
        if regime is not None:
            return cls(alpha, regime)
        if abs(alpha - 0.5) < _ALPHA_SNAP and alpha != 0.5:
            raise DomainError(
                "alpha within 1e-6 of 1/2: tag the regime explicitly, the "
                "formula families are not interchangeable near the transition")
        if alpha == 0.5:
            return cls(alpha, CRITICAL)
        return cls(alpha, SUPERCRITICAL if alpha > 0.5 else SUBCRITICAL)


# ---------------------------------------------------------------------------
# residue evaluation on small circles
# ---------------------------------------------------------------------------


def _pole_circles(poles, excluded, base=0.125):
    """Disjoint circles enclosing ``poles`` and no ``excluded`` point."""
    poles = sorted(set(float(p) for p in poles))
    if not poles:
        return []
    groups = [[poles[0]]]
    for p in poles[1:]:
        if p - groups[-1][-1] < 4.0 * base:
            groups[-1].append(p)
        else:
            groups.append([p])
    out = []
    for g in groups:
        center = 0.5 * (g[0] + g[-1])
        span = 0.5 * (g[-1] - g[0])
        clearance = min((abs(e - center) for e in excluded), default=np.inf)
        radius = span + min(base, 0.45 * (clearance - span))
        if radius <= span or clearance <= radius:
            raise ContourError(
                f"cannot separate poles {g} from excluded points {excluded}")
        out.append((center, radius))
    return out


class _ResidueSum:
    """sum over enclosed poles of Res[g(z) exp(-c z)], batched over c.

    The trapezoid rule on each circle is exact to machine precision for the
    analytic integrand, whatever the pole orders.
    """

    def __init__(self, g, poles, excluded, nodes=128):
        zs, cores = [], []
        for center, radius in _pole_circles(poles, excluded):
            z, w = CircleContour(radius, nodes, center=center).nodes_weights()
            zs.append(z)
            cores.append(g(z) * w)
        self.z = np.concatenate(zs)
        self.core = np.concatenate(cores)

    def eval_c(self, c):
        """Values for an array of exponents c (in exp(-c z))."""
        c = np.atleast_1d(np.asarray(c, dtype=float))
        return np.exp(-np.multiply.outer(c, self.z)) @ self.core


# ---------------------------------------------------------------------------
# exponential-weight kernel
# ---------------------------------------------------------------------------


def _exp_apexes(alpha: float, scale: float):
    """Contour apexes (a11, (a_z, a_w), b22) for the double integrals.

    Inequalities honored: 0 < a_z < 1/2, a_z + a_w > 0, a_w < (2a-1)/2 for
    the 12 block; 0 < b < (2a-1)/2 above the critical rate, b > 0 otherwise.
    ``scale`` shrinks apexes toward the saddle at 0 for long paths, a
    Cauchy-equivalent choice that keeps integrand amplitudes O(1).
    """
    margin = min(0.125, alpha / 4.0)
    a11 = 0.25 * scale
    a_w = min(0.25 * scale, (2.0 * alpha - 1.0) / 2.0 - margin)
    a_z = max(0.25 * scale, margin / 2.0 - a_w)
    a_z = min(a_z, 0.5 - margin / 4.0)
    if not (0.0 < a_z < 0.5 and a_z + a_w > 0.0
            and a_w < (2.0 * alpha - 1.0) / 2.0):
        raise ContourError(
            f"no admissible 12-block apexes for alpha={alpha}: need "
            "0 < a_z < 1/2, a_z + a_w > 0, a_w < (2 alpha - 1)/2")
    if alpha > 0.5:
        b22 = min((2.0 * alpha - 1.0) / 4.0, 0.25 * scale)
    else:
        b22 = 0.25 * scale
    return a11, (a_z, a_w), b22


class ExpKernel(MatrixKernel):
    """Exponential half-space LPP kernel along a space-like path."""

    def __init__(self, path: SpaceLikePath, alpha, x_min: float = 0.5,
                 nodes_per_panel: int = 16):
        if not isinstance(alpha, AlphaRegime):
            alpha = AlphaRegime.from_alpha(alpha)
        self.path = path
        self.alpha_regime = alpha
        self.alpha = alpha.alpha
        self.nindex = path.k
        nmax = max(path.ns)
        scale = min(1.0, (8.0 / nmax) ** (1.0 / 3.0))
        self._apex11, self._apex12, self._apex22 = _exp_apexes(self.alpha, scale)
        if x_min <= 0:
            raise DomainError("the exponential kernel lives on x > 0")
        length = float(np.clip(60.0 / x_min, 12.0, 1500.0))
        grade = min(0.02, 0.1 / (1.0 + nmax))
        self._ray_opts = dict(truncation_length=length,
                              nodes_per_ray=nodes_per_panel, grade_to=grade)
        self._cache = {}

    def _ray(self, apex):
        return RayContour(complex(apex), _PI3, **self._ray_opts)

    def _nm(self, i):
        return self.path.ns[i - 1], self.path.ms[i - 1]

    def _core(self, name, i, j):
        key = (name, i, j)
        if key in self._cache:
            return self._cache[key]
        al = self.alpha
        ni, mi = self._nm(i)
        nj, mj = self._nm(j)
        t = 2.0 * al - 1.0
        if name == "i11":
            c = self._ray(self._apex11)
            core = DoubleContourKernel(
                lambda z, w: (z - w) / (4.0 * z * w * (z + w))
                * (1 + 2 * z) ** ni * (1 + 2 * w) ** nj
                / ((1 - 2 * z) ** mi * (1 - 2 * w) ** mj)
                * (2 * z + t) * (2 * w + t), c, c)
        elif name == "i12":
            a_z, a_w = self._apex12
            core = DoubleContourKernel(
                lambda z, w: (z - w) / (2.0 * z * (z + w))
                * (1 + 2 * z) ** ni / ((1 - 2 * w) ** nj)
                * (1 + 2 * w) ** mj / ((1 - 2 * z) ** mi)
                * (t + 2 * z) / (t - 2 * w),
                self._ray(a_z), self._ray(a_w))
        elif name == "i22":
            c = self._ray(self._apex22)
            core = DoubleContourKernel(
                lambda z, w: (z - w) / (z + w)
                * (1 + 2 * z) ** mi * (1 + 2 * w) ** mj
                / ((1 - 2 * z) ** ni * (1 - 2 * w) ** nj)
                / ((t - 2 * z) * (t - 2 * w)), c, c)
        elif name == "r12":
            # closing right leaves the pole at 1/2 (order m_i - m_j)
            core = _ResidueSum(
                lambda z: (1 + 2 * z) ** (ni - nj) * (1 - 2 * z) ** (mj - mi),
                poles=[0.5], excluded=[-0.5])
        elif name == "r22":
            # supercritical block: right poles at (2a-1)/2 and, off the
            # diagonal, at 1/2
            poles = [t / 2.0]
            if ni - mj > 0:
                poles.append(0.5)
            core = _ResidueSum(
                lambda z: (1 + 2 * z) ** mi * (1 - 2 * z) ** mj
                / ((1 - 2 * z) ** ni * (1 + 2 * z) ** nj)
                * 2.0 * z / ((t - 2 * z) * (t + 2 * z)),
                poles=poles, excluded=[-0.5, -t / 2.0])
        elif name == "rhat3":
            # subcritical two-sided term; right poles at 1/2 and (1-2a)/2
            poles = [-t / 2.0]
            if ni - mj > 0:
                poles.append(0.5)
            core = _ResidueSum(
                lambda z: (1 + 2 * z) ** mi * (1 - 2 * z) ** mj
                / ((1 - 2 * z) ** ni * (1 + 2 * z) ** nj)
                * 2.0 * z / ((t - 2 * z) * (t + 2 * z)),
                poles=poles, excluded=[-0.5, t / 2.0])
        elif name == "rhat1":
            # subcritical single integral in the larger coordinate
            const = (2 * al) ** mj / (2.0 - 2 * al) ** nj
            core = _ResidueSum(
                lambda z: (1 + 2 * z) ** mi / (1 - 2 * z) ** ni
                * const / (t + 2 * z),
                poles=[-t / 2.0, 0.5], excluded=[-0.5, t / 2.0])
        elif name == "rbar1":
            # critical single integral; 0 stays left of the contour
            core = _ResidueSum(
                lambda z: (1 + 2 * z) ** mi / ((1 - 2 * z) ** ni * 4.0 * z),
                poles=[0.5], excluded=[0.0, -0.5])
        elif name == "rbar3":
            core = _ResidueSum(
                lambda z: (1 + 2 * z) ** mi * (1 - 2 * z) ** mj
                / ((1 - 2 * z) ** ni * (1 + 2 * z) ** nj) / (2.0 * z),
                poles=[0.5], excluded=[0.0, -0.5])
        else:  # pragma: no cover
            raise KeyError(name)
        self._cache[key] = core
        return core

    def _on_difference(self, name, i, j, xs, ys):
        """Residue-sum core evaluated at c = x - y over the grid."""
        core = self._core(name, i, j)
        c = np.subtract.outer(xs, ys).ravel()
        vals = np.exp(-np.multiply.outer(c, core.z)) @ core.core
        return vals.reshape(len(xs), len(ys))

    def _r12(self, i, xs, j, ys):
        if i >= j:
            return np.zeros((len(xs), len(ys)))
        # depends on |x - y| only (symmetric in the two coordinates)
        core = self._core("r12", i, j)
        c = np.abs(np.subtract.outer(xs, ys)).ravel()
        vals = np.exp(-np.multiply.outer(c, core.z)) @ core.core
        return _real(vals, "exp r12").reshape(len(xs), len(ys))

    def _r22_branch(self, i, xs, j, ys):
        """Displayed x > y branch of the regime-dependent residue block."""
        regime = self.alpha_regime.regime
        if regime == SUPERCRITICAL:
            return _real(self._on_difference("r22", i, j, xs, ys), "exp r22")
        if regime == SUBCRITICAL:
            theta = (1.0 - 2.0 * self.alpha) / 2.0
            out = self._on_difference("rhat3", i, j, xs, ys)
            s_i = self._core("rhat1", i, j).eval_c(xs)
            s_j = self._core("rhat1", j, i).eval_c(ys)
            out = out + 0.5 * np.multiply.outer(s_i, np.exp(theta * ys))
            out = out - 0.5 * np.multiply.outer(np.exp(theta * xs), s_j)
            return _real(out, "exp r22")
        # critical
        f_i = self._core("rbar1", i, i).eval_c(xs)
        f_j = self._core("rbar1", j, j).eval_c(ys)
        third = -self._on_difference("rbar3", i, j, xs, ys)
        out = (np.multiply.outer(f_i, np.ones_like(ys))
               - np.multiply.outer(np.ones_like(xs), f_j) + third - 0.25)
        return _real(out, "exp r22")

    def _k12(self, i, xs, j, ys):
        out = _real(self._core("i12", i, j).eval(xs, ys), "exp k12")
        if i < j:
            out = out + self._r12(i, xs, j, ys)
        return out

    def _k22(self, i, xs, j, ys):
        i22 = _real(self._core("i22", i, j).eval(xs, ys), "exp k22")
        plus = self._r22_branch(i, xs, j, ys)
        minus = -self._r22_branch(j, ys, i, xs).T
        s = np.subtract.outer(xs, ys)
        r22 = np.where(s > 0, plus, np.where(s < 0, minus, 0.5 * (plus + minus)))
        return i22 + r22

    def block(self, i, xs, j, ys):
        xs = np.atleast_1d(np.asarray(xs, float))
        ys = np.atleast_1d(np.asarray(ys, float))
        b11 = _real(self._core("i11", i, j).eval(xs, ys), "exp k11")
        b12 = self._k12(i, xs, j, ys)
        b21 = -self._k12(j, ys, i, xs).T
        b22 = self._k22(i, xs, j, ys)
        return b11, b12, b21, b22


def k_exp(i, x, j, y, path: SpaceLikePath, alpha) -> KernelValue:
    """Pointwise exponential-kernel evaluation."""
    kern = ExpKernel(path, alpha, x_min=min(x, y))
    return kern.value(x, y, i, j)


# ---------------------------------------------------------------------------
# geometric-weight kernel
# ---------------------------------------------------------------------------


def _radius_between(lo, hi, what):
    if not lo < hi:
        raise ContourError(f"radius selection failed: need {lo} < r < {hi} ({what})")
    return 0.5 * (lo + hi)


class GeoKernel(MatrixKernel):
    """Geometric half-space LPP kernel on the integer lattice.

    Only the deformed contour system is implemented: all double contours
    satisfy |zw| > 1, and the residues crossed while deforming appear as
    explicit extra terms split by the boundary-parameter regime.
    """

    def __init__(self, path: SpaceLikePath, params: GeomParams,
                 circle_nodes: int = 256):
        self.path = path
        self.params = params
        self.nindex = path.k
        if max(path.ns) > len(params.a):
            raise DomainError("need a column parameter per lattice column")
        self._nodes = circle_nodes
        self._cache = {}
        amax = params.amax
        if 1.0 / amax <= 1.0 + 1e-9:
            raise ContourError(
                f"radius selection failed: need 1 < r < 1/max(a) = {1 / amax}")

    def _nm(self, i):
        return self.path.ns[i - 1], self.path.ms[i - 1]

    def _h(self, kind, i, j, z, w):
        """The product prefactors; kind selects which exponents go to the
        numerator factor (x - a)/x versus the denominator 1/(1 - a x)."""
        p = self.params
        ni, mi = self._nm(i)
        nj, mj = self._nm(j)
        plan = {"h11": (ni, mi, nj, mj),
                "h12": (ni, mi, mj, nj),
                "h22": (mi, ni, mj, nj)}[kind]
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        out = np.ones(np.broadcast(z, w).shape, dtype=complex)
        for ell in range(1, plan[0] + 1):
            out = out * (z - p.a_at(ell)) / z
        for ell in range(1, plan[1] + 1):
            out = out / (1.0 - p.a_at(ell) * z)
        for ell in range(1, plan[2] + 1):
            out = out * (w - p.a_at(ell)) / w
        for ell in range(1, plan[3] + 1):
            out = out / (1.0 - p.a_at(ell) * w)
        return out

    def _double(self, F, rz, rw):
        cz, wz = CircleContour(rz, self._nodes).nodes_weights()
        cw, ww = CircleContour(rw, self._nodes).nodes_weights()
        core = F(cz[:, None], cw[None, :]) * wz[:, None] * ww[None, :]
        return np.log(cz), np.log(cw), core

    def _single(self, g, radius):
        z, w = CircleContour(radius, self._nodes).nodes_weights()
        return np.log(z), g(z) * w

    @staticmethod
    def _eval_double(lz, lw, core, us, vs):
        eu = np.exp(-np.multiply.outer(np.asarray(us, float), lz))
        ev = np.exp(-np.multiply.outer(np.asarray(vs, float), lw))
        return eu @ core @ ev.T

    @staticmethod
    def _eval_single(lz, core, us):
        return np.exp(-np.multiply.outer(np.asarray(us, float), lz)) @ core

    @staticmethod
    def _eval_diff(lz, core, us, vs):
        # sum core * z^(v - u)
        eu = np.exp(-np.multiply.outer(np.asarray(us, float), lz))
        ev = np.exp(np.multiply.outer(np.asarray(vs, float), lz))
        return (eu * core) @ ev.T

    def _core(self, name, i, j):
        key = (name, i, j)
        if key in self._cache:
            return self._cache[key]
        p = self.params
        c = p.c
        inv_a = 1.0 / p.amax
        r0 = _radius_between(1.0, inv_a, "1 < r < 1/max(a)")
        r_band = (_radius_between(1.0, min(1.0 / c, inv_a), "1 < r < min(1/c, 1/max a)")
                  if c < 1.0 else r0)
        if name == "k11":
            out = self._double(
                lambda z, w: (z - w) * self._h("h11", i, j, z, w)
                * (z - c) * (w - c)
                / ((z * z - 1) * (w * w - 1) * (z * w - 1) * z * w),
                r0, r0)
        elif name == "i12":
            if i >= j:
                u_w = min(1.0 / c, inv_a)
                r_w = max(0.9 * u_w, 0.5 * (1.0 / inv_a + u_w))
                if 1.0 / r_w >= inv_a:
                    raise ContourError(
                        "radius selection failed: |zw| > 1 needs 1/r_w < "
                        f"1/max(a) but r_w < min(1/c, 1/max a) = {u_w}")
                r_z = _radius_between(max(1.0, 1.0 / r_w), inv_a, "|zw| > 1")
            else:
                r_z = r_w = r_band
            out = self._double(
                lambda z, w: (z - w) * self._h("h12", i, j, z, w) * (z - c)
                / ((z * z - 1) * w * (z * w - 1) * z * (1 - c * w)),
                r_z, r_w)
        elif name == "i22":
            out = self._double(
                lambda z, w: (z - w) * self._h("h22", i, j, z, w)
                / (z * w * (z * w - 1) * (1 - c * z) * (1 - c * w)),
                r_band, r_band)
        elif name == "r12_diag":
            # residue at w = 1/z, shared by all regimes; carries z^(v-u-1)
            out = self._single(
                lambda z: -self._h("h12", i, j, z, 1.0 / z) / z, r_band)
        elif name == "r12_extra":
            if c > 1.0:
                out = self._single(
                    lambda z: -(1 - c * z) * self._h("h12", i, j, z, 1.0 / c)
                    / ((z * z - 1) * z), r0)
            else:  # c == 1
                out = self._single(
                    lambda z: self._h("h12", i, j, z, 1.0) / (z * (1.0 + z)), r0)
        elif name == "r22_diag":
            # the w = 1/z residue of the 22 entry; carries z^(v-u)
            if c > 1.0:
                rr = _radius_between(1.0 / c, min(c, inv_a), "1/c < r < c")
                g = lambda z: ((1 - z * z) / (z * z)
                               * self._h("h22", i, j, z, 1.0 / z)
                               / ((1 - c * z) * (1 - c / z)))
            elif c < 1.0:
                rr = r_band
                g = lambda z: ((1 - z * z) / (z * z)
                               * self._h("h22", i, j, z, 1.0 / z)
                               / ((1 - c * z) * (1 - c / z)))
            else:
                rr = r0
                g = lambda z: (-(1.0 + z) / (z * z * (1.0 - z))
                               * self._h("h22", i, j, z, 1.0 / z))
            out = self._single(g, rr)
        elif name == "r22_single":
            # the w = 1/c (or w = 1) residue; carries z^-(u+1)
            if c > 1.0:
                rr = _radius_between(c, inv_a, "c < r < 1/max(a)")
                out = self._single(
                    lambda z: self._h("h22", i, j, z, 1.0 / c) / (z - c), rr)
            else:  # c == 1
                out = self._single(
                    lambda z: self._h("h22", i, j, z, 1.0) / (z - 1.0), r0)
        else:  # pragma: no cover
            raise KeyError(name)
        self._cache[key] = out
        return out

    def _k12(self, i, us, j, vs):
        us = np.atleast_1d(np.asarray(us, float))
        vs = np.atleast_1d(np.asarray(vs, float))
        lz, lw, core = self._core("i12", i, j)
        out = _real(self._eval_double(lz, lw, core, us, vs), "geo k12")
        if i < j:
            c = self.params.c
            lz1, core1 = self._core("r12_diag", i, j)
            out = out + _real(self._eval_diff(lz1, core1, us, vs), "geo r12")
            if c >= 1.0:
                lz2, core2 = self._core("r12_extra", i, j)
                sing = _real(self._eval_single(lz2, core2, us), "geo r12")
                cv = np.power(c, vs) if c > 1.0 else np.ones_like(vs)
                out = out + np.multiply.outer(sing, cv)
        return out

    def _k22(self, i, us, j, vs):
        us = np.atleast_1d(np.asarray(us, float))
        vs = np.atleast_1d(np.asarray(vs, float))
        lz, lw, core = self._core("i22", i, j)
        out = _real(self._eval_double(lz, lw, core, us, vs), "geo k22")
        c = self.params.c
        lzd, cored = self._core("r22_diag", i, j)
        out = out + _real(self._eval_diff(lzd, cored, us, vs), "geo r22")
        if c > 1.0:
            lzs, cores = self._core("r22_single", i, j)
            a_u = _real(self._eval_single(lzs, cores, us + 1.0), "geo r22")
            lzs2, cores2 = self._core("r22_single", j, i)
            a_v = _real(self._eval_single(lzs2, cores2, vs + 1.0), "geo r22")
            out = out - np.multiply.outer(a_u, np.power(c, vs))
            out = out + np.multiply.outer(np.power(c, us), a_v)
            h_a = complex(self._h("h22", i, j, 1.0 / c, c))
            h_b = complex(self._h("h22", i, j, c, 1.0 / c))
            duv = np.subtract.outer(us, vs)
            out = out - np.power(c, duv - 1.0) * h_a.real
            out = out + np.power(c, -duv - 1.0) * h_b.real
        elif c == 1.0:
            lzs, cores = self._core("r22_single", i, j)
            a_u = _real(self._eval_single(lzs, cores, us + 1.0), "geo r22")
            lzs2, cores2 = self._core("r22_single", j, i)
            a_v = _real(self._eval_single(lzs2, cores2, vs + 1.0), "geo r22")
            out = out - np.multiply.outer(a_u, np.ones_like(vs))
            out = out + np.multiply.outer(np.ones_like(us), a_v)
            out = out - complex(self._h("h22", i, j, 1.0, 1.0)).real
        return out

    def block(self, i, us, j, vs):
        us = np.atleast_1d(np.asarray(us, float))
        vs = np.atleast_1d(np.asarray(vs, float))
        lz, lw, core = self._core("k11", i, j)
        b11 = _real(self._eval_double(lz, lw, core, us, vs), "geo k11")
        b12 = self._k12(i, us, j, vs)
        b21 = -self._k12(j, vs, i, us).T
        b22 = self._k22(i, us, j, vs)
        return b11, b12, b21, b22


def k_geo(i, u, j, v, path: SpaceLikePath, params: GeomParams) -> KernelValue:
    return GeoKernel(path, params).value(u, v, i, j)


def geo_tail_horizon(params: GeomParams, g_max: int, tol: float = 1e-12) -> int:
    """Lattice truncation point beyond which the kernel tail is below tol."""
    q = max(params.amax ** 2, params.c * params.amax)
    extra = int(math.ceil(math.log(tol) / math.log(q))) + 10
    return int(g_max) + max(extra, 20)


# ---------------------------------------------------------------------------
# rescaled diagonal kernels
# ---------------------------------------------------------------------------


def scaling_constants(regime: str, alpha: float = None, kappa: float = None):
    """Centering and scale constants of the fluctuation limits.

    Returns center (coefficient of n), scale (coefficient of n^power),
    the saddle location theta, and the fluctuation power.
    """
    if regime in ("gse", "goe"):
        return {"center": 4.0, "scale": 2.0 ** (4.0 / 3.0), "theta": 0.0,
                "power": 1.0 / 3.0}
    if regime == "gue":
        if kappa is None or not 0.0 < kappa < 1.0:
            raise DomainError("the off-diagonal regime needs kappa in (0, 1)")
        sk = math.sqrt(kappa)
        theta = (1.0 - sk) / (2.0 * (1.0 + sk))
        h = 4.0 / (1.0 + 2.0 * theta) ** 2
        sigma = (8.0 / (1.0 + 2.0 * theta) ** 3
                 + 8.0 * kappa / (1.0 - 2.0 * theta) ** 3) ** (1.0 / 3.0)
        return {"center": h, "scale": sigma, "theta": theta, "power": 1.0 / 3.0}
    if regime == "gaussian":
        if alpha is None or not 0.0 < alpha < 0.5:
            raise DomainError("the Gaussian regime needs alpha in (0, 1/2)")
        h = 1.0 / (alpha * (1.0 - alpha))
        sigma = math.sqrt(1.0 - 2.0 * alpha) / (alpha * (1.0 - alpha))
        return {"center": h, "scale": sigma,
                "theta": (1.0 - 2.0 * alpha) / 2.0, "power": 0.5}
    raise DomainError(f"unknown regime scaling {regime!r}")


class RescaledExpKernel(MatrixKernel):
    """Diagonal-point exponential kernel under the fluctuation scaling.

    Its Fredholm Pfaffian on (x, infinity) equals
    P((H - center*n) / (scale * n^power) <= x) exactly at every n.  All
    n-dependent exponentials are folded into the contour cores relative to
    the saddle, and entries are conjugated by a determinant-one diagonal
    factor (Pfaffian-preserving) so they stay O(1).
    """

    def __init__(self, n: int, alpha: float, regime: str = "gse",
                 kappa: float = None, nodes_per_panel: int = 16,
                 x_min: float = -6.0):
        if n < 1:
            raise DomainError("n must be a positive integer")
        self.n = int(n)
        self.alpha = float(alpha)
        self.regime = regime
        if regime == "gue":
            if kappa is None:
                raise DomainError("gue scaling needs kappa")
            self.m = int(round(kappa * n))
            kappa = self.m / self.n  # lattice coordinate must be an integer
        else:
            self.m = self.n
        self.kappa = kappa if kappa is not None else 1.0
        self.consts = scaling_constants(regime, alpha=alpha, kappa=kappa)
        if regime == "gse" and not alpha > 0.5:
            raise DomainError("GSE scaling requires alpha > 1/2")
        if regime == "goe" and abs(alpha - 0.5) > _ALPHA_SNAP:
            raise DomainError("GOE scaling requires alpha = 1/2")
        if regime == "gue" and not alpha > 0.5:
            raise DomainError("only alpha > 1/2 is supported off-diagonal")
        if regime == "gaussian" and not 0.0 < alpha < 0.5:
            raise DomainError("Gaussian scaling requires alpha < 1/2")
        self._per_panel = nodes_per_panel
        self._x_min = x_min
        self._cache = {}

    def _f(self, z):
        h = self.consts["center"]
        return -h * z + np.log(1 + 2 * z) - self.kappa * np.log(1 - 2 * z)

    def _g(self, z):
        return -self._f(-z)

    @property
    def nu(self):
        """Fluctuation scale multiplying the points in all exponents."""
        return self.consts["scale"] * self.n ** self.consts["power"]

    def _ray_n(self, apex, angle):
        feat = self.n ** (-self.consts["power"])
        length = feat * (5.0 + 2.0 * math.sqrt(max(0.0, 1.0 - self._x_min)))
        length = min(length, 6.0)
        return RayContour(complex(apex), angle, truncation_length=length,
                          nodes_per_ray=self._per_panel,
                          grade_to=length / 512.0)

    def _build(self, name):
        if name in self._cache:
            return self._cache[name]
        n, al, nu = self.n, self.alpha, self.nu
        t = 2.0 * al - 1.0
        reg = self.regime
        rho = min(0.25, 0.5 * self.n ** (-self.consts["power"]))
        theta = self.consts["theta"]
        if reg in ("gse", "goe"):
            cz = self._ray_n(rho, _PI3)
            en = lambda z: np.exp(n * self._f(z))
            if name == "i11":
                if reg == "gse":
                    pref = lambda z, w: (2 * z + t) * (2 * w + t) / (t * t * 4 * z * w)
                else:
                    pref = lambda z, w: nu * nu * np.ones_like(z * w)
                core = DoubleContourKernel(
                    lambda z, w: (z - w) / (z + w) * pref(z, w) * en(z) * en(w),
                    cz, cz, zx=nu * cz.nodes()[0], wy=nu * cz.nodes()[0])
            elif name == "i12":
                a_w = min(rho, t / 4.0) if al > 0.5 else -rho / 2.0
                cw = self._ray_n(a_w, _PI3)
                core = DoubleContourKernel(
                    lambda z, w: nu * (z - w) / (2 * z * (z + w))
                    * (t + 2 * z) / (t - 2 * w) * en(z) * en(w),
                    cz, cw, zx=nu * cz.nodes()[0], wy=nu * cw.nodes()[0])
            elif name == "i22":
                b = min(rho, t / 4.0) if al > 0.5 else rho
                cb = self._ray_n(b, _PI3)
                if reg == "gse":
                    pref = lambda z, w: nu * nu * t * t / ((t - 2 * z) * (t - 2 * w))
                else:
                    pref = lambda z, w: 1.0 / (4 * z * w)
                core = DoubleContourKernel(
                    lambda z, w: (z - w) / (z + w) * pref(z, w) * en(z) * en(w),
                    cb, cb, zx=nu * cb.nodes()[0], wy=nu * cb.nodes()[0])
            elif name == "goe_tail":
                core = SingleContourKernel(lambda z: en(z) / z, cz,
                                           zx=nu * cz.nodes()[0])
            else:  # pragma: no cover
                raise KeyError(name)
        elif reg == "gue":
            delta = min(0.125, (t / 2.0 + theta) / 2.0)
            f0 = complex(self._f(theta)).real
            g0 = complex(self._g(-theta)).real
            if name == "i11":
                c = self._ray_n(theta, _PI4)
                core = DoubleContourKernel(
                    lambda z, w: nu * (z - w) / (4 * z * w * (z + w))
                    * (2 * z + t) * (2 * w + t)
                    * np.exp(n * (self._f(z) - f0) + n * (self._f(w) - f0)),
                    c, c, zx=nu * (c.nodes()[0] - theta),
                    wy=nu * (c.nodes()[0] - theta))
            elif name == "i12":
                cz = self._ray_n(theta, _PI4)
                cw = self._ray_n(-theta + delta / 2.0, _PI4)
                core = DoubleContourKernel(
                    lambda z, w: nu * (z - w) / (2 * z * (z + w))
                    * (t + 2 * z) / (t - 2 * w)
                    * np.exp(n * (self._f(z) - f0) + n * (self._g(w) - g0)),
                    cz, cw, zx=nu * (cz.nodes()[0] - theta),
                    wy=nu * (cw.nodes()[0] + theta))
            elif name == "i22":
                cb = self._ray_n(-theta + delta / 2.0, _PI4)
                core = DoubleContourKernel(
                    lambda z, w: nu * (z - w) / (z + w)
                    / ((t - 2 * z) * (t - 2 * w))
                    * np.exp(n * (self._g(z) - g0) + n * (self._g(w) - g0)),
                    cb, cb, zx=nu * (cb.nodes()[0] + theta),
                    wy=nu * (cb.nodes()[0] + theta))
            elif name == "r22":
                cb = self._ray_n(1e-9, _PI3)
                z, wz = cb.nodes()
                vals = ((1 - 4 * z * z) ** (self.m - self.n)
                        * 2.0 * z / ((t - 2 * z) * (t + 2 * z))
                        * np.exp(-2 * n * g0))
                core = (nu * vals * wz, nu * z)
            else:  # pragma: no cover
                raise KeyError(name)
        else:  # gaussian
            delta = min(0.125, theta / 2.0)
            f0 = complex(self._f(theta)).real
            if name == "i11":
                c = self._ray_n(theta, _PI3)
                core = DoubleContourKernel(
                    lambda z, w: nu * nu * (z - w) / (4 * z * w * (z + w))
                    * (2 * z + t) * (2 * w + t)
                    * np.exp(n * (self._f(z) - f0) + n * (self._f(w) - f0)),
                    c, c, zx=nu * (c.nodes()[0] - theta),
                    wy=nu * (c.nodes()[0] - theta))
            elif name == "i12":
                cz = self._ray_n(theta + delta, _PI3)
                cw = self._ray_n(-theta - delta, _PI6)
                core = DoubleContourKernel(
                    lambda z, w: nu * (z - w) / (2 * z * (z + w))
                    * (t + 2 * z) / (t - 2 * w)
                    * np.exp(n * (self._f(z) - f0) + n * (self._f(w) + f0)),
                    cz, cw, zx=nu * (cz.nodes()[0] - theta),
                    wy=nu * (cw.nodes()[0] + theta))
            elif name == "i22":
                cb = self._ray_n(-theta - delta, _PI6)
                core = DoubleContourKernel(
                    lambda z, w: (z - w) / (z + w)
                    / ((t - 2 * z) * (t - 2 * w))
                    * np.exp(n * (self._f(z) + f0) + n * (self._f(w) + f0)),
                    cb, cb, zx=nu * (cb.nodes()[0] + theta),
                    wy=nu * (cb.nodes()[0] + theta))
            elif name == "rhat1":
                c0 = self._ray_n(1e-9, _PI3)
                z, _ = c0.nodes()
                core = SingleContourKernel(
                    lambda zz: np.exp(n * (self._f(zz) - self._f(-theta)))
                    / (t + 2 * zz), c0, zx=nu * (z + theta))
            else:  # pragma: no cover
                raise KeyError(name)
        self._cache[name] = core
        return core

    def _r22(self, xs, ys):
        n, al, nu = self.n, self.alpha, self.nu
        t = 2.0 * al - 1.0
        x = np.asarray(xs, float)[:, None]
        y = np.asarray(ys, float)[None, :]
        if self.regime == "gse":
            rate = nu * t / 2.0
            return np.sign(y - x) * rate * rate * np.exp(-np.abs(x - y) * rate)
        if self.regime == "goe":
            tail_x = _real(self._build("goe_tail").eval(x.ravel()), "goe tail")
            tail_y = _real(self._build("goe_tail").eval(y.ravel()), "goe tail")
            return (-0.25 * tail_x[:, None] + 0.25 * tail_y[None, :]
                    - 0.25 * np.sign(x - y))
        if self.regime == "gue":
            core, z = self._build("r22")
            c = np.abs(x - y)
            vals = np.exp(-np.multiply.outer(c.ravel(), z)) @ core
            vals = _real(vals, "gue r22").reshape(c.shape)
            pre = np.exp(-nu * self.consts["theta"] * (x + y))
            return -np.sign(x - y) * pre * vals
        # gaussian
        theta = self.consts["theta"]
        f0 = complex(self._f(theta)).real
        s_x = _real(self._build("rhat1").eval(x.ravel()), "gauss r22")
        s_y = _real(self._build("rhat1").eval(y.ravel()), "gauss r22")
        third = -np.sign(x - y) * 0.25 * np.exp(
            2 * n * f0 - 2.0 * nu * theta * np.maximum(x, y))
        return -0.5 * s_x[:, None] + 0.5 * s_y[None, :] + third

    def block(self, i, xs, j, ys):
        xs = np.atleast_1d(np.asarray(xs, float))
        ys = np.atleast_1d(np.asarray(ys, float))
        b11 = _real(self._build("i11").eval(xs, ys), "rescaled k11")
        b12 = _real(self._build("i12").eval(xs, ys), "rescaled k12")
        b21 = -_real(self._build("i12").eval(ys, xs), "rescaled k21").T
        b22 = _real(self._build("i22").eval(xs, ys), "rescaled k22") \
            + self._r22(xs, ys)
        return b11, b12, b21, b22


def k_exp_rescaled(x, y, n: int, alpha: float, regime_scaling: str = "gse",
                   kappa: float = None) -> KernelValue:
    """Pointwise rescaled-kernel evaluation."""
    kern = RescaledExpKernel(n, alpha, regime=regime_scaling, kappa=kappa)
    return kern.value(x, y)
