"""Limiting correlation kernels: Airy, GSE, GOE, the scalar GSE-equivalent
kernel, the block GUE kernel, the two-parameter crossover kernel, the
symplectic-unitary kernel, and the Gaussian-regime kernel.

All contour integrals live on ray contours with the cubic weight
exp(z^3/3 - x z); every public evaluator checks that the imaginary residue
of the quadrature is below tolerance and returns real values.

Conventions fixed here (each is pinned by tests against independent
identities):

* sgn(0) = 0.
* The 21 entry of every matrix kernel is K21(x, y) = -K12(y, x), which is
  what skew-symmetry of assembled matrices requires.
* The GOE 22 entry carries -tail(x)/4 + tail(y)/4 (tail = integral of Ai);
  this sign matches the Airy-function form of the kernel, the critical-rate
  limit of the finite kernel, and the crossover kernel at vanishing
  parameters, which jointly pin it down.
* The one-sided single integral in the symplectic-unitary 22 entry is
  normalized so that it matches its own Gaussian closed form (and acts on
  test functions like the derivative-of-delta mollifier with unit weight).
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .contours import (DifferenceKernel, DoubleContourKernel, RayContour,
                        SingleContourKernel)
from .errors import DomainError, NumericIntegrityError

IMAG_TOL = 1e-8
_PI3 = np.pi / 3.0


def _real(values, what="kernel value"):
    values = np.asarray(values)
    if np.iscomplexobj(values):
        resid = float(np.max(np.abs(values.imag))) if values.size else 0.0
        scale = max(1.0, float(np.max(np.abs(values.real))) if values.size else 0.0)
        if resid > IMAG_TOL * scale:
            raise NumericIntegrityError(
                f"{what}: imaginary residue {resid:.3e} exceeds {IMAG_TOL}")
        return np.ascontiguousarray(values.real)
    return np.asarray(values, dtype=float)


@lru_cache(maxsize=None)
def _ray(apex, angle=_PI3, length=8.0, nodes=96):
    return RayContour(complex(apex), angle, length, nodes)


def _cubic(z):
    return np.exp(z ** 3 / 3.0)


@dataclass(frozen=True)
class KernelValue:
    """One 2x2 matrix-kernel evaluation."""

    m11: float
    m12: float
    m21: float
    m22: float

    def as_array(self):
        return np.array([[self.m11, self.m12], [self.m21, self.m22]])


@dataclass(frozen=True)
class CrossoverParams:
    """Crossover-family parameters: a drift and strictly increasing offsets."""

    varpi: float
    etas: tuple

    def __post_init__(self):
        etas = tuple(float(e) for e in np.atleast_1d(self.etas))
        object.__setattr__(self, "etas", etas)
        if any(e < 0 for e in etas):
            raise DomainError("offsets must be nonnegative")
        if any(b <= a for a, b in zip(etas, etas[1:])):
            raise DomainError("offsets must be strictly increasing")

    @property
    def k(self):
        return len(self.etas)


# ---------------------------------------------------------------------------
# Airy function and Airy kernel
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _airy_eval():
    return SingleContourKernel(_cubic, _ray(1.0))


@lru_cache(maxsize=None)
def _airy_tail_eval():
    # integral of Ai over (x, infinity); the 1/z pole sits left of the apex
    return SingleContourKernel(lambda z: _cubic(z) / z, _ray(1.0))


def airy(x):
    """Airy function via its ray-contour representation."""
    out = _real(_airy_eval().eval(x), "airy")
    return float(out[0]) if np.isscalar(x) else out


def airy_tail(x):
    """Integral of the Airy function over (x, infinity)."""
    out = _real(_airy_tail_eval().eval(x), "airy tail")
    return float(out[0]) if np.isscalar(x) else out


@lru_cache(maxsize=None)
def _airy_kernel_core():
    # z on a right wedge, w on a left wedge; the w exponent enters with +w v
    return DoubleContourKernel(
        lambda z, w: np.exp(z ** 3 / 3.0 - w ** 3 / 3.0) / (z - w),
        _ray(1.0), _ray(-1.0, angle=2.0 * np.pi / 3.0))


def _airy_kernel_matrix(u, v):
    core = _airy_kernel_core()
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    ex = np.exp(-np.multiply.outer(u, core.z))
    ey = np.exp(np.multiply.outer(v, core.w))
    return _real(ex @ core.core @ ey.T, "airy kernel")


def k_airy(u, v):
    """Airy kernel value (symmetric scalar kernel)."""
    if np.isscalar(u) and np.isscalar(v):
        return float(_airy_kernel_matrix(u, v)[0, 0])
    return _airy_kernel_matrix(u, v)


# ---------------------------------------------------------------------------
# matrix-kernel base machinery
# ---------------------------------------------------------------------------


class MatrixKernel:
    """Common interface: ``block(i, xs, j, ys)`` -> four real matrices.

    ``nindex`` is the number of components of the index set; one-point
    kernels ignore the index arguments.
    """

    nindex = 1

    def block(self, i, xs, j, ys):
        raise NotImplementedError

    def value(self, x, y, i=1, j=1) -> KernelValue:
        b11, b12, b21, b22 = self.block(i, [x], j, [y])
        return KernelValue(float(b11[0, 0]), float(b12[0, 0]),
                           float(b21[0, 0]), float(b22[0, 0]))

    def assemble(self, points):
        """2k x 2k skew-symmetric matrix over ``points`` = [(i, x), ...],
        laid out as k^2 blocks of size 2x2 (the convention that fixes the
        Pfaffian's sign)."""
        k = len(points)
        idx = sorted({i for i, _ in points})
        out = np.zeros((2 * k, 2 * k))
        for s, (i, x) in enumerate(points):
            for t, (j, y) in enumerate(points):
                b11, b12, b21, b22 = self.block(i, [x], j, [y])
                out[2 * s, 2 * t] = b11[0, 0]
                out[2 * s, 2 * t + 1] = b12[0, 0]
                out[2 * s + 1, 2 * t] = b21[0, 0]
                out[2 * s + 1, 2 * t + 1] = b22[0, 0]
        return out


# ---------------------------------------------------------------------------
# GSE / GOE / GUE-block / Gaussian kernels
# ---------------------------------------------------------------------------


class GseKernel(MatrixKernel):
    """GSE limiting kernel; all three entries on the same right wedge."""

    def __init__(self, length=8.0, nodes=96):
        c1 = _ray(1.0, length=length, nodes=nodes)
        ee = lambda z, w: _cubic(z) * _cubic(w)
        self._c11 = DoubleContourKernel(
            lambda z, w: (z - w) / (4.0 * z * w * (z + w)) * ee(z, w), c1, c1)
        self._c12 = DoubleContourKernel(
            lambda z, w: (z - w) / (4.0 * z * (z + w)) * ee(z, w), c1, c1)
        self._c22 = DoubleContourKernel(
            lambda z, w: (z - w) / (4.0 * (z + w)) * ee(z, w), c1, c1)

    def block(self, i, xs, j, ys):
        b11 = _real(self._c11.eval(xs, ys), "gse k11")
        b12 = _real(self._c12.eval(xs, ys), "gse k12")
        b21 = -_real(self._c12.eval(ys, xs), "gse k21").T
        b22 = _real(self._c22.eval(xs, ys), "gse k22")
        return b11, b12, b21, b22


class GoeKernel(MatrixKernel):
    """GOE limiting kernel, including the sgn(0) = 0 convention."""

    def __init__(self, length=8.0, nodes=96):
        c1 = _ray(1.0, length=length, nodes=nodes)
        cm = _ray(-0.5, length=length, nodes=nodes)  # keeps the w pole at 0 right
        ee = lambda z, w: _cubic(z) * _cubic(w)
        self._c11 = DoubleContourKernel(
            lambda z, w: (z - w) / (z + w) * ee(z, w), c1, c1)
        self._c12 = DoubleContourKernel(
            lambda z, w: (w - z) / (2.0 * w * (z + w)) * ee(z, w), c1, cm)
        self._c22 = DoubleContourKernel(
            lambda z, w: (z - w) / (4.0 * z * w * (z + w)) * ee(z, w), c1, c1)
        self._tail = SingleContourKernel(lambda z: _cubic(z) / z, c1)

    def block(self, i, xs, j, ys):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        ys = np.atleast_1d(np.asarray(ys, dtype=float))
        b11 = _real(self._c11.eval(xs, ys), "goe k11")
        b12 = _real(self._c12.eval(xs, ys), "goe k12")
        b21 = -_real(self._c12.eval(ys, xs), "goe k21").T
        tail_x = _real(self._tail.eval(xs), "goe tail")
        tail_y = _real(self._tail.eval(ys), "goe tail")
        sgn = np.sign(xs[:, None] - ys[None, :])
        b22 = (_real(self._c22.eval(xs, ys), "goe k22")
               - 0.25 * tail_x[:, None] + 0.25 * tail_y[None, :] - 0.25 * sgn)
        return b11, b12, b21, b22


class GueBlockKernel(MatrixKernel):
    """Block kernel with the Airy kernel off-diagonal and zero diagonal."""

    def block(self, i, xs, j, ys):
        b12 = _airy_kernel_matrix(xs, ys)
        b21 = -_airy_kernel_matrix(ys, xs).T
        zero = np.zeros_like(b12)
        return zero, b12, b21, zero


class GaussianKernel(MatrixKernel):
    """Rank-one Gaussian-regime kernel; its Fredholm Pfaffian is the
    standard normal CDF."""

    def block(self, i, xs, j, ys):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        ys = np.atleast_1d(np.asarray(ys, dtype=float))
        gauss = np.exp(-(xs[:, None] ** 2 + ys[None, :] ** 2) / 4.0)
        b12 = gauss / math.sqrt(2.0 * np.pi)
        zero = np.zeros_like(b12)
        return zero, b12, -b12, zero


@lru_cache(maxsize=None)
def _default_gse():
    return GseKernel()


@lru_cache(maxsize=None)
def _default_goe():
    return GoeKernel()


def k_gse(x, y) -> KernelValue:
    return _default_gse().value(x, y)


def k_goe(x, y) -> KernelValue:
    return _default_goe().value(x, y)


def k_gue_block(x, y) -> KernelValue:
    return GueBlockKernel().value(x, y)


def k_gaussian(x, y) -> KernelValue:
    return GaussianKernel().value(x, y)


def k_gld(x, y):
    """Scalar kernel whose Fredholm determinant is the square of the GSE
    law: AiryKernel(x, y) - Ai(x)/2 * integral of Ai over (y, infinity)."""
    scalar = np.isscalar(x) and np.isscalar(y)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    ax = np.atleast_1d(airy(xs))
    ty = np.atleast_1d(airy_tail(ys))
    out = _airy_kernel_matrix(xs, ys) - 0.5 * np.multiply.outer(ax, ty)
    return float(out[0, 0]) if scalar else out


# ---------------------------------------------------------------------------
# crossover and symplectic-unitary kernels
# ---------------------------------------------------------------------------


def _gaussian_r12(ei, ej, xs, ys):
    # closed form of the off-diagonal residue part shared by the crossover
    # and symplectic-unitary kernels (nonzero only for eta_i < eta_j)
    xs = np.asarray(xs, float)[:, None]
    ys = np.asarray(ys, float)[None, :]
    d = ei - ej
    num = -(d ** 4) + 6.0 * (xs + ys) * d ** 2 + 3.0 * (xs - ys) ** 2
    return -np.exp(num / (12.0 * d)) / math.sqrt(4.0 * np.pi * (ej - ei))


class CrossKernel(MatrixKernel):
    """Two-parameter crossover kernel on {1..k} x R.

    The diagonal-residue part of the 22 entry is assembled in a numerically
    stable arrangement.  For drift below 1/2 the two single integrals keep
    their displayed form (with the pole of 1/(drift + z) left of the
    contour) and the two-sided pole integral runs right of both poles with
    an explicit residue correction.  For drift >= 1/2 the single integrals
    cancel exactly against residues of the double integral, which is then
    taken with apexes just right of the offsets; only the two-sided integral
    survives, now with an apex near the origin.  Both arrangements agree on
    overlapping drift ranges (tested) and the large-drift one stays
    well-conditioned all the way to the symplectic-unitary limit.
    """

    _SWITCH = 0.5

    def __init__(self, params: CrossoverParams, length=8.0, nodes=96):
        self.params = params
        self.nindex = params.k
        self._length = length
        self._nodes = nodes
        self._cache = {}

    def _r(self, apex):
        return _ray(float(apex), length=self._length, nodes=self._nodes)

    def _eta(self, i):
        return self.params.etas[i - 1]

    def _core(self, name, i, j):
        key = (name, i, j)
        if key in self._cache:
            return self._cache[key]
        w0 = self.params.varpi
        ei, ej = self._eta(i), self._eta(j)
        ee = lambda z, w: _cubic(z) * _cubic(w)
        if name == "i11":
            c1 = self._r(1.0)
            core = DoubleContourKernel(
                lambda z, w: (z + ei - w - ej) / (z + w + ei + ej)
                * (z + w0 + ei) * (w + w0 + ej) / ((z + ei) * (w + ej))
                * ee(z, w), c1, c1)
        elif name == "i12":
            a_z = max(0.25, 0.375 - ei - w0)
            a_w = min(w0 + ej - 0.125, max(0.25, ej - ei - a_z + 0.375))
            core = DoubleContourKernel(
                lambda z, w: (z + ei - w + ej) * (z + w0 + ei)
                / (2.0 * (z + ei) * (z + ei + w - ej) * (w0 + ej - w))
                * ee(z, w), self._r(a_z), self._r(a_w))
        elif name == "i22":
            if w0 >= self._SWITCH:
                b_z, b_w = ei + 0.25, ej + 0.25  # poles at drift+eta stay right
            else:
                b_z = max(ei, ei + w0) + 0.25
                b_w = max(ej, ej + w0) + 0.25
            core = DoubleContourKernel(
                lambda z, w: (z - ei - w + ej)
                / (4.0 * (z - ei + w - ej) * (z - w0 - ei) * (w - w0 - ej))
                * ee(z, w), self._r(b_z), self._r(b_w))
        elif name == "r22_single":
            # S_i(x) = int exp((z+eta_i)^3/3 - x (z+eta_i)) / (drift + z)
            contour = self._r(max(0.25, 0.25 - w0))
            z, _ = contour.nodes()
            core = SingleContourKernel(
                lambda zz: np.exp((zz + ei) ** 3 / 3.0) / (w0 + zz),
                contour, zx=z + ei)
        elif name == "r22_diff":
            # cubic terms cancel, leaving Gaussian decay exp(-(ei+ej) t^2 / 2)
            # along the rays; the truncation must stretch as offsets shrink
            aw = abs(w0)
            apex = min(0.25, aw / 2.0) if aw >= self._SWITCH else aw + 0.25
            length = float(np.clip(np.sqrt(90.0 / (ei + ej)), 8.0, 80.0))
            contour = RayContour(complex(apex), _PI3, length,
                                 max(self._nodes, int(24 * length)))
            z, wz = contour.nodes()
            vals = (z * np.exp((z + ei) ** 3 / 3.0 + (ej - z) ** 3 / 3.0)
                    / ((w0 + z) * (w0 - z)))
            core = DifferenceKernel(vals * wz, z)
        else:  # pragma: no cover
            raise KeyError(name)
        self._cache[key] = core
        return core

    def _k12(self, i, xs, j, ys):
        out = _real(self._core("i12", i, j).eval(xs, ys), "cross k12")
        if i < j:
            out = out + _gaussian_r12(self._eta(i), self._eta(j), xs, ys)
        return out

    def _r22_branch(self, i, xs, j, ys):
        """The displayed branch of the 22 residue part, valid where
        x - eta_i > y - eta_j; extended by antisymmetry elsewhere."""
        w0 = self.params.varpi
        ei, ej = self._eta(i), self._eta(j)
        xs = np.asarray(xs, float)
        ys = np.asarray(ys, float)
        out = np.zeros((xs.size, ys.size))
        if w0 < self._SWITCH:
            s_i = _real(self._core("r22_single", i, j).eval(xs), "cross r22")
            s_j = _real(self._core("r22_single", j, i).eval(ys), "cross r22")
            a_j = np.exp((w0 + ej) ** 3 / 3.0 - ys * (w0 + ej))
            a_i = np.exp((w0 + ei) ** 3 / 3.0 - xs * (w0 + ei))
            out += (-0.25 * np.multiply.outer(s_i, a_j)
                    + 0.25 * np.multiply.outer(a_i, s_j))
        if ei + ej > 0.0:
            diff = self._core("r22_diff", i, j)
            # only the x - y > 0 half-plane of this branch is ever used;
            # clip so the masked-out half cannot overflow
            c = np.clip(np.subtract.outer(xs, ys), 0.0, None).ravel()
            vals = np.exp(-np.multiply.outer(c, diff.z)) @ diff.core
            vals = _real(vals, "cross r22").reshape(out.shape)
            pre = np.multiply.outer(np.exp(-ei * xs), np.exp(-ej * ys))
            out += -0.5 * pre * vals
        if abs(w0) < self._SWITCH or ei + ej == 0.0:
            # residue picked up when the two-sided integral is moved right of
            # the pole at |drift|; at zero offsets the moved integral itself
            # vanishes identically and this term is the whole contribution
            s = abs(w0)
            fx = np.exp((s + ei) ** 3 / 3.0 - xs * (s + ei))
            fy = np.exp((ej - s) ** 3 / 3.0 - ys * (ej - s))
            out += -0.25 * np.multiply.outer(fx, fy)
        return out

    def _k22(self, i, xs, j, ys):
        xs = np.atleast_1d(np.asarray(xs, float))
        ys = np.atleast_1d(np.asarray(ys, float))
        i22 = _real(self._core("i22", i, j).eval(xs, ys), "cross k22")
        plus = self._r22_branch(i, xs, j, ys)
        minus = -self._r22_branch(j, ys, i, xs).T
        s = (xs[:, None] - self._eta(i)) - (ys[None, :] - self._eta(j))
        r22 = np.where(s > 0, plus, np.where(s < 0, minus, 0.5 * (plus + minus)))
        return i22 + r22

    def block(self, i, xs, j, ys):
        xs = np.atleast_1d(np.asarray(xs, float))
        ys = np.atleast_1d(np.asarray(ys, float))
        b11 = _real(self._core("i11", i, j).eval(xs, ys), "cross k11")
        b12 = self._k12(i, xs, j, ys)
        b21 = -self._k12(j, ys, i, xs).T
        b22 = self._k22(i, xs, j, ys)
        return b11, b12, b21, b22


class SuKernel(MatrixKernel):
    """Symplectic-unitary transition kernel; offsets strictly positive.

    The 22 residue part has a global Gaussian closed form (the one-point
    case of which is the derivative-of-delta mollifier); it is implemented
    in closed form rather than through its one-sided contour integral, whose
    displayed normalization disagrees with the closed form by a factor of 4.
    """

    def __init__(self, params: CrossoverParams, length=8.0, nodes=96):
        if any(e <= 0 for e in params.etas):
            raise DomainError("symplectic-unitary offsets must be positive")
        self.params = params
        self.nindex = params.k
        self._length = length
        self._nodes = nodes
        self._cache = {}

    def _r(self, apex):
        return _ray(float(apex), length=self._length, nodes=self._nodes)

    def _eta(self, i):
        return self.params.etas[i - 1]

    def _core(self, name, i, j):
        key = (name, i, j)
        if key in self._cache:
            return self._cache[key]
        ei, ej = self._eta(i), self._eta(j)
        ee = lambda z, w: _cubic(z) * _cubic(w)
        if name == "i11":
            c1 = self._r(1.0)
            core = DoubleContourKernel(
                lambda z, w: (z + ei - w - ej)
                / (4.0 * (z + ei) * (w + ej) * (z + w + ei + ej))
                * ee(z, w), c1, c1)
        elif name == "i12":
            a_z = 0.25
            a_w = max(0.25, ej - ei - a_z + 0.375)
            core = DoubleContourKernel(
                lambda z, w: (z + ei - w + ej)
                / (2.0 * (z + ei) * (z + w + ei - ej)) * ee(z, w),
                self._r(a_z), self._r(a_w))
        elif name == "i22":
            core = DoubleContourKernel(
                lambda z, w: (z - ei - w + ej) / (z - ei + w - ej) * ee(z, w),
                self._r(ei + 0.25), self._r(ej + 0.25))
        else:  # pragma: no cover
            raise KeyError(name)
        self._cache[key] = core
        return core

    def _k12(self, i, xs, j, ys):
        out = _real(self._core("i12", i, j).eval(xs, ys), "su k12")
        if i < j:
            out = out + _gaussian_r12(self._eta(i), self._eta(j), xs, ys)
        return out

    def _r22(self, i, xs, j, ys):
        ei, ej = self._eta(i), self._eta(j)
        xs = np.asarray(xs, float)[:, None]
        ys = np.asarray(ys, float)[None, :]
        aa = ei + ej
        bb = (ei ** 2 - ej ** 2) - xs + ys
        return (bb * np.exp(-bb ** 2 / (4.0 * aa) + (ei ** 3 + ej ** 3) / 3.0
                            - xs * ei - ys * ej)
                / (2.0 * aa * math.sqrt(np.pi * aa)))

    def block(self, i, xs, j, ys):
        xs = np.atleast_1d(np.asarray(xs, float))
        ys = np.atleast_1d(np.asarray(ys, float))
        b11 = _real(self._core("i11", i, j).eval(xs, ys), "su k11")
        b12 = self._k12(i, xs, j, ys)
        b21 = -self._k12(j, ys, i, xs).T
        b22 = _real(self._core("i22", i, j).eval(xs, ys), "su k22") \
            + self._r22(i, xs, j, ys)
        return b11, b12, b21, b22


def k_cross(i, x, j, y, params: CrossoverParams) -> KernelValue:
    return CrossKernel(params).value(x, y, i, j)


def k_su(i, x, j, y, params: CrossoverParams) -> KernelValue:
    return SuKernel(params).value(x, y, i, j)
