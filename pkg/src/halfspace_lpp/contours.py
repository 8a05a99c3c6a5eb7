"""Quadrature on ray ("wedge") contours and circles in the complex plane.

All contour integrals carry the 1/(2*i*pi) normalization folded into the
weights, so a sum of weight*integrand values is directly the normalized
integral.  A ray contour with apex ``a`` and half-angle ``phi`` runs from
``a + L*exp(-i*phi)`` in to the apex and back out to ``a + L*exp(+i*phi)``.
"""

import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import PoleCollisionError

_TWO_I_PI = 2j * np.pi

_gl_cache: dict = {}
_node_cache: dict = {}
_cache_lock = threading.Lock()


def gauss_legendre(n: int):
    """Cached Gauss-Legendre rule on [-1, 1]."""
    with _cache_lock:
        if n not in _gl_cache:
            _gl_cache[n] = np.polynomial.legendre.leggauss(n)
        return _gl_cache[n]


def _panel_nodes(edges, nodes_per_panel):
    """Composite Gauss-Legendre nodes/weights on [edges[0], edges[-1]]."""
    x, w = gauss_legendre(nodes_per_panel)
    ts, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        ts.append(0.5 * (b - a) * x + 0.5 * (b + a))
        ws.append(0.5 * (b - a) * w)
    return np.concatenate(ts), np.concatenate(ws)


def graded_edges(length: float, smallest: float, ratio: float = 2.0):
    """Geometrically graded panel edges on [0, length], refined toward 0."""
    edges = [length]
    t = length
    while t > smallest:
        t /= ratio
        edges.append(t)
    edges.append(0.0)
    return np.array(edges[::-1])


@dataclass(frozen=True)
class RayContour:
    """Union of two rays leaving ``apex`` at angles +/- ``angle``.

    ``nodes_per_ray`` Gauss-Legendre nodes are placed on each truncated ray
    segment [0, truncation_length].  With ``grade_to`` set, the segment is
    instead covered by geometrically graded panels whose smallest panel has
    that length, with ``nodes_per_ray`` nodes per panel; this resolves
    integrands that oscillate or peak on a short scale near the apex.
    """

    apex: complex
    angle: float
    truncation_length: float = 8.0
    nodes_per_ray: int = 96
    grade_to: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.angle < np.pi):
            raise ValueError("ray angle must lie in (0, pi)")
        if self.truncation_length <= 0:
            raise ValueError("truncation length must be positive")
        if self.nodes_per_ray < 4:
            raise ValueError("need at least 4 nodes per ray")

    def nodes(self):
        """Quadrature nodes and weights, 1/(2*i*pi) included in the weights."""
        key = (complex(self.apex), self.angle, self.truncation_length,
               self.nodes_per_ray, self.grade_to)
        with _cache_lock:
            hit = _node_cache.get(key)
        if hit is not None:
            return hit
        if self.grade_to > 0.0:
            edges = graded_edges(self.truncation_length, self.grade_to)
            t, wt = _panel_nodes(edges, self.nodes_per_ray)
        else:
            x, w = gauss_legendre(self.nodes_per_ray)
            t = 0.5 * self.truncation_length * (x + 1.0)
            wt = 0.5 * self.truncation_length * w
        e_up = np.exp(1j * self.angle)
        e_dn = np.exp(-1j * self.angle)
        # lower ray runs toward the apex, upper ray away from it
        z = np.concatenate([self.apex + t[::-1] * e_dn, self.apex + t * e_up])
        wz = np.concatenate([-e_dn * wt[::-1], e_up * wt]) / _TWO_I_PI
        with _cache_lock:
            _node_cache[key] = (z, wz)
        return z, wz


@dataclass(frozen=True)
class CircleContour:
    """Positively oriented circle around 0 with equally spaced nodes."""

    radius: float
    nodes: int = 256
    center: complex = 0.0

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    def nodes_weights(self):
        key = ("circle", complex(self.center), self.radius, self.nodes)
        with _cache_lock:
            hit = _node_cache.get(key)
        if hit is not None:
            return hit
        theta = 2.0 * np.pi * np.arange(self.nodes) / self.nodes
        z = self.center + self.radius * np.exp(1j * theta)
        # d z / (2 i pi) for z = r e^{i theta} is z dtheta / (2 pi)
        wz = (z - self.center) / self.nodes
        with _cache_lock:
            _node_cache[key] = (z, wz)
        return z, wz


def ray_nodes(contour: RayContour):
    return contour.nodes()


def circle_nodes(contour: CircleContour):
    return contour.nodes_weights()


def _as_nodes(contour):
    if isinstance(contour, RayContour):
        return contour.nodes()
    if isinstance(contour, CircleContour):
        return contour.nodes_weights()
    return contour  # already a (nodes, weights) pair


def integrate(f, contour):
    """Normalized single contour integral of ``f``."""
    z, w = _as_nodes(contour)
    vals = f(z)
    if not np.all(np.isfinite(vals)):
        bad = z[~np.isfinite(vals)][0]
        raise PoleCollisionError(f"integrand is non-finite at node {bad}")
    return np.sum(w * vals)


def double_integral(f, contour_z, contour_w):
    """Normalized double contour integral of f(z, w) by tensor quadrature."""
    z, wz = _as_nodes(contour_z)
    w, ww = _as_nodes(contour_w)
    vals = f(z[:, None], w[None, :])
    if not np.all(np.isfinite(vals)):
        i, j = np.argwhere(~np.isfinite(vals))[0]
        raise PoleCollisionError(
            f"integrand is non-finite at node pair (z={z[i]}, w={w[j]})")
    return np.einsum("i,ij,j->", wz, vals, ww)


class DoubleContourKernel:
    """Batched evaluator for kernels of the form

        K(x, y) = sum_ab  Wz_a Ww_b F(z_a, w_b) exp(-x zx_a - y wy_b)

    The (x, y)-independent core matrix is precomputed once; evaluation over
    point grids reduces to two small matrix products.  ``zx``/``wy`` default
    to the contour nodes and can be shifted (e.g. z + eta) when the exponent
    carries a shifted variable.
    """

    def __init__(self, F, contour_z, contour_w, zx=None, wy=None):
        z, wz = _as_nodes(contour_z)
        w, ww = _as_nodes(contour_w)
        self.z = z
        self.w = w
        self.zx = z if zx is None else zx
        self.wy = w if wy is None else wy
        core = F(z[:, None], w[None, :])
        if not np.all(np.isfinite(core)):
            i, j = np.argwhere(~np.isfinite(core))[0]
            raise PoleCollisionError(
                f"kernel core is non-finite at node pair (z={z[i]}, w={w[j]})")
        self.core = core * wz[:, None] * ww[None, :]

    def eval(self, x, y):
        """Complex kernel values on the grid x (rows) by y (columns)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        ex = np.exp(-np.multiply.outer(x, self.zx))
        ey = np.exp(-np.multiply.outer(y, self.wy))
        return ex @ self.core @ ey.T


class DifferenceKernel:
    """Batched evaluator for D(x, y) = sum_a core_a exp(-(x - y) z_a)."""

    def __init__(self, core, z):
        self.core = core
        self.z = z

    def eval(self, x, y):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        ex = np.exp(-np.multiply.outer(x, self.z))
        ey = np.exp(np.multiply.outer(y, self.z))
        return (ex * self.core) @ ey.T


class SingleContourKernel:
    """Batched evaluator for S(x) = sum_a Wz_a g(z_a) exp(-x zx_a)."""

    def __init__(self, g, contour, zx=None):
        z, wz = _as_nodes(contour)
        self.z = z
        self.zx = z if zx is None else zx
        vals = g(z)
        if not np.all(np.isfinite(vals)):
            raise PoleCollisionError("integrand is non-finite on the contour")
        self.core = vals * wz

    def eval(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.exp(-np.multiply.outer(x, self.zx)) @ self.core
