"""Numerical Fredholm Pfaffians and determinants.

Production evaluation is Nystrom: the operator on L^2(h, infinity) is
discretized with Gauss-Legendre nodes on [h, h + panel_length], the matrix is
symmetrized with sqrt(w_a w_b), and Pf(J - K)^2 = det(I + J K) supplies the
value with the positive branch of the square root.  A low-order series
expansion and an exact lattice summation serve as validation routes.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import limit_kernels
from .contours import gauss_legendre
from .errors import (DiscretizationError, DomainError, NumericIntegrityError,
                     TruncationError)
from .pfaffian import block_j, pfaffian_fast, pfaffian_of_difference

DEFAULT_PANEL = 12.0
DEFAULT_NODES = 48
CDF_SLACK = 1e-6


@dataclass(frozen=True)
class PfDomain:
    """Product domain: component i carries the half-line x >= thresholds[i]."""

    thresholds: tuple
    panel_length: float = DEFAULT_PANEL
    nodes: int = DEFAULT_NODES

    def __post_init__(self):
        th = tuple(float(t) for t in np.atleast_1d(self.thresholds))
        object.__setattr__(self, "thresholds", th)
        if len(th) < 1:
            raise DomainError("need at least one threshold")
        if self.panel_length <= 0:
            raise DomainError("panel length must be positive")
        if self.nodes < 8:
            raise DomainError("need at least 8 quadrature nodes per index")

    @property
    def k(self):
        return len(self.thresholds)


def _domain_nodes(dom: PfDomain):
    x, w = gauss_legendre(dom.nodes)
    nodes, weights = [], []
    for h in dom.thresholds:
        nodes.append(h + 0.5 * dom.panel_length * (x + 1.0))
        weights.append(0.5 * dom.panel_length * w)
    return nodes, weights


def _assemble(kernel, nodes, weights):
    """Weighted 2M x 2M discretization of a matrix kernel over the domain."""
    k = len(nodes)
    m = [len(n) for n in nodes]
    offs = np.concatenate([[0], np.cumsum(m)])
    total = offs[-1]
    big = np.zeros((2 * total, 2 * total))
    sq = [np.sqrt(w) for w in weights]
    for i in range(k):
        for j in range(k):
            b11, b12, b21, b22 = kernel.block(i + 1, nodes[i], j + 1, nodes[j])
            scale = np.multiply.outer(sq[i], sq[j])
            ri = slice(2 * offs[i], 2 * offs[i + 1], 2)
            rj = slice(2 * offs[j], 2 * offs[j + 1], 2)
            ri1 = slice(2 * offs[i] + 1, 2 * offs[i + 1], 2)
            rj1 = slice(2 * offs[j] + 1, 2 * offs[j + 1], 2)
            big[ri, rj] = b11 * scale
            big[ri, rj1] = b12 * scale
            big[ri1, rj] = b21 * scale
            big[ri1, rj1] = b22 * scale
    return big


def fredholm_pf_nystrom(kernel, dom: PfDomain, check_homotopy=False) -> float:
    """Pf(J - K) on the product half-line domain by Nystrom discretization."""
    nodes, weights = _domain_nodes(dom)
    kd = _assemble(kernel, nodes, weights)
    j = block_j(kd.shape[0] // 2)
    homotopy = (0.0, 0.25, 0.5, 0.75, 1.0) if check_homotopy else None
    try:
        return pfaffian_of_difference(j, kd, homotopy_points=homotopy)
    except Exception as exc:  # annotate with the discretization context
        raise DiscretizationError(
            f"Nystrom Pfaffian failed at nodes={dom.nodes}, "
            f"panel={dom.panel_length}: {exc}") from exc


def fredholm_pf_series(kernel, dom: PfDomain, max_order: int = 4,
                       nodes: int = 16) -> float:
    """Truncated Fredholm Pfaffian series with tensor quadrature.

    Only orders up to 4 are supported; the integrand vanishes on coincident
    points, so each order reduces to a sum over increasing node tuples.
    """
    if max_order > 4:
        raise DomainError("series expansion supports max_order <= 4")
    small = PfDomain(dom.thresholds, dom.panel_length, max(nodes, 8))
    xs, ws = _domain_nodes(small)
    big = _assemble(kernel, xs, [np.ones(len(x)) for x in xs])
    wvec = np.concatenate(ws)
    total = 1.0
    m = len(wvec)
    for order in range(1, max_order + 1):
        term = 0.0
        for combo in itertools.combinations(range(m), order):
            sel = np.array(combo)
            rows = np.concatenate([[2 * s, 2 * s + 1] for s in sel])
            sub = big[np.ix_(rows, rows)]
            term += np.prod(wvec[sel]) * pfaffian_fast(sub)
        total += (-1.0) ** order * term
    return float(total)


def fredholm_det_nystrom(kernel_fn, threshold: float,
                         panel_length: float = DEFAULT_PANEL,
                         nodes: int = DEFAULT_NODES) -> float:
    """det(I - K) on L^2(threshold, infinity) for a scalar kernel.

    ``kernel_fn(xs, ys)`` must return the matrix of kernel values.
    """
    x, w = gauss_legendre(nodes)
    pts = threshold + 0.5 * panel_length * (x + 1.0)
    wts = 0.5 * panel_length * w
    sq = np.sqrt(wts)
    mat = kernel_fn(pts, pts) * np.multiply.outer(sq, sq)
    return float(np.linalg.det(np.eye(nodes) - mat))


# ---------------------------------------------------------------------------
# discrete (lattice) Fredholm Pfaffian
# ---------------------------------------------------------------------------


def _lattice_points(dom: PfDomain, u_max: int):
    pts = []
    for i, g in enumerate(dom.thresholds):
        g = int(g)
        if g > u_max:
            raise DomainError("u_max below a threshold")
        pts.extend((i + 1, u) for u in range(g, u_max + 1))
    return pts


def _lattice_blocks(kernel, dom: PfDomain, u_max: int):
    pts = _lattice_points(dom, u_max)
    k = dom.k
    us = [np.array([u for i, u in pts if i == idx + 1]) for idx in range(k)]
    big = _assemble(kernel, us, [np.ones(len(u)) for u in us])
    return pts, big


def _check_lattice_tail(kernel, dom, u_max, tol):
    # geometric extrapolation of the one-point correlation beyond u_max
    vals = []
    for i in range(1, dom.k + 1):
        _, b12, _, _ = kernel.block(i, [u_max - 1, u_max], i, [u_max - 1, u_max])
        vals.append((abs(b12[0, 0]), abs(b12[1, 1])))
    for prev, last in vals:
        if last <= 0:
            continue
        ratio = min(last / prev, 0.99) if prev > 0 else 0.5
        if last * ratio / (1.0 - ratio) > tol:
            raise TruncationError(
                f"lattice tail estimate {last * ratio / (1 - ratio):.2e} "
                f"exceeds {tol}; raise u_max")


def fredholm_pf_discrete(kernel, dom: PfDomain, u_max: int,
                         max_order: int = 6, tol: float = 1e-10) -> float:
    """Truncated lattice Fredholm Pfaffian series, exact summation per order.

    Terms vanish on repeated points, so order n sums over increasing
    n-tuples of lattice points.  Stops early once an order falls below
    ``tol``; raises if order ``max_order`` is still above tolerance.
    """
    _check_lattice_tail(kernel, dom, u_max, tol)
    pts, big = _lattice_blocks(kernel, dom, u_max)
    m = len(pts)
    # drop points whose one-point correlation is negligible at every order
    diag = np.array([abs(big[2 * s, 2 * s + 1]) for s in range(m)])
    keep = [s for s in range(m) if diag[s] > 1e-16]
    total = 1.0
    for order in range(1, max_order + 1):
        term = 0.0
        for combo in itertools.combinations(keep, order):
            rows = np.concatenate([[2 * s, 2 * s + 1] for s in combo])
            sub = big[np.ix_(rows, rows)]
            term += pfaffian_fast(sub)
        total += (-1.0) ** order * term
        if abs(term) < tol:
            return float(total)
    if abs(term) > 100 * tol:
        raise TruncationError(
            f"series order {max_order} still contributes {term:.2e}")
    return float(total)


def fredholm_pf_discrete_det(kernel, dom: PfDomain, u_max: int) -> float:
    """Lattice Fredholm Pfaffian through det(I + J K) on the whole lattice."""
    _, big = _lattice_blocks(kernel, dom, u_max)
    j = block_j(big.shape[0] // 2)
    return pfaffian_of_difference(j, big)


# ---------------------------------------------------------------------------
# distribution-function front end
# ---------------------------------------------------------------------------


def _as_cdf(value: float) -> float:
    if not (-CDF_SLACK <= value <= 1.0 + CDF_SLACK):
        raise NumericIntegrityError(
            f"CDF value {value} outside [-{CDF_SLACK}, 1+{CDF_SLACK}]")
    return min(max(value, 0.0), 1.0)


def cdf(family: str, x, refine: bool = False, **params):
    """Distribution functions of every kernel family.

    ``family`` is one of gue, gue_det, goe, gse, gaussian, cross, su,
    exp_finite, geo_finite.  ``x`` is the threshold (a sequence of
    thresholds for the multipoint finite families).  With ``refine`` the
    value is recomputed on a doubled quadrature and the pair
    (value, refinement delta) is returned.
    """
    from . import finite_kernels  # local import to avoid a cycle

    def pf_value(kernel, thresholds, panel, nodes):
        dom = PfDomain(tuple(thresholds), panel, nodes)
        return fredholm_pf_nystrom(kernel, dom)

    panel = params.pop("panel_length", DEFAULT_PANEL)
    nodes = params.pop("nodes", DEFAULT_NODES)

    def run(panel, nodes):
        if family == "gue":
            return pf_value(limit_kernels.GueBlockKernel(), [x], panel, nodes)
        if family == "gue_det":
            return fredholm_det_nystrom(limit_kernels.k_airy, float(x), panel, nodes)
        if family == "goe":
            return pf_value(limit_kernels._default_goe(), [x], panel, nodes)
        if family == "gse":
            return pf_value(limit_kernels._default_gse(), [x], panel, nodes)
        if family == "gaussian":
            return pf_value(limit_kernels.GaussianKernel(), [x], panel, nodes)
        if family == "cross":
            cp = limit_kernels.CrossoverParams(params["varpi"], params["eta"])
            kern = limit_kernels.CrossKernel(cp)
            th = np.atleast_1d(x)
            if len(th) != cp.k:
                raise DomainError("one threshold per offset")
            return pf_value(kern, th, panel, nodes)
        if family == "su":
            cp = limit_kernels.CrossoverParams(0.0, params["eta"])
            kern = limit_kernels.SuKernel(cp)
            th = np.atleast_1d(x)
            if len(th) != cp.k:
                raise DomainError("one threshold per offset")
            return pf_value(kern, th, panel, nodes)
        if family == "exp_finite":
            path = finite_kernels.SpaceLikePath(params["ns"], params["ms"])
            alpha = params["alpha"]
            if not isinstance(alpha, finite_kernels.AlphaRegime):
                alpha = finite_kernels.AlphaRegime.from_alpha(alpha)
            th = np.atleast_1d(x)
            kern = finite_kernels.ExpKernel(path, alpha, x_min=float(np.min(th)))
            return pf_value(kern, th, panel, nodes)
        if family == "geo_finite":
            path = finite_kernels.SpaceLikePath(params["ns"], params["ms"])
            gp = finite_kernels.GeomParams(params["a"], params["c"])
            kern = finite_kernels.GeoKernel(path, gp)
            th = [int(t) for t in np.atleast_1d(x)]
            u_max = params.get("u_max")
            if u_max is None:
                u_max = finite_kernels.geo_tail_horizon(gp, max(th))
            dom = PfDomain(tuple(th))
            return fredholm_pf_discrete_det(kern, dom, u_max)
        raise DomainError(f"unknown family {family!r}")

    value = _as_cdf(run(panel, nodes))
    if refine:
        fine = _as_cdf(run(panel + 4.0, 2 * nodes))
        return value, abs(fine - value)
    return value
