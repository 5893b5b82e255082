"""Distances between maps, discrete measures and point sets."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .maps import PiecewiseAffineMap, as_piecewise
from .partitions import DiscreteMeasure, PointedPartition
from .solver import solve_transport
from .spaces import Interval, Measure1D, Segment

__all__ = [
    "MapDistanceReport",
    "MetricRecord",
    "map_distance_p",
    "map_distance_inf",
    "disc_p",
    "wasserstein_p",
    "wasserstein_inf",
    "total_variation",
    "hausdorff",
    "oscillation_sum",
    "monge_cost",
]

QUAD_TOL = 1e-10
MAX_NODES = 256


@dataclass(frozen=True)
class MapDistanceReport:
    value: float
    p: float
    method: str
    delta: float = 0.0


@dataclass(frozen=True)
class MetricRecord:
    """One measured quantity as consumed by the experiment records."""

    name: str
    value: float
    method: str
    tolerance: float


def _check_p(p):
    if not p >= 1:
        raise ValueError("p must be >= 1")


def _abs_power_integral(alpha, beta, lo, hi, p):
    """``int_lo^hi |alpha*x + beta|^p dx`` in closed form."""
    if alpha == 0:
        return abs(beta) ** p * (hi - lo)

    def F(x):
        t = alpha * x + beta
        return math.copysign(abs(t) ** (p + 1), t) / (p + 1)

    return (F(hi) - F(lo)) / alpha


def _exact_pth_moment(f1: PiecewiseAffineMap, f2: PiecewiseAffineMap, mu: Measure1D, p) -> float:
    terms = []
    for s1, a1, b1 in f1.pieces:
        for s, a2, b2 in f2.restricted(s1):
            alpha, beta = a1 - a2, b1 - b2
            for x, m in mu.atoms_in(s):
                terms.append(m * abs(alpha * x + beta) ** p)
            for lo, hi, h in mu.pieces(s):
                terms.append(h * _abs_power_integral(alpha, beta, lo, hi, p))
    return math.fsum(terms)


def _covered_mass(f: PiecewiseAffineMap, mu: Measure1D) -> float:
    return math.fsum(mu.mass(s) for s, _, _ in f.pieces)


def _quadrature_moment(T1, T2, mu, p, space, n):
    whole = mu.space.whole()
    xs, wx = mu.quadrature(whole, n)
    if getattr(xs, "ndim", 1) > 1:
        v1 = np.array([T1(x) for x in xs])
        v2 = np.array([T2(x) for x in xs])
    else:
        v1, v2 = np.asarray(T1(xs)), np.asarray(T2(xs))
    d = np.array([float(space.pairwise([a], [b])[0, 0]) for a, b in zip(v1, v2)]) \
        if space is not None else np.abs(v1 - v2)
    return float(np.dot(wx, d ** p))


def map_distance_p(T1, T2, mu, p: float = 1.0, target_space=None) -> MapDistanceReport:
    """``(int d(T1(x), T2(x))^p dmu)^(1/p)``.

    Exact when both maps are piecewise affine on an interval (projection
    maps over interval partitions qualify), ``mu`` is one-dimensional and
    the target is an interval.  Otherwise Gauss-Legendre over ``mu`` with
    node doubling; the last change is reported as ``delta``.
    """
    _check_p(p)
    f1, f2 = as_piecewise(T1), as_piecewise(T2)
    interval_target = target_space is None or isinstance(target_space, Interval)
    if f1 is not None and f2 is not None and isinstance(mu, Measure1D) and interval_target:
        if abs(_covered_mass(f1, mu) - 1) > 1e-12 or abs(_covered_mass(f2, mu) - 1) > 1e-12:
            raise ValueError("maps must be defined on the whole support of mu")
        val = max(_exact_pth_moment(f1, f2, mu, p), 0.0) ** (1.0 / p)
        return MapDistanceReport(val, p, "exact-piecewise", 0.0)
    n = 16
    prev = _quadrature_moment(T1, T2, mu, p, target_space, n)
    delta = math.inf
    while n < MAX_NODES:
        n *= 2
        cur = _quadrature_moment(T1, T2, mu, p, target_space, n)
        delta, prev = abs(cur - prev), cur
        if delta < QUAD_TOL:
            break
    return MapDistanceReport(max(prev, 0.0) ** (1.0 / p), p, "quadrature", delta)


def map_distance_inf(T1, T2, mu: Measure1D) -> float:
    """Essential sup of ``|T1 - T2|`` for piecewise-affine maps.

    Only pieces carrying positive ``mu``-mass count; on each, the sup of an
    affine difference sits at an endpoint (or at the atoms).
    """
    f1, f2 = as_piecewise(T1), as_piecewise(T2)
    if f1 is None or f2 is None:
        raise TypeError("map_distance_inf needs piecewise-affine maps")
    best = 0.0
    for s1, a1, b1 in f1.pieces:
        for s, a2, b2 in f2.restricted(s1):
            alpha, beta = a1 - a2, b1 - b2
            for x, m in mu.atoms_in(s):
                best = max(best, abs(alpha * x + beta))
            for lo, hi, _ in mu.pieces(s):
                best = max(best, abs(alpha * lo + beta), abs(alpha * hi + beta))
    return best


def disc_p(T1, T2, p: float = 1.0) -> float:
    """``(sum_i mu_i d(T1(x_i), T2(x_i))^p)^(1/p)`` on the partition of ``T1``."""
    _check_p(p)
    part: PointedPartition = T1.partition
    space = T1.target_space
    idx = part.positive
    anchors = np.asarray(part.anchors)[idx]
    a = np.asarray(T1.targets)[idx]
    b = np.asarray(T2(anchors)) if anchors.ndim == 1 else np.array([T2(x) for x in anchors])
    if isinstance(space, Interval):
        d = np.abs(np.asarray(a, float) - np.asarray(b, float))
    else:
        d = np.array([float(space.pairwise([u], [w])[0, 0]) for u, w in zip(a, b)])
    return math.fsum(part.weights[idx] * d ** p) ** (1.0 / p)


def _pairwise(space, A, B):
    if hasattr(space, "pairwise"):
        return np.asarray(space.pairwise(A, B), dtype=float)
    return np.asarray(space(A, B), dtype=float)


def wasserstein_p(s1: DiscreteMeasure, s2: DiscreteMeasure, space, p: float = 1.0) -> float:
    """``W_p`` between two discrete measures, by exact transport with cost ``d^p``."""
    _check_p(p)
    D = _pairwise(space, s1.points, s2.points)
    rows, cols, masses, _, _ = solve_transport(s1.weights, s2.weights, D ** p)
    return max(math.fsum(masses * D[rows, cols] ** p), 0.0) ** (1.0 / p)


def wasserstein_inf(s1: DiscreteMeasure, s2: DiscreteMeasure, space) -> float:
    """Bottleneck ``W_inf`` between two discrete measures.

    Binary search over the sorted pairwise distances.  A threshold ``t`` is
    feasible when the transport problem with cost ``1[d > t]`` has optimum
    zero, which is the max-flow condition on the thresholded graph.
    """
    D = _pairwise(space, s1.points, s2.points)
    a = np.asarray(s1.weights, dtype=float)
    b = np.asarray(s2.weights, dtype=float)
    keep_a, keep_b = a > 0, b > 0
    D = D[np.ix_(keep_a, keep_b)]
    a, b = a[keep_a], b[keep_b]
    a, b = a / a.sum(), b / b.sum()
    levels = np.unique(D)

    def feasible(t):
        C = (D > t).astype(float)
        rows, cols, masses, _, _ = solve_transport(a, b, C)
        return math.fsum(masses * C[rows, cols]) <= 1e-12

    lo, hi = 0, len(levels) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if feasible(levels[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(levels[lo])


def total_variation(s1: DiscreteMeasure, s2: DiscreteMeasure, atol: float = 0.0) -> float:
    """Half the l1 distance between the atom masses over the union of supports."""
    p1 = np.asarray(s1.points, dtype=float).reshape(len(s1.weights), -1)
    p2 = np.asarray(s2.points, dtype=float).reshape(len(s2.weights), -1)
    pts = np.vstack([p1, p2])
    w = np.concatenate([np.asarray(s1.weights, float), -np.asarray(s2.weights, float)])
    if atol > 0:
        pts = np.round(pts / atol) * atol
    _, inv = np.unique(pts, axis=0, return_inverse=True)
    net = np.bincount(inv.ravel(), weights=w)
    return 0.5 * math.fsum(np.abs(net))


def hausdorff(A, B, metric) -> float:
    """Hausdorff distance between two finite point sets."""
    A = np.asarray(A)
    B = np.asarray(B)
    if len(A) == 0 or len(B) == 0:
        raise ValueError("point sets must be non-empty")
    D = _pairwise(metric, A, B)
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))


def oscillation_sum(T, P: PointedPartition, p: float = 1.0, samples_per_cell: int = 64,
                    seed: int = 0, target_space=None) -> float:
    """``(sum_i mu_i osc_T(E_i)^p)^(1/p)`` with ``osc_T(E) = diam T(E)``.

    Exact (as a sup, open-end limits included) for piecewise-affine maps on
    an interval; otherwise a sampled lower estimate.
    """
    _check_p(p)
    pw = as_piecewise(T)
    osc = np.zeros(len(P))
    if pw is not None and isinstance(P.space, Interval):
        for i in P.positive:
            r = pw.image_range(P.cells[i])
            osc[i] = 0.0 if r is None else r[1] - r[0]
    else:
        rng = np.random.default_rng(seed)
        space = target_space if target_space is not None else getattr(T, "target_space", None)
        for i in P.positive:
            cell = P.cells[i]
            xs = _cell_sample(P.space, cell, samples_per_cell, rng)
            xs = np.concatenate([np.asarray(xs), np.asarray(P.anchors)[[i]]])
            vals = np.asarray(T(xs)) if xs.ndim == 1 else np.array([T(x) for x in xs])
            if space is None:
                vals = vals.reshape(len(vals), -1)
                osc[i] = float(np.max(np.abs(vals[:, None, :] - vals[None, :, :]).max(axis=-1)))
            else:
                osc[i] = float(_pairwise(space, vals, vals).max())
    return math.fsum(P.weights * osc ** p) ** (1.0 / p)


def _cell_sample(space, cell, n, rng):
    if isinstance(cell, Segment):
        pts = rng.uniform(cell.lo, cell.hi, n)
        ends = [x for x, ok in ((cell.lo, cell.closed_left), (cell.hi, cell.closed_right)) if ok]
        return np.concatenate([pts, ends])
    if hasattr(cell, "sides"):
        lo = np.array([s.lo for s in cell.sides])
        hi = np.array([s.hi for s in cell.sides])
        return rng.uniform(lo, hi, size=(n, len(lo)))
    return np.asarray(cell.points)


def monge_cost(T, mu, c, quad: int = 8):
    """``int c(x, T(x)) dmu``, piece by piece for piecewise-affine ``T``.

    Returns ``(value, delta)``; ``delta`` is the last Gauss-Legendre
    refinement difference (zero when every piece is atomic).
    """
    pw = as_piecewise(T)

    def level(n):
        terms = []
        if pw is not None and isinstance(mu, Measure1D):
            for s, a, b in pw.pieces:
                xs, wx = mu.quadrature(s, n)
                if len(xs):
                    terms.append(float(np.dot(wx, c(xs, a * xs + b))))
        else:
            xs, wx = mu.quadrature(mu.space.whole(), n)
            ys = np.asarray(T(xs)) if np.ndim(xs) == 1 else np.array([T(x) for x in xs])
            terms.append(float(np.dot(wx, np.asarray(c(xs, ys), dtype=float))))
        return math.fsum(terms)

    n = max(int(quad), 1)
    prev = level(n)
    delta = math.inf
    while n < MAX_NODES:
        n *= 2
        cur = level(n)
        delta, prev = abs(cur - prev), cur
        if delta < QUAD_TOL:
            break
    return prev, delta
