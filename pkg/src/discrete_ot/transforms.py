"""Continuous and semidiscrete versions of a discrete plan.

Both are lazy query objects over the original measures: rectangle masses are
computed from exact cell masses, integrals by per-cell quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .maps import as_piecewise
from .partitions import PointedPartition
from .solver import HPlan
from .spaces import Interval, Measure1D, Segment

__all__ = [
    "Estimate",
    "ContinuousVersion",
    "SemidiscreteVersion",
    "continuous_rectangle_mass",
    "continuous_cost",
    "semidiscrete_rectangle_mass",
    "bad_set_mass",
    "support_hausdorff",
]

QUAD_TOL = 1e-8
MAX_NODES = 64


@dataclass(frozen=True)
class Estimate:
    """A computed value with the size of its last refinement step."""

    value: float
    delta: float
    method: str


def _require_parts(plan: HPlan):
    src, tgt = plan.source, plan.target
    if src.partition is None or src.measure is None:
        raise ValueError("plan source must come from discretize()")
    return src.partition, src.measure, tgt.partition, tgt.measure


def _masses_in(measure, partition: PointedPartition, E, idx) -> np.ndarray:
    out = np.empty(len(idx))
    for k, i in enumerate(idx):
        cell = partition.cells[i].intersect(E)
        out[k] = 0.0 if cell is None else measure.mass(cell)
    return out


@dataclass(frozen=True, eq=False)
class ContinuousVersion:
    """Each atom ``pi_ij`` spread over ``E_i x F_j`` proportionally to ``mu x nu``."""

    plan: HPlan

    def __post_init__(self):
        _, _, part_y, nu = _require_parts(self.plan)
        if part_y is None or nu is None:
            raise ValueError("plan target must come from discretize()")

    @property
    def coefficients(self) -> np.ndarray:
        """``pi_ij / (mu_i nu_j)`` for every stored entry."""
        p = self.plan
        return p.masses / (np.asarray(p.source.weights)[p.rows] * np.asarray(p.target.weights)[p.cols])


@dataclass(frozen=True, eq=False)
class SemidiscreteVersion:
    """Each atom ``pi_ij`` spread over ``E_i x {y_j}`` proportionally to ``mu``."""

    plan: HPlan

    def __post_init__(self):
        _require_parts(self.plan)

    def conditional(self, x):
        """Targets and weights of the conditional measure ``gamma_x``."""
        i = int(self.plan.source.partition.locate(x))
        sel = self.plan.rows == i
        return np.asarray(self.plan.target.points)[self.plan.cols[sel]], self.plan.row_weights()[sel]


def continuous_rectangle_mass(v: ContinuousVersion, E, F) -> float:
    """Mass of ``E x F`` under the continuous version."""
    p = v.plan
    part_x, mu, part_y, nu = _require_parts(p)
    rows, inv_r = np.unique(p.rows, return_inverse=True)
    cols, inv_c = np.unique(p.cols, return_inverse=True)
    mx = _masses_in(mu, part_x, E, rows)[inv_r]
    my = _masses_in(nu, part_y, F, cols)[inv_c]
    return math.fsum(v.coefficients * mx * my)


def semidiscrete_rectangle_mass(v: SemidiscreteVersion, E, F) -> float:
    """Mass of ``E x F`` under the semidiscrete version."""
    p = v.plan
    part_x, mu, _, _ = _require_parts(p)
    ys = np.asarray(p.target.points)
    inside = np.asarray(F.contains(ys[p.cols]), dtype=bool)
    if not inside.any():
        return 0.0
    rows = p.rows[inside]
    urows, inv = np.unique(rows, return_inverse=True)
    mx = _masses_in(mu, part_x, E, urows)[inv]
    return math.fsum(p.row_weights()[inside] * mx)


def _cost_at_level(v: ContinuousVersion, c, n: int) -> float:
    p = v.plan
    part_x, mu, part_y, nu = _require_parts(p)
    qx, qy = {}, {}
    for i in np.unique(p.rows):
        qx[i] = mu.quadrature(part_x.cells[i], n)
    for j in np.unique(p.cols):
        qy[j] = nu.quadrature(part_y.cells[j], n)
    terms = []
    for coef, i, j in zip(v.coefficients, p.rows, p.cols):
        xs, wx = qx[i]
        ys, wy = qy[j]
        terms.append(coef * float(wx @ c.matrix(xs, ys) @ wy))
    return math.fsum(terms)


def continuous_cost(v: ContinuousVersion, c, quad_per_cell: int = 4) -> Estimate:
    """Total cost of the continuous version.

    Tensor Gauss-Legendre on every density piece of every support rectangle,
    atoms exact, doubling the node count until two successive values agree
    to ``1e-8`` (or 64 nodes).  Polynomial costs of degree below
    ``2 * quad_per_cell`` are integrated exactly at the first level.
    """
    if quad_per_cell < 1:
        raise ValueError("quad_per_cell must be >= 1")
    n = int(quad_per_cell)
    prev = _cost_at_level(v, c, n)
    delta = math.inf
    while n < MAX_NODES:
        n *= 2
        cur = _cost_at_level(v, c, n)
        delta = abs(cur - prev)
        prev = cur
        if delta < QUAD_TOL:
            break
    return Estimate(prev, delta, "gauss-legendre")


def _superlevel(s: Segment, a: float, b: float, t: float):
    """``{x in s : a*x + b >= t}`` as a segment, or ``None``."""
    if a == 0:
        return s if b >= t else None
    r = (t - b) / a
    if a > 0:
        if r > s.hi:
            return None
        if r <= s.lo:
            return s
        return Segment(r, s.hi, True, s.closed_right).intersect(s)
    if r < s.lo:
        return None
    if r >= s.hi:
        return s
    return Segment(s.lo, r, s.closed_left, True).intersect(s)


def _bad_mass_exact(plan: HPlan, pw, delta: float) -> float:
    part_x, mu, _, _ = _require_parts(plan)
    ys = np.asarray(plan.target.points, dtype=float)
    w = plan.row_weights()
    terms = []
    cache = {}
    for i, j, wij in zip(plan.rows, plan.cols, w):
        if i not in cache:
            cache[i] = pw.restricted(part_x.cells[i])
        yj = ys[j]
        for s, a, b in cache[i]:
            hi_part = _superlevel(s, a, b, yj + delta)
            lo_part = _superlevel(s, -a, -b, -(yj - delta))
            m = (0.0 if hi_part is None else mu.mass(hi_part)) + \
                (0.0 if lo_part is None else mu.mass(lo_part))
            if m:
                terms.append(wij * m)
    return math.fsum(terms)


def _bad_mass_quadrature(plan: HPlan, T, delta: float, n: int) -> float:
    part_x, mu, _, _ = _require_parts(plan)
    space = plan.target.space
    ys = np.asarray(plan.target.points)
    w = plan.row_weights()
    terms = []
    for i, j, wij in zip(plan.rows, plan.cols, w):
        xs, wx = mu.quadrature(part_x.cells[i], n)
        if len(xs) == 0:
            continue
        tx = np.asarray([T(x) for x in xs]) if xs.ndim > 1 else np.asarray(T(xs))
        d = space.pairwise(tx, ys[[j]])[:, 0]
        terms.append(wij * float(np.sum(wx[d >= delta])))
    return math.fsum(terms)


def bad_set_mass(v: SemidiscreteVersion, T, delta: float, quad_per_cell: int = 8) -> Estimate:
    """Semidiscrete mass of ``{(x, y) : d(y, T(x)) >= delta}``.

    Exact for piecewise-affine ``T`` into an interval when ``mu`` is a
    one-dimensional measure; otherwise a quadrature estimate whose last
    refinement difference is reported.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    plan = v.plan
    pw = as_piecewise(T)
    if pw is not None and isinstance(plan.target.space, Interval) \
            and isinstance(plan.source.measure, Measure1D):
        return Estimate(_bad_mass_exact(plan, pw, delta), 0.0, "exact-piecewise")
    n = max(int(quad_per_cell), 1)
    prev = _bad_mass_quadrature(plan, T, delta, n)
    diff = math.inf
    while n < MAX_NODES:
        n *= 2
        cur = _bad_mass_quadrature(plan, T, delta, n)
        diff, prev = abs(cur - prev), cur
        if diff < QUAD_TOL:
            break
    return Estimate(prev, diff, "quadrature")


def support_hausdorff(plan: HPlan, v, n_probe: int = 8, seed: int = 0) -> Estimate:
    """Hausdorff distance between ``supp(plan)`` and probes of the transform's support.

    Probes are drawn from the support of ``mu`` (and ``nu`` for the
    continuous version) inside each support rectangle, including the ends
    of every density piece.  The product metric is used throughout.
    """
    rng = np.random.default_rng(seed)
    part_x, mu, part_y, nu = _require_parts(plan)
    X, Y = plan.source.space, plan.target.space
    xs_a = np.asarray(plan.source.points)[plan.rows]
    ys_a = np.asarray(plan.target.points)[plan.cols]
    px, py = [], []
    for i, j in zip(plan.rows, plan.cols):
        sx = mu.support_sample(part_x.cells[i], n_probe, rng)
        if isinstance(v, ContinuousVersion):
            sy = nu.support_sample(part_y.cells[j], n_probe, rng)
        else:
            sy = np.asarray(plan.target.points)[[j]]
        gx, gy = np.meshgrid(np.arange(len(sx)), np.arange(len(sy)), indexing="ij")
        px.append(sx[gx.ravel()])
        py.append(sy[gy.ravel()])
    px = np.concatenate(px)
    py = np.concatenate(py)
    to_probe = np.full(len(xs_a), np.inf)
    from_probe = []
    for start in range(0, len(px), 4096):
        sl = slice(start, start + 4096)
        D = np.maximum(X.pairwise(xs_a, px[sl]), Y.pairwise(ys_a, py[sl]))
        to_probe = np.minimum(to_probe, D.min(axis=1))
        from_probe.append(D.min(axis=0).max())
    value = float(max(to_probe.max(), max(from_probe)))
    return Estimate(value, 0.0, "probe")
