"""Pointed partitions of compact spaces and the discrete measures they induce."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .spaces import (
    MASS_TOL,
    Box,
    BoxCell,
    FiniteCell,
    FiniteMeasure,
    FiniteSpace,
    Interval,
    Measure1D,
    MeasureBox,
    Segment,
)

__all__ = [
    "PointedPartition",
    "DiscreteMeasure",
    "uniform_interval_partition",
    "grid_partition",
    "greedy_cover_partition",
    "singleton_partition",
    "discretize",
]


def _default_measure(space):
    if isinstance(space, Interval):
        return Measure1D.uniform(space)
    if isinstance(space, Box):
        return MeasureBox.uniform(space)
    if isinstance(space, FiniteSpace):
        return FiniteMeasure(space, np.full(space.n, 1.0 / space.n))
    raise TypeError(f"no default measure on {space!r}")


@dataclass(frozen=True, eq=False)
class PointedPartition:
    """Cells, one anchor per cell and the measure weight of each cell.

    ``edges`` is set for interval partitions (cell ``i`` spans
    ``edges[i]..edges[i+1]``) and ``axis_edges`` for grid partitions; both
    speed up :meth:`locate`.
    """

    space: object
    cells: tuple
    anchors: np.ndarray
    weights: np.ndarray
    h_bound: float
    edges: Optional[np.ndarray] = None
    axis_edges: Optional[tuple] = None

    def __post_init__(self):
        anchors = np.asarray(self.anchors)
        weights = np.asarray(self.weights, dtype=float)
        if len(self.cells) == 0:
            raise ValueError("partition needs at least one cell")
        if len(anchors) != len(self.cells) or len(weights) != len(self.cells):
            raise ValueError("need one anchor and one weight per cell")
        if np.any(weights < 0) or abs(math.fsum(weights) - 1.0) > MASS_TOL:
            raise ValueError("cell weights must be non-negative and sum to 1")
        for i, (cell, a) in enumerate(zip(self.cells, anchors)):
            if not cell.contains(a):
                raise ValueError(f"anchor {a!r} lies outside cell {i}")
        anchors = anchors.copy()
        weights = weights.copy()
        anchors.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return len(self.cells)

    @property
    def positive(self) -> np.ndarray:
        """Indices of cells with positive weight."""
        return np.flatnonzero(self.weights > 0)

    def locate(self, x) -> np.ndarray:
        """Index of the cell containing each point of ``x``."""
        if self.edges is not None:
            x = np.asarray(x, dtype=float)
            e = self.edges
            if np.any((x < e[0]) | (x > e[-1])):
                raise ValueError("point outside the partitioned interval")
            return np.minimum(np.searchsorted(e, x, side="right") - 1, len(e) - 2)
        if self.axis_edges is not None:
            x = np.asarray(x, dtype=float)
            idx = np.zeros(x.shape[:-1], dtype=int)
            stride = 1
            for k, e in enumerate(self.axis_edges):
                xk = x[..., k]
                if np.any((xk < e[0]) | (xk > e[-1])):
                    raise ValueError("point outside the partitioned box")
                ik = np.minimum(np.searchsorted(e, xk, side="right") - 1, len(e) - 2)
                idx = idx + stride * ik
                stride *= len(e) - 1
            return idx
        x = np.asarray(x)
        out = np.full(x.shape, -1, dtype=int)
        for i, cell in enumerate(self.cells):
            out[cell.contains(x)] = i
        if np.any(out < 0):
            raise ValueError("point outside all cells")
        return out

    def with_measure(self, m) -> "PointedPartition":
        """Same cells and anchors, weights recomputed from ``m``."""
        w = np.array([m.mass(c) for c in self.cells])
        w = np.where(np.abs(w) < 1e-300, 0.0, w)
        return PointedPartition(self.space, self.cells, self.anchors, w, self.h_bound,
                                self.edges, self.axis_edges)

    def to_dict(self) -> dict:
        return {
            "space": self.space.to_spec(),
            "h_bound": self.h_bound,
            "cells": [c.to_dict() for c in self.cells],
            "anchors": np.asarray(self.anchors).tolist(),
            "weights": self.weights.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str, space) -> "PointedPartition":
        d = json.loads(text)
        kinds = {"interval": Segment, "box": BoxCell, "finite": FiniteCell}
        cell_cls = kinds[space.kind]
        cells = tuple(cell_cls.from_dict(c) for c in d["cells"])
        edges = axis_edges = None
        if space.kind == "interval":
            edges = np.array([c.lo for c in cells] + [cells[-1].hi])
        return cls(space, cells, np.asarray(d["anchors"]), np.asarray(d["weights"]),
                   float(d["h_bound"]), edges, axis_edges)


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Atoms at the anchors of a partition, weighted by cell mass.

    ``measure`` is the measure that was discretized; it is kept so that the
    plan transforms can integrate against it.
    """

    points: np.ndarray
    weights: np.ndarray
    space: object
    partition: Optional[PointedPartition] = None
    measure: object = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(w) != len(self.points):
            raise ValueError("need one weight per point")
        if np.any(w < 0) or abs(math.fsum(w) - 1.0) > MASS_TOL:
            raise ValueError("weights must be non-negative and sum to 1")

    @classmethod
    def from_atoms(cls, points, weights, space) -> "DiscreteMeasure":
        return cls(np.asarray(points), np.asarray(weights, dtype=float), space)

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def h_bound(self) -> float:
        return 0.0 if self.partition is None else self.partition.h_bound


def _interval_anchors(edges, anchor_rule):
    k = len(edges) - 1
    lo, hi = edges[:-1], edges[1:]
    if isinstance(anchor_rule, str):
        if anchor_rule == "center":
            return 0.5 * (lo + hi)
        if anchor_rule == "left":
            return lo.copy()
        if anchor_rule == "right":
            right = np.nextafter(hi, lo)
            right[-1] = hi[-1]
            return right
        raise ValueError(f"unknown anchor rule {anchor_rule!r}")
    offsets = np.asarray(anchor_rule, dtype=float)
    if offsets.shape != (k,):
        raise ValueError(f"need {k} anchor offsets, got shape {offsets.shape}")
    return 0.5 * (lo + hi) + offsets


def uniform_interval_partition(space: Interval, k: int, anchor_rule="center",
                               measure=None) -> PointedPartition:
    """``k`` equal cells ``[lo, hi)`` (the last one closed) on an interval.

    ``anchor_rule`` is ``"center"``, ``"left"``, ``"right"`` or an array of
    offsets from the cell centers.  ``measure`` defaults to the normalised
    length measure.
    """
    if not isinstance(space, Interval):
        raise TypeError("uniform_interval_partition needs an Interval")
    if int(k) != k or k < 1:
        raise ValueError("k must be a positive integer")
    k = int(k)
    edges = space.lo + (space.hi - space.lo) * np.arange(k + 1) / k
    edges[-1] = space.hi
    cells = tuple(Segment(float(edges[i]), float(edges[i + 1]), True, i == k - 1)
                  for i in range(k))
    anchors = _interval_anchors(edges, anchor_rule)
    m = _default_measure(space) if measure is None else measure
    weights = np.array([m.mass(c) for c in cells])
    h = float(np.max(np.diff(edges)))
    return PointedPartition(space, cells, anchors, weights, h, edges=edges)


def grid_partition(space: Box, k_per_axis: Sequence[int], anchor_rule="center",
                   measure=None) -> PointedPartition:
    """Tensor product of uniform interval partitions, axis 0 varying fastest."""
    if not isinstance(space, Box):
        raise TypeError("grid_partition needs a Box")
    ks = [int(k) for k in k_per_axis]
    if len(ks) != space.dim:
        raise ValueError("need one cell count per axis")
    if any(k <= 0 for k in ks):
        raise ValueError("cell counts must be positive")
    axis_parts = [uniform_interval_partition(Interval(lo, hi), k, anchor_rule)
                  for lo, hi, k in zip(space.lows, space.highs, ks)]
    cells, anchors = [], []
    for multi in np.ndindex(*reversed(ks)):
        idx = tuple(reversed(multi))
        cells.append(BoxCell(tuple(p.cells[i] for p, i in zip(axis_parts, idx))))
        anchors.append([p.anchors[i] for p, i in zip(axis_parts, idx)])
    m = _default_measure(space) if measure is None else measure
    weights = np.array([m.mass(c) for c in cells])
    h = max(p.h_bound for p in axis_parts)
    return PointedPartition(space, tuple(cells), np.array(anchors), weights, h,
                            axis_edges=tuple(p.edges for p in axis_parts))


def greedy_cover_partition(space: FiniteSpace, h: float, measure=None) -> PointedPartition:
    """Partition a finite space by a minimal cover with balls of diameter at most ``h``.

    Balls of radius ``h/2`` are centred greedily on the lowest uncovered
    point, redundant balls are pruned, and cell ``k`` is ball ``k`` minus the
    earlier balls.  Each anchor is a point of its ball lying in no other ball
    when there is one, otherwise any point of the cell.
    """
    if not isinstance(space, FiniteSpace):
        raise TypeError("greedy_cover_partition needs a FiniteSpace")
    if not h > 0:
        raise ValueError("h must be positive")
    n = space.n
    D = space.dist
    r = 0.5 * h * (1 + 1e-12)
    balls = []
    covered = np.zeros(n, dtype=bool)
    while not covered.all():
        c = int(np.flatnonzero(~covered)[0])
        ball = D[c] <= r
        balls.append(ball)
        covered |= ball
    # drop balls whose points are all covered by the others
    k = 0
    while k < len(balls):
        others = np.zeros(n, dtype=bool)
        for j, b in enumerate(balls):
            if j != k:
                others |= b
        if len(balls) > 1 and not (balls[k] & ~others).any():
            balls.pop(k)
        else:
            k += 1
    cells, anchors = [], []
    seen = np.zeros(n, dtype=bool)
    for k, ball in enumerate(balls):
        members = np.flatnonzero(ball & ~seen)
        seen |= ball
        if len(members) == 0:
            continue
        others = np.zeros(n, dtype=bool)
        for j, b in enumerate(balls):
            if j != k:
                others |= b
        private = [p for p in members if not others[p]]
        anchors.append(int(private[0] if private else members[0]))
        cells.append(FiniteCell(tuple(int(p) for p in members)))
    m = _default_measure(space) if measure is None else measure
    weights = np.array([m.mass(c) for c in cells])
    h_bound = max(float(D[np.ix_(c.points, c.points)].max()) for c in cells)
    return PointedPartition(space, tuple(cells), np.array(anchors, dtype=int), weights, h_bound)


def singleton_partition(space: FiniteSpace, measure=None) -> PointedPartition:
    """Every point its own cell; ``h_bound`` is zero."""
    cells = tuple(FiniteCell((i,)) for i in range(space.n))
    m = _default_measure(space) if measure is None else measure
    weights = np.array([m.mass(c) for c in cells])
    return PointedPartition(space, cells, np.arange(space.n), weights, 0.0)


def discretize(m, p: PointedPartition) -> DiscreteMeasure:
    """Atoms at the anchors of ``p`` carrying the ``m``-mass of each cell.

    Zero-mass cells are kept, so index sets line up with the partition.
    """
    if getattr(m, "space", None) != p.space and not (
            isinstance(p.space, FiniteSpace) and m.space is p.space):
        raise TypeError("measure and partition live on different spaces")
    q = p.with_measure(m)
    return DiscreteMeasure(q.anchors, q.weights, q.space, q, m)
