"""Projection maps extracted from a discrete plan.

A projection map is constant on each source cell.  The barycentric kind
averages the target anchors with the plan's row weights; the
geometric-median kind picks the net point minimising the weighted distance
sum to those anchors.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .partitions import PointedPartition
from .solver import HPlan

__all__ = [
    "ProjectionMap",
    "barycentric_projection",
    "gm_projection",
    "median_objective",
    "verify_nearness",
    "evaluate",
]

NEAR_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class ProjectionMap:
    """Piecewise-constant map: cell ``i`` of ``partition`` goes to ``targets[i]``."""

    partition: PointedPartition
    targets: np.ndarray
    kind: str
    quality: float
    target_space: object
    net: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("B", "GM"):
            raise ValueError("kind must be 'B' or 'GM'")
        if len(self.targets) != len(self.partition):
            raise ValueError("need one target per cell")
        t = np.array(self.targets)
        t.setflags(write=False)
        object.__setattr__(self, "targets", t)

    def __call__(self, x):
        return self.targets[self.partition.locate(x)]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "quality": self.quality,
            "cells": [{"cell": i, "target": np.asarray(t).tolist()}
                      for i, t in enumerate(self.targets)],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y"])
        for x, y in zip(self.partition.anchors, self.targets):
            xs = np.atleast_1d(x).tolist()
            ys = np.atleast_1d(y).tolist()
            w.writerow([";".join("%.17g" % v for v in xs), ";".join("%.17g" % v for v in ys)])
        return buf.getvalue()


def evaluate(T: ProjectionMap, x):
    """Target of the cell containing ``x``."""
    return T(x)


def _row_weight_matrix(plan: HPlan) -> np.ndarray:
    W = np.zeros(plan.shape)
    W[plan.rows, plan.cols] = plan.row_weights()
    return W


def _source_partition(plan: HPlan) -> PointedPartition:
    if plan.source.partition is None:
        raise ValueError("plan source has no partition to project from")
    return plan.source.partition


def barycentric_projection(plan: HPlan) -> ProjectionMap:
    """Per-cell weighted average of the target anchors.

    Cells with zero mass take the first target anchor.
    """
    space = plan.target.space
    if not getattr(space, "normed", False):
        raise TypeError(f"barycentric projection needs a normed target, got {space!r}; "
                        "use gm_projection instead")
    part = _source_partition(plan)
    ys = np.asarray(plan.target.points, dtype=float)
    flat = ys.reshape(len(ys), -1)
    out = np.repeat(flat[:1], plan.shape[0], axis=0)
    acc = np.zeros((plan.shape[0], flat.shape[1]))
    np.add.at(acc, plan.rows, plan.row_weights()[:, None] * flat[plan.cols])
    has = np.zeros(plan.shape[0], dtype=bool)
    has[plan.rows] = True
    out[has] = acc[has]
    targets = out.reshape((plan.shape[0],) + ys.shape[1:])
    return ProjectionMap(part, targets, "B", 0.0, space)


def median_objective(plan: HPlan, points) -> np.ndarray:
    """``V_i(y) = sum_j (pi_ij/mu_i) d(y, y_j)`` for every row ``i`` and point ``y``."""
    space = plan.target.space
    D = space.pairwise(points, plan.target.points)
    return _row_weight_matrix(plan) @ D.T


def gm_projection(plan: HPlan, net=None, net_radius: Optional[float] = None) -> ProjectionMap:
    """Approximate geometric medians by exhaustive search over a net.

    With the default net (the target anchors, an ``h``-net) the quality is 1.
    A custom net must come with its covering radius; the quality is then
    ``net_radius / h``.  Ties go to the lowest net index.  Zero-mass cells
    take the first target anchor.
    """
    space = plan.target.space
    part = _source_partition(plan)
    h = plan.h_bound
    if net is None:
        net = np.asarray(plan.target.points)
        quality = 1.0
    else:
        net = np.asarray(net)
        if len(net) == 0:
            raise ValueError("net must be non-empty")
        if net_radius is None:
            raise ValueError("a custom net needs its covering radius")
        quality = float(net_radius) / h if h > 0 else (0.0 if net_radius == 0 else np.inf)
    V = median_objective(plan, net)
    best = np.argmin(V, axis=1)
    targets = np.array(net[best])
    has = np.zeros(plan.shape[0], dtype=bool)
    has[plan.rows] = True
    targets[~has] = np.asarray(plan.target.points)[0]
    return ProjectionMap(part, targets, "GM", quality, space, net)


def verify_nearness(y, y_hat, targets, weights, kind: str, eps: float, space) -> bool:
    """Check the nearness inequality for a median (``GM``) or barycenter (``B``).

    GM: ``d(y, y_hat) <= eps + 2 V(y)``; B: ``d(y, y_hat) <= V(y)``, where
    ``V(y) = sum_j w_j d(y, y_j)``.
    """
    w = np.asarray(weights, dtype=float)
    V = float(np.dot(w, space.pairwise([y], targets)[0]))
    d = float(space.pairwise([y], [y_hat])[0, 0])
    if kind == "GM":
        return d <= eps + 2 * V + NEAR_SLACK
    if kind == "B":
        return d <= V + NEAR_SLACK
    raise ValueError("kind must be 'B' or 'GM'")
