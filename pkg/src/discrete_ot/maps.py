"""Piecewise-affine maps on an interval, the class on which integrals are exact."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .spaces import Interval, Segment

__all__ = ["PiecewiseAffineMap", "as_piecewise"]


@dataclass(frozen=True, eq=False)
class PiecewiseAffineMap:
    """``T(x) = slope_k * x + intercept_k`` for ``x`` in piece ``k``.

    The pieces must be disjoint segments; together they should cover the
    support of whatever measure the map is integrated against.
    """

    pieces: tuple

    def __post_init__(self):
        pieces = tuple((seg, float(a), float(b)) for seg, a, b in self.pieces)
        if not pieces:
            raise ValueError("need at least one piece")
        pieces = tuple(sorted(pieces, key=lambda p: (p[0].lo, p[0].hi)))
        object.__setattr__(self, "pieces", pieces)
        object.__setattr__(self, "_lo", np.array([p[0].lo for p in pieces]))
        object.__setattr__(self, "_hi", np.array([p[0].hi for p in pieces]))

    @classmethod
    def constant(cls, value: float, domain: Segment) -> "PiecewiseAffineMap":
        return cls(((domain, 0.0, value),))

    @classmethod
    def affine(cls, slope: float, intercept: float, domain: Segment) -> "PiecewiseAffineMap":
        return cls(((domain, slope, intercept),))

    @classmethod
    def identity(cls, domain: Segment) -> "PiecewiseAffineMap":
        return cls(((domain, 1.0, 0.0),))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, np.nan)
        for seg, a, b in self.candidates(float(np.min(x, initial=np.inf)),
                                         float(np.max(x, initial=-np.inf))):
            mask = seg.contains(x)
            if np.ndim(mask) == 0:
                mask = np.asarray(mask)
            out = np.where(mask, a * x + b, out)
        if np.any(np.isnan(out)):
            raise ValueError("map evaluated outside its pieces")
        return out if out.ndim else float(out)

    def candidates(self, lo: float, hi: float):
        """Pieces whose closure meets ``lo..hi``."""
        idx = np.flatnonzero((self._lo <= hi) & (self._hi >= lo))
        return [self.pieces[k] for k in idx]

    def restricted(self, cell: Segment):
        """Pieces intersected with ``cell`` as ``(segment, slope, intercept)``."""
        out = []
        for seg, a, b in self.candidates(cell.lo, cell.hi):
            s = seg.intersect(cell)
            if s is not None:
                out.append((s, a, b))
        return out

    def image_range(self, cell: Segment):
        """``(inf, sup)`` of ``T`` over ``cell``, limits at open ends included."""
        vals = []
        for s, a, b in self.restricted(cell):
            vals.extend([a * s.lo + b, a * s.hi + b])
        if not vals:
            return None
        return min(vals), max(vals)

    def breakpoints(self) -> np.ndarray:
        return np.unique(np.concatenate([self._lo, self._hi]))


def as_piecewise(T):
    """Convert a map to :class:`PiecewiseAffineMap` when it is one in disguise.

    Handles projection maps over interval partitions; returns ``None`` for
    anything else.
    """
    if isinstance(T, PiecewiseAffineMap):
        return T
    part = getattr(T, "partition", None)
    if (part is not None and isinstance(part.space, Interval)
            and isinstance(getattr(T, "target_space", None), Interval)):
        return PiecewiseAffineMap(tuple((cell, 0.0, float(t))
                                        for cell, t in zip(part.cells, T.targets)))
    return None
