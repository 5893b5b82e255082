"""Compact metric spaces, measures on them, cost functions and moduli of continuity.

Points are represented as plain floats for one-dimensional spaces (intervals,
circles), as ``(d,)`` arrays for boxes and as integer indices for finite
spaces.  Every distance oracle is vectorised over leading axes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "Interval",
    "Box",
    "Circle",
    "FiniteSpace",
    "ProductMetric",
    "Segment",
    "BoxCell",
    "FiniteCell",
    "Measure1D",
    "MeasureBox",
    "FiniteMeasure",
    "CostFunction",
    "ModulusEstimate",
    "get_cost",
    "matrix_cost",
    "grid_lipschitz",
    "estimate_modulus",
    "measure_of_set",
    "gauss_nodes",
]

MASS_TOL = 1e-12


# ---------------------------------------------------------------------------
# cells: the sets we know how to measure exactly


@dataclass(frozen=True)
class Segment:
    """An interval ``lo..hi`` with explicit endpoint membership."""

    lo: float
    hi: float
    closed_left: bool = True
    closed_right: bool = False

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"inverted interval [{self.lo}, {self.hi}]")

    @property
    def is_empty(self) -> bool:
        if self.lo < self.hi:
            return False
        return not (self.closed_left and self.closed_right)

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def diameter(self) -> float:
        return 0.0 if self.is_empty else self.hi - self.lo

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        left = (x >= self.lo) if self.closed_left else (x > self.lo)
        right = (x <= self.hi) if self.closed_right else (x < self.hi)
        out = left & right
        return bool(out) if out.ndim == 0 else out

    def intersect(self, other: "Segment") -> Optional["Segment"]:
        if self.lo > other.lo:
            lo, cl = self.lo, self.closed_left
        elif other.lo > self.lo:
            lo, cl = other.lo, other.closed_left
        else:
            lo, cl = self.lo, self.closed_left and other.closed_left
        if self.hi < other.hi:
            hi, cr = self.hi, self.closed_right
        elif other.hi < self.hi:
            hi, cr = other.hi, other.closed_right
        else:
            hi, cr = self.hi, self.closed_right and other.closed_right
        if lo > hi:
            return None
        seg = Segment(lo, hi, cl, cr)
        return None if seg.is_empty else seg

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi,
                "closed_left": self.closed_left, "closed_right": self.closed_right}

    @classmethod
    def from_dict(cls, d) -> "Segment":
        return cls(float(d["lo"]), float(d["hi"]), bool(d["closed_left"]), bool(d["closed_right"]))


@dataclass(frozen=True)
class BoxCell:
    """Cartesian product of segments; diameter is taken in the sup metric."""

    sides: tuple

    @property
    def diameter(self) -> float:
        return max(s.diameter for s in self.sides)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        out = np.ones(x.shape[:-1], dtype=bool)
        for k, s in enumerate(self.sides):
            out &= s.contains(x[..., k])
        return bool(out) if out.ndim == 0 else out

    def intersect(self, other: "BoxCell") -> Optional["BoxCell"]:
        sides = []
        for a, b in zip(self.sides, other.sides):
            s = a.intersect(b)
            if s is None:
                return None
            sides.append(s)
        return BoxCell(tuple(sides))

    def to_dict(self) -> dict:
        return {"sides": [s.to_dict() for s in self.sides]}

    @classmethod
    def from_dict(cls, d) -> "BoxCell":
        return cls(tuple(Segment.from_dict(s) for s in d["sides"]))


@dataclass(frozen=True)
class FiniteCell:
    """A subset of a finite space, stored as sorted point indices."""

    points: tuple

    def contains(self, x):
        x = np.asarray(x)
        out = np.isin(x, self.points)
        return bool(out) if out.ndim == 0 else out

    def intersect(self, other: "FiniteCell") -> Optional["FiniteCell"]:
        common = tuple(sorted(set(self.points) & set(other.points)))
        return FiniteCell(common) if common else None

    def to_dict(self) -> dict:
        return {"points": list(self.points)}

    @classmethod
    def from_dict(cls, d) -> "FiniteCell":
        return cls(tuple(int(p) for p in d["points"]))


# ---------------------------------------------------------------------------
# spaces


@dataclass(frozen=True)
class Interval:
    lo: float = 0.0
    hi: float = 1.0
    kind = "interval"
    normed = True
    dim = 1

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("interval needs lo < hi")

    @property
    def diameter(self) -> float:
        return self.hi - self.lo

    def distance(self, x, y):
        return np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))

    def pairwise(self, a, b):
        a = np.asarray(a, dtype=float).reshape(-1)
        b = np.asarray(b, dtype=float).reshape(-1)
        return np.abs(a[:, None] - b[None, :])

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        out = (x >= self.lo) & (x <= self.hi)
        return bool(out) if out.ndim == 0 else out

    def sample(self, n: int, rng: np.random.Generator):
        return rng.uniform(self.lo, self.hi, size=n)

    def whole(self) -> Segment:
        return Segment(self.lo, self.hi, True, True)

    def to_spec(self) -> str:
        return f"interval:{self.lo!r}:{self.hi!r}"


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in R^d with the sup metric."""

    lows: tuple
    highs: tuple
    kind = "box"
    normed = True

    def __post_init__(self):
        object.__setattr__(self, "lows", tuple(float(v) for v in self.lows))
        object.__setattr__(self, "highs", tuple(float(v) for v in self.highs))
        if len(self.lows) != len(self.highs) or not self.lows:
            raise ValueError("box bounds must be non-empty and of equal length")
        if any(lo >= hi for lo, hi in zip(self.lows, self.highs)):
            raise ValueError("box needs lo < hi on every axis")

    @classmethod
    def unit(cls, d: int) -> "Box":
        return cls((0.0,) * d, (1.0,) * d)

    @property
    def dim(self) -> int:
        return len(self.lows)

    @property
    def diameter(self) -> float:
        return max(hi - lo for lo, hi in zip(self.lows, self.highs))

    def distance(self, x, y):
        d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
        return d.max(axis=-1)

    def pairwise(self, a, b):
        a = np.asarray(a, dtype=float).reshape(-1, self.dim)
        b = np.asarray(b, dtype=float).reshape(-1, self.dim)
        return np.abs(a[:, None, :] - b[None, :, :]).max(axis=-1)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        out = np.all((x >= np.array(self.lows)) & (x <= np.array(self.highs)), axis=-1)
        return bool(out) if out.ndim == 0 else out

    def sample(self, n: int, rng: np.random.Generator):
        return rng.uniform(self.lows, self.highs, size=(n, self.dim))

    def whole(self) -> BoxCell:
        return BoxCell(tuple(Segment(lo, hi, True, True) for lo, hi in zip(self.lows, self.highs)))

    def to_spec(self) -> str:
        parts = ",".join(f"{lo!r}:{hi!r}" for lo, hi in zip(self.lows, self.highs))
        return f"box:{parts}"


@dataclass(frozen=True)
class Circle:
    """Flat circle of given circumference with the geodesic (arc-length) metric.

    Points are parametrised by arc length in ``[0, circumference)``.
    """

    circumference: float = 1.0
    kind = "circle"
    normed = False
    dim = 1

    @property
    def diameter(self) -> float:
        return self.circumference / 2

    def distance(self, x, y):
        L = self.circumference
        d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) % L
        return np.minimum(d, L - d)

    def pairwise(self, a, b):
        a = np.asarray(a, dtype=float).reshape(-1)
        b = np.asarray(b, dtype=float).reshape(-1)
        return self.distance(a[:, None], b[None, :])

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        out = (x >= 0) & (x < self.circumference)
        return bool(out) if out.ndim == 0 else out

    def sample(self, n: int, rng: np.random.Generator):
        return rng.uniform(0.0, self.circumference, size=n)

    def to_spec(self) -> str:
        return f"circle:{self.circumference!r}"


@dataclass(frozen=True, eq=False)
class FiniteSpace:
    """Finite metric space given by an explicit distance matrix.

    Points are the integers ``0..n-1``.  ``coords`` optionally records where
    the points came from (used only for reporting and plotting).
    """

    dist: np.ndarray
    coords: Optional[np.ndarray] = None
    kind = "finite"
    normed = False
    dim = 1

    def __post_init__(self):
        D = np.asarray(self.dist, dtype=float)
        if D.ndim != 2 or D.shape[0] != D.shape[1] or D.shape[0] == 0:
            raise ValueError("distance matrix must be square and non-empty")
        if np.any(D < 0) or np.any(np.abs(np.diag(D)) > 0):
            raise ValueError("distance matrix must be non-negative with zero diagonal")
        if not np.allclose(D, D.T, atol=1e-12, rtol=0):
            raise ValueError("distance matrix must be symmetric")
        D.setflags(write=False)
        object.__setattr__(self, "dist", D)

    @classmethod
    def from_points(cls, points, metric) -> "FiniteSpace":
        """Build from ``points`` and a space (or callable) providing ``pairwise``."""
        pts = np.asarray(points, dtype=float)
        pairwise = metric.pairwise if hasattr(metric, "pairwise") else metric
        D = np.asarray(pairwise(pts, pts), dtype=float)
        D = 0.5 * (D + D.T)
        np.fill_diagonal(D, 0.0)
        return cls(D, pts)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    @property
    def diameter(self) -> float:
        return float(self.dist.max())

    def distance(self, x, y):
        return self.dist[np.asarray(x, dtype=int), np.asarray(y, dtype=int)]

    def pairwise(self, a, b):
        a = np.asarray(a, dtype=int).reshape(-1)
        b = np.asarray(b, dtype=int).reshape(-1)
        return self.dist[np.ix_(a, b)]

    def contains(self, x):
        x = np.asarray(x)
        out = (x >= 0) & (x < self.n) & (x == np.floor(x))
        return bool(out) if out.ndim == 0 else out

    def sample(self, n: int, rng: np.random.Generator):
        return rng.integers(0, self.n, size=n)

    def whole(self) -> FiniteCell:
        return FiniteCell(tuple(range(self.n)))

    def to_spec(self) -> str:
        return f"finite:{self.n}"


@dataclass(frozen=True)
class ProductMetric:
    """``X x Y`` with the max of the factor distances."""

    X: object
    Y: object

    @property
    def diameter(self) -> float:
        return max(self.X.diameter, self.Y.diameter)

    def distance(self, z1, z2):
        (x1, y1), (x2, y2) = z1, z2
        return np.maximum(self.X.distance(x1, x2), self.Y.distance(y1, y2))


# ---------------------------------------------------------------------------
# quadrature helper


def gauss_nodes(lo: float, hi: float, n: int):
    """Gauss-Legendre nodes and weights for ``int_lo^hi``."""
    t, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (t + 1.0), half * w


# ---------------------------------------------------------------------------
# measures


@dataclass(frozen=True, eq=False)
class Measure1D:
    """Probability on an interval: atoms plus piecewise-constant densities.

    ``atoms`` holds ``(location, mass)`` pairs and ``densities`` holds
    ``(lo, hi, height)`` triples; the total mass must be one.
    """

    space: Interval
    atoms: tuple = ()
    densities: tuple = ()

    def __post_init__(self):
        atoms = tuple((float(x), float(m)) for x, m in self.atoms)
        dens = tuple((float(a), float(b), float(h)) for a, b, h in self.densities)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "densities", dens)
        for x, m in atoms:
            if m < 0:
                raise ValueError("atom masses must be non-negative")
            if not self.space.contains(x):
                raise ValueError(f"atom at {x} lies outside {self.space}")
        for a, b, h in dens:
            if h < 0 or a >= b:
                raise ValueError("density pieces need lo < hi and height >= 0")
            if a < self.space.lo or b > self.space.hi:
                raise ValueError("density piece outside the space")
        total = self.total_mass
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"measure has total mass {total!r}, expected 1")

    @classmethod
    def uniform(cls, space: Interval, lo=None, hi=None, weight: float = 1.0) -> "Measure1D":
        lo = space.lo if lo is None else lo
        hi = space.hi if hi is None else hi
        return cls(space, (), ((lo, hi, weight / (hi - lo)),))

    @property
    def total_mass(self) -> float:
        return math.fsum([m for _, m in self.atoms] + [h * (b - a) for a, b, h in self.densities])

    def mass(self, cell: Segment) -> float:
        if cell is None:
            return 0.0
        total = [m for x, m in self.atoms if cell.contains(x)]
        for a, b, h in self.densities:
            lo, hi = max(a, cell.lo), min(b, cell.hi)
            if hi > lo:
                total.append(h * (hi - lo))
        return math.fsum(total)

    def pieces(self, cell: Segment):
        """Density pieces restricted to ``cell`` as ``(lo, hi, height)``."""
        out = []
        for a, b, h in self.densities:
            lo, hi = max(a, cell.lo), min(b, cell.hi)
            if hi > lo and h > 0:
                out.append((lo, hi, h))
        return out

    def atoms_in(self, cell: Segment):
        return [(x, m) for x, m in self.atoms if m > 0 and cell.contains(x)]

    def quadrature(self, cell: Segment, n: int):
        """Nodes and weights integrating against ``mu`` restricted to ``cell``."""
        xs, ws = [], []
        for x, m in self.atoms_in(cell):
            xs.append(np.array([x]))
            ws.append(np.array([m]))
        for lo, hi, h in self.pieces(cell):
            t, w = gauss_nodes(lo, hi, n)
            xs.append(t)
            ws.append(h * w)
        if not xs:
            return np.zeros(0), np.zeros(0)
        return np.concatenate(xs), np.concatenate(ws)

    def support_sample(self, cell: Segment, n: int, rng: np.random.Generator):
        """Points of ``supp(mu|cell)``: atoms, piece endpoints and uniform draws."""
        pts = [x for x, _ in self.atoms_in(cell)]
        for lo, hi, _ in self.pieces(cell):
            pts.extend([lo, hi])
            pts.extend(rng.uniform(lo, hi, size=n).tolist())
        return np.asarray(pts, dtype=float)

    def to_spec(self) -> str:
        terms = [f"{m!r}*delta({x!r})" for x, m in self.atoms]
        terms += [f"{h * (b - a)!r}*uniform({a!r},{b!r})" for a, b, h in self.densities]
        return " + ".join(terms)


def measure_of_set(m: Measure1D, lo: float, hi: float,
                   closed_left: bool = True, closed_right: bool = False) -> float:
    """Exact ``m``-mass of the interval ``lo..hi`` with the given endpoint flags."""
    if lo > hi:
        raise ValueError(f"inverted interval [{lo}, {hi}]")
    if lo < m.space.lo or hi > m.space.hi:
        raise ValueError("interval is not inside the space")
    seg = Segment(lo, hi, closed_left, closed_right)
    return 0.0 if seg.is_empty else m.mass(seg)


@dataclass(frozen=True, eq=False)
class MeasureBox:
    """Probability on a box: atoms plus densities constant on sub-boxes."""

    space: Box
    atoms: tuple = ()
    densities: tuple = ()

    def __post_init__(self):
        atoms = tuple((np.asarray(x, dtype=float), float(m)) for x, m in self.atoms)
        dens = tuple((np.asarray(a, dtype=float), np.asarray(b, dtype=float), float(h))
                     for a, b, h in self.densities)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "densities", dens)
        for x, m in atoms:
            if m < 0 or not self.space.contains(x):
                raise ValueError("atoms must have non-negative mass and lie in the box")
        for a, b, h in dens:
            if h < 0 or np.any(a >= b):
                raise ValueError("density boxes need lo < hi and height >= 0")
        total = self.total_mass
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"measure has total mass {total!r}, expected 1")

    @classmethod
    def uniform(cls, space: Box) -> "MeasureBox":
        lo, hi = np.array(space.lows), np.array(space.highs)
        return cls(space, (), ((lo, hi, 1.0 / float(np.prod(hi - lo))),))

    @property
    def total_mass(self) -> float:
        return math.fsum([m for _, m in self.atoms]
                         + [h * float(np.prod(b - a)) for a, b, h in self.densities])

    def mass(self, cell: BoxCell) -> float:
        if cell is None:
            return 0.0
        total = [m for x, m in self.atoms if cell.contains(x)]
        for a, b, h in self.densities:
            vol = 1.0
            for k, s in enumerate(cell.sides):
                lo, hi = max(a[k], s.lo), min(b[k], s.hi)
                vol *= max(hi - lo, 0.0)
            total.append(h * vol)
        return math.fsum(total)

    def quadrature(self, cell: BoxCell, n: int):
        xs, ws = [], []
        for x, m in self.atoms:
            if m > 0 and cell.contains(x):
                xs.append(x[None, :])
                ws.append(np.array([m]))
        for a, b, h in self.densities:
            axes, wts = [], []
            for k, s in enumerate(cell.sides):
                lo, hi = max(a[k], s.lo), min(b[k], s.hi)
                if hi <= lo:
                    break
                t, w = gauss_nodes(lo, hi, n)
                axes.append(t)
                wts.append(w)
            else:
                if h > 0:
                    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
                    wgrid = np.prod(np.stack(np.meshgrid(*wts, indexing="ij"), axis=-1), axis=-1).reshape(-1)
                    xs.append(grid)
                    ws.append(h * wgrid)
        if not xs:
            return np.zeros((0, self.space.dim)), np.zeros(0)
        return np.concatenate(xs), np.concatenate(ws)

    def support_sample(self, cell: BoxCell, n: int, rng: np.random.Generator):
        pts = [x for x, m in self.atoms if m > 0 and cell.contains(x)]
        for a, b, h in self.densities:
            lo = np.array([max(a[k], s.lo) for k, s in enumerate(cell.sides)])
            hi = np.array([min(b[k], s.hi) for k, s in enumerate(cell.sides)])
            if h > 0 and np.all(hi > lo):
                pts.extend(rng.uniform(lo, hi, size=(n, len(lo))))
                pts.extend([lo, hi])
        return np.asarray(pts, dtype=float).reshape(-1, self.space.dim)


@dataclass(frozen=True, eq=False)
class FiniteMeasure:
    """Probability on a finite space, one weight per point."""

    space: FiniteSpace
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).copy()
        if w.shape != (self.space.n,):
            raise ValueError("need one weight per point")
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        if abs(math.fsum(w) - 1.0) > MASS_TOL:
            raise ValueError(f"weights sum to {math.fsum(w)!r}, expected 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def dirac(cls, space: FiniteSpace, index: int) -> "FiniteMeasure":
        w = np.zeros(space.n)
        w[index] = 1.0
        return cls(space, w)

    def mass(self, cell: FiniteCell) -> float:
        if cell is None:
            return 0.0
        return math.fsum(self.weights[list(cell.points)])

    def quadrature(self, cell: FiniteCell, n: int = 1):
        pts = np.array([p for p in cell.points if self.weights[p] > 0], dtype=int)
        return pts, self.weights[pts]

    def support_sample(self, cell: FiniteCell, n: int, rng: np.random.Generator):
        return np.array([p for p in cell.points if self.weights[p] > 0], dtype=int)


# ---------------------------------------------------------------------------
# costs


@dataclass(frozen=True)
class CostFunction:
    """Cost ``c(x, y)`` with an optional Lipschitz constant for the product metric.

    ``func`` must be vectorised and broadcast over its two arguments.
    ``grad`` (optional) returns ``(dc/dx, dc/dy)`` for one-dimensional factors.
    """

    name: str
    func: Callable
    lipschitz: Optional[float] = None
    grad: Optional[Callable] = field(default=None, compare=False)

    def __call__(self, x, y):
        return self.func(x, y)

    def matrix(self, xs, ys) -> np.ndarray:
        """``c_ij = c(x_i, y_j)`` for two point lists."""
        xs = np.asarray(xs)
        ys = np.asarray(ys)
        if xs.ndim <= 1 and ys.ndim <= 1:
            C = self.func(xs.reshape(-1)[:, None], ys.reshape(-1)[None, :])
        else:
            C = self.func(xs[:, None, ...], ys[None, :, ...])
        C = np.asarray(C, dtype=float)
        return np.broadcast_to(C, (len(xs), len(ys))).copy()

    def with_lipschitz(self, L: float) -> "CostFunction":
        return CostFunction(self.name, self.func, float(L), self.grad)


def _power(x, y, p):
    return np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) ** p


def _power_grad(x, y, p):
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    g = p * np.abs(d) ** (p - 1) * np.sign(d)
    return g, -g


def _quadratic(x, y):
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return d * d


def _quadratic_grad(x, y):
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return 2 * d, -2 * d


def _diagonal_indicator(x, y):
    return np.where(np.asarray(x, dtype=float) == np.asarray(y, dtype=float), 0.0, 1.0)


def _pinched(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return (x - y) ** 2 * (x - 0.5) ** 2 * (y - 0.5) ** 2


def _pinched_grad(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a, b, c = (x - y) ** 2, (x - 0.5) ** 2, (y - 0.5) ** 2
    gx = 2 * (x - y) * b * c + a * 2 * (x - 0.5) * c
    gy = -2 * (x - y) * b * c + a * b * 2 * (y - 0.5)
    return gx, gy


def _antidiag(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return (x - y) ** 2 * (1 - x - y) ** 2


def _antidiag_grad(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a, b = (x - y) ** 2, (1 - x - y) ** 2
    gx = 2 * (x - y) * b - 2 * a * (1 - x - y)
    gy = -2 * (x - y) * b - 2 * a * (1 - x - y)
    return gx, gy


def _constant(x, y, value):
    return np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, value, dtype=float)


def _zero_grad(x, y):
    z = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
    return z, z


def _table(x, y, table):
    return table[np.asarray(x, dtype=int), np.asarray(y, dtype=int)]


def matrix_cost(table) -> CostFunction:
    """Cost on a pair of finite spaces given as an explicit ``|X| x |Y|`` table."""
    T = np.array(table, dtype=float)
    if T.ndim != 2:
        raise ValueError("cost table must be two-dimensional")
    T.setflags(write=False)
    rows = ";".join(",".join(repr(float(v)) for v in row) for row in T)
    return CostFunction(f"matrix:{rows}", partial(_table, table=T))


def get_cost(name: str) -> CostFunction:
    """Look up a builtin cost by registry name.

    Known names: ``quadratic``, ``power:p``, ``constant:v``, ``matrix:a,b;c,d``,
    ``ex33-diagonal``, ``ex34-pinched``, ``ex45-antidiag``.
    """
    key, _, arg = name.partition(":")
    if key == "quadratic":
        return CostFunction("quadratic", _quadratic, grad=_quadratic_grad)
    if key == "power":
        p = float(arg)
        if p < 1:
            raise ValueError("power cost needs p >= 1")
        return CostFunction(name, partial(_power, p=p), grad=partial(_power_grad, p=p))
    if key == "constant":
        v = float(arg)
        return CostFunction(name, partial(_constant, value=v), lipschitz=0.0, grad=_zero_grad)
    if key == "matrix":
        return matrix_cost([[float(v) for v in row.split(",")] for row in arg.split(";")])
    if key == "ex33-diagonal":
        return CostFunction(name, _diagonal_indicator)
    if key == "ex34-pinched":
        return CostFunction(name, _pinched, grad=_pinched_grad)
    if key == "ex45-antidiag":
        return CostFunction(name, _antidiag, grad=_antidiag_grad)
    raise KeyError(f"unknown cost {name!r}")


def grid_lipschitz(c: CostFunction, product: ProductMetric, n: int = 401) -> float:
    """Grid maximum of ``|dc/dx| + |dc/dy|`` over ``X x Y``.

    The l1 norm of the gradient is the local Lipschitz constant for the
    max-product metric.  Only interval factors are supported; the grid
    contains the corners, where the builtin polynomial costs peak.
    """
    X, Y = product.X, product.Y
    if not (isinstance(X, Interval) and isinstance(Y, Interval)):
        raise TypeError("grid_lipschitz supports interval factors only")
    xs = np.linspace(X.lo, X.hi, n)
    ys = np.linspace(Y.lo, Y.hi, n)
    gx_, gy_ = np.meshgrid(xs, ys, indexing="ij")
    if c.grad is not None:
        gx, gy = c.grad(gx_, gy_)
    else:
        s = 1e-6 * max(X.diameter, Y.diameter)
        gx = (c(gx_ + s, gy_) - c(gx_ - s, gy_)) / (2 * s)
        gy = (c(gx_, gy_ + s) - c(gx_, gy_ - s)) / (2 * s)
    return float(np.max(np.abs(gx) + np.abs(gy)))


@dataclass(frozen=True)
class ModulusEstimate:
    lower: float
    upper: Optional[float] = None


def _sample_pairs(space, n, h, rng, anchors):
    """Random points plus perturbations within ``h`` clipped to the space."""
    if isinstance(space, Interval):
        z1 = space.sample(n, rng)
        use_anchor = rng.random(n) < 0.5
        z1 = np.where(use_anchor, anchors[rng.integers(0, len(anchors), n)], z1)
        z2 = np.clip(z1 + rng.uniform(-h, h, n), space.lo, space.hi)
        return z1, z2
    if isinstance(space, Box):
        z1 = space.sample(n, rng)
        z2 = np.clip(z1 + rng.uniform(-h, h, z1.shape), space.lows, space.highs)
        return z1, z2
    if isinstance(space, Circle):
        z1 = space.sample(n, rng)
        z2 = (z1 + rng.uniform(-h, h, n)) % space.circumference
        return z1, z2
    if isinstance(space, FiniteSpace):
        z1 = space.sample(n, rng)
        z2 = np.empty_like(z1)
        for k, p in enumerate(z1):
            near = np.flatnonzero(space.dist[p] <= h)
            z2[k] = near[rng.integers(0, len(near))]
        return z1, z2
    raise TypeError(f"cannot sample from {space!r}")


def estimate_modulus(c: CostFunction, product: ProductMetric, h: float,
                     n_samples: int, seed: int) -> ModulusEstimate:
    """Sampled lower estimate of the modulus of continuity of ``c`` at ``h``.

    Half of the first points are snapped to a shared coarse lattice so that
    coincidences such as ``x == y`` (where discontinuous costs jump) are hit.
    The upper bound ``L * h`` is reported when ``c.lipschitz`` is declared.
    """
    if h < 0 or not math.isfinite(h):
        raise ValueError("h must be a finite non-negative number")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    upper = None if c.lipschitz is None else c.lipschitz * h
    if h == 0:
        return ModulusEstimate(0.0, 0.0 if upper is not None else None)
    rng = np.random.default_rng(seed)
    lattice = np.linspace(0.0, 1.0, 17)
    ax = lattice * product.X.diameter + getattr(product.X, "lo", 0.0)
    ay = lattice * product.Y.diameter + getattr(product.Y, "lo", 0.0)
    shared = np.union1d(ax, ay)
    x1, x2 = _sample_pairs(product.X, n_samples, h, rng, _inside(product.X, shared))
    y1, y2 = _sample_pairs(product.Y, n_samples, h, rng, _inside(product.Y, shared))
    v1 = np.asarray(c(x1, y1), dtype=float)
    v2 = np.asarray(c(x2, y2), dtype=float)
    if not (np.all(np.isfinite(v1)) and np.all(np.isfinite(v2))):
        raise ValueError("cost returned non-finite values")
    d = product.distance((x1, y1), (x2, y2))
    ok = d <= h * (1 + 1e-12)
    lower = float(np.max(np.abs(v1 - v2)[ok], initial=0.0))
    return ModulusEstimate(lower, upper)


def _inside(space, values):
    if isinstance(space, Interval):
        v = values[(values >= space.lo) & (values <= space.hi)]
        return v if len(v) else np.array([space.lo])
    return values
