"""Random instance generators shared by the test modules."""
import numpy as np
import pytest

from discrete_ot.maps import PiecewiseAffineMap
from discrete_ot.partitions import discretize, singleton_partition, uniform_interval_partition
from discrete_ot.solver import solve_exact
from discrete_ot.spaces import FiniteMeasure, FiniteSpace, Interval, Measure1D, Segment


def abs_diff(a, b):
    return np.abs(np.subtract.outer(np.asarray(a, float), np.asarray(b, float)))


def random_weights(rng, n, zero_prob=0.0):
    w = rng.random(n) + 0.05
    if zero_prob:
        w[rng.random(n) < zero_prob] = 0.0
        if not w.any():
            w[rng.integers(n)] = 1.0
    w = w / w.sum()
    w[-1] = 1.0 - w[:-1].sum()
    if w[-1] < 0:
        w[-1] = 0.0
        w /= w.sum()
    return w


def random_finite_instance(rng, m, n, zero_prob=0.0):
    """Discrete measures on two random point sets and a random cost matrix."""
    X = FiniteSpace.from_points(np.sort(rng.random(m)), abs_diff)
    Y = FiniteSpace.from_points(np.sort(rng.random(n)), abs_diff)
    mu = FiniteMeasure(X, random_weights(rng, m, zero_prob))
    nu = FiniteMeasure(Y, random_weights(rng, n, zero_prob))
    mu_h = discretize(mu, singleton_partition(X, mu))
    nu_h = discretize(nu, singleton_partition(Y, nu))
    return mu_h, nu_h, rng.random((m, n))


def random_measure1d(rng, space: Interval, n_atoms=None, n_pieces=None):
    """Atoms plus piecewise-constant density, total mass one."""
    n_atoms = rng.integers(0, 3) if n_atoms is None else n_atoms
    n_pieces = rng.integers(1, 4) if n_pieces is None else n_pieces
    w = random_weights(rng, n_atoms + n_pieces)
    atoms = [(float(rng.uniform(space.lo, space.hi)), float(w[i])) for i in range(n_atoms)]
    cuts = np.sort(rng.uniform(space.lo, space.hi, 2 * n_pieces))
    dens = []
    for r in range(n_pieces):
        lo, hi = cuts[2 * r], cuts[2 * r + 1]
        if hi - lo < 1e-6:
            hi = lo + 1e-6
        dens.append((float(lo), float(hi), float(w[n_atoms + r] / (hi - lo))))
    return Measure1D(space, tuple(atoms), tuple(dens))


def random_interval_plan(rng, k=None, l=None):
    """Optimal plan for a random cost between two random 1-D measures."""
    X, Y = Interval(0.0, 1.0), Interval(-1.0, 2.0)
    mu, nu = random_measure1d(rng, X), random_measure1d(rng, Y)
    k = int(rng.integers(2, 12)) if k is None else k
    l = int(rng.integers(2, 12)) if l is None else l
    mu_h = discretize(mu, uniform_interval_partition(X, k))
    nu_h = discretize(nu, uniform_interval_partition(Y, l))
    plan, _ = solve_exact(mu_h, nu_h, rng.random((k, l)))
    return plan, mu, nu


def random_piecewise_map(rng, domain: Interval, lo=-1.0, hi=2.0, pieces=None):
    """Random piecewise-affine map with values inside ``[lo, hi]``."""
    pieces = int(rng.integers(1, 5)) if pieces is None else pieces
    cuts = np.concatenate([[domain.lo], np.sort(rng.uniform(domain.lo, domain.hi, pieces - 1)),
                           [domain.hi]])
    out = []
    for r in range(pieces):
        a, b = cuts[r], cuts[r + 1]
        ya, yb = rng.uniform(lo, hi, 2)
        slope = (yb - ya) / (b - a) if b > a else 0.0
        seg = Segment(float(a), float(b), True, r == pieces - 1)
        out.append((seg, slope, ya - slope * a))
    return PiecewiseAffineMap(tuple(out))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
