import math
import pickle

import numpy as np
import pytest

from conftest import random_measure1d
from discrete_ot.spaces import (
    Box,
    Circle,
    FiniteMeasure,
    FiniteSpace,
    Interval,
    Measure1D,
    ProductMetric,
    Segment,
    estimate_modulus,
    gauss_nodes,
    get_cost,
    grid_lipschitz,
    matrix_cost,
    measure_of_set,
)


def test_segment_contains_respects_open_ends():
    s = Segment(0.0, 1.0, True, False)
    assert s.contains(0.0) and not s.contains(1.0)
    assert list(s.contains(np.array([-0.1, 0.5, 1.0]))) == [False, True, False]


def test_segment_intersection_and_empty():
    a = Segment(0.0, 1.0, True, False)
    b = Segment(1.0, 2.0, True, True)
    assert a.intersect(b) is None
    c = Segment(0.5, 2.0, False, True)
    s = a.intersect(c)
    assert (s.lo, s.hi, s.closed_left, s.closed_right) == (0.5, 1.0, False, False)


def test_product_metric_is_max_of_factors():
    pm = ProductMetric(Interval(0, 1), Interval(0, 1))
    assert pm.distance((0.1, 0.2), (0.4, 0.3)) == pytest.approx(0.3)
    assert pm.diameter == 1.0


def test_box_uses_sup_metric():
    B = Box([0, 0], [1, 2])
    assert B.distance([0, 0], [0.5, 1.5]) == pytest.approx(1.5)
    assert B.diameter == pytest.approx(2.0)


def test_circle_geodesic_wraps():
    C = Circle(1.0)
    assert C.distance(0.05, 0.95) == pytest.approx(0.1)
    assert C.diameter == pytest.approx(0.5)


def test_finite_space_rejects_bad_matrix():
    with pytest.raises(ValueError):
        FiniteSpace(np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(ValueError):
        FiniteSpace(np.array([[1.0]]))


def test_measure_mass_with_atoms_and_density():
    X = Interval(-2, 0)
    m = Measure1D(X, ((-2.0, 0.5),), ((-1.0, 0.0, 0.5),))
    assert m.mass(X.whole()) == pytest.approx(1.0)
    assert m.mass(Segment(-2.0, -1.5, True, False)) == pytest.approx(0.5)
    assert m.mass(Segment(-2.0, -1.5, False, False)) == 0.0
    assert measure_of_set(m, -0.5, 0.0, True, True) == pytest.approx(0.25)


def test_measure_must_be_probability():
    with pytest.raises(ValueError):
        Measure1D(Interval(0, 1), (), ((0.0, 1.0, 0.5),))


def test_gauss_nodes_integrate_cubic_exactly():
    x, w = gauss_nodes(0.0, 2.0, 2)
    assert np.dot(w, x ** 3) == pytest.approx(4.0, abs=1e-14)


def test_quadrature_weights_sum_to_cell_mass():
    m = Measure1D.uniform(Interval(0, 1), 0.25, 0.75)
    xs, w = m.quadrature(Segment(0.0, 0.5, True, False), 4)
    assert w.sum() == pytest.approx(0.5)
    assert np.all((xs >= 0.25) & (xs <= 0.5))


def test_finite_measure_validates_weights():
    S = FiniteSpace.from_points([0.0, 1.0], lambda a, b: np.abs(np.subtract.outer(a, b)))
    with pytest.raises(ValueError):
        FiniteMeasure(S, [0.2, 0.2])
    assert FiniteMeasure.dirac(S, 1).weights.tolist() == [0.0, 1.0]


def test_cost_registry_and_matrix():
    q = get_cost("quadratic")
    assert q.matrix([0.0, 1.0], [0.5]).ravel().tolist() == [0.25, 0.25]
    assert get_cost("power:1")(0.0, -3.0) == pytest.approx(3.0)
    assert get_cost("constant:0.7").matrix([0, 1], [0, 1, 2]).shape == (2, 3)
    C = get_cost("matrix:1,2;3,1")
    assert C.matrix(np.array([0, 1]), np.array([0, 1])).tolist() == [[1, 2], [3, 1]]
    with pytest.raises(KeyError):
        get_cost("nope")


def test_costs_pickle_for_worker_processes():
    for name in ("quadratic", "power:2", "constant:1", "ex34-pinched"):
        c = pickle.loads(pickle.dumps(get_cost(name)))
        assert math.isfinite(float(c(0.2, 0.3)))
    t = pickle.loads(pickle.dumps(matrix_cost([[0, 1], [1, 0]])))
    assert float(t(0, 1)) == 1.0


def test_grid_lipschitz_quadratic_unit_square():
    pm = ProductMetric(Interval(0, 1), Interval(0, 1))
    assert grid_lipschitz(get_cost("quadratic"), pm) == pytest.approx(4.0)


def test_modulus_estimate_edge_cases():
    pm = ProductMetric(Interval(0, 1), Interval(0, 1))
    c = get_cost("quadratic")
    assert estimate_modulus(c, pm, 0.0, 10, 0).lower == 0.0
    with pytest.raises(ValueError):
        estimate_modulus(c, pm, -1.0, 10, 0)
    with pytest.raises(ValueError):
        estimate_modulus(c, pm, math.inf, 10, 0)


def test_modulus_lower_estimate_below_lipschitz_bound():
    pm = ProductMetric(Interval(0, 1), Interval(0, 1))
    c = get_cost("quadratic").with_lipschitz(4.0)
    est = estimate_modulus(c, pm, 0.1, 20000, 3)
    assert est.upper == pytest.approx(0.4)
    assert 0.3 < est.lower <= est.upper
    assert est == estimate_modulus(c, pm, 0.1, 20000, 3)


def test_modulus_catches_diagonal_jump():
    pm = ProductMetric(Interval(0, 1), Interval(0, 1))
    est = estimate_modulus(get_cost("ex33-diagonal"), pm, 0.01, 2000, 0)
    assert est.lower == 1.0


@pytest.mark.parametrize("space", [Interval(-1, 2), Box([0, 0, 0], [1, 2, 1]), Circle(2.0)])
def test_metric_axioms_random_triples(space):
    rng = np.random.default_rng(0)
    a, b, c = (space.sample(1000, rng) for _ in range(3))
    dab, dbc, dac = (np.diag(space.pairwise(p, q)) for p, q in ((a, b), (b, c), (a, c)))
    assert np.all(dab >= 0)
    assert np.allclose(dab, np.diag(space.pairwise(b, a)), atol=1e-12)
    assert np.all(dac <= dab + dbc + 1e-12)
    assert np.allclose(np.diag(space.pairwise(a, a)), 0.0, atol=1e-12)


def test_finite_space_metric_axioms():
    rng = np.random.default_rng(1)
    S = FiniteSpace.from_points(rng.random((30, 2)), Box([0, 0], [1, 1]))
    D = S.dist
    # d(i, k) <= d(i, j) + d(j, k) for all i, j, k
    assert np.all(D[:, None, :] <= D[:, :, None] + D[None, :, :] + 1e-12)


@pytest.mark.parametrize("name,L", [("quadratic", 4.0), ("constant:0.3", None),
                                    ("power:1", 2.0)])
def test_declared_lipschitz_holds(name, L):
    c = get_cost(name) if L is None else get_cost(name).with_lipschitz(L)
    pm = ProductMetric(Interval(0, 1), Interval(0, 1))
    rng = np.random.default_rng(2)
    h = 0.05
    x1, y1 = rng.random(1000), rng.random(1000)
    x2 = np.clip(x1 + rng.uniform(-h, h, 1000), 0, 1)
    y2 = np.clip(y1 + rng.uniform(-h, h, 1000), 0, 1)
    assert np.all(pm.distance((x1, y1), (x2, y2)) <= h)
    assert np.all(np.abs(c(x1, y1) - c(x2, y2)) <= c.lipschitz * h + 1e-12)


def test_measure_additivity():
    rng = np.random.default_rng(3)
    X = Interval(0, 1)
    for _ in range(50):
        m = random_measure1d(rng, X)
        cut = float(rng.random())
        whole = measure_of_set(m, 0.0, 1.0, True, True)
        parts = measure_of_set(m, 0.0, cut, True, False) + measure_of_set(m, cut, 1.0, True, True)
        assert parts == pytest.approx(whole, abs=1e-12)
