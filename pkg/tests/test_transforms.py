import numpy as np
import pytest

from conftest import random_interval_plan
from discrete_ot.maps import PiecewiseAffineMap
from discrete_ot.partitions import DiscreteMeasure, discretize, uniform_interval_partition
from discrete_ot.solver import HPlan, plan_cost, solve_exact
from discrete_ot.spaces import Interval, Measure1D, Segment, get_cost
from discrete_ot.transforms import (
    ContinuousVersion,
    SemidiscreteVersion,
    bad_set_mass,
    continuous_cost,
    continuous_rectangle_mass,
    semidiscrete_rectangle_mass,
    support_hausdorff,
)


def shift_plan(k):
    X = Interval(0, 1)
    mu_h = discretize(Measure1D.uniform(X), uniform_interval_partition(X, k))
    nu_h = discretize(Measure1D.uniform(X, 0.5, 1.0), uniform_interval_partition(X, k))
    plan, _ = solve_exact(mu_h, nu_h, get_cost("quadratic"))
    return plan


def test_rectangle_identities_random():
    rng = np.random.default_rng(11)
    for _ in range(20):
        plan, _, _ = random_interval_plan(rng)
        cv, sv = ContinuousVersion(plan), SemidiscreteVersion(plan)
        P, Q = plan.source.partition, plan.target.partition
        for i, j, m in zip(plan.rows, plan.cols, plan.masses):
            assert continuous_rectangle_mass(cv, P.cells[i], Q.cells[j]) == pytest.approx(m, abs=1e-12)
            assert semidiscrete_rectangle_mass(sv, P.cells[i], Q.cells[j]) == pytest.approx(m, abs=1e-12)


def test_continuous_version_has_original_marginals():
    plan = shift_plan(8)
    cv = ContinuousVersion(plan)
    X = Interval(0, 1)
    assert continuous_rectangle_mass(cv, Segment(0, 0.3, True, True), X.whole()) == pytest.approx(0.3)
    assert continuous_rectangle_mass(cv, X.whole(), Segment(0.5, 0.6, True, True)) == pytest.approx(0.2)


def test_semidiscrete_first_marginal_and_conditional():
    plan = shift_plan(8)
    sv = SemidiscreteVersion(plan)
    X = Interval(0, 1)
    assert semidiscrete_rectangle_mass(sv, Segment(0.1, 0.35, True, True), X.whole()) == pytest.approx(0.25)
    ys, w = sv.conditional(0.05)
    assert w.sum() == pytest.approx(1.0)
    assert np.all(ys >= 0.5)


def test_continuous_cost_is_exact_for_quadratic():
    plan = shift_plan(4)
    est = continuous_cost(ContinuousVersion(plan), get_cost("quadratic"))
    # E[(x - y)^2] over each rectangle, computed by hand from cell moments
    P, Q = plan.source.partition, plan.target.partition
    ref = 0.0
    for i, j, m in zip(plan.rows, plan.cols, plan.masses):
        a, b = P.cells[i].lo, P.cells[i].hi
        c, d = Q.cells[j].lo, Q.cells[j].hi
        ex, ey = (a + b) / 2, (c + d) / 2
        vx, vy = (b - a) ** 2 / 12, (d - c) ** 2 / 12
        ref += m * (vx + vy + (ex - ey) ** 2)
    assert est.value == pytest.approx(ref, abs=1e-14)
    assert est.value >= plan_cost(plan, get_cost("quadratic"))


def test_bad_set_mass_exact_matches_quadrature():
    plan = shift_plan(8)
    sv = SemidiscreteVersion(plan)
    T = PiecewiseAffineMap.affine(0.5, 0.5, Interval(0, 1).whole())
    exact = bad_set_mass(sv, T, 0.02)
    assert exact.method == "exact-piecewise"

    def as_callable(x):
        return 0.5 * np.asarray(x) + 0.5

    approx = bad_set_mass(sv, as_callable, 0.02, quad_per_cell=64)
    assert approx.method == "quadrature"
    assert approx.value == pytest.approx(exact.value, abs=0.02)
    with pytest.raises(ValueError):
        bad_set_mass(sv, T, 0.0)


def test_bad_set_mass_counts_far_atoms():
    X = Interval(0, 1)
    mu_h = discretize(Measure1D.uniform(X), uniform_interval_partition(X, 1))
    nu_h = discretize(Measure1D.uniform(X), uniform_interval_partition(X, 1))
    plan = HPlan(mu_h, nu_h, [0], [0], [1.0])
    T = PiecewiseAffineMap.identity(X.whole())
    # target atom 0.5; |0.5 - x| >= 0.25 on [0, 0.25] and [0.75, 1]
    assert bad_set_mass(SemidiscreteVersion(plan), T, 0.25).value == pytest.approx(0.5)


def test_support_hausdorff_small_for_semidiscrete():
    plan = shift_plan(16)
    est = support_hausdorff(plan, SemidiscreteVersion(plan), n_probe=4)
    assert est.value <= plan.h_bound / 2 + 1e-12
    est_c = support_hausdorff(plan, ContinuousVersion(plan), n_probe=4)
    assert est_c.value <= plan.h_bound / 2 + 1e-12


def test_versions_require_discretized_plans():
    X = Interval(0, 1)
    d = DiscreteMeasure.from_atoms([0.5], [1.0], X)
    with pytest.raises(ValueError):
        SemidiscreteVersion(HPlan(d, d, [0], [0], [1.0]))


def test_semidiscrete_additivity_over_split():
    rng = np.random.default_rng(13)
    for _ in range(30):
        plan, _, _ = random_interval_plan(rng)
        sv = SemidiscreteVersion(plan)
        F = Interval(-1, 2).whole()
        cut = float(rng.random())
        whole = semidiscrete_rectangle_mass(sv, Interval(0, 1).whole(), F)
        left = semidiscrete_rectangle_mass(sv, Segment(0.0, cut, True, False), F)
        right = semidiscrete_rectangle_mass(sv, Segment(cut, 1.0, True, True), F)
        assert left + right == pytest.approx(whole, abs=1e-12)
        assert whole == pytest.approx(1.0, abs=1e-12)
