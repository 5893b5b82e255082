import json
import time

import numpy as np
import pytest

from conftest import abs_diff, random_finite_instance
from discrete_ot.partitions import discretize, singleton_partition, uniform_interval_partition
from discrete_ot.solver import (
    HPlan,
    SolverError,
    brute_force_solve,
    certify,
    northwest_corner,
    plan_cost,
    solve_entropic,
    solve_exact,
    solve_transport,
)
from discrete_ot.spaces import FiniteMeasure, FiniteSpace, Interval, Measure1D, get_cost


def finite(weights_a, weights_b):
    X = FiniteSpace.from_points(np.arange(len(weights_a), dtype=float), abs_diff)
    Y = FiniteSpace.from_points(np.arange(len(weights_b), dtype=float), abs_diff)
    mu, nu = FiniteMeasure(X, weights_a), FiniteMeasure(Y, weights_b)
    return discretize(mu, singleton_partition(X, mu)), discretize(nu, singleton_partition(Y, nu))


def test_two_by_two_known_optimum():
    mu_h, nu_h = finite([0.3, 0.7], [0.6, 0.4])
    plan, cert = solve_exact(mu_h, nu_h, get_cost("matrix:1,2;3,1"))
    assert plan_cost(plan, get_cost("matrix:1,2;3,1")) == pytest.approx(1.6, abs=1e-12)
    assert np.allclose(plan.dense(), [[0.3, 0.0], [0.3, 0.4]])
    assert cert.gap <= 1e-12


def test_single_cell_constant_cost():
    mu_h, nu_h = finite([1.0], [1.0])
    plan, cert = solve_exact(mu_h, nu_h, get_cost("constant:0.7"))
    assert plan_cost(plan, get_cost("constant:0.7")) == pytest.approx(0.7)
    assert plan.masses.tolist() == [1.0] and cert.gap == 0.0


def test_duals_are_feasible_and_tight():
    rng = np.random.default_rng(1)
    for _ in range(50):
        mu_h, nu_h, C = random_finite_instance(rng, 6, 5, zero_prob=0.2)
        plan, cert = solve_exact(mu_h, nu_h, C)
        assert np.all(cert.u[:, None] + cert.v[None, :] <= C + 1e-12)
        assert cert.gap <= 1e-12
        plan.check_feasible()


def test_degenerate_identity_instance():
    # equal uniform marginals give a maximally degenerate LP
    n = 12
    mu_h, nu_h = finite(np.full(n, 1 / n), np.full(n, 1 / n))
    C = abs_diff(np.arange(n), np.arange(n)) ** 2
    plan, cert = solve_exact(mu_h, nu_h, C)
    assert plan_cost(plan, C) == pytest.approx(0.0, abs=1e-15)
    assert np.allclose(plan.dense(), np.eye(n) / n)


def test_zero_weight_rows_receive_no_mass():
    rng = np.random.default_rng(3)
    for _ in range(100):
        mu_h, nu_h, C = random_finite_instance(rng, 5, 5, zero_prob=0.4)
        plan, _ = solve_exact(mu_h, nu_h, C)
        assert np.all(np.asarray(mu_h.weights)[plan.rows] > 0)
        assert np.all(np.asarray(nu_h.weights)[plan.cols] > 0)


def test_mismatched_marginals_rejected():
    with pytest.raises(SolverError):
        solve_transport([0.5, 0.5], [0.4, 0.4], np.zeros((2, 2)))
    with pytest.raises(SolverError):
        solve_transport([1.0], [1.0], np.array([[np.nan]]))


def test_northwest_corner_is_feasible():
    mu_h, nu_h = finite([0.2, 0.5, 0.3], [0.6, 0.4])
    nw = northwest_corner(mu_h, nu_h)
    nw.check_feasible()
    assert len(nw.masses) <= 4


def test_certify_reports_suboptimality():
    mu_h, nu_h = finite([0.5, 0.5], [0.5, 0.5])
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    bad = HPlan(mu_h, nu_h, [0, 1], [1, 0], [0.5, 0.5])
    certified, cert = certify(bad, C)
    assert certified.gap == pytest.approx(1.0)
    assert bad.gap == np.inf


def test_hplan_rejects_nonpositive_entries():
    mu_h, nu_h = finite([1.0], [1.0])
    with pytest.raises(ValueError):
        HPlan(mu_h, nu_h, [0], [0], [0.0])


def test_plan_serialization():
    mu_h, nu_h = finite([0.3, 0.7], [0.6, 0.4])
    plan, cert = solve_exact(mu_h, nu_h, get_cost("matrix:1,2;3,1"))
    doc = json.loads(plan.to_json(cert))
    assert doc["shape"] == [2, 2] and len(doc["entries"]) == 3
    assert "certificate" in doc
    lines = plan.to_csv().strip().splitlines()
    assert lines[0] == "i,j,mass" and len(lines) == 4
    assert float(lines[1].split(",")[2]) == plan.masses[0]


def test_plan_as_measure_points():
    mu_h, nu_h = finite([0.3, 0.7], [0.6, 0.4])
    plan, _ = solve_exact(mu_h, nu_h, get_cost("matrix:1,2;3,1"))
    m = plan.as_measure()
    assert m.points.shape == (3, 2)
    assert m.weights.sum() == pytest.approx(1.0)


def test_entropic_within_target():
    rng = np.random.default_rng(8)
    for _ in range(40):
        mu_h, nu_h, C = random_finite_instance(rng, 7, 6, zero_prob=0.1)
        ref, _ = solve_exact(mu_h, nu_h, C)
        plan, cert = solve_entropic(mu_h, nu_h, C, 1e-3)
        plan.check_feasible()
        assert cert.gap <= 1e-3
        assert plan_cost(plan, C) - plan_cost(ref, C) <= 1e-3 + 1e-12


def test_brute_force_lists_all_optimal_vertices():
    mu_h, nu_h = finite([0.5, 0.5], [0.5, 0.5])
    value, plans = brute_force_solve(mu_h, nu_h, np.zeros((2, 2)))
    assert value == 0.0 and len(plans) >= 2
    big_a, big_b = finite(np.full(5, 0.2), np.full(4, 0.25))
    with pytest.raises(ValueError):
        brute_force_solve(big_a, big_b, np.zeros((5, 4)))


def test_interval_instance_at_k256_is_fast():
    X = Interval(0, 1)
    mu_h = discretize(Measure1D.uniform(X), uniform_interval_partition(X, 256))
    nu_h = discretize(Measure1D.uniform(X, 0.5, 1.0), uniform_interval_partition(X, 256))
    t0 = time.perf_counter()
    plan, cert = solve_exact(mu_h, nu_h, get_cost("quadratic"))
    assert time.perf_counter() - t0 < 2.0
    assert abs(plan_cost(plan, get_cost("quadratic")) - 1 / 12) < 1e-4
    assert cert.gap <= 1e-12
