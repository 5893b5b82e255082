import json
import math

import pytest

from discrete_ot.experiments import (
    EXAMPLES,
    INSTANCES,
    bound_constants,
    check,
    get_instance,
    run_example,
    run_map_sweep,
    run_value_sweep,
)
from discrete_ot.metrics import monge_cost


def test_check_ops_and_slack():
    assert check("a", 1.0, "<=", 1.0).passed
    assert check("b", 1.0 + 1e-13, "<=", 1.0, 1e-12).passed
    assert not check("c", 1.1, "<=", 1.0).passed
    assert check("d", 2.0, ">=", 1.0).passed
    assert check("e", 1.0, "==", 1.0 + 1e-13, 1e-12).passed
    with pytest.raises(ValueError):
        check("f", 1.0, "<", 2.0)


def test_bound_constants():
    e3, e2 = math.sqrt(3), math.sqrt(2)
    assert bound_constants("GM", 2, 1.0, 1.0) == pytest.approx((e3, 2 * e3, 2 * e3))
    assert bound_constants("GM", 2, 0.0, 2.0) == pytest.approx((0.0, 2 * e2, 4 * e2))
    assert bound_constants("B", 1, 0.0, 3.0) == pytest.approx((0.0, 1.0, 3.0))
    with pytest.raises(ValueError):
        bound_constants("X", 1, 0.0, 1.0)


def test_instances_know_their_answers():
    inst = get_instance("shift-uniform")
    assert inst.k_star == pytest.approx(1 / 12)
    val, _ = monge_cost(inst.t_star, inst.mu, inst.cost)
    assert val == pytest.approx(inst.k_star, abs=1e-14)
    assert set(INSTANCES) >= {"shift-uniform", "identical-uniform"}
    with pytest.raises(KeyError):
        get_instance("nope")


def test_value_sweep_records_serialize():
    recs = run_value_sweep("shift-uniform", [2, 4], final_error=1.0)
    assert all(r.passed for r in recs)
    doc = json.loads(json.dumps(recs[0].to_dict()))
    assert doc["params"]["k"] == 2 and doc["assertions"]


def test_value_sweep_final_error_can_fail():
    recs = run_value_sweep("shift-uniform", [2], final_error=1e-6)
    assert not all(r.passed for r in recs)


def test_parallel_sweep_matches_serial():
    a = run_map_sweep("shift-uniform", [4, 8, 16], "GM", jobs=1)
    b = run_map_sweep("shift-uniform", [4, 8, 16], "GM", jobs=2)
    assert [r.values for r in a] == [r.values for r in b]


def test_map_sweep_summary_checks_monotonicity():
    recs = run_map_sweep("shift-uniform", [2, 4, 8], "B", final_threshold=0.2,
                         bad_threshold=0.5, bad_from_k=4)
    summary = recs[-1]
    names = [a.name for a in summary.assertions]
    assert any(n.startswith("d_p decreases") for n in names)
    assert "bad-set mass at k=4" in names and summary.passed


def test_identical_instance_zero_error():
    recs = run_map_sweep("identical-uniform", [4, 8], "B")
    assert all(r.values["d_p"] < 0.2 for r in recs if "k" in r.params)


@pytest.mark.parametrize("name", sorted(EXAMPLES))
def test_examples_pass_on_small_k(name):
    ks = {"ex33": [5], "ex34": [5], "ex45": [5], "ex46": [8, 16],
          "ex51": [8, 16], "ex51-anchored0": [8, 16]}[name]
    recs = run_example(name, ks)
    failed = [(r.experiment, a.name) for r in recs for a in r.assertions if not a.passed]
    assert not failed


def test_unknown_example():
    with pytest.raises(KeyError):
        run_example("ex99")
