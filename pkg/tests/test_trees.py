"""Tree documents: walking, both evaluation routes, import/export validation."""

import copy
import json
import math

import numpy as np
import pytest

from querylearn.builders import build, build_gbs, build_gisa, BuildConfig
from querylearn.errors import TreeDocumentError
from querylearn.trees import (
    Leaf,
    canonical_skeleton,
    check_impure_leaf_identity,
    count_nodes,
    evaluate_by_formula,
    evaluate_by_traversal,
    export_tree,
    import_tree,
    load_tree,
    save_tree,
    tree_to_json,
    walk,
)

import gen


def test_walk_recomputes_members(toy1, fig_group_tree):
    tree = import_tree(fig_group_tree, toy1)
    leaves = [item for item in walk(tree, toy1) if isinstance(item.node, Leaf)]
    assert len(leaves) == 3
    depths = sorted(item.depth for item in leaves)
    assert depths == [1, 2, 2]


def test_group_tree_evaluates_to_golden(toy1, fig_group_tree):
    tree = import_tree(fig_group_tree, toy1)
    ev = evaluate_by_formula(tree, toy1)
    assert ev.by_traversal == pytest.approx(1.5, abs=1e-12)
    assert ev.by_formula == pytest.approx(1.5, abs=1e-9)
    assert ev.entropy_bound == pytest.approx(0.8112781244591328, abs=1e-12)


def test_groupquery_tree_evaluates_to_golden(toy2, fig_groupquery_tree):
    tree = import_tree(fig_groupquery_tree, toy2)
    ev = evaluate_by_formula(tree, toy2)
    assert ev.by_traversal == pytest.approx(5 / 3, abs=1e-12)
    assert ev.by_formula == pytest.approx(5 / 3, abs=1e-9)
    assert abs(ev.by_formula - ev.by_traversal) <= 1e-9
    assert ev.entropy_bound == pytest.approx(math.log2(3), abs=1e-12)


def test_round_trip_preserves_tree(toy1):
    tree = build_gisa(toy1)
    doc = export_tree(tree, toy1)
    again = import_tree(doc, toy1)
    assert export_tree(again, toy1) == doc


def test_json_round_trip(toy1, tmp_path):
    tree = build_gisa(toy1)
    path = tmp_path / "tree.json"
    save_tree(tree, toy1, path)
    again = load_tree(path, toy1)
    assert export_tree(again, toy1) == export_tree(tree, toy1)
    assert json.loads(tree_to_json(tree, toy1))["format"] == "decision-tree"


def test_single_query_evaluation_matches_closed_form(toy1):
    # one split on q2: E[K] is exactly 1 query
    tree = build_gisa(toy1)
    ev = evaluate_by_formula(tree, toy1)
    assert ev.expected_queries == pytest.approx(1.0, abs=1e-12)
    assert ev.by_formula == pytest.approx(ev.by_traversal, abs=1e-9)
    assert count_nodes(tree) == (1, 2)


def test_balance_bound_reported_for_object_id(toy1):
    tree = build_gbs(toy1)
    ev = evaluate_by_formula(tree, toy1)
    assert ev.overall_rho == pytest.approx(0.5)
    assert ev.balance_bound == pytest.approx(2.0)
    assert ev.by_formula <= ev.balance_bound + 1e-9


@pytest.mark.parametrize("mutate,message", [
    (lambda d: d.update(format="tree"), "format"),
    (lambda d: d.update(version=9), "version"),
    (lambda d: d.update(variant="both"), "variant"),
    (lambda d: d["root"].update(query="q9"), "unknown query"),
    (lambda d: d["root"]["low"].update(objects=["theta1"]), "disagree"),
    (lambda d: d["root"]["high"]["low"].update(outcome={"group": 1}), "outcome"),
    (lambda d: d["root"]["high"].update(query="q1"), "repeat"),
])
def test_import_rejects_malformed(toy1, fig_group_tree, mutate, message):
    doc = copy.deepcopy(fig_group_tree)
    mutate(doc)
    with pytest.raises(TreeDocumentError) as err:
        import_tree(doc, toy1)
    assert message in str(err.value)


def test_import_rejects_impure_leaf_unless_allowed(toy1):
    doc = {
        "format": "decision-tree", "version": 1, "variant": "group-id",
        "root": {
            "kind": "query", "query": "q2",
            "low": {"kind": "leaf", "outcome": {"group": 2}, "objects": ["theta4"]},
            "high": {"kind": "leaf", "outcome": {"group": 1},
                     "objects": ["theta1", "theta2", "theta3"]},
        },
    }
    import_tree(doc, toy1)  # pure leaves: fine

    # stop early: the root as a single impure leaf
    early = {
        "format": "decision-tree", "version": 1, "variant": "group-id",
        "root": {"kind": "leaf", "outcome": {"group": 1},
                 "objects": ["theta1", "theta2", "theta3", "theta4"]},
    }
    with pytest.raises(TreeDocumentError):
        import_tree(early, toy1)
    tree = import_tree(early, toy1, allow_impure=True)
    ok, lhs, rhs = check_impure_leaf_identity(tree, toy1)
    assert ok
    assert lhs == pytest.approx(0.0, abs=1e-12)
    assert rhs == pytest.approx(0.0, abs=1e-12)


def test_impure_leaf_identity_depth_one(toy1):
    doc = {
        "format": "decision-tree", "version": 1, "variant": "group-id",
        "root": {
            "kind": "query", "query": "q1",
            "low": {"kind": "leaf", "outcome": {"group": 1},
                    "objects": ["theta1", "theta3"]},
            "high": {"kind": "leaf", "outcome": {"group": 1},
                     "objects": ["theta2", "theta4"]},
        },
    }
    tree = import_tree(doc, toy1, allow_impure=True)
    ok, lhs, rhs = check_impure_leaf_identity(tree, toy1)
    assert ok
    assert lhs == pytest.approx(1.0, abs=1e-12)
    assert rhs == pytest.approx(1.0, abs=1e-9)


def test_branch_probabilities_validated(toy2, fig_groupquery_tree):
    doc = copy.deepcopy(fig_groupquery_tree)
    doc["root"]["branches"][0]["prob"] = 0.5
    with pytest.raises(TreeDocumentError) as err:
        import_tree(doc, toy2)
    assert "sum" in str(err.value)


def test_branch_query_must_belong_to_group(toy2, fig_groupquery_tree):
    doc = copy.deepcopy(fig_groupquery_tree)
    doc["root"]["branches"][0]["query"] = "q1"
    with pytest.raises(TreeDocumentError):
        import_tree(doc, toy2)


def test_canonical_skeleton_collapses_unit_groups(toy2, fig_groupquery_tree):
    tree = import_tree(fig_groupquery_tree, toy2)
    skel = canonical_skeleton(tree, toy2)
    # the q4=1 side wraps a single-branch group node: it must collapse to a split
    assert skel["group"] == 2
    q4_branch = next(b for b in skel["branches"] if b["q"] == "q4")
    assert q4_branch["high"] == {
        "q": "q3",
        "low": {"objects": ["theta3"]},
        "high": {"objects": ["theta2"]},
    }


def test_skeletons_equal_for_same_splits(toy1):
    t1 = build_gbs(toy1)
    t2 = build(toy1, "gbs", BuildConfig(tie_break="index"))
    assert canonical_skeleton(t1, toy1) == canonical_skeleton(t2, toy1)


def test_formula_traversal_agree_on_random_instances():
    rng = np.random.default_rng(99)
    for _ in range(20):
        ds = gen.random_instance(rng, max_objects=20, max_queries=8,
                                 with_query_groups=False)
        tree = build_gbs(ds)
        ev = evaluate_by_formula(tree, ds)
        assert abs(ev.by_formula - ev.by_traversal) <= 1e-9
        assert ev.by_formula >= ev.entropy_bound - 1e-9
