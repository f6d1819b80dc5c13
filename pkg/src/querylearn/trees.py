"""Decision trees over binary queries, their evaluation, and their JSON document form.

A tree is built for one of four variants:

    object-id                    single queries, leaves isolate one object
    group-id                     single queries, leaves isolate one object group
    object-id-group-queries      each node offers a query group, one branch per query
    group-id-group-queries       query groups with group-identification leaves

Expected query count E[K] can be computed two independent ways: by traversal (prior mass
times reach probability times depth, summed over leaves) and in closed form (base entropy
plus a per-internal-node cost term). The two must agree for any well-formed tree; keeping
both routes is the point, so resist the urge to merge them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Union

import numpy as np

from .dataset import Dataset, GROUP_ID, OBJECT_ID
from .errors import TreeDocumentError, ValidationError
from .infomath import NodePopulation, binary_entropy, entropy, population, split_stats

VARIANTS = (
    "object-id",
    "group-id",
    "object-id-group-queries",
    "group-id-group-queries",
)

TREE_FORMAT = "decision-tree"
TREE_VERSION = 1


def variant_objective(variant: str) -> str:
    """Base objective of a variant: what a leaf must isolate."""
    if variant not in VARIANTS:
        raise ValidationError(f"unknown tree variant {variant!r}")
    return GROUP_ID if variant.startswith("group-id") else OBJECT_ID


def variant_uses_query_groups(variant: str) -> bool:
    if variant not in VARIANTS:
        raise ValidationError(f"unknown tree variant {variant!r}")
    return variant.endswith("group-queries")


@dataclass(frozen=True)
class Leaf:
    """Terminal node. outcome is an object index (object-id variants) or a group index
    (group-id variants); None marks an unreachable empty leaf under a zero-probability
    branch combination. members lists the surviving object indices."""

    outcome: int | None
    members: tuple[int, ...]


@dataclass(frozen=True)
class SingleQueryNode:
    query: int
    low: "Node"
    high: "Node"


@dataclass(frozen=True)
class Branch:
    """One selectable query inside a QueryGroupNode, with its selection probability."""

    query: int
    prob: float
    low: "Node"
    high: "Node"


@dataclass(frozen=True)
class QueryGroupNode:
    group: int
    branches: tuple[Branch, ...]


Node = Union[Leaf, SingleQueryNode, QueryGroupNode]


@dataclass(frozen=True)
class DecisionTree:
    variant: str
    root: Node

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValidationError(f"unknown tree variant {self.variant!r}")


@dataclass(frozen=True)
class WalkItem:
    """One node visited on a root-to-leaf walk, with the path context that reached it."""

    node: Node
    members: np.ndarray
    path_prob: float
    depth: int
    answered: tuple[tuple[int, int], ...]


def walk(tree: DecisionTree, ds: Dataset) -> Iterator[WalkItem]:
    """Yield every node with its surviving set, reach probability, and answered path.

    Surviving sets are recomputed from the root by splitting, not read from the leaves,
    so a walk over an imported tree independently re-derives what each node sees.
    """

    def rec(node: Node, members: np.ndarray, prob: float, depth: int, answered):
        yield WalkItem(node, members, prob, depth, answered)
        if isinstance(node, Leaf):
            return
        if isinstance(node, SingleQueryNode):
            col = ds.matrix[members, node.query]
            yield from rec(node.low, members[col == 0], prob, depth + 1,
                           answered + ((node.query, 0),))
            yield from rec(node.high, members[col == 1], prob, depth + 1,
                           answered + ((node.query, 1),))
            return
        for br in node.branches:
            col = ds.matrix[members, br.query]
            yield from rec(br.low, members[col == 0], prob * br.prob, depth + 1,
                           answered + ((br.query, 0),))
            yield from rec(br.high, members[col == 1], prob * br.prob, depth + 1,
                           answered + ((br.query, 1),))

    yield from rec(tree.root, np.arange(ds.n_objects), 1.0, 0, ())


def _aggregated_walk(tree: DecisionTree, ds: Dataset):
    """Walk grouped by (node object, surviving set, depth), path probabilities summed.

    Equivalent to iterating walk() and pooling rows with identical node, members, and
    depth -- every per-node quantity the evaluators compute is linear in path
    probability, so pooling is exact. The point is shared subtrees: the query-group
    builders emit one node per reachable state, and this pass visits each state once
    instead of once per path, which keeps evaluation polynomial where a path
    enumeration would be exponential.
    """
    members0 = np.arange(ds.n_objects)
    level: dict = {(id(tree.root), members0.tobytes()): [tree.root, members0, 1.0]}
    depth = 0
    while level:
        nxt: dict = {}
        for node, members, prob in level.values():
            yield node, members, prob, depth
            if isinstance(node, Leaf):
                continue
            branches = (
                node.branches
                if isinstance(node, QueryGroupNode)
                else (Branch(node.query, 1.0, node.low, node.high),)
            )
            for br in branches:
                col = ds.matrix[members, br.query]
                for child, sub in ((br.low, members[col == 0]),
                                   (br.high, members[col == 1])):
                    key = (id(child), sub.tobytes())
                    entry = nxt.get(key)
                    if entry is None:
                        nxt[key] = [child, sub, prob * br.prob]
                    else:
                        entry[2] += prob * br.prob
        level = nxt
        depth += 1


def evaluate_by_traversal(tree: DecisionTree, ds: Dataset) -> float:
    """E[K] summed leaf by leaf: reach probability x prior mass x answered-query depth."""
    total = 0.0
    for node, members, prob, depth in _aggregated_walk(tree, ds):
        if isinstance(node, Leaf) and members.size:
            total += prob * float(ds.priors[members].sum()) * depth
    return total


@dataclass(frozen=True)
class TreeEvaluation:
    """Closed-form evaluation next to the traversal value, plus the balance bound."""

    expected_queries: float
    by_traversal: float
    by_formula: float
    entropy_bound: float
    overall_rho: float | None
    balance_bound: float | None


def evaluate_by_formula(tree: DecisionTree, ds: Dataset) -> TreeEvaluation:
    """E[K] in closed form: base entropy plus sum over internal nodes of
    reach probability x node mass x node cost. Node cost is

        1 - sum_q p(q) * gain(q)

    with gain(q) = H(rho(q)) for object identification and
    gain(q) = H(rho(q)) - sum_i share_i H(rho_i(q)) for group identification.
    Single-query nodes are the p(q) = 1 special case.
    """
    objective = variant_objective(tree.variant)
    if objective == GROUP_ID:
        ds.validate_for(GROUP_ID)
        bound = entropy(ds.group_priors())
    else:
        bound = entropy(ds.priors)

    acc = 0.0
    by_traversal = 0.0
    worst_rho = None
    # a shared subtree surfaces the same (node, surviving set) at several depths;
    # its mass x cost term and its worst rho are the same every time
    terms: dict = {}
    for node, members, prob, depth in _aggregated_walk(tree, ds):
        if isinstance(node, Leaf):
            # the traversal route, accumulated on the same walk: the two routes
            # stay independent sums (leaf depths here, internal costs below)
            if members.size:
                by_traversal += prob * float(ds.priors[members].sum()) * depth
            continue
        if members.size == 0:
            continue
        skey = (id(node), members.tobytes())
        cached = terms.get(skey)
        if cached is None:
            if objective == OBJECT_ID:
                pop = NodePopulation(members, float(ds.priors[members].sum()), None, None)
            else:
                pop = population(ds, members)
            if pop.mass <= 0.0:
                cached = (0.0, None)
            else:
                branches = (
                    node.branches
                    if isinstance(node, QueryGroupNode)
                    else (Branch(node.query, 1.0, node.low, node.high),)
                )
                gain = 0.0
                node_rho = None
                for br in branches:
                    st = split_stats(pop, ds, br.query, objective)
                    if node_rho is None or st.rho > node_rho:
                        node_rho = st.rho
                    if objective == OBJECT_ID:
                        gain += br.prob * binary_entropy(st.rho)
                    else:
                        gain += br.prob * (1.0 - st.cost)
                cached = (pop.mass * (1.0 - gain), node_rho)
            terms[skey] = cached
        term, node_rho = cached
        if node_rho is not None and (worst_rho is None or node_rho > worst_rho):
            worst_rho = node_rho
        acc += prob * term

    by_formula = bound + acc
    balance = None
    if tree.variant == "object-id" and worst_rho is not None:
        h = binary_entropy(worst_rho)
        if h > 0.0:
            balance = bound / h
    return TreeEvaluation(
        expected_queries=by_formula,
        by_traversal=by_traversal,
        by_formula=by_formula,
        entropy_bound=bound,
        overall_rho=worst_rho,
        balance_bound=balance,
    )


def check_impure_leaf_identity(tree: DecisionTree, ds: Dataset, tol: float = 1e-9):
    """For single-query group-identification trees stopped early (leaves may mix groups):
    traversal E[K] must equal base entropy plus internal costs minus the leaves' retained
    group-entropy. Returns (ok, traversal_value, corrected_formula_value)."""
    if variant_uses_query_groups(tree.variant):
        raise ValidationError("identity check applies to single-query trees")
    ds.validate_for(GROUP_ID)
    base = entropy(ds.group_priors())
    acc = 0.0
    retained = 0.0
    for item in walk(tree, ds):
        if item.members.size == 0:
            continue
        pop = population(ds, item.members)
        if pop.mass <= 0.0:
            continue
        if isinstance(item.node, Leaf):
            retained += item.path_prob * pop.mass * entropy(pop.group_masses / pop.mass)
        else:
            st = split_stats(pop, ds, item.node.query, GROUP_ID)
            acc += item.path_prob * pop.mass * st.cost
    lhs = evaluate_by_traversal(tree, ds)
    rhs = base + acc - retained
    return bool(abs(lhs - rhs) <= tol), lhs, rhs


# ---------------------------------------------------------------------------
# document form


def _node_to_doc(node: Node, ds: Dataset, variant: str) -> dict:
    if isinstance(node, Leaf):
        if node.outcome is None:
            outcome = None
        elif variant_objective(variant) == OBJECT_ID:
            outcome = {"object": ds.objects[node.outcome]}
        else:
            outcome = {"group": node.outcome + 1}
        return {
            "kind": "leaf",
            "outcome": outcome,
            "objects": [ds.objects[i] for i in sorted(node.members)],
        }
    if isinstance(node, SingleQueryNode):
        return {
            "kind": "query",
            "query": ds.queries[node.query],
            "low": _node_to_doc(node.low, ds, variant),
            "high": _node_to_doc(node.high, ds, variant),
        }
    return {
        "kind": "query-group",
        "group": node.group + 1,
        "branches": [
            {
                "query": ds.queries[br.query],
                "prob": float(br.prob),
                "low": _node_to_doc(br.low, ds, variant),
                "high": _node_to_doc(br.high, ds, variant),
            }
            for br in node.branches
        ],
    }


def export_tree(tree: DecisionTree, ds: Dataset) -> dict:
    """Tree as a JSON-ready document; ids and 1-based group labels, never indices."""
    return {
        "format": TREE_FORMAT,
        "version": TREE_VERSION,
        "variant": tree.variant,
        "root": _node_to_doc(tree.root, ds, tree.variant),
    }


def tree_to_json(tree: DecisionTree, ds: Dataset) -> str:
    """Canonical serialization: sorted keys, so equal trees give equal bytes."""
    return json.dumps(export_tree(tree, ds), sort_keys=True, indent=1)


def save_tree(tree: DecisionTree, ds: Dataset, path: str | Path) -> None:
    Path(path).write_text(tree_to_json(tree, ds) + "\n")


def _leaf_from_doc(doc: dict, ds: Dataset, variant: str, members: np.ndarray,
                   allow_impure: bool) -> Leaf:
    listed = doc.get("objects")
    if not isinstance(listed, list):
        raise TreeDocumentError("leaf must list its objects")
    idx = tuple(sorted(ds.object_index(str(o)) for o in listed))
    if idx != tuple(sorted(int(i) for i in members)):
        raise TreeDocumentError(
            f"leaf objects {listed} disagree with the split path "
            f"(expected {[ds.objects[i] for i in sorted(members)]})"
        )
    raw = doc.get("outcome")
    if raw is None:
        if idx:
            raise TreeDocumentError("nonempty leaf needs an outcome")
        return Leaf(outcome=None, members=())
    if not idx:
        raise TreeDocumentError("empty leaf cannot carry an outcome")
    if variant_objective(variant) == OBJECT_ID:
        if not isinstance(raw, dict) or "object" not in raw:
            raise TreeDocumentError(f"object-id leaf outcome must name an object, got {raw!r}")
        out = ds.object_index(str(raw["object"]))
        if len(idx) != 1 or idx[0] != out:
            raise TreeDocumentError("object-id leaf must isolate exactly its outcome object")
        return Leaf(outcome=out, members=idx)
    if not isinstance(raw, dict) or "group" not in raw:
        raise TreeDocumentError(f"group-id leaf outcome must name a group, got {raw!r}")
    gid = int(raw["group"]) - 1
    if not 0 <= gid < ds.n_object_groups:
        raise TreeDocumentError(f"unknown group label {raw['group']}")
    present = set(int(g) for g in ds.object_groups[list(idx)])
    if gid not in present:
        raise TreeDocumentError("leaf outcome group is not present at the leaf")
    if len(present) > 1 and not allow_impure:
        raise TreeDocumentError(
            "leaf mixes object groups; pass allow_impure=True to accept early-stopped trees"
        )
    return Leaf(outcome=gid, members=idx)


def _node_from_doc(doc, ds: Dataset, variant: str, members: np.ndarray,
                   answered: frozenset, allow_impure: bool) -> Node:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise TreeDocumentError(f"malformed tree node: {doc!r}")
    kind = doc["kind"]
    if kind == "leaf":
        return _leaf_from_doc(doc, ds, variant, members, allow_impure)

    if kind == "query":
        if variant_uses_query_groups(variant):
            raise TreeDocumentError(f"{variant} trees cannot contain bare query nodes")
        q = ds.query_index(str(doc.get("query")))
        if q in answered:
            raise TreeDocumentError(f"query {ds.queries[q]!r} repeats along a path")
        col = ds.matrix[members, q]
        return SingleQueryNode(
            query=q,
            low=_node_from_doc(doc.get("low"), ds, variant, members[col == 0],
                               answered | {q}, allow_impure),
            high=_node_from_doc(doc.get("high"), ds, variant, members[col == 1],
                                answered | {q}, allow_impure),
        )

    if kind == "query-group":
        if not variant_uses_query_groups(variant):
            raise TreeDocumentError(f"{variant} trees cannot contain query-group nodes")
        if ds.query_groups is None:
            raise TreeDocumentError("dataset has no query groups")
        gid = int(doc.get("group", 0)) - 1
        if not 0 <= gid < ds.n_query_groups:
            raise TreeDocumentError(f"unknown query group label {doc.get('group')!r}")
        raw_branches = doc.get("branches")
        if not isinstance(raw_branches, list) or not raw_branches:
            raise TreeDocumentError("query-group node needs a nonempty branch list")
        branches = []
        total_p = 0.0
        seen = set()
        group_members = set(int(j) for j in ds.query_group_members(gid))
        for rb in raw_branches:
            q = ds.query_index(str(rb.get("query")))
            if q not in group_members:
                raise TreeDocumentError(
                    f"branch query {ds.queries[q]!r} is not in query group {gid + 1}"
                )
            if q in answered:
                raise TreeDocumentError(f"query {ds.queries[q]!r} repeats along a path")
            if q in seen:
                raise TreeDocumentError(f"duplicate branch for query {ds.queries[q]!r}")
            seen.add(q)
            prob = float(rb.get("prob", 0))
            if prob <= 0.0:
                raise TreeDocumentError("branch probabilities must be positive")
            total_p += prob
            col = ds.matrix[members, q]
            branches.append(Branch(
                query=q,
                prob=prob,
                low=_node_from_doc(rb.get("low"), ds, variant, members[col == 0],
                                   answered | {q}, allow_impure),
                high=_node_from_doc(rb.get("high"), ds, variant, members[col == 1],
                                    answered | {q}, allow_impure),
            ))
        if abs(total_p - 1.0) > 1e-9:
            raise TreeDocumentError(f"branch probabilities sum to {total_p!r}, expected 1")
        return QueryGroupNode(group=gid, branches=tuple(branches))

    raise TreeDocumentError(f"unknown node kind {kind!r}")


def import_tree(doc, ds: Dataset, allow_impure: bool = False) -> DecisionTree:
    """Parse and validate a tree document against a dataset.

    Checks: known ids, no repeated query on any path, children consistent with the split
    of the parent's surviving set, branch probabilities summing to 1, and leaf purity
    matching the variant (unless allow_impure).
    """
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise TreeDocumentError(f"cannot parse tree document: {exc}") from None
    if not isinstance(doc, dict):
        raise TreeDocumentError("tree document must be a mapping")
    if doc.get("format") != TREE_FORMAT:
        raise TreeDocumentError(f"not a tree document (format={doc.get('format')!r})")
    if doc.get("version") != TREE_VERSION:
        raise TreeDocumentError(f"unsupported tree document version {doc.get('version')!r}")
    variant = doc.get("variant")
    if variant not in VARIANTS:
        raise TreeDocumentError(f"unknown tree variant {variant!r}")
    if variant_objective(variant) == GROUP_ID:
        ds.validate_for(GROUP_ID)
    try:
        root = _node_from_doc(doc.get("root"), ds, variant, np.arange(ds.n_objects),
                              frozenset(), allow_impure)
    except ValidationError as exc:   # unknown query/object ids and the like
        raise TreeDocumentError(str(exc)) from None
    return DecisionTree(variant=variant, root=root)


def load_tree(path: str | Path, ds: Dataset, allow_impure: bool = False) -> DecisionTree:
    return import_tree(Path(path).read_text(), ds, allow_impure=allow_impure)


def canonical_skeleton(tree: DecisionTree, ds: Dataset) -> dict:
    """Variant-free shape of a tree: nested split queries plus leaf survivor sets.

    Query-group nodes with a single certain branch collapse to a bare split, so trees that
    make identical split decisions compare equal across variants. Used by the reduction
    identities (singleton groups / singleton query groups).
    """

    def rec(node: Node) -> dict:
        if isinstance(node, Leaf):
            return {"objects": [ds.objects[i] for i in sorted(node.members)]}
        if isinstance(node, QueryGroupNode) and len(node.branches) == 1:
            br = node.branches[0]
            node = SingleQueryNode(br.query, br.low, br.high)
        if isinstance(node, SingleQueryNode):
            return {"q": ds.queries[node.query], "low": rec(node.low), "high": rec(node.high)}
        return {
            "group": node.group + 1,
            "branches": [
                {"q": ds.queries[b.query], "prob": b.prob,
                 "low": rec(b.low), "high": rec(b.high)}
                for b in node.branches
            ],
        }

    return rec(tree.root)


def count_nodes(tree: DecisionTree) -> tuple[int, int]:
    """(internal nodes, leaves)."""

    def rec(node: Node) -> tuple[int, int]:
        if isinstance(node, Leaf):
            return 0, 1
        kids = (
            [(br.low, br.high) for br in node.branches]
            if isinstance(node, QueryGroupNode)
            else [(node.low, node.high)]
        )
        i, l = 1, 0
        for lo, hi in kids:
            a, b = rec(lo)
            c, d = rec(hi)
            i += a + c
            l += b + d
        return i, l

    return rec(tree.root)
