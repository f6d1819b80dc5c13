"""Greedy tree construction.

Four builders, one greedy scheme: at every node, score each candidate and keep the
cheapest, recursing until the node's surviving set is resolved.

    build_gbs      single queries, score = reduction factor rho, stop at one object
    build_gisa     single queries, group-identification cost, stop at one group
    build_gqsa     query groups, score = 1 - sum_q p(q) H(rho(q)), stop at one object
    build_gigqsa   query groups, group-identification version of the same, one group

build_gbs also accepts objective="group-id" in its config, which keeps the rho rule but
stops at group purity; that is the classic splitting algorithm run for group
identification. Costs within 1e-12 of the minimum count as tied; ties resolve to the
lowest query (or group) index, or by a seeded draw that depends only on the answered
path, so online sessions and offline builds make identical choices.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, GROUP_ID, OBJECT_ID, _selection_distribution
from .errors import BuildError, ValidationError
from .infomath import (
    NodePopulation,
    _binary_entropy_vec,
    candidate_costs,
    population,
    split_stats,
)
from .trees import (
    Branch,
    DecisionTree,
    Leaf,
    QueryGroupNode,
    SingleQueryNode,
    walk,
)

TIE_TOL = 1e-12

SINGLE_QUERY_STRATEGIES = ("gbs", "gisa")
GROUP_QUERY_STRATEGIES = ("gqsa", "gigqsa", "min-min", "min-max")


@dataclass(frozen=True)
class BuildConfig:
    """Construction knobs shared by every builder.

    objective overrides the builder's stopping rule ("object-id" or "group-id").
    tie_break is "index" (lowest index wins) or "random" (seeded draw); a seed is
    required exactly when tie_break is "random".
    """

    objective: str | None = None
    tie_break: str = "index"
    seed: int | None = None
    max_depth: int | None = None

    def __post_init__(self):
        if self.tie_break not in ("index", "random"):
            raise ValidationError(f"tie_break must be index or random, got {self.tie_break!r}")
        if (self.seed is not None) != (self.tie_break == "random"):
            raise ValidationError("a seed is required iff tie_break is 'random'")
        if self.objective is not None and self.objective not in (OBJECT_ID, GROUP_ID):
            raise ValidationError(f"unknown objective {self.objective!r}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValidationError("max_depth must be positive")


def _node_seed(seed: int, answered: tuple[tuple[int, int], ...]) -> int:
    # stable per-node stream: depends only on the (query, response) path, not build order
    blob = repr((seed, tuple(sorted(answered)))).encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big")


def _pick(candidates: list[int], costs: list[float], cfg: BuildConfig,
          answered: tuple[tuple[int, int], ...]) -> tuple[int, float]:
    best = min(costs)
    ties = [c for c, s in zip(candidates, costs) if s <= best + TIE_TOL]
    if cfg.tie_break == "index" or len(ties) == 1:
        return ties[0], best
    rng = np.random.default_rng(_node_seed(cfg.seed, answered))
    return int(rng.choice(np.array(ties))), best


def select_single_query(
    ds: Dataset,
    pop: NodePopulation,
    answered: tuple[tuple[int, int], ...],
    rule: str,
    cfg: BuildConfig,
) -> tuple[int, float]:
    """Cheapest still-unanswered query that actually splits the node.

    rule "gbs" scores by rho, "gisa" by the group-identification cost.
    """
    if rule not in SINGLE_QUERY_STRATEGIES:
        raise ValidationError(f"unknown single-query rule {rule!r}")
    objective = OBJECT_ID if rule == "gbs" else GROUP_ID
    cost, _rho, splits = candidate_costs(pop, ds, objective)
    answered_q = {q for q, _ in answered}
    cands = [int(q) for q in np.flatnonzero(splits) if int(q) not in answered_q]
    if not cands:
        raise BuildError("no unanswered query splits this node")
    return _pick(cands, [float(cost[q]) for q in cands], cfg, answered)


def select_query_group(
    ds: Dataset,
    pop: NodePopulation,
    answered: tuple[tuple[int, int], ...],
    rule: str,
    cfg: BuildConfig,
    group_queries: list[list[int]] | None = None,
    score_cache: dict | None = None,
) -> tuple[int, list[tuple[int, float]], float]:
    """Best query group for this node under ``rule``, with its selection distribution.

    Candidate groups are those with at least one unanswered query. Scores:

        gqsa      1 - sum_q p(q) H(rho(q))
        gigqsa    1 - sum_q p(q) [H(rho(q)) - sum_i share_i H(rho_i(q))]
        min-min   min_q p(q) rho(q)
        min-max   max_q p(q) rho(q)

    ``group_queries`` lets a builder pass each group's member indices once instead
    of having them recomputed for every node, and ``score_cache`` (a dict the caller
    owns, valid for one dataset and one rule) memoizes the per-query score vectors by
    member set -- they do not depend on which queries were answered, and the same
    surviving set recurs under many answered sets. Returns
    (group index, [(query, prob), ...], score).
    """
    if rule not in GROUP_QUERY_STRATEGIES:
        raise ValidationError(f"unknown query-group rule {rule!r}")
    if ds.query_groups is None:
        raise ValidationError("dataset has no query groups")
    if group_queries is None:
        group_queries = [[int(j) for j in ds.query_group_members(g)]
                         for g in range(ds.n_query_groups)]
    answered_q = {q for q, _ in answered}

    cached = None if score_cache is None else score_cache.get(pop.members.tobytes())
    if cached is None:
        if rule == "gigqsa":
            cost_vec, rho, _ = candidate_costs(pop, ds, GROUP_ID)
            gain = 1.0 - cost_vec
        else:
            _, rho, _ = candidate_costs(pop, ds, OBJECT_ID)
            gain = _binary_entropy_vec(rho) if rule == "gqsa" else None
        if score_cache is not None:
            score_cache[pop.members.tobytes()] = (gain, rho)
    else:
        gain, rho = cached

    groups: list[int] = []
    dists: list[list[tuple[int, float]]] = []
    scores: list[float] = []
    for g in range(ds.n_query_groups):
        members = [j for j in group_queries[g] if j not in answered_q]
        if not members:
            continue
        if ds.selection_weights is None:
            p = 1.0 / len(members)
            dist = [(j, p) for j in members]
        else:
            w = np.array([ds.selection_weights[j] for j in members], dtype=float)
            w /= w.sum()
            dist = list(zip(members, (float(x) for x in w)))
        if rule in ("gqsa", "gigqsa"):
            score = 1.0 - sum(p * float(gain[q]) for q, p in dist)
        elif rule == "min-min":
            score = min(p * float(rho[q]) for q, p in dist)
        else:
            score = max(p * float(rho[q]) for q, p in dist)
        groups.append(g)
        dists.append(dist)
        scores.append(score)
    if not groups:
        raise BuildError("every query group is exhausted")
    g, best = _pick(groups, scores, cfg, answered)
    return g, dists[groups.index(g)], best


def _leaf(ds: Dataset, pop: NodePopulation, objective: str) -> Leaf:
    members = tuple(int(i) for i in pop.members)
    if not members:
        return Leaf(outcome=None, members=())
    if objective == OBJECT_ID:
        return Leaf(outcome=members[0], members=members)
    return Leaf(outcome=int(ds.object_groups[members[0]]), members=members)


def _resolved(ds: Dataset, pop: NodePopulation, objective: str) -> bool:
    if objective == OBJECT_ID:
        return pop.size <= 1
    return pop.size == 0 or pop.is_group_pure(ds)


def _check_depth(depth: int, cfg: BuildConfig, ds: Dataset) -> None:
    # splitting a node at `depth` makes paths of length depth + 1
    limit = cfg.max_depth if cfg.max_depth is not None else ds.n_queries
    if depth >= limit:
        raise BuildError(f"a split at depth {depth} would exceed the limit of {limit} queries")


def _node_population(ds: Dataset, members: np.ndarray, slim: bool) -> NodePopulation:
    # group masses are pure overhead when neither the stopping rule nor the cost
    # needs them, and they dominate population() on instances with many nodes
    if slim:
        return NodePopulation(members, float(ds.priors[members].sum()), None, None)
    return population(ds, members)


def _build_single(ds: Dataset, rule: str, cfg: BuildConfig) -> DecisionTree:
    default_obj = OBJECT_ID if rule == "gbs" else GROUP_ID
    objective = cfg.objective or default_obj
    ds.validate_for(objective)
    if rule == "gisa":
        ds.validate_for(GROUP_ID)
    slim = objective == OBJECT_ID and rule == "gbs"

    def expand(members: np.ndarray, answered, depth: int):
        pop = _node_population(ds, members, slim)
        if _resolved(ds, pop, objective):
            return _leaf(ds, pop, objective)
        _check_depth(depth, cfg, ds)
        q, _ = select_single_query(ds, pop, answered, rule, cfg)
        col = ds.matrix[members, q]
        return SingleQueryNode(
            query=q,
            low=expand(members[col == 0], answered + ((q, 0),), depth + 1),
            high=expand(members[col == 1], answered + ((q, 1),), depth + 1),
        )

    root = expand(np.arange(ds.n_objects), (), 0)
    return DecisionTree(variant=objective, root=root)


def _build_group_query(ds: Dataset, rule: str, cfg: BuildConfig) -> DecisionTree:
    default_obj = GROUP_ID if rule == "gigqsa" else OBJECT_ID
    objective = cfg.objective or default_obj
    ds.validate_for(objective)
    if ds.query_groups is None:
        raise ValidationError("query-group strategies need query_groups")
    variant = (
        "group-id-group-queries" if objective == GROUP_ID else "object-id-group-queries"
    )

    # Branching per selectable query makes the unrolled tree exponential, but the
    # subtree below a node depends only on the surviving set and on which queries
    # are spent -- never on the order answers arrived in (the seeded tie-break keys
    # on the *sorted* answered pairs for exactly this reason). Build each such
    # state once and share the node; evaluation copes with the sharing.
    memo: dict = {}
    pops: dict = {}
    scores: dict = {}
    empty = Leaf(outcome=None, members=())
    group_queries = [[int(j) for j in ds.query_group_members(g)]
                     for g in range(ds.n_query_groups)]
    slim = objective == OBJECT_ID and rule != "gigqsa"

    def expand(members: np.ndarray, answered, depth: int):
        if members.size == 0:
            return empty
        mkey = members.tobytes()
        if cfg.tie_break == "random":
            key = tuple(sorted(answered))
        else:
            key = (mkey, frozenset(q for q, _ in answered))
        node = memo.get(key)
        if node is not None:
            return node
        pop = pops.get(mkey)
        if pop is None:
            pop = pops[mkey] = _node_population(ds, members, slim)
        if _resolved(ds, pop, objective):
            node = _leaf(ds, pop, objective)
            memo[key] = node
            return node
        _check_depth(depth, cfg, ds)
        g, dist, _ = select_query_group(ds, pop, answered, rule, cfg,
                                        group_queries=group_queries,
                                        score_cache=scores)
        branches = []
        for q, p in dist:
            col = ds.matrix[members, q]
            branches.append(Branch(
                query=q,
                prob=p,
                low=expand(members[col == 0], answered + ((q, 0),), depth + 1),
                high=expand(members[col == 1], answered + ((q, 1),), depth + 1),
            ))
        node = QueryGroupNode(group=g, branches=tuple(branches))
        memo[key] = node
        return node

    root = expand(np.arange(ds.n_objects), (), 0)
    return DecisionTree(variant=variant, root=root)


def build_gbs(ds: Dataset, config: BuildConfig | None = None) -> DecisionTree:
    """Splitting-algorithm tree: minimize rho at every node. Default objective object-id."""
    return _build_single(ds, "gbs", config or BuildConfig())


def build_gisa(ds: Dataset, config: BuildConfig | None = None) -> DecisionTree:
    """Group-identification tree: minimize the group cost, stop at group-pure nodes."""
    return _build_single(ds, "gisa", config or BuildConfig())


def build_gqsa(ds: Dataset, config: BuildConfig | None = None) -> DecisionTree:
    """Query-group tree for exact identification; one branch per selectable query."""
    return _build_group_query(ds, "gqsa", config or BuildConfig())


def build_gigqsa(ds: Dataset, config: BuildConfig | None = None) -> DecisionTree:
    """Query-group tree for group identification."""
    return _build_group_query(ds, "gigqsa", config or BuildConfig())


_BUILDERS = {
    "gbs": build_gbs,
    "gisa": build_gisa,
    "gqsa": build_gqsa,
    "gigqsa": build_gigqsa,
}


def build(ds: Dataset, strategy: str, config: BuildConfig | None = None) -> DecisionTree:
    try:
        builder = _BUILDERS[strategy]
    except KeyError:
        raise ValidationError(
            f"unknown strategy {strategy!r}; expected one of {sorted(_BUILDERS)}"
        ) from None
    return builder(ds, config)


@dataclass(frozen=True)
class GreedyAudit:
    nodes_checked: int
    max_excess: float

    @property
    def ok(self) -> bool:
        return self.max_excess <= TIE_TOL


def audit_greedy(tree: DecisionTree, ds: Dataset, strategy: str,
                 config: BuildConfig | None = None) -> GreedyAudit:
    """Re-score every internal node and confirm the stored choice is greedy-optimal.

    The stored choice may be any member of the tie set, so the audit asserts its cost is
    within the tie tolerance of the best candidate, not that it equals a specific pick.
    """
    cfg = config or BuildConfig()
    checked = 0
    excess = 0.0
    for item in walk(tree, ds):
        node = item.node
        if isinstance(node, Leaf):
            continue
        pop = population(ds, item.members)
        checked += 1
        if isinstance(node, SingleQueryNode):
            _, best = select_single_query(ds, pop, item.answered, strategy, cfg)
            objective = OBJECT_ID if strategy == "gbs" else GROUP_ID
            chosen = split_stats(pop, ds, node.query, objective).cost
        else:
            _, dist, best = select_query_group(ds, pop, item.answered, strategy, cfg)
            answered_q = {q for q, _ in item.answered}
            own = _selection_distribution(ds, node.group, answered_q)
            if [q for q, _ in own] != [br.query for br in node.branches]:
                raise BuildError("stored branches disagree with the selection distribution")
            if strategy == "gigqsa":
                cost_vec, _, _ = candidate_costs(pop, ds, GROUP_ID)
                gain = 1.0 - cost_vec
                chosen = 1.0 - sum(p * float(gain[q]) for q, p in own)
            elif strategy == "gqsa":
                _, rho, _ = candidate_costs(pop, ds, OBJECT_ID)
                hb = _binary_entropy_vec(rho)
                chosen = 1.0 - sum(p * float(hb[q]) for q, p in own)
            elif strategy == "min-min":
                _, rho, _ = candidate_costs(pop, ds, OBJECT_ID)
                chosen = min(p * float(rho[q]) for q, p in own)
            else:
                _, rho, _ = candidate_costs(pop, ds, OBJECT_ID)
                chosen = max(p * float(rho[q]) for q, p in own)
        excess = max(excess, chosen - best)
    return GreedyAudit(nodes_checked=checked, max_excess=excess)


def verify_tree_outcomes(tree: DecisionTree, ds: Dataset) -> None:
    """Replay every object through the tree: stored leaves must match the recomputed
    surviving sets and resolve to the right outcome. Raises BuildError on any mismatch."""
    from .trees import variant_objective

    objective = variant_objective(tree.variant)
    for item in walk(tree, ds):
        node = item.node
        if not isinstance(node, Leaf):
            continue
        walked = tuple(int(i) for i in sorted(item.members))
        if tuple(sorted(node.members)) != walked:
            raise BuildError(f"leaf stores {node.members}, path computes {walked}")
        if not walked:
            if node.outcome is not None:
                raise BuildError("empty leaf carries an outcome")
            continue
        if objective == OBJECT_ID:
            if len(walked) != 1 or node.outcome != walked[0]:
                raise BuildError(f"object leaf {walked} with outcome {node.outcome}")
        else:
            groups = {int(ds.object_groups[i]) for i in walked}
            if groups != {node.outcome}:
                raise BuildError(f"group leaf spans {groups}, outcome {node.outcome}")
