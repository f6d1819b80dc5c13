"""Entropy, reduction factors, and greedy split costs.

All logarithms are base 2. For a node with surviving set S and a query q splitting S into
(L, R) by response, the reduction factor is rho = max(mass(L), mass(R)) / mass(S), always in
[1/2, 1]. Group reduction factors restrict the same ratio to one object group. The
group-identification cost of q is

    cost = 1 - H(rho) + sum_i (mass_i / mass) * H(rho_i)

and exact identification uses rho itself. Lower is better in both cases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, GROUP_ID, OBJECT_ID
from .errors import ValidationError


def entropy(dist) -> float:
    """Shannon entropy (bits) of a probability vector; 0 log 0 reads as 0."""
    p = np.asarray(dist, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValidationError("entropy expects a nonempty 1-d distribution")
    if (p < -1e-12).any():
        raise ValidationError("distribution has negative entries")
    if abs(float(p.sum()) - 1.0) > 1e-9:
        raise ValidationError(f"distribution sums to {float(p.sum())!r}, expected 1")
    pos = p[p > 0]
    return float(-(pos * np.log2(pos)).sum())


def binary_entropy(x: float) -> float:
    """H(x) = -x log2 x - (1-x) log2 (1-x) for x in [0, 1]."""
    if not 0.0 <= x <= 1.0:
        raise ValidationError(f"binary_entropy argument {x!r} outside [0, 1]")
    if x in (0.0, 1.0):
        return 0.0
    return float(-x * np.log2(x) - (1.0 - x) * np.log2(1.0 - x))


def _binary_entropy_vec(x: np.ndarray) -> np.ndarray:
    # vectorized H with the 0/1 endpoints mapped to 0
    out = np.zeros_like(x, dtype=float)
    inner = (x > 0.0) & (x < 1.0)
    xi = x[inner]
    out[inner] = -xi * np.log2(xi) - (1.0 - xi) * np.log2(1.0 - xi)
    return out


@dataclass(frozen=True)
class NodePopulation:
    """Surviving objects at a tree node, with their mass and per-group breakdown.

    group_ids lists the 0-based object-group labels still present (sorted); group_slices
    maps positions in ``members`` to those groups. Both are None when the dataset has no
    object groups.
    """

    members: np.ndarray
    mass: float
    group_ids: np.ndarray | None
    group_masses: np.ndarray | None

    @property
    def size(self) -> int:
        return int(self.members.size)

    def is_group_pure(self, ds: Dataset) -> bool:
        if ds.object_groups is None:
            raise ValidationError("dataset has no object groups")
        return self.group_ids is not None and self.group_ids.size <= 1


def population(ds: Dataset, members: np.ndarray | None = None) -> NodePopulation:
    """NodePopulation over ``members`` (defaults to every object)."""
    if members is None:
        members = np.arange(ds.n_objects)
    members = np.asarray(members, dtype=np.int64)
    mass = float(ds.priors[members].sum())
    if ds.object_groups is None:
        return NodePopulation(members, mass, None, None)
    labels = ds.object_groups[members]
    gids = np.unique(labels)
    gmass = np.array([float(ds.priors[members[labels == g]].sum()) for g in gids])
    return NodePopulation(members, mass, gids, gmass)


def split_population(pop: NodePopulation, ds: Dataset, query: int) -> tuple[NodePopulation, NodePopulation]:
    """Children of ``pop`` under query ``query``: (response 0, response 1)."""
    col = ds.matrix[pop.members, query]
    return (
        population(ds, pop.members[col == 0]),
        population(ds, pop.members[col == 1]),
    )


@dataclass(frozen=True)
class SplitStats:
    """Reduction factors and cost of one query at one node."""

    query: int
    left_mass: float
    right_mass: float
    rho: float
    group_rhos: dict[int, float] | None
    cost: float


def split_stats(pop: NodePopulation, ds: Dataset, query: int, objective: str = OBJECT_ID) -> SplitStats:
    """Reduction factor(s) and greedy cost of asking ``query`` at this node.

    The node must carry positive mass. A query constant on the node is legal here
    (rho = 1, cost 1 for group identification); builders exclude such queries themselves.
    """
    if pop.mass <= 0.0:
        raise ValidationError("split_stats needs a node with positive mass")
    if not 0 <= query < ds.n_queries:
        raise ValidationError(f"query index {query} out of range")
    col = ds.matrix[pop.members, query]
    w = ds.priors[pop.members]
    right = float(w[col == 1].sum())
    left = pop.mass - right
    rho = max(left, right) / pop.mass

    if objective == OBJECT_ID:
        return SplitStats(query, left, right, rho, None, rho)
    if objective != GROUP_ID:
        raise ValidationError(f"unknown objective {objective!r}")
    if pop.group_ids is None:
        raise ValidationError("group-identification cost needs object groups")

    labels = ds.object_groups[pop.members]
    group_rhos: dict[int, float] = {}
    acc = 0.0
    for g, gm in zip(pop.group_ids, pop.group_masses):
        inside = labels == g
        r = float(w[inside & (col == 1)].sum())
        rho_g = max(gm - r, r) / gm if gm > 0 else 1.0
        group_rhos[int(g)] = rho_g
        acc += (gm / pop.mass) * binary_entropy(rho_g)
    cost = 1.0 - binary_entropy(rho) + acc
    return SplitStats(query, left, right, rho, group_rhos, cost)


def impurity_decrease(pop: NodePopulation, ds: Dataset, query: int) -> float:
    """Drop in expected group-label entropy when the node is split by ``query``.

    Entropy impurity of a node is the Shannon entropy of its group-mass distribution;
    children are weighted by their share of the node's mass.
    """
    if ds.object_groups is None:
        raise ValidationError("impurity needs object groups")
    if pop.mass <= 0.0:
        raise ValidationError("impurity_decrease needs a node with positive mass")
    parent = entropy(pop.group_masses / pop.mass)
    left, right = split_population(pop, ds, query)
    child = 0.0
    for part in (left, right):
        if part.size == 0 or part.mass <= 0.0:
            continue
        child += (part.mass / pop.mass) * entropy(part.group_masses / part.mass)
    return parent - child


@dataclass(frozen=True)
class EquivalenceReport:
    """Per-query comparison of cost against impurity decrease at one node.

    The two are complementary: cost + decrease = 1 for every query, so the query with the
    lowest cost is exactly the one with the greatest impurity decrease.
    """

    queries: tuple[int, ...]
    costs: tuple[float, ...]
    decreases: tuple[float, ...]
    max_gap: float
    argmin_cost: tuple[int, ...]
    argmax_decrease: tuple[int, ...]

    @property
    def ok(self) -> bool:
        return self.max_gap <= 1e-9 and self.argmin_cost == self.argmax_decrease


def check_impurity_equivalence(
    pop: NodePopulation, ds: Dataset, queries=None, tie_tol: float = 1e-12
) -> EquivalenceReport:
    """Verify cost(q) + impurity_decrease(q) = 1 and that the optima coincide."""
    if queries is None:
        queries = range(ds.n_queries)
    queries = tuple(int(q) for q in queries)
    if not queries:
        raise ValidationError("no queries to check")
    costs, decreases = [], []
    for q in queries:
        costs.append(split_stats(pop, ds, q, GROUP_ID).cost)
        decreases.append(impurity_decrease(pop, ds, q))
    gap = max(abs(c + d - 1.0) for c, d in zip(costs, decreases))
    best_c, best_d = min(costs), max(decreases)
    argmin_cost = tuple(q for q, c in zip(queries, costs) if c <= best_c + tie_tol)
    argmax_decrease = tuple(q for q, d in zip(queries, decreases) if d >= best_d - tie_tol)
    return EquivalenceReport(
        queries=queries,
        costs=tuple(costs),
        decreases=tuple(decreases),
        max_gap=gap,
        argmin_cost=argmin_cost,
        argmax_decrease=argmax_decrease,
    )


def candidate_costs(
    pop: NodePopulation, ds: Dataset, objective: str
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized greedy costs of every query at a node.

    Returns (cost, rho, splits) arrays of length N, where splits marks queries that are
    non-constant over the node's members. cost/rho entries are well defined for every
    query; callers mask with ``splits`` to restrict to real candidates.
    """
    sub = ds.matrix[pop.members]
    w = ds.priors[pop.members]
    k = pop.size
    if pop.mass > 0.0:
        weights = w
        total = pop.mass
    else:
        # degenerate zero-mass node: fall back to counting members so costs stay defined
        weights = np.full(k, 1.0 / k)
        total = 1.0
    right = weights @ sub
    rho = np.maximum(right, total - right) / total
    ones = sub.sum(axis=0)
    splits = (ones > 0) & (ones < k)
    if objective == OBJECT_ID:
        return rho.copy(), rho, splits
    if pop.group_ids is None:
        raise ValidationError("group-identification cost needs object groups")
    labels = ds.object_groups[pop.members]
    cost = 1.0 - _binary_entropy_vec(rho)
    for g, gm in zip(pop.group_ids, pop.group_masses):
        inside = labels == g
        if pop.mass > 0.0:
            r_g = weights[inside] @ sub[inside]
            share = gm / total
            gmass = gm
        else:
            r_g = weights[inside] @ sub[inside]
            gmass = float(weights[inside].sum())
            share = gmass / total
        if gmass <= 0.0:
            continue
        rho_g = np.maximum(r_g, gmass - r_g) / gmass
        cost += share * _binary_entropy_vec(rho_g)
    return cost, rho, splits
