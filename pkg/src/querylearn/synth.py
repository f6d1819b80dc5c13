"""Synthetic problem generators and the matching parameter estimator.

Two families:

gen_group_dataset: objects carry group labels. Per query, a hidden coin x is drawn; each
group agrees with x with probability gamma_b, and each object agrees with its group's
value with probability gamma_w. gamma_w, gamma_b in [0.5, 1] can be fixed for all
queries or drawn per query from the rectangle [1 - d1, 1] x [1 - d2, 1].

gen_querygroup_dataset: queries carry group labels. Each query group draws a difficulty
gamma_b ~ U[0.5, gamma_max]; per query a coin x is drawn and every object agrees with x
with probability gamma_b, independently.

Generation can collide (two objects drawing identical rows). Collisions that the
dataset type cannot represent (identical rows across object groups) are always redrawn
column by column for a bounded number of rounds; the rest are kept and flagged unless
distinct rows were asked for.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import ValidationError

# fixed uneven partitions used by the benchmark-shaped sweeps (298 objects, 79 queries)
BENCH_OBJECT_GROUP_SIZES = (40, 34, 31, 28, 25, 22, 20, 18, 16, 14, 12, 10, 9, 8, 6, 5)
BENCH_QUERY_GROUP_SIZES = (12, 11, 10, 9, 8, 8, 7, 6, 5, 3)


@dataclass(frozen=True)
class GroupGenParams:
    """Knobs for the object-group generator. Exactly one of (gamma_w, gamma_b) fixed
    values or the (d1, d2) rectangle must be given."""

    n_queries: int
    group_sizes: tuple[int, ...]
    gamma_w: float | None = None
    gamma_b: float | None = None
    rect: tuple[float, float] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_queries < 1 or not self.group_sizes or min(self.group_sizes) < 1:
            raise ValidationError("need at least one query and nonempty groups")
        fixed = self.gamma_w is not None or self.gamma_b is not None
        if fixed == (self.rect is not None):
            raise ValidationError("give either fixed gammas or a rectangle, not both")
        if fixed:
            if self.gamma_w is None or self.gamma_b is None:
                raise ValidationError("fixed mode needs both gamma_w and gamma_b")
            for g in (self.gamma_w, self.gamma_b):
                if not 0.5 <= g <= 1.0:
                    raise ValidationError(f"gamma {g} outside [0.5, 1]")
        else:
            d1, d2 = self.rect
            if not (0.0 <= d1 <= 0.5 and 0.0 <= d2 <= 0.5):
                raise ValidationError(f"rectangle ({d1}, {d2}) outside [0, 0.5]^2")

    @property
    def n_objects(self) -> int:
        return int(sum(self.group_sizes))


@dataclass(frozen=True)
class QueryGroupGenParams:
    """Knobs for the query-group generator."""

    n_objects: int
    query_group_sizes: tuple[int, ...]
    gamma_max: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_objects < 1 or not self.query_group_sizes or min(self.query_group_sizes) < 1:
            raise ValidationError("need at least one object and nonempty query groups")
        if not 0.5 <= self.gamma_max <= 1.0:
            raise ValidationError(f"gamma_max {self.gamma_max} outside [0.5, 1]")

    @property
    def n_queries(self) -> int:
        return int(sum(self.query_group_sizes))


@dataclass(frozen=True)
class GenInfo:
    duplicate_rows: int
    repair_rounds: int


def _labels_from_sizes(sizes: tuple[int, ...]) -> np.ndarray:
    return np.repeat(np.arange(len(sizes)), sizes)


def _duplicate_clusters(matrix: np.ndarray) -> list[np.ndarray]:
    seen: dict[bytes, list[int]] = {}
    for i, row in enumerate(matrix):
        seen.setdefault(row.tobytes(), []).append(i)
    return [np.array(v) for v in seen.values() if len(v) > 1]


def _clusters_ok(clusters, labels: np.ndarray | None, ensure: str | None) -> bool:
    if ensure is None:
        return True
    if ensure == "distinct":
        return not clusters
    # separable: duplicates may not straddle groups
    return all(np.unique(labels[c]).size == 1 for c in clusters)


def gen_group_dataset(
    params: GroupGenParams, ensure: str | None = None, max_rounds: int = 60
) -> tuple[Dataset, GenInfo]:
    """Generate an object-group problem; ensure is "distinct" or "separable".

    Group labels make separability a hard dataset invariant, so None means "separable":
    cross-group collisions are always repaired, within-group ones only under "distinct".
    """
    if ensure not in (None, "distinct", "separable"):
        raise ValidationError(f"unknown ensure mode {ensure!r}")
    ensure = ensure or "separable"
    rng = np.random.default_rng(params.seed)
    M, N, m = params.n_objects, params.n_queries, len(params.group_sizes)
    labels = _labels_from_sizes(params.group_sizes)

    if params.rect is not None:
        d1, d2 = params.rect
        gw = 1.0 - rng.uniform(0.0, d1, size=N)
        gb = 1.0 - rng.uniform(0.0, d2, size=N)
    else:
        gw = np.full(N, params.gamma_w)
        gb = np.full(N, params.gamma_b)

    x = rng.integers(0, 2, size=N, dtype=np.uint8)
    group_vals = np.where(rng.random((m, N)) < gb, x, 1 - x).astype(np.uint8)
    per_object = group_vals[labels]
    matrix = np.where(rng.random((M, N)) < gw, per_object, 1 - per_object).astype(np.uint8)

    rounds = 0
    clusters = _duplicate_clusters(matrix)
    while not _clusters_ok(clusters, labels, ensure) and rounds < max_rounds:
        rounds += 1
        for cluster in clusters:
            if ensure == "separable" and np.unique(labels[cluster]).size == 1:
                continue
            q = int(rng.integers(N))
            vals = group_vals[labels[cluster], q]
            matrix[cluster, q] = np.where(
                rng.random(cluster.size) < gw[q], vals, 1 - vals
            ).astype(np.uint8)
        clusters = _duplicate_clusters(matrix)
    if not _clusters_ok(clusters, labels, ensure):
        raise ValidationError(f"could not repair duplicate rows in {max_rounds} rounds")

    ds = Dataset(
        objects=tuple(f"o{i+1}" for i in range(M)),
        queries=tuple(f"q{j+1}" for j in range(N)),
        matrix=matrix,
        priors=np.full(M, 1.0 / M),
        object_groups=labels,
    )
    return ds, GenInfo(duplicate_rows=sum(len(c) for c in clusters), repair_rounds=rounds)


def gen_querygroup_dataset(
    params: QueryGroupGenParams, ensure: str | None = None, max_rounds: int = 60
) -> tuple[Dataset, GenInfo]:
    """Generate a query-group problem; ensure is None or "distinct"."""
    if ensure not in (None, "distinct"):
        raise ValidationError(f"unknown ensure mode {ensure!r}")
    rng = np.random.default_rng(params.seed)
    M, N = params.n_objects, params.n_queries
    qlabels = _labels_from_sizes(params.query_group_sizes)

    gamma = rng.uniform(0.5, params.gamma_max, size=len(params.query_group_sizes))[qlabels]
    x = rng.integers(0, 2, size=N, dtype=np.uint8)
    matrix = np.where(rng.random((M, N)) < gamma, x, 1 - x).astype(np.uint8)

    rounds = 0
    clusters = _duplicate_clusters(matrix)
    while ensure == "distinct" and clusters and rounds < max_rounds:
        rounds += 1
        for cluster in clusters:
            q = int(rng.integers(N))
            matrix[cluster, q] = np.where(
                rng.random(cluster.size) < gamma[q], x[q], 1 - x[q]
            ).astype(np.uint8)
        clusters = _duplicate_clusters(matrix)
    if ensure == "distinct" and clusters:
        raise ValidationError(f"could not repair duplicate rows in {max_rounds} rounds")

    ds = Dataset(
        objects=tuple(f"o{i+1}" for i in range(M)),
        queries=tuple(f"q{j+1}" for j in range(N)),
        matrix=matrix,
        priors=np.full(M, 1.0 / M),
        query_groups=qlabels,
    )
    return ds, GenInfo(duplicate_rows=sum(len(c) for c in clusters), repair_rounds=rounds)


def estimate_params(ds: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Per-query (gamma_w_hat, gamma_b_hat) recovered by majority voting.

    Per query: each group votes its majority response; the fraction of members matching
    that vote estimates gamma_w. The majority over group votes reconstructs the hidden
    coin; the fraction of groups matching it estimates gamma_b. Ties resolve to 1.
    """
    if ds.object_groups is None:
        raise ValidationError("estimation needs object groups")
    m = ds.n_object_groups
    N = ds.n_queries
    gw = np.empty(N)
    gb = np.empty(N)
    members = [ds.group_members(g) for g in range(m)]
    for q in range(N):
        votes = np.empty(m, dtype=np.uint8)
        agree = np.empty(m)
        for g in range(m):
            col = ds.matrix[members[g], q]
            ones = int(col.sum())
            size = col.size
            votes[g] = 1 if 2 * ones >= size else 0
            agree[g] = (ones if votes[g] else size - ones) / size
        x = 1 if 2 * int(votes.sum()) >= m else 0
        gb[q] = float((votes == x).mean())
        gw[q] = float(agree.mean())
    return gw, gb
