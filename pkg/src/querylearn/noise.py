"""Persistent query noise: corrupted-row dilation, exact and implicit.

A noise declaration marks K queries as error-prone. If delta is the minimum pairwise
Hamming distance between object rows, any response pattern with at most
epsilon = floor((delta - 1) / 2) wrong answers still has a unique nearest object, so the
error budget is eps' = min(epsilon, K). Identification then becomes group identification
over the dilated problem: each object turns into the group of all rows obtained by
flipping at most eps' of its error-prone coordinates. Corruption weights follow one of
two models over the error count e: proportional to C(K, e) (model 1) or to
C(K, e) p^e (1-p)^(K-e) with p <= 0.5 (model 2; model 1 is p = 0.5).

The dilated problem can be materialized row by row (fine for small budgets) or handled
implicitly. The implicit form never enumerates rows: a node is summarized by, per still
viable source object, the count delta_i of answered error-prone queries it mismatched,
plus the number of error-prone queries not yet asked. Every mass, reduction factor, and
greedy cost follows from binomial tail sums over those counts, evaluated in log space.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .builders import BuildConfig, TIE_TOL, _node_seed
from .dataset import Dataset, NoiseSpec
from .errors import BuildError, InconsistentResponseError, ValidationError
from .infomath import SplitStats, binary_entropy

EXPLICIT_ROW_CAP = 1_000_000


def error_budget(ds: Dataset) -> tuple[int, int]:
    """(delta, epsilon): minimum pairwise row distance and the correctable error count."""
    if ds.n_objects < 2:
        raise ValidationError("error budget needs at least two objects")
    rows = ds.matrix.astype(np.int16)
    delta = ds.n_queries
    for i in range(ds.n_objects - 1):
        d = np.abs(rows[i + 1:] - rows[i]).sum(axis=1).min()
        delta = min(delta, int(d))
        if delta == 0:
            break
    if delta == 0:
        warnings.warn("duplicate rows: error budget is zero and noise cannot be tolerated")
    return delta, (delta - 1) // 2 if delta else 0


def effective_budget(ds: Dataset, spec: NoiseSpec) -> int:
    """eps' = min(epsilon, K), optionally lowered (never raised) by spec.max_errors."""
    _, eps = error_budget(ds)
    eps_prime = min(eps, spec.n_error_prone)
    if spec.max_errors is not None:
        if spec.max_errors > eps_prime:
            raise ValidationError(
                f"max_errors={spec.max_errors} exceeds the derived budget {eps_prime}"
            )
        eps_prime = spec.max_errors
    return eps_prime


def _model_log_weight(spec: NoiseSpec, e: int) -> float:
    # log of the unnormalized corruption weight for an exact pattern with e flips
    k = spec.n_error_prone
    if spec.model == 1:
        return 0.0
    p, q = spec.p, 1.0 - spec.p
    lp = 0.0 if e == 0 else (e * math.log(p) if p > 0 else -math.inf)
    lq = 0.0 if k - e == 0 else (k - e) * math.log(q)
    return lp + lq


@dataclass(frozen=True)
class DilatedProblem:
    """Materialized dilation: every corrupted row as its own object, grouped by source."""

    source: Dataset
    spec: NoiseSpec
    delta: int
    epsilon: int
    eps_prime: int
    dataset: Dataset

    def source_of_group(self, group: int) -> str:
        """Source object id behind 0-based dilated group label ``group``."""
        return self.source.objects[group]


def dilate_explicit(ds: Dataset, spec: NoiseSpec | None = None,
                    cap: int = EXPLICIT_ROW_CAP) -> DilatedProblem:
    """Materialize the dilated problem.

    Rows are emitted source object by source object, error count ascending, flip
    positions in lexicographic order, so the layout is reproducible. Priors spread each
    source prior over its corruption ball according to the model, normalized so the
    whole dilation still sums to 1.
    """
    spec = spec or ds.noise
    if spec is None:
        raise ValidationError("no noise declaration to dilate with")
    ds.validate_for("object-id")
    delta, eps = error_budget(ds)
    eps_prime = effective_budget(ds, spec)
    k = spec.n_error_prone
    ball = sum(math.comb(k, e) for e in range(eps_prime + 1))
    if ds.n_objects * ball > cap:
        raise ValidationError(
            f"explicit dilation needs {ds.n_objects * ball} rows, above the cap {cap}; "
            "use the implicit form"
        )

    log_z = _log_ball_mass(spec, eps_prime, k)
    ids: list[str] = []
    rows: list[np.ndarray] = []
    priors: list[float] = []
    groups: list[int] = []
    prone = list(spec.error_prone)
    for i, src in enumerate(ds.objects):
        base = ds.matrix[i]
        for e in range(eps_prime + 1):
            w = math.exp(_model_log_weight(spec, e) - log_z) * float(ds.priors[i])
            for combo in itertools.combinations(prone, e):
                row = base.copy()
                row[list(combo)] ^= 1
                ids.append(src if e == 0 else src + "~" + "+".join(ds.queries[j] for j in combo))
                rows.append(row)
                priors.append(w)
                groups.append(i + 1)

    dilated = Dataset(
        objects=tuple(ids),
        queries=ds.queries,
        matrix=np.array(rows, dtype=np.uint8),
        priors=np.array(priors),
        object_groups=np.array(groups, dtype=np.int64) - 1,
        query_groups=None if ds.query_groups is None else ds.query_groups.copy(),
        selection_weights=None if ds.selection_weights is None else ds.selection_weights.copy(),
    )
    if not dilated.rows_distinct:
        raise ValidationError("dilated rows collide; the error budget is inconsistent")
    return DilatedProblem(
        source=ds, spec=spec, delta=delta, epsilon=eps, eps_prime=eps_prime, dataset=dilated
    )


def _log_ball_mass(spec: NoiseSpec, eps_prime: int, k: int) -> float:
    terms = [
        math.log(math.comb(k, e)) + _model_log_weight(spec, e)
        for e in range(eps_prime + 1)
    ]
    return _logsumexp(terms)


def _logsumexp(terms) -> float:
    terms = [t for t in terms if t != -math.inf]
    if not terms:
        return -math.inf
    top = max(terms)
    return top + math.log(sum(math.exp(t - top) for t in terms))


@dataclass(frozen=True)
class NoiseNodeState:
    """Sufficient statistics of one node of the implicitly dilated problem.

    alive lists source objects still consistent with the answers; delta aligns with it
    and counts their mismatches over the answered error-prone queries. n_free counts the
    error-prone queries not asked yet.
    """

    answered: tuple[tuple[int, int], ...]
    alive: tuple[int, ...]
    delta: tuple[int, ...]
    n_free: int

    @property
    def resolved(self) -> bool:
        return len(self.alive) <= 1


class ImplicitDilation:
    """Node statistics of the dilated problem computed straight from the source dataset."""

    def __init__(self, ds: Dataset, spec: NoiseSpec | None = None):
        spec = spec or ds.noise
        if spec is None:
            raise ValidationError("no noise declaration")
        ds.validate_for("object-id")
        self.ds = ds
        self.spec = spec
        self.eps_prime = effective_budget(ds, spec)
        self.k = spec.n_error_prone
        self.prone = np.zeros(ds.n_queries, dtype=bool)
        self.prone[list(spec.error_prone)] = True
        self.log_z = _log_ball_mass(spec, self.eps_prime, self.k)
        p = spec.p
        self._log_p = -math.inf if p == 0.0 else math.log(p)
        self._log_q = math.log1p(-p)

    # -- state transitions ---------------------------------------------------

    def root_state(self) -> NoiseNodeState:
        return NoiseNodeState(
            answered=(),
            alive=tuple(range(self.ds.n_objects)),
            delta=(0,) * self.ds.n_objects,
            n_free=self.k,
        )

    def answer(self, state: NoiseNodeState, query: int, response: int) -> NoiseNodeState:
        """Apply one answered query; raises when no source object stays viable."""
        if response not in (0, 1):
            raise ValidationError(f"response must be 0 or 1, got {response!r}")
        if any(q == query for q, _ in state.answered):
            raise ValidationError(f"query {query} was already answered")
        alive, delta = [], []
        if self.prone[query]:
            for i, d in zip(state.alive, state.delta):
                d2 = d + (int(self.ds.matrix[i, query]) != response)
                if d2 <= self.eps_prime:
                    alive.append(i)
                    delta.append(d2)
            n_free = state.n_free - 1
        else:
            for i, d in zip(state.alive, state.delta):
                if int(self.ds.matrix[i, query]) == response:
                    alive.append(i)
                    delta.append(d)
            n_free = state.n_free
        if not alive:
            raise InconsistentResponseError(
                f"response {response} to {self.ds.queries[query]!r} rules out every object; "
                "the answer pattern lies outside the declared error model"
            )
        return NoiseNodeState(
            answered=state.answered + ((query, response),),
            alive=tuple(alive),
            delta=tuple(delta),
            n_free=n_free,
        )

    # -- masses and reduction factors -----------------------------------------

    def _log_tail(self, n: int, d: int) -> float:
        """log sum_{e<=min(n, eps'-d)} C(n, e) p^(e+d) (1-p)^(K-e-d); -inf when d > eps'."""
        top = min(n, self.eps_prime - d)
        if top < 0:
            return -math.inf
        terms = []
        for e in range(top + 1):
            flips = e + d
            lp = 0.0 if flips == 0 else flips * self._log_p
            rest = self.k - flips
            lq = 0.0 if rest == 0 else rest * self._log_q
            if self.spec.model == 1:
                # model 1 weights patterns uniformly: drop the p-powers entirely
                lp = lq = 0.0
            terms.append(math.log(math.comb(n, e)) + lp + lq)
        return _logsumexp(terms)

    def masses(self, state: NoiseNodeState) -> np.ndarray:
        """Surviving prior mass per alive source object, aligned with state.alive."""
        out = np.empty(len(state.alive))
        for pos, (i, d) in enumerate(zip(state.alive, state.delta)):
            lw = self._log_tail(state.n_free, d) - self.log_z
            out[pos] = float(self.ds.priors[i]) * math.exp(lw)
        return out

    def candidates(self, state: NoiseNodeState) -> list[int]:
        """Unanswered queries whose two responses both keep at least one object alive."""
        answered = {q for q, _ in state.answered}
        bits = self.ds.matrix[list(state.alive)]
        out = []
        for q in range(self.ds.n_queries):
            if q in answered:
                continue
            col = bits[:, q]
            if self.prone[q]:
                can_flip = any(d < self.eps_prime for d in state.delta)
                if col.min() != col.max() or can_flip:
                    out.append(q)
            else:
                if col.min() != col.max():
                    out.append(q)
        return out

    def split_stats(self, state: NoiseNodeState, query: int) -> SplitStats:
        """Reduction factors of one query over the implicitly dilated node.

        group_rhos is keyed by source object index; cost is the group-identification
        cost, while .rho alone drives the exact-split rule.
        """
        if any(q == query for q, _ in state.answered):
            raise ValidationError(f"query {query} was already answered")
        n = state.n_free
        sides = np.zeros(2)
        group_rhos: dict[int, float] = {}
        shares: list[tuple[float, float]] = []  # (share weight, rho_i)
        total = 0.0
        if self.prone[query]:
            for i, d in zip(state.alive, state.delta):
                b = int(self.ds.matrix[i, query])
                log_parts = []
                for side in (0, 1):
                    d_side = d + (b != side)
                    log_parts.append(self._log_tail(n - 1, d_side))
                log_all = self._log_tail(n, d)
                w = float(self.ds.priors[i]) * math.exp(log_all - self.log_z)
                part = [
                    float(self.ds.priors[i]) * math.exp(lp - self.log_z)
                    if lp != -math.inf else 0.0
                    for lp in log_parts
                ]
                sides += part
                total += w
                rho_i = 1.0 if d == self.eps_prime else max(part) / w
                group_rhos[i] = rho_i
                shares.append((w, rho_i))
        else:
            for i, d in zip(state.alive, state.delta):
                b = int(self.ds.matrix[i, query])
                lw = self._log_tail(n, d) - self.log_z
                w = float(self.ds.priors[i]) * math.exp(lw)
                sides[b] += w
                total += w
                group_rhos[i] = 1.0
                shares.append((w, 1.0))
        rho = float(max(sides) / total)
        acc = sum((w / total) * binary_entropy(r) for w, r in shares)
        cost = 1.0 - binary_entropy(rho) + acc
        return SplitStats(
            query=query,
            left_mass=float(sides[0]),
            right_mass=float(sides[1]),
            rho=rho,
            group_rhos=group_rhos,
            cost=cost,
        )

    def select(self, state: NoiseNodeState, rule: str = "gisa",
               config: BuildConfig | None = None) -> tuple[int, float]:
        """Cheapest candidate query under ``rule`` ("gisa" group cost or "gbs" rho)."""
        if rule not in ("gbs", "gisa"):
            raise ValidationError(f"unknown noisy rule {rule!r}")
        cfg = config or BuildConfig()
        cands = self.candidates(state)
        if not cands:
            raise BuildError("no candidate query splits the dilated node")
        stats = [self.split_stats(state, q) for q in cands]
        costs = [s.rho if rule == "gbs" else s.cost for s in stats]
        best = min(costs)
        ties = [q for q, c in zip(cands, costs) if c <= best + TIE_TOL]
        if cfg.tie_break == "index" or len(ties) == 1:
            return ties[0], best
        rng = np.random.default_rng(_node_seed(cfg.seed, state.answered))
        return int(rng.choice(np.array(ties))), best


@dataclass(frozen=True)
class NoiseIdentification:
    """Outcome of a noisy identification run."""

    outcome: str
    asked: tuple[tuple[str, int], ...]

    @property
    def n_queries(self) -> int:
        return len(self.asked)


def identify_with_noise(
    ds: Dataset,
    responses,
    spec: NoiseSpec | None = None,
    rule: str = "gisa",
    config: BuildConfig | None = None,
) -> NoiseIdentification:
    """Adaptively query until a single source object remains.

    ``responses`` is a full response row (array-like indexed by query position), a
    mapping from query id to 0/1, or a callable taking the query id. Answers are taken
    at face value; a pattern that kills every candidate raises
    InconsistentResponseError. Inconsistencies the selector never looks at cannot be
    detected, so an early identification is returned as such.
    """
    engine = ImplicitDilation(ds, spec)
    state = engine.root_state()
    asked: list[tuple[str, int]] = []
    while not state.resolved:
        q, _ = engine.select(state, rule, config)
        qid = ds.queries[q]
        if callable(responses):
            r = int(responses(qid))
        elif hasattr(responses, "__getitem__") and not hasattr(responses, "keys"):
            r = int(responses[q])
        else:
            r = int(responses[qid])
        asked.append((qid, r))
        state = engine.answer(state, q, r)
    return NoiseIdentification(outcome=ds.objects[state.alive[0]], asked=tuple(asked))


def simulate_errors(ds: Dataset, spec: NoiseSpec | None, true_object: str | int, rng) -> np.ndarray:
    """Corrupted response row for one object: draw an error count from the model, pick
    that many error-prone queries uniformly, flip them. ``rng`` is a numpy Generator or
    a seed."""
    spec = spec or ds.noise
    if spec is None:
        raise ValidationError("no noise declaration")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    idx = true_object if isinstance(true_object, int) else ds.object_index(true_object)
    eps_prime = effective_budget(ds, spec)
    weights = np.array([
        math.comb(spec.n_error_prone, e) * math.exp(_model_log_weight(spec, e))
        for e in range(eps_prime + 1)
    ])
    weights /= weights.sum()
    e = int(rng.choice(len(weights), p=weights))
    row = ds.matrix[idx].copy()
    if e:
        flips = rng.choice(np.array(spec.error_prone), size=e, replace=False)
        row[flips] ^= 1
    return row
