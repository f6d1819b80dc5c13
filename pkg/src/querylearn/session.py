"""Interactive identification sessions.

A session is an online run of one strategy: no tree is materialized, the greedy rule is
recomputed at each step from the answers so far, which selects exactly the node the
offline tree would be sitting at. The caller (a human at the CLI, or the web service)
receives a suggestion, answers one of the suggested queries, and the state advances.

Strategies: gbs, gisa (single-query suggestions), gqsa, gigqsa, min-min, min-max
(query-group suggestions), random (a uniformly drawn unanswered query; the passive
baseline), and noisy-gbs / noisy-gisa (single-query selection over the implicitly
dilated problem of a noise declaration).

States are immutable; answer() returns the successor. An answer that contradicts every
remaining candidate raises InconsistentResponseError carrying the failed state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .builders import (
    BuildConfig,
    GROUP_QUERY_STRATEGIES,
    SINGLE_QUERY_STRATEGIES,
    _node_seed,
    select_query_group,
    select_single_query,
)
from .dataset import Dataset, GROUP_ID, NoiseSpec, OBJECT_ID
from .errors import (
    InconsistentResponseError,
    ProtocolError,
    TranscriptError,
    ValidationError,
)
from .infomath import population
from .noise import ImplicitDilation, NoiseNodeState

TRANSCRIPT_FORMAT = "session-transcript"
TRANSCRIPT_VERSION = 1

STRATEGIES = SINGLE_QUERY_STRATEGIES + GROUP_QUERY_STRATEGIES + (
    "random", "noisy-gbs", "noisy-gisa",
)


@dataclass(frozen=True)
class Suggestion:
    """What the engine proposes next: one query, or one query group with its
    selection distribution. options always lists the answerable queries."""

    kind: str                                # "query" | "query-group"
    group: int | None                        # 1-based label for query-group suggestions
    options: tuple[tuple[str, float], ...]   # (query id, selection probability)
    cost: float

    @property
    def query(self) -> str | None:
        return self.options[0][0] if self.kind == "query" else None

    def to_doc(self) -> dict:
        doc: dict = {"kind": self.kind, "cost": self.cost}
        if self.kind == "query":
            doc["query"] = self.query
        else:
            doc["group"] = self.group
            doc["queries"] = [{"query": q, "prob": p} for q, p in self.options]
        return doc


@dataclass(frozen=True)
class Step:
    suggestion: Suggestion
    query: str
    response: int
    surviving_before: int
    surviving_after: int


@dataclass(frozen=True)
class SessionState:
    ds: Dataset
    strategy: str
    config: BuildConfig
    spec: NoiseSpec | None
    objective: str
    answered: tuple[tuple[int, int], ...]
    members: tuple[int, ...] | None          # clean strategies
    noise_state: NoiseNodeState | None       # noisy strategies
    steps: tuple[Step, ...]
    status: str                              # active | identified | failed
    outcome: dict | None

    @property
    def surviving_count(self) -> int:
        if self.noise_state is not None:
            return len(self.noise_state.alive)
        if self.objective == GROUP_ID:
            groups = {int(self.ds.object_groups[i]) for i in self.members}
            return len(groups)
        return len(self.members)


def _noisy(strategy: str) -> bool:
    return strategy.startswith("noisy-")


def start(
    ds: Dataset,
    strategy: str,
    config: BuildConfig | None = None,
    noise: NoiseSpec | None = None,
) -> SessionState:
    """Open a session. The first suggestion is computed lazily by suggest()."""
    if strategy not in STRATEGIES:
        raise ValidationError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    cfg = config or BuildConfig()
    if strategy == "random" and cfg.tie_break != "random":
        raise ValidationError("the random strategy needs tie_break='random' plus a seed")

    if _noisy(strategy):
        spec = noise or ds.noise
        if spec is None:
            raise ValidationError(f"{strategy} needs a noise declaration")
        engine = ImplicitDilation(ds, spec)
        state = engine.root_state()
        return _settle(SessionState(
            ds=ds, strategy=strategy, config=cfg, spec=spec, objective=OBJECT_ID,
            answered=(), members=None, noise_state=state, steps=(),
            status="active", outcome=None,
        ))

    if strategy in ("gisa", "gigqsa"):
        objective = cfg.objective or GROUP_ID
    else:
        objective = cfg.objective or OBJECT_ID
    ds.validate_for(objective)
    if strategy in GROUP_QUERY_STRATEGIES and ds.query_groups is None:
        raise ValidationError(f"{strategy} needs query groups")
    if strategy in ("gisa", "gigqsa"):
        ds.validate_for(GROUP_ID)
    return _settle(SessionState(
        ds=ds, strategy=strategy, config=cfg, spec=None, objective=objective,
        answered=(), members=tuple(range(ds.n_objects)), noise_state=None, steps=(),
        status="active", outcome=None,
    ))


def _settle(state: SessionState) -> SessionState:
    """Mark the state identified if nothing is left to distinguish."""
    if state.status != "active":
        return state
    if state.noise_state is not None:
        if state.noise_state.resolved:
            obj = state.ds.objects[state.noise_state.alive[0]]
            return replace(state, status="identified", outcome={"object": obj})
        return state
    if state.objective == OBJECT_ID:
        if len(state.members) == 1:
            obj = state.ds.objects[state.members[0]]
            return replace(state, status="identified", outcome={"object": obj})
        return state
    groups = {int(state.ds.object_groups[i]) for i in state.members}
    if len(groups) == 1:
        return replace(state, status="identified", outcome={"group": groups.pop() + 1})
    return state


def suggest(state: SessionState) -> Suggestion:
    """The strategy's proposal at the current node. Deterministic given the state."""
    if state.status != "active":
        raise ProtocolError(f"session is {state.status}; nothing to suggest")
    ds = state.ds

    if state.noise_state is not None:
        engine = ImplicitDilation(ds, state.spec)
        rule = state.strategy.removeprefix("noisy-")
        q, cost = engine.select(state.noise_state, rule, state.config)
        return Suggestion(kind="query", group=None, options=((ds.queries[q], 1.0),), cost=cost)

    if state.strategy == "random":
        answered = {q for q, _ in state.answered}
        unanswered = [q for q in range(ds.n_queries) if q not in answered]
        rng = np.random.default_rng(_node_seed(state.config.seed, state.answered))
        q = int(rng.choice(np.array(unanswered)))
        return Suggestion(kind="query", group=None, options=((ds.queries[q], 1.0),), cost=float("nan"))

    pop = population(ds, np.array(state.members, dtype=np.int64))
    if state.strategy in SINGLE_QUERY_STRATEGIES:
        q, cost = select_single_query(ds, pop, state.answered, state.strategy, state.config)
        return Suggestion(kind="query", group=None, options=((ds.queries[q], 1.0),), cost=cost)

    g, dist, cost = select_query_group(ds, pop, state.answered, state.strategy, state.config)
    options = tuple((ds.queries[q], p) for q, p in dist)
    return Suggestion(kind="query-group", group=g + 1, options=options, cost=cost)


def answer(state: SessionState, query: str, response: int) -> SessionState:
    """Apply one answer. The query must be one the current suggestion offers."""
    if state.status != "active":
        raise ProtocolError(f"session is {state.status} and accepts no answers")
    if response not in (0, 1):
        raise ValidationError(f"response must be 0 or 1, got {response!r}")
    sug = suggest(state)
    offered = [q for q, _ in sug.options]
    if query not in offered:
        raise ProtocolError(f"query {query!r} is not among the suggested {offered}")
    qidx = state.ds.query_index(query)
    before = state.surviving_count

    if state.noise_state is not None:
        engine = ImplicitDilation(state.ds, state.spec)
        try:
            nstate = engine.answer(state.noise_state, qidx, response)
        except InconsistentResponseError as exc:
            failed = _record(state, sug, query, response, before, 0, status="failed")
            raise _fail(exc, failed) from None
        nxt = replace(state, answered=state.answered + ((qidx, response),),
                      noise_state=nstate)
        nxt = _record_ok(nxt, sug, query, response, before)
        return _settle(nxt)

    keep = tuple(i for i in state.members if int(state.ds.matrix[i, qidx]) == response)
    if not keep:
        failed = _record(state, sug, query, response, before, 0, status="failed")
        exc = InconsistentResponseError(
            f"response {response} to {query!r} contradicts every remaining candidate"
        )
        raise _fail(exc, failed)
    nxt = replace(state, answered=state.answered + ((qidx, response),), members=keep)
    nxt = _record_ok(nxt, sug, query, response, before)
    return _settle(nxt)


def _record(state: SessionState, sug: Suggestion, query: str, response: int,
            before: int, after: int, status: str) -> SessionState:
    step = Step(sug, query, response, before, after)
    return replace(state, steps=state.steps + (step,), status=status)


def _record_ok(state: SessionState, sug: Suggestion, query: str, response: int,
               before: int) -> SessionState:
    step = Step(sug, query, response, before, state.surviving_count)
    return replace(state, steps=state.steps + (step,))


def _fail(exc: InconsistentResponseError, failed_state: SessionState) -> InconsistentResponseError:
    out = InconsistentResponseError(*exc.args)
    out.state = failed_state
    return out


def top_outcomes(state: SessionState, k: int = 5) -> list[tuple[dict, float]]:
    """The k most probable outcomes under the current posterior."""
    ds = state.ds
    if state.noise_state is not None:
        engine = ImplicitDilation(ds, state.spec)
        masses = engine.masses(state.noise_state)
        total = masses.sum()
        pairs = [
            ({"object": ds.objects[i]}, float(m / total))
            for i, m in zip(state.noise_state.alive, masses)
        ]
    elif state.objective == GROUP_ID:
        members = np.array(state.members, dtype=np.int64)
        pop = population(ds, members)
        pairs = [
            ({"group": int(g) + 1}, float(m / pop.mass) if pop.mass > 0 else 0.0)
            for g, m in zip(pop.group_ids, pop.group_masses)
        ]
    else:
        w = np.array([float(ds.priors[i]) for i in state.members])
        total = w.sum()
        pairs = [
            ({"object": ds.objects[i]}, float(x / total) if total > 0 else 0.0)
            for i, x in zip(state.members, w)
        ]
    pairs.sort(key=lambda t: -t[1])
    return pairs[:k]


def transcript(state: SessionState) -> dict:
    """Serializable record of the whole exchange; replayable via replay_transcript."""
    doc: dict = {
        "format": TRANSCRIPT_FORMAT,
        "version": TRANSCRIPT_VERSION,
        "dataset": {
            "fingerprint": state.ds.fingerprint(),
            "objects": state.ds.n_objects,
            "queries": state.ds.n_queries,
        },
        "strategy": state.strategy,
        "objective": state.objective,
        "tie_break": state.config.tie_break,
        "seed": state.config.seed,
        "noise": None,
        "steps": [
            {
                "suggestion": s.suggestion.to_doc(),
                "query": s.query,
                "response": s.response,
                "surviving_before": s.surviving_before,
                "surviving_after": s.surviving_after,
            }
            for s in state.steps
        ],
        "status": state.status,
        "outcome": state.outcome,
    }
    if state.spec is not None:
        block: dict = {
            "error_prone": [state.ds.queries[i] for i in state.spec.error_prone],
            "model": state.spec.model,
        }
        if state.spec.model == 2:
            block["p"] = state.spec.p
        if state.spec.max_errors is not None:
            block["max_errors"] = state.spec.max_errors
        doc["noise"] = block
    return doc


def transcript_json(state: SessionState) -> str:
    return json.dumps(transcript(state), sort_keys=True, indent=1)


def replay_transcript(ds: Dataset, doc) -> SessionState:
    """Re-drive a recorded session against ``ds`` and verify it step by step.

    Checks the dataset fingerprint, that each recorded query was again suggested, and
    that survivor counts match. Returns the replayed final state; any disagreement
    raises TranscriptError.
    """
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise TranscriptError(f"cannot parse transcript: {exc}") from None
    if not isinstance(doc, Mapping) or doc.get("format") != TRANSCRIPT_FORMAT:
        raise TranscriptError("not a session transcript")
    if doc.get("version") != TRANSCRIPT_VERSION:
        raise TranscriptError(f"unsupported transcript version {doc.get('version')!r}")
    ref = doc.get("dataset", {})
    if ref.get("fingerprint") != ds.fingerprint():
        raise TranscriptError("transcript was recorded against a different dataset")

    noise = None
    if doc.get("noise"):
        block = doc["noise"]
        noise = NoiseSpec(
            error_prone=tuple(sorted(ds.query_index(q) for q in block["error_prone"])),
            model=int(block.get("model", 1)),
            p=float(block.get("p", 0.5)) if int(block.get("model", 1)) == 2 else 0.5,
            max_errors=block.get("max_errors"),
        )
    strategy = doc.get("strategy")
    if strategy not in STRATEGIES:
        raise TranscriptError(f"unknown strategy {strategy!r} in transcript")
    cfg = BuildConfig(
        objective=doc.get("objective") or None,
        tie_break=doc.get("tie_break", "index"),
        seed=doc.get("seed"),
    )
    state = start(ds, strategy, cfg, noise)

    for i, step in enumerate(doc.get("steps", [])):
        sug = suggest(state)
        offered = [q for q, _ in sug.options]
        if step["query"] not in offered:
            raise TranscriptError(
                f"step {i}: recorded query {step['query']!r} not suggested on replay "
                f"(offered {offered})"
            )
        try:
            state = answer(state, step["query"], int(step["response"]))
        except InconsistentResponseError as exc:
            state = exc.state
        if state.surviving_count != int(step["surviving_after"]) and state.status != "failed":
            raise TranscriptError(
                f"step {i}: surviving count {state.surviving_count} != "
                f"recorded {step['surviving_after']}"
            )
    if state.status != doc.get("status"):
        raise TranscriptError(
            f"replay ended {state.status!r}, transcript says {doc.get('status')!r}"
        )
    if state.outcome != doc.get("outcome"):
        raise TranscriptError(
            f"replay outcome {state.outcome!r} != recorded {doc.get('outcome')!r}"
        )
    return state
