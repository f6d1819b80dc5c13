"""Monte Carlo experiment runners behind the sweep and noise-sim commands.

Each runner produces a list of report rows with a stable CSV schema. Confidence
intervals are the usual mean +/- 1.96 sd / sqrt(runs) half-width.

Expected query counts come from two estimators, chosen per strategy: tree strategies
(gbs, gisa) build the tree per replicate dataset and evaluate it exactly; interactive
strategies with user-side randomness (gqsa, min-min, min-max, random) are estimated by
simulating sessions on objects sampled from the prior.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .builders import (
    BuildConfig,
    build_gbs,
    build_gisa,
    select_query_group,
    select_single_query,
)
from .dataset import Dataset, GROUP_ID, NoiseSpec, OBJECT_ID
from .errors import InconsistentResponseError, ValidationError
from .infomath import population
from .noise import identify_with_noise, simulate_errors
from .synth import (
    BENCH_OBJECT_GROUP_SIZES,
    BENCH_QUERY_GROUP_SIZES,
    GroupGenParams,
    QueryGroupGenParams,
    gen_group_dataset,
    gen_querygroup_dataset,
)
from .trees import evaluate_by_traversal

SWEEP_CSV_HEADER = ("sweep", "cell", "strategy", "runs", "mean_ek", "ci95", "seed", "wall_time_s")
NOISE_CSV_HEADER = (
    "cell", "strategy", "trials", "mean_queries", "ci95", "recovery_rate", "seed", "wall_time_s",
)


@dataclass(frozen=True)
class RunReport:
    sweep: str
    cell: str
    strategy: str
    runs: int
    mean_ek: float
    ci95: float
    seed: int
    wall_time_s: float


@dataclass(frozen=True)
class NoiseReport:
    cell: str
    strategy: str
    trials: int
    mean_queries: float
    ci95: float
    recovery_rate: float
    seed: int
    wall_time_s: float


def _ci95(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    return float(1.96 * values.std(ddof=1) / np.sqrt(values.size))


def reports_to_csv(reports, header=SWEEP_CSV_HEADER) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for r in reports:
        writer.writerow([getattr(r, col) for col in header])
    return buf.getvalue()


def save_reports(reports, path: str | Path, header=SWEEP_CSV_HEADER) -> None:
    Path(path).write_text(reports_to_csv(reports, header))


def _rep_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence([seed, *key]).generate_state(1)[0])


def simulate_session(
    ds: Dataset, strategy: str, true_index: int, rng: np.random.Generator,
    config: BuildConfig | None = None,
) -> int:
    """Number of queries an online session takes to pin down object ``true_index``.

    The engine side is deterministic (index tie-breaks by default); the user side draws
    the answered query from the suggested group's distribution using ``rng``.
    """
    cfg = config or BuildConfig()
    members = np.arange(ds.n_objects)
    answered: tuple[tuple[int, int], ...] = ()
    asked: set[int] = set()
    k = 0
    while members.size > 1:
        if k >= ds.n_queries:
            raise ValidationError("session failed to terminate; duplicate rows?")
        pop = population(ds, members)
        if strategy == "random":
            options = np.array([q for q in range(ds.n_queries) if q not in asked])
            q = int(rng.choice(options))
        elif strategy in ("gbs", "gisa"):
            q, _ = select_single_query(ds, pop, answered, strategy, cfg)
        else:
            _, dist, _ = select_query_group(ds, pop, answered, strategy, cfg)
            probs = np.array([p for _, p in dist])
            q = int(dist[int(rng.choice(len(dist), p=probs / probs.sum()))][0])
        r = int(ds.matrix[true_index, q])
        members = members[ds.matrix[members, q] == r]
        answered += ((q, r),)
        asked.add(q)
        k += 1
    return k


def run_group_sweep(
    d1_values,
    d2_values,
    replicates: int = 100,
    seed: int = 0,
    group_sizes: tuple[int, ...] = BENCH_OBJECT_GROUP_SIZES,
    n_queries: int = 79,
    strategies: tuple[str, ...] = ("gbs", "gisa"),
) -> list[RunReport]:
    """Group identification on random rectangle-drawn datasets: exact tree E[K] per cell.

    gbs runs with the group-identification objective (split by rho, stop at group
    purity) so both strategies answer the same question.
    """
    reports = []
    cell_idx = 0
    for d1 in d1_values:
        for d2 in d2_values:
            cell_idx += 1
            values = {s: [] for s in strategies}
            start = time.perf_counter()
            for rep in range(replicates):
                params = GroupGenParams(
                    n_queries=n_queries,
                    group_sizes=tuple(group_sizes),
                    rect=(d1, d2),
                    seed=_rep_seed(seed, cell_idx, rep),
                )
                ds, _ = gen_group_dataset(params, ensure="separable")
                for s in strategies:
                    if s == "gbs":
                        tree = build_gbs(ds, BuildConfig(objective=GROUP_ID))
                    elif s == "gisa":
                        tree = build_gisa(ds)
                    else:
                        raise ValidationError(f"group sweep cannot run strategy {s!r}")
                    values[s].append(evaluate_by_traversal(tree, ds))
            wall = time.perf_counter() - start
            for s in strategies:
                v = np.array(values[s])
                reports.append(RunReport(
                    sweep="group-identification",
                    cell=f"d1={d1},d2={d2}",
                    strategy=s,
                    runs=replicates,
                    mean_ek=float(v.mean()),
                    ci95=_ci95(v),
                    seed=seed,
                    wall_time_s=round(wall, 3),
                ))
    return reports


def run_query_group_sweep(
    gamma_max_values,
    replicates: int = 40,
    seed: int = 0,
    n_objects: int = 298,
    query_group_sizes: tuple[int, ...] = BENCH_QUERY_GROUP_SIZES,
    strategies: tuple[str, ...] = ("gbs", "gqsa", "min-min", "min-max", "random"),
    objects_per_run: int = 48,
) -> list[RunReport]:
    """Exact identification under query groups, swept over gamma_max.

    gbs (no query-group constraint) is evaluated exactly from its tree; the constrained
    strategies are estimated by sessions on prior-sampled objects.
    """
    reports = []
    for ci, gmax in enumerate(gamma_max_values, start=1):
        per_strategy: dict[str, list[float]] = {s: [] for s in strategies}
        start = time.perf_counter()
        for rep in range(replicates):
            params = QueryGroupGenParams(
                n_objects=n_objects,
                query_group_sizes=tuple(query_group_sizes),
                gamma_max=gmax,
                seed=_rep_seed(seed, ci, rep),
            )
            ds, _ = gen_querygroup_dataset(params, ensure="distinct")
            rng = np.random.default_rng(_rep_seed(seed, ci, rep, 7))
            sampled = rng.choice(ds.n_objects, size=objects_per_run, p=ds.priors)
            for s in strategies:
                if s == "gbs":
                    tree = build_gbs(ds)
                    per_strategy[s].append(evaluate_by_traversal(tree, ds))
                else:
                    # common random numbers: one rng per sampled object, shared
                    # across strategies, so strategy gaps are paired comparisons
                    ks = [
                        simulate_session(
                            ds, s, int(i),
                            np.random.default_rng(_rep_seed(seed, ci, rep, 11, slot)),
                        )
                        for slot, i in enumerate(sampled)
                    ]
                    per_strategy[s].append(float(np.mean(ks)))
        wall = time.perf_counter() - start
        for s in strategies:
            v = np.array(per_strategy[s])
            reports.append(RunReport(
                sweep="query-groups",
                cell=f"gamma_max={gmax}",
                strategy=s,
                runs=replicates,
                mean_ek=float(v.mean()),
                ci95=_ci95(v),
                seed=seed,
                wall_time_s=round(wall, 3),
            ))
    return reports


def run_noise_sim(
    ds: Dataset,
    nu_values,
    model: int = 1,
    p_true: float = 0.5,
    p_alg: float | None = None,
    trials: int = 200,
    seed: int = 0,
    strategies: tuple[str, ...] = ("gbs", "gisa"),
) -> list[NoiseReport]:
    """Corrupt-and-recover simulation.

    Per nu cell: mark a random nu-fraction of queries error-prone, then repeatedly draw
    a true object from the prior, corrupt its row under (model, p_true), and identify it
    with the selector running under (model, p_alg). Reports mean queries asked and the
    recovery rate. p_alg defaults to p_true.
    """
    if p_alg is None:
        p_alg = p_true
    reports = []
    for ci, nu in enumerate(nu_values, start=1):
        if not 0.0 <= nu <= 1.0:
            raise ValidationError(f"nu must lie in [0, 1], got {nu}")
        k = round(nu * ds.n_queries)
        rng = np.random.default_rng(_rep_seed(seed, ci))
        prone = tuple(sorted(int(q) for q in rng.choice(ds.n_queries, size=k, replace=False)))
        spec_true = NoiseSpec(error_prone=prone, model=model,
                              p=p_true if model == 2 else 0.5)
        spec_alg = NoiseSpec(error_prone=prone, model=model,
                             p=p_alg if model == 2 else 0.5)
        for si, s in enumerate(strategies):
            srng = np.random.default_rng(_rep_seed(seed, ci, si))
            counts, hits = [], 0
            start = time.perf_counter()
            for _ in range(trials):
                true_idx = int(srng.choice(ds.n_objects, p=ds.priors))
                row = simulate_errors(ds, spec_true, true_idx, srng)
                try:
                    res = identify_with_noise(ds, row, spec_alg, rule=s)
                except InconsistentResponseError:
                    counts.append(ds.n_queries)
                    continue
                counts.append(res.n_queries)
                if res.outcome == ds.objects[true_idx]:
                    hits += 1
            wall = time.perf_counter() - start
            v = np.array(counts, dtype=float)
            reports.append(NoiseReport(
                cell=f"nu={nu},model={model},p_true={p_true},p_alg={p_alg}",
                strategy=f"noisy-{s}",
                trials=trials,
                mean_queries=float(v.mean()),
                ci95=_ci95(v),
                recovery_rate=hits / trials,
                seed=seed,
                wall_time_s=round(wall, 3),
            ))
    return reports
