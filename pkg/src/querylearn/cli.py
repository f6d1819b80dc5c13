"""Command line interface.

Subcommands:

    build      construct a tree for a problem document and report its evaluation
    sweep      random-model Monte Carlo sweeps, CSV output
    noise-sim  corrupt-and-recover simulation under persistent noise
    generate   emit a synthetic problem document
    session    interactive identification on stdin/stdout
    replay     re-drive a recorded transcript and verify it
    serve      start the HTTP JSON API (and the web UI when built)

Every command that draws randomness echoes its seed so runs can be reproduced.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .builders import BuildConfig, build
from .dataset import NoiseSpec, load_dataset, save_dataset
from .errors import (
    InconsistentResponseError,
    ProtocolError,
    QueryLearnError,
)
from .session import answer, start, suggest, top_outcomes, transcript_json
from .sweeps import (
    NOISE_CSV_HEADER,
    reports_to_csv,
    run_group_sweep,
    run_noise_sim,
    run_query_group_sweep,
    save_reports,
)
from .synth import (
    GroupGenParams,
    QueryGroupGenParams,
    gen_group_dataset,
    gen_querygroup_dataset,
)
from .trees import evaluate_by_formula, export_tree, tree_to_json

PROG = "querylearn"


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip() != ""]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip() != ""]


def _build_config(args) -> BuildConfig:
    return BuildConfig(
        objective=getattr(args, "objective", None),
        tie_break=args.tie_break,
        seed=args.seed if args.tie_break == "random" else None,
    )


def _echo_seed(args) -> str:
    return f"seed={args.seed}" if args.seed is not None else "seed=none"


def cmd_build(args) -> int:
    ds = load_dataset(Path(args.problem))
    cfg = _build_config(args)
    tree = build(ds, args.strategy, cfg)
    ev = evaluate_by_formula(tree, ds)
    print(f"dataset: {ds.n_objects} objects, {ds.n_queries} queries "
          f"({ds.n_object_groups} object groups, {ds.n_query_groups} query groups)")
    print(f"strategy={args.strategy} tie_break={args.tie_break} {_echo_seed(args)}")
    print(f"entropy bound      {ev.entropy_bound:.6f}")
    print(f"E[K] by formula    {ev.by_formula:.6f}")
    print(f"E[K] by traversal  {ev.by_traversal:.6f}")
    if ev.overall_rho is not None:
        print(f"overall rho        {ev.overall_rho:.6f}")
    if ev.balance_bound is not None:
        print(f"balance bound      {ev.balance_bound:.6f}")
    if args.out:
        Path(args.out).write_text(tree_to_json(tree, ds) + "\n")
        print(f"tree written to {args.out}")
    return 0


def _parse_grid(text: str | None) -> dict[str, list[float]]:
    # "d1=0.2,0.5;d2=0.1,0.3" -> {"d1": [0.2, 0.5], "d2": [0.1, 0.3]}
    grid: dict[str, list[float]] = {}
    if not text:
        return grid
    for part in text.split(";"):
        if not part.strip():
            continue
        name, _, values = part.partition("=")
        grid[name.strip()] = _float_list(values)
    return grid


def cmd_sweep(args) -> int:
    grid = _parse_grid(args.grid)
    if args.mode == "group":
        strategies = args.strategies or "gbs,gisa"
        reports = run_group_sweep(
            d1_values=grid.get("d1", [0.2]),
            d2_values=grid.get("d2", [0.1, 0.3, 0.5]),
            replicates=args.runs,
            seed=args.seed or 0,
            n_queries=args.queries,
            strategies=tuple(strategies.split(",")),
        )
    else:
        strategies = args.strategies or "gbs,gqsa,min-min,min-max,random"
        reports = run_query_group_sweep(
            gamma_max_values=grid.get("gamma-max", grid.get("gamma_max", [0.7, 0.9])),
            replicates=args.runs,
            seed=args.seed or 0,
            n_objects=args.objects,
            strategies=tuple(strategies.split(",")),
            objects_per_run=args.objects_per_run,
        )
    csv_text = reports_to_csv(reports)
    if args.out:
        Path(args.out).write_text(csv_text)
        print(f"wrote {len(reports)} rows to {args.out} ({_echo_seed(args)})")
    else:
        sys.stdout.write(csv_text)
    return 0


def cmd_noise_sim(args) -> int:
    ds = load_dataset(Path(args.problem))
    reports = run_noise_sim(
        ds,
        nu_values=_float_list(args.nu),
        model=args.model,
        p_true=args.p_true,
        p_alg=args.p_alg,
        trials=args.runs,
        seed=args.seed or 0,
    )
    csv_text = reports_to_csv(reports, NOISE_CSV_HEADER)
    if args.out:
        Path(args.out).write_text(csv_text)
        print(f"wrote {len(reports)} rows to {args.out} ({_echo_seed(args)})")
    else:
        sys.stdout.write(csv_text)
    return 0


def cmd_generate(args) -> int:
    if args.mode == "group":
        if args.d1 is None and args.gamma_w is None:
            raise QueryLearnError("group mode needs --gamma-w/--gamma-b or --d1/--d2")
        params = GroupGenParams(
            n_queries=args.queries,
            group_sizes=tuple(_int_list(args.group_sizes)),
            gamma_w=args.gamma_w,
            gamma_b=args.gamma_b,
            rect=(args.d1, args.d2) if args.d1 is not None else None,
            seed=args.seed or 0,
        )
        ds, info = gen_group_dataset(params, ensure=args.ensure)
    else:
        params = QueryGroupGenParams(
            n_objects=args.objects,
            query_group_sizes=tuple(_int_list(args.group_sizes)),
            gamma_max=args.gamma_max,
            seed=args.seed or 0,
        )
        ds, info = gen_querygroup_dataset(params, ensure=args.ensure)
    save_dataset(ds, args.out)
    print(f"wrote {ds.n_objects}x{ds.n_queries} problem to {args.out} "
          f"({_echo_seed(args)}, duplicate_rows={info.duplicate_rows}, "
          f"repair_rounds={info.repair_rounds})")
    return 0


def _noise_from_args(args, ds):
    wants = getattr(args, "noise", False) or args.strategy.startswith("noisy-")
    if not wants:
        return None
    if ds.noise is None:
        raise QueryLearnError("this strategy needs a noise block in the problem document")
    return ds.noise


def cmd_session(args) -> int:
    ds = load_dataset(Path(args.problem))
    cfg = _build_config(args)
    state = start(ds, args.strategy, cfg, _noise_from_args(args, ds))
    print(f"session: strategy={args.strategy} tie_break={args.tie_break} {_echo_seed(args)}")
    print(f"{ds.n_objects} objects, {ds.n_queries} queries; "
          "answer with '<query> <0|1>' (or just 0/1 for single-query suggestions), "
          "'quit' to stop")
    code = 0
    try:
        while state.status == "active":
            sug = suggest(state)
            if sug.kind == "query":
                print(f"[{len(state.steps) + 1}] ask {sug.query}  (cost {sug.cost:.6f})")
            else:
                opts = ", ".join(f"{q} (p={p:.3f})" for q, p in sug.options)
                print(f"[{len(state.steps) + 1}] ask one of group {sug.group}: {opts}  "
                      f"(cost {sug.cost:.6f})")
            line = input("> ").strip().lower()
            if line in ("quit", "q", "exit"):
                code = 1
                break
            parts = line.split()
            try:
                if len(parts) == 1 and sug.kind == "query":
                    qid, resp = sug.query, parts[0]
                elif len(parts) == 2:
                    qid, resp = parts[0], parts[1]
                else:
                    print("  enter '<query> <0|1>' or a bare 0/1")
                    continue
                resp = {"y": 1, "yes": 1, "1": 1, "n": 0, "no": 0, "0": 0}.get(resp)
                if resp is None:
                    print("  responses are 0/1 (or yes/no)")
                    continue
                state = answer(state, qid, resp)
            except ProtocolError as exc:
                print(f"  {exc}")
            except InconsistentResponseError as exc:
                state = exc.state
                print(f"  {exc}")
        if state.status == "identified":
            print(f"identified: {state.outcome}")
        elif state.status == "failed":
            print("failed: answers ruled out every candidate")
            code = 2
        else:
            top = top_outcomes(state, 3)
            print(f"stopped early; most likely: {top}")
    except EOFError:
        print("\ninput closed")
        code = 1
    if args.out:
        Path(args.out).write_text(transcript_json(state) + "\n")
        print(f"transcript written to {args.out}")
    return code


def cmd_replay(args) -> int:
    from .session import replay_transcript

    ds = load_dataset(Path(args.problem))
    doc = json.loads(Path(args.transcript).read_text())
    state = replay_transcript(ds, doc)
    print(f"replayed {len(state.steps)} steps: status={state.status} outcome={state.outcome}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    host, _, port = args.serve_addr.rpartition(":")
    app = create_app(
        preload=[Path(p) for p in args.problem or []],
        ui_dir=Path(args.ui_dir) if args.ui_dir else None,
    )
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="warning")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=PROG, description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"{PROG} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, problem=True):
        if problem:
            p.add_argument("--problem", required=True, help="problem document path")
        p.add_argument("--tie-break", choices=("index", "random"), default="index")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("build", help="construct and evaluate a tree")
    common(p)
    p.add_argument("--strategy", required=True,
                   choices=("gbs", "gisa", "gqsa", "gigqsa"))
    p.add_argument("--objective", choices=("object-id", "group-id"), default=None,
                   help="override the strategy's stopping objective")
    p.add_argument("--out", help="write the tree document here")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("sweep", help="random-model Monte Carlo sweeps")
    p.add_argument("--mode", choices=("group", "query-group"), required=True)
    p.add_argument("--grid", help="cells, e.g. 'd1=0.2;d2=0.1,0.3,0.5' or 'gamma-max=0.7,0.9'")
    p.add_argument("--runs", type=int, default=100, help="replicate datasets per cell")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--objects", type=int, default=298)
    p.add_argument("--queries", type=int, default=79)
    p.add_argument("--objects-per-run", type=int, default=48,
                   help="sampled objects per session-estimated strategy")
    p.add_argument("--strategies", default=None,
                   help="comma list; group mode defaults to gbs,gisa; query-group "
                   "mode to gbs,gqsa,min-min,min-max,random")
    p.add_argument("--out", help="CSV path (stdout when absent)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("noise-sim", help="corrupt-and-recover simulation")
    common(p)
    p.add_argument("--nu", default="0.25", help="comma list of error-prone fractions")
    p.add_argument("--model", type=int, choices=(1, 2), default=1)
    p.add_argument("--p-true", type=float, default=0.5, dest="p_true",
                   help="corruption flip rate (model 2)")
    p.add_argument("--p-alg", type=float, default=None, dest="p_alg",
                   help="flip rate assumed by the selector (defaults to --p-true)")
    p.add_argument("--runs", type=int, default=200)
    p.add_argument("--out", help="CSV path (stdout when absent)")
    p.set_defaults(func=cmd_noise_sim)

    p = sub.add_parser("generate", help="emit a synthetic problem document")
    p.add_argument("--mode", choices=("group", "query-group"), required=True)
    p.add_argument("--queries", type=int, default=79)
    p.add_argument("--objects", type=int, default=298)
    p.add_argument("--group-sizes", default=",".join(map(str, (40, 34, 31, 28, 25, 22, 20, 18, 16, 14, 12, 10, 9, 8, 6, 5))),
                   dest="group_sizes", help="comma list of group sizes")
    p.add_argument("--gamma-w", type=float, default=None, dest="gamma_w")
    p.add_argument("--gamma-b", type=float, default=None, dest="gamma_b")
    p.add_argument("--d1", type=float, default=None)
    p.add_argument("--d2", type=float, default=None)
    p.add_argument("--gamma-max", type=float, default=0.9, dest="gamma_max")
    p.add_argument("--ensure", choices=("distinct", "separable"), default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("session", help="interactive identification")
    common(p)
    p.add_argument("--strategy", required=True,
                   choices=("gbs", "gisa", "gqsa", "gigqsa", "min-min", "min-max",
                            "random", "noisy-gbs", "noisy-gisa"))
    p.add_argument("--objective", choices=("object-id", "group-id"), default=None)
    p.add_argument("--noise", action="store_true",
                   help="use the problem document's noise block")
    p.add_argument("--out", help="write the transcript here")
    p.set_defaults(func=cmd_session)

    p = sub.add_parser("replay", help="verify a recorded transcript")
    p.add_argument("--problem", required=True)
    p.add_argument("--transcript", required=True)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("serve", help="start the HTTP JSON API")
    p.add_argument("--serve-addr", default="127.0.0.1:8421")
    p.add_argument("--problem", action="append", help="preload this problem (repeatable)")
    p.add_argument("--ui-dir", default=None, help="static web UI directory to mount")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except QueryLearnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
