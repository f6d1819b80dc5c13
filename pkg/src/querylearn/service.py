"""HTTP JSON API.

Resources:

    POST /api/datasets                problem document in, {id, summary} out
    GET  /api/datasets                list loaded datasets
    GET  /api/datasets/{id}           summary plus the full document
    POST /api/datasets/{id}/trees     build a tree, return it with its evaluation
    POST /api/sessions                open an identification session
    GET  /api/sessions/{id}           current session resource
    POST /api/sessions/{id}/answers   {"query": ..., "response": 0|1}
    GET  /api/sessions/{id}/transcript

Error mapping: malformed input 400, unknown ids 404, answers that violate the
protocol 409, answers that rule out every candidate 422 (the session stays
stored with status "failed"). State lives in process memory; restarting the
server forgets everything except preloaded problem files.
"""

from __future__ import annotations

import threading
import uuid
from pathlib import Path

from fastapi import Body, FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware

from .builders import BuildConfig, build
from .dataset import Dataset, NoiseSpec, dataset_from_document, load_dataset
from .errors import (
    InconsistentResponseError,
    ProtocolError,
    QueryLearnError,
)
from .session import (
    SessionState,
    answer,
    start,
    suggest,
    top_outcomes,
    transcript,
)
from .trees import evaluate_by_formula, export_tree


def _dataset_summary(dsid: str, ds: Dataset) -> dict:
    return {
        "id": dsid,
        "objects": ds.n_objects,
        "queries": ds.n_queries,
        "object_groups": ds.n_object_groups,
        "query_groups": ds.n_query_groups,
        "has_noise": ds.noise is not None,
    }


def _session_resource(sid: str, dsid: str, state: SessionState) -> dict:
    doc = {
        "id": sid,
        "dataset": dsid,
        "strategy": state.strategy,
        "objective": state.objective,
        "status": state.status,
        "surviving": state.surviving_count,
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
        "outcome": state.outcome,
        "suggestion": None,
        "top_outcomes": [
            {"outcome": o, "probability": p} for o, p in top_outcomes(state, 5)
        ],
    }
    if state.status == "active":
        doc["suggestion"] = suggest(state).to_doc()
    return doc


def _config_from(payload: dict) -> BuildConfig:
    tie = payload.get("tie_break", "index")
    return BuildConfig(
        objective=payload.get("objective"),
        tie_break=tie,
        seed=payload.get("seed") if tie == "random" else None,
    )


def create_app(preload: list[Path] | None = None, ui_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="querylearn", version="0.1.0", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    datasets: dict[str, Dataset] = {}
    sessions: dict[str, tuple[str, SessionState]] = {}   # sid -> (dsid, state)
    lock = threading.Lock()

    def _add_dataset(ds: Dataset) -> str:
        dsid = ds.fingerprint()
        with lock:
            datasets[dsid] = ds
        return dsid

    def _get_dataset(dsid: str) -> Dataset:
        with lock:
            ds = datasets.get(dsid)
        if ds is None:
            raise HTTPException(404, f"no dataset {dsid!r}")
        return ds

    for path in preload or []:
        _add_dataset(load_dataset(path))

    @app.post("/api/datasets", status_code=201)
    def post_dataset(doc: dict = Body(...)):
        try:
            ds = dataset_from_document(doc)
        except QueryLearnError as exc:
            raise HTTPException(400, str(exc)) from None
        return _dataset_summary(_add_dataset(ds), ds)

    @app.get("/api/datasets")
    def list_datasets():
        with lock:
            items = list(datasets.items())
        return [_dataset_summary(dsid, ds) for dsid, ds in items]

    @app.get("/api/datasets/{dsid}")
    def get_dataset(dsid: str):
        ds = _get_dataset(dsid)
        out = _dataset_summary(dsid, ds)
        out["document"] = ds.to_document()
        return out

    @app.post("/api/datasets/{dsid}/trees", status_code=201)
    def post_tree(dsid: str, payload: dict = Body(default={})):
        ds = _get_dataset(dsid)
        strategy = payload.get("strategy", "gbs")
        try:
            tree = build(ds, strategy, _config_from(payload))
            ev = evaluate_by_formula(tree, ds)
        except QueryLearnError as exc:
            raise HTTPException(400, str(exc)) from None
        return {
            "tree": export_tree(tree, ds),
            "evaluation": {
                "expected_queries": ev.expected_queries,
                "by_formula": ev.by_formula,
                "by_traversal": ev.by_traversal,
                "entropy_bound": ev.entropy_bound,
                "overall_rho": ev.overall_rho,
                "balance_bound": ev.balance_bound,
            },
        }

    @app.post("/api/sessions", status_code=201)
    def post_session(payload: dict = Body(...)):
        dsid = payload.get("dataset")
        if not isinstance(dsid, str):
            raise HTTPException(400, "body needs a 'dataset' id")
        ds = _get_dataset(dsid)
        strategy = payload.get("strategy", "gbs")
        noise = None
        noise_req = payload.get("noise")
        if noise_req or str(strategy).startswith("noisy-"):
            if ds.noise is None:
                raise HTTPException(400, "dataset declares no noise")
            noise = ds.noise
            if isinstance(noise_req, dict):
                # the error-prone set is part of the problem; model and p are the
                # caller's to choose
                model = noise_req.get("model", noise.model)
                try:
                    noise = NoiseSpec(
                        error_prone=noise.error_prone,
                        model=int(model),
                        p=float(noise_req["p"]) if "p" in noise_req
                        else (noise.p if int(model) == noise.model else 0.5),
                        max_errors=noise_req.get("max_errors", noise.max_errors),
                    )
                except (QueryLearnError, TypeError, ValueError) as exc:
                    raise HTTPException(400, f"bad noise block: {exc}") from None
        try:
            state = start(ds, strategy, _config_from(payload), noise)
        except QueryLearnError as exc:
            raise HTTPException(400, str(exc)) from None
        sid = uuid.uuid4().hex[:12]
        with lock:
            sessions[sid] = (dsid, state)
        return _session_resource(sid, dsid, state)

    def _get_session(sid: str) -> tuple[str, SessionState]:
        with lock:
            item = sessions.get(sid)
        if item is None:
            raise HTTPException(404, f"no session {sid!r}")
        return item

    @app.get("/api/sessions/{sid}")
    def get_session(sid: str):
        dsid, state = _get_session(sid)
        return _session_resource(sid, dsid, state)

    @app.post("/api/sessions/{sid}/answers")
    def post_answer(sid: str, payload: dict = Body(...)):
        dsid, state = _get_session(sid)
        query = payload.get("query")
        response = payload.get("response")
        if not isinstance(query, str) or response not in (0, 1):
            raise HTTPException(400, "body needs 'query' (string) and 'response' (0 or 1)")
        try:
            state = answer(state, query, response)
        except ProtocolError as exc:
            raise HTTPException(409, str(exc)) from None
        except InconsistentResponseError as exc:
            with lock:
                sessions[sid] = (dsid, exc.state)
            resource = _session_resource(sid, dsid, exc.state)
            raise HTTPException(422, {"message": str(exc), "session": resource}) from None
        except QueryLearnError as exc:
            raise HTTPException(400, str(exc)) from None
        with lock:
            sessions[sid] = (dsid, state)
        return _session_resource(sid, dsid, state)

    @app.get("/api/sessions/{sid}/transcript")
    def get_transcript(sid: str):
        _, state = _get_session(sid)
        return transcript(state)

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
