"""Problem datasets: binary response matrices with priors, groups, and noise declarations.

A problem document is a YAML (or JSON) mapping:

    objects: [theta1, theta2, theta3, theta4]     # optional, synthesized as o1.. if absent
    queries: [q1, q2, q3]                         # optional, synthesized as q1.. if absent
    matrix:                                       # rows of 0/1 ints, or strings like "011"
      - [0, 1, 1]
      - [1, 1, 0]
      - [0, 1, 0]
      - [1, 0, 0]
    priors: [0.25, 0.25, 0.25, 0.25]              # optional, uniform if absent
    object_groups: [1, 1, 1, 2]                   # optional, 1-based dense labels
    query_groups: [1, 1, 2]                       # optional, 1-based dense labels
    selection_weights: {q3: 0.9, q4: 0.1}         # optional, positive, needs query_groups
    noise:                                        # optional persistent-noise declaration
      error_prone: [q2, q3]
      model: 2
      p: 0.25
      max_errors: 1                               # optional, may only lower the derived budget

The same content can be split across two CSV files: a matrix file with header
``object,<query ids...>`` and one row per object, and an optional metadata file with header
``kind,id,group,prior,weight`` carrying group labels, priors, and selection weights.

Group labels are 1-based in documents and normalized to dense 0-based indices in memory.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import yaml

from .errors import (
    DuplicateRowsError,
    InseparableGroupsError,
    ProblemFormatError,
    ValidationError,
)

OBJECT_ID = "object-id"
GROUP_ID = "group-id"

PRIOR_SUM_TOL = 1e-9


@dataclass(frozen=True)
class NoiseSpec:
    """Persistent-noise declaration: which queries can be answered wrongly, and how often.

    model 1 weights an error count e by C(K, e) alone; model 2 by C(K, e) p^e (1-p)^(K-e)
    with p <= 0.5, where K is the number of error-prone queries. Model 1 is model 2 at p = 0.5.
    max_errors, when given, lowers the error budget below the value derived from the dataset.
    """

    error_prone: tuple[int, ...]
    model: int = 1
    p: float = 0.5
    max_errors: int | None = None

    def __post_init__(self):
        if sorted(set(self.error_prone)) != list(self.error_prone):
            raise ValidationError("error_prone indices must be sorted and unique")
        if self.model not in (1, 2):
            raise ValidationError(f"noise model must be 1 or 2, got {self.model!r}")
        if self.model == 1 and self.p != 0.5:
            raise ValidationError("model 1 fixes p = 0.5")
        if not (0.0 <= self.p <= 0.5):
            raise ValidationError(f"p must lie in [0, 0.5], got {self.p}")
        if self.max_errors is not None and self.max_errors < 0:
            raise ValidationError("max_errors must be nonnegative")

    @property
    def n_error_prone(self) -> int:
        return len(self.error_prone)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable problem instance.

    matrix is (M, N) uint8 with rows as objects; priors is (M,) and sums to 1.
    object_groups / query_groups are dense 0-based label vectors or None.
    selection_weights are positive per-query base weights (None means uniform).
    """

    objects: tuple[str, ...]
    queries: tuple[str, ...]
    matrix: np.ndarray
    priors: np.ndarray
    object_groups: np.ndarray | None = None
    query_groups: np.ndarray | None = None
    selection_weights: np.ndarray | None = None
    noise: NoiseSpec | None = None
    rows_distinct: bool = field(init=False, default=False)

    def __post_init__(self):
        _validate_core(self)
        row_view = [r.tobytes() for r in self.matrix]
        object.__setattr__(self, "rows_distinct", len(set(row_view)) == len(row_view))
        if self.object_groups is not None and not self.rows_distinct:
            _check_separability(self)
        self.matrix.setflags(write=False)
        self.priors.setflags(write=False)

    @property
    def n_objects(self) -> int:
        return len(self.objects)

    @property
    def n_queries(self) -> int:
        return len(self.queries)

    @property
    def n_object_groups(self) -> int:
        if self.object_groups is None:
            return 0
        return int(self.object_groups.max()) + 1

    @property
    def n_query_groups(self) -> int:
        if self.query_groups is None:
            return 0
        return int(self.query_groups.max()) + 1

    def object_index(self, obj: str) -> int:
        try:
            return self.objects.index(obj)
        except ValueError:
            raise ValidationError(f"unknown object id {obj!r}") from None

    def query_index(self, query: str) -> int:
        try:
            return self.queries.index(query)
        except ValueError:
            raise ValidationError(f"unknown query id {query!r}") from None

    def group_members(self, group: int) -> np.ndarray:
        """Object indices carrying 0-based group label ``group``."""
        if self.object_groups is None:
            raise ValidationError("dataset has no object groups")
        return np.flatnonzero(self.object_groups == group)

    def query_group_members(self, group: int) -> np.ndarray:
        if self.query_groups is None:
            raise ValidationError("dataset has no query groups")
        return np.flatnonzero(self.query_groups == group)

    def group_priors(self) -> np.ndarray:
        """Total prior mass per object group."""
        if self.object_groups is None:
            raise ValidationError("dataset has no object groups")
        return np.bincount(self.object_groups, weights=self.priors, minlength=self.n_object_groups)

    def validate_for(self, objective: str) -> None:
        """Check the invariants a task variant needs on top of the structural ones."""
        if objective == OBJECT_ID:
            if not self.rows_distinct:
                raise DuplicateRowsError(
                    "duplicate response rows: objects cannot be told apart, "
                    "exact identification is impossible"
                )
        elif objective == GROUP_ID:
            if self.object_groups is None:
                raise ValidationError("group identification needs object_groups")
        else:
            raise ValidationError(f"unknown objective {objective!r}")

    def to_document(self) -> dict:
        doc: dict = {
            "objects": list(self.objects),
            "queries": list(self.queries),
            "matrix": [[int(v) for v in row] for row in self.matrix],
            "priors": [float(p) for p in self.priors],
        }
        if self.object_groups is not None:
            doc["object_groups"] = [int(g) + 1 for g in self.object_groups]
        if self.query_groups is not None:
            doc["query_groups"] = [int(g) + 1 for g in self.query_groups]
        if self.selection_weights is not None:
            doc["selection_weights"] = {
                q: float(w) for q, w in zip(self.queries, self.selection_weights)
            }
        if self.noise is not None:
            block: dict = {
                "error_prone": [self.queries[i] for i in self.noise.error_prone],
                "model": self.noise.model,
            }
            if self.noise.model == 2:
                block["p"] = self.noise.p
            if self.noise.max_errors is not None:
                block["max_errors"] = self.noise.max_errors
            doc["noise"] = block
        return doc

    def fingerprint(self) -> str:
        """Stable short hash of the canonical document; ties transcripts to their dataset."""
        blob = json.dumps(self.to_document(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _validate_core(ds: Dataset) -> None:
    M, N = len(ds.objects), len(ds.queries)
    if M == 0 or N == 0:
        raise ValidationError("dataset needs at least one object and one query")
    if len(set(ds.objects)) != M:
        raise ValidationError("object ids must be unique")
    if len(set(ds.queries)) != N:
        raise ValidationError("query ids must be unique")
    if ds.matrix.shape != (M, N):
        raise ValidationError(f"matrix shape {ds.matrix.shape} does not match ({M}, {N})")
    if not np.isin(ds.matrix, (0, 1)).all():
        raise ValidationError("matrix entries must be 0 or 1")
    if ds.priors.shape != (M,):
        raise ValidationError("priors length must match object count")
    if not np.isfinite(ds.priors).all() or (ds.priors < 0).any():
        raise ValidationError("priors must be finite and nonnegative")
    if abs(float(ds.priors.sum()) - 1.0) > PRIOR_SUM_TOL:
        raise ValidationError(f"priors sum to {float(ds.priors.sum())!r}, expected 1")
    for name, labels, count in (
        ("object_groups", ds.object_groups, M),
        ("query_groups", ds.query_groups, N),
    ):
        if labels is None:
            continue
        if labels.shape != (count,):
            raise ValidationError(f"{name} length mismatch")
        top = int(labels.max())
        if int(labels.min()) < 0 or set(np.unique(labels)) != set(range(top + 1)):
            raise ValidationError(f"{name} labels must be dense (every label 1..max used)")
    if ds.selection_weights is not None:
        if ds.query_groups is None:
            raise ValidationError("selection_weights require query_groups")
        if ds.selection_weights.shape != (N,):
            raise ValidationError("selection_weights length must match query count")
        if not np.isfinite(ds.selection_weights).all() or (ds.selection_weights <= 0).any():
            raise ValidationError("selection weights must be positive and finite")
    if ds.noise is not None:
        bad = [i for i in ds.noise.error_prone if not 0 <= i < N]
        if bad:
            raise ValidationError(f"error_prone indices out of range: {bad}")


def _check_separability(ds: Dataset) -> None:
    seen: dict[bytes, int] = {}
    for i, row in enumerate(ds.matrix):
        key = row.tobytes()
        j = seen.setdefault(key, i)
        if j != i and ds.object_groups[j] != ds.object_groups[i]:
            raise InseparableGroupsError(
                f"objects {ds.objects[j]!r} and {ds.objects[i]!r} share a response row "
                "but belong to different groups"
            )


def _as_matrix(raw, n_cols_hint: int | None) -> np.ndarray:
    if not isinstance(raw, Sequence) or isinstance(raw, (str, bytes)) or len(raw) == 0:
        raise ProblemFormatError("matrix must be a nonempty list of rows")
    rows = []
    for r in raw:
        if isinstance(r, str):
            if not set(r) <= {"0", "1"}:
                raise ProblemFormatError(f"matrix row {r!r} has characters other than 0/1")
            rows.append([int(c) for c in r])
        elif isinstance(r, Sequence):
            rows.append(list(r))
        else:
            raise ProblemFormatError(f"matrix row {r!r} is neither a string nor a list")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ProblemFormatError("matrix rows have unequal lengths")
    if n_cols_hint is not None and width != n_cols_hint:
        raise ProblemFormatError(f"matrix has {width} columns, expected {n_cols_hint}")
    try:
        return np.array(rows, dtype=np.uint8)
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError(f"matrix entries must be integers: {exc}") from None


def _group_vector(raw, ids: Sequence[str], what: str) -> np.ndarray:
    if not isinstance(raw, Sequence) or isinstance(raw, (str, bytes)):
        raise ProblemFormatError(f"{what} must be a list of 1-based labels")
    if len(raw) != len(ids):
        raise ProblemFormatError(f"{what} must have one label per entry")
    try:
        labels = np.array([int(g) for g in raw], dtype=np.int64)
    except (TypeError, ValueError):
        raise ProblemFormatError(f"{what} labels must be integers") from None
    if (labels < 1).any():
        raise ValidationError(f"{what} labels are 1-based; got {int(labels.min())}")
    return labels - 1


def dataset_from_document(doc: Mapping) -> Dataset:
    """Build a Dataset from a parsed problem document."""
    if not isinstance(doc, Mapping):
        raise ProblemFormatError("problem document must be a mapping")
    known = {
        "objects", "queries", "matrix", "priors",
        "object_groups", "query_groups", "selection_weights", "noise",
    }
    unknown = set(doc) - known
    if unknown:
        raise ProblemFormatError(f"unknown document keys: {sorted(unknown)}")
    if "matrix" not in doc:
        raise ProblemFormatError("problem document needs a matrix")

    queries_raw = doc.get("queries")
    matrix = _as_matrix(doc["matrix"], len(queries_raw) if queries_raw else None)
    M, N = matrix.shape
    objects = tuple(str(o) for o in doc.get("objects") or (f"o{i+1}" for i in range(M)))
    queries = tuple(str(q) for q in queries_raw or (f"q{j+1}" for j in range(N)))
    if len(objects) != M:
        raise ProblemFormatError(f"{len(objects)} object ids for {M} matrix rows")

    if "priors" in doc and doc["priors"] is not None:
        try:
            priors = np.array([float(p) for p in doc["priors"]], dtype=float)
        except (TypeError, ValueError):
            raise ProblemFormatError("priors must be numbers") from None
    else:
        priors = np.full(M, 1.0 / M)

    object_groups = (
        _group_vector(doc["object_groups"], objects, "object_groups")
        if doc.get("object_groups") is not None else None
    )
    query_groups = (
        _group_vector(doc["query_groups"], queries, "query_groups")
        if doc.get("query_groups") is not None else None
    )

    weights = None
    if doc.get("selection_weights") is not None:
        wmap = doc["selection_weights"]
        if not isinstance(wmap, Mapping):
            raise ProblemFormatError("selection_weights must map query ids to weights")
        unknown_q = set(map(str, wmap)) - set(queries)
        if unknown_q:
            raise ValidationError(f"selection_weights name unknown queries: {sorted(unknown_q)}")
        weights = np.ones(N, dtype=float)
        for q, w in wmap.items():
            weights[queries.index(str(q))] = float(w)

    noise = None
    if doc.get("noise") is not None:
        block = doc["noise"]
        if not isinstance(block, Mapping):
            raise ProblemFormatError("noise must be a mapping")
        bad_keys = set(block) - {"error_prone", "model", "p", "max_errors"}
        if bad_keys:
            raise ProblemFormatError(f"unknown noise keys: {sorted(bad_keys)}")
        prone_ids = block.get("error_prone", [])
        idx = []
        for q in prone_ids:
            if str(q) not in queries:
                raise ValidationError(f"noise.error_prone names unknown query {q!r}")
            idx.append(queries.index(str(q)))
        model = int(block.get("model", 1))
        p = float(block.get("p", 0.5)) if model == 2 else 0.5
        max_errors = block.get("max_errors")
        noise = NoiseSpec(
            error_prone=tuple(sorted(set(idx))),
            model=model,
            p=p,
            max_errors=None if max_errors is None else int(max_errors),
        )

    return Dataset(
        objects=objects,
        queries=queries,
        matrix=matrix,
        priors=priors,
        object_groups=object_groups,
        query_groups=query_groups,
        selection_weights=weights,
        noise=noise,
    )


def load_dataset(source: str | Path | Mapping) -> Dataset:
    """Load a problem document from a path, a YAML/JSON string, or a parsed mapping."""
    if isinstance(source, Mapping):
        return dataset_from_document(source)
    if isinstance(source, Path) or Path(str(source)).exists():
        text = Path(source).read_text()
    else:
        text = str(source)
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ProblemFormatError(f"cannot parse problem document: {exc}") from None
    return dataset_from_document(doc)


def save_dataset(ds: Dataset, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(ds.to_document(), sort_keys=False))


def load_dataset_csv(matrix_path: str | Path, metadata_path: str | Path | None = None) -> Dataset:
    """Load the two-file CSV form: matrix CSV plus optional metadata CSV."""
    with open(matrix_path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ProblemFormatError("matrix CSV is empty") from None
        if not header or header[0] != "object":
            raise ProblemFormatError("matrix CSV header must start with 'object'")
        queries = [h.strip() for h in header[1:]]
        objects, rows = [], []
        for line in reader:
            if not line:
                continue
            objects.append(line[0].strip())
            rows.append([v.strip() for v in line[1:]])

    doc: dict = {"objects": objects, "queries": queries, "matrix": rows}
    if metadata_path is not None:
        priors: dict[str, float] = {}
        ogroups: dict[str, int] = {}
        qgroups: dict[str, int] = {}
        weights: dict[str, float] = {}
        with open(metadata_path, newline="") as fh:
            for rec in csv.DictReader(fh):
                kind, ident = rec.get("kind", "").strip(), rec.get("id", "").strip()
                group = rec.get("group", "").strip()
                prior = rec.get("prior", "").strip()
                weight = rec.get("weight", "").strip()
                if kind == "object":
                    if group:
                        ogroups[ident] = int(group)
                    if prior:
                        priors[ident] = float(prior)
                elif kind == "query":
                    if group:
                        qgroups[ident] = int(group)
                    if weight:
                        weights[ident] = float(weight)
                else:
                    raise ProblemFormatError(f"metadata kind must be object or query, got {kind!r}")
        if priors:
            missing = set(objects) - set(priors)
            if missing:
                raise ProblemFormatError(f"metadata priors missing objects: {sorted(missing)}")
            doc["priors"] = [priors[o] for o in objects]
        if ogroups:
            missing = set(objects) - set(ogroups)
            if missing:
                raise ProblemFormatError(f"metadata groups missing objects: {sorted(missing)}")
            doc["object_groups"] = [ogroups[o] for o in objects]
        if qgroups:
            missing = set(queries) - set(qgroups)
            if missing:
                raise ProblemFormatError(f"metadata groups missing queries: {sorted(missing)}")
            doc["query_groups"] = [qgroups[q] for q in queries]
        if weights:
            doc["selection_weights"] = weights
    return dataset_from_document(doc)


def selection_probabilities(
    ds: Dataset, group: int, answered: Iterable[str] = ()
) -> dict[str, float]:
    """Probability of each still-unanswered query in query group ``group`` (1-based label).

    Base weights come from selection_weights (uniform when absent), zeroed on answered
    queries and renormalized over the rest. Raises ExhaustedGroupError when nothing is left.
    """
    if ds.query_groups is None:
        raise ValidationError("dataset has no query groups")
    if not 1 <= group <= ds.n_query_groups:
        raise ValidationError(f"unknown query group label {group}")
    answered_idx = {ds.query_index(q) for q in answered}
    dist = _selection_distribution(ds, group - 1, answered_idx)
    return {ds.queries[j]: float(p) for j, p in dist}


def _selection_distribution(
    ds: Dataset, group_idx: int, answered_idx: set[int]
) -> list[tuple[int, float]]:
    """(query index, probability) pairs for the unanswered members of a 0-based group."""
    from .errors import ExhaustedGroupError

    members = [int(j) for j in ds.query_group_members(group_idx) if int(j) not in answered_idx]
    if not members:
        raise ExhaustedGroupError(f"query group {group_idx + 1} has no unanswered queries")
    if ds.selection_weights is None:
        p = 1.0 / len(members)
        return [(j, p) for j in members]
    w = np.array([ds.selection_weights[j] for j in members], dtype=float)
    w /= w.sum()
    return list(zip(members, (float(x) for x in w)))
