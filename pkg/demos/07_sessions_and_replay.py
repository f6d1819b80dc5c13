"""
Online sessions and verifiable transcripts
==========================================

Trees are the offline artifact; online the same greedy rules drive a session
loop: suggest, answer, repeat until one candidate (or one group) remains.
Because suggestions are recomputed from the answered set with deterministic
tie-breaking, an offline tree and an online session can never disagree.

Every session serializes to a transcript document that names the dataset by
fingerprint and records each suggestion alongside the answer given. Replay
re-drives the strategy against the dataset and verifies the whole thing --
the recorded queries must be re-suggested, the surviving counts must match,
and the outcome must reproduce.
"""

import json
from pathlib import Path

from querylearn import answer, load_dataset, replay_transcript, start, suggest
from querylearn.builders import BuildConfig

HERE = Path(__file__).parent

# ---------------------------------------------------------------------------
# A query-group session. The engine proposes a group; the "user" (scripted
# here) picks a member query and answers as object theta3 would.
# ---------------------------------------------------------------------------
ds = load_dataset(HERE / ".." / "tests" / "data" / "toy2.yaml")
truth = dict(zip(ds.queries, ds.matrix[2]))  # theta3's row

state = start(ds, "gqsa")
while state.status == "active":
    sug = suggest(state)
    opts = ", ".join(f"{q} (p={p:.2f})" for q, p in sug.options)
    pick = sug.options[0][0]  # always take the most likely offered query
    state = answer(state, pick, int(truth[pick]))
    print(f"suggested group {sug.group}: [{opts}] -> answered {pick}="
          f"{int(truth[pick])}, {state.surviving_count} candidate(s) left")

print(f"outcome: {state.outcome['object']} after {len(state.steps)} queries\n")
assert state.outcome["object"] == "theta3"

# ---------------------------------------------------------------------------
# Write the transcript, then replay it. Tamper with a response and replay
# again to see verification catch it.
# ---------------------------------------------------------------------------
from querylearn import transcript, transcript_json
from querylearn.errors import TranscriptError

doc = transcript(state)
path = HERE / "toy2_session.json"
path.write_text(transcript_json(state) + "\n")
print(f"transcript written to {path.name}: {len(doc['steps'])} steps, "
      f"dataset fingerprint {doc['dataset']['fingerprint']}")

replayed = replay_transcript(ds, json.loads(path.read_text()))
print(f"replay: status={replayed.status}, outcome={replayed.outcome['object']}")

forged = json.loads(path.read_text())
forged["steps"][0]["response"] = 1 - forged["steps"][0]["response"]
try:
    replay_transcript(ds, forged)
except TranscriptError as exc:
    print(f"tampered replay rejected: {exc}")

# ---------------------------------------------------------------------------
# A noisy session: same loop, but the surviving "candidates" are corruption
# balls over the error-prone queries, so one wrong answer cannot derail the
# identification as long as it stays within the error budget.
# ---------------------------------------------------------------------------
import numpy as np

from querylearn import Dataset
from querylearn.dataset import NoiseSpec

ds3 = Dataset(
    objects=("A", "B", "C"),
    queries=("q1", "q2", "q3", "q4", "q5", "q6"),
    matrix=np.array([
        [0, 0, 0, 0, 0, 0],
        [1, 1, 1, 0, 0, 0],
        [0, 0, 0, 1, 1, 1],
    ], dtype=np.uint8),
    priors=np.array([1 / 3, 1 / 3, 1 / 3]),
    noise=NoiseSpec(error_prone=(0, 1, 2), model=1),
)
# Rows are >= 3 flips apart, so one wrong answer among q1..q3 is correctable.
lies = {"q1": 0, "q2": 1, "q3": 0, "q4": 0, "q5": 0, "q6": 0}  # A, lying on q2

state = start(ds3, "noisy-gisa", BuildConfig(), ds3.noise)
while state.status == "active":
    q = suggest(state).query
    state = answer(state, q, lies[q])
asked = ", ".join(f"{q}={r}" for q, r in
                  ((ds3.queries[i], r) for i, r in state.answered))
print(f"\nnoisy session: {asked} -> outcome={state.outcome['object']} "
      "(true object A, one lie on q2)")
assert state.outcome["object"] == "A"
