"""
Twenty questions with a greedy splitter
=======================================

The basic setting: one unknown object among M, a pool of yes/no queries,
and a prior. The greedy rule asks whichever query splits the surviving
probability mass most evenly, i.e. minimizes the reduction factor

    rho = max(mass answering no, mass answering yes) / node mass,

which lives in [1/2, 1]. Expected query count is bounded below by the
entropy of the prior and above by H(P)/H(rho_worst).
"""

import numpy as np

from querylearn import (
    BuildConfig,
    Dataset,
    build_gbs,
    evaluate_by_formula,
)
from querylearn.trees import Leaf, SingleQueryNode, walk

# ---------------------------------------------------------------------------
# A small animal-guessing instance. Rows are objects, columns are queries,
# entry 1 means "yes". Priors are skewed so entropy is well below log2(6).
# ---------------------------------------------------------------------------

ds = Dataset(
    objects=("cat", "dog", "hawk", "owl", "trout", "eel"),
    queries=("has_fur", "flies", "lives_in_water", "nocturnal", "has_feathers"),
    matrix=np.array(
        [
            [1, 0, 0, 1, 0],  # cat
            [1, 0, 0, 0, 0],  # dog
            [0, 1, 0, 0, 1],  # hawk
            [0, 1, 0, 1, 1],  # owl
            [0, 0, 1, 0, 0],  # trout
            [0, 0, 1, 1, 0],  # eel
        ],
        dtype=np.uint8,
    ),
    priors=np.array([0.30, 0.25, 0.15, 0.10, 0.12, 0.08]),
)

tree = build_gbs(ds, BuildConfig(tie_break="index"))


def render(node, indent=""):
    if isinstance(node, Leaf):
        print(f"{indent}-> {ds.objects[node.outcome]}")
        return
    assert isinstance(node, SingleQueryNode)
    print(f"{indent}{ds.queries[node.query]}?")
    print(f"{indent}  no:")
    render(node.low, indent + "    ")
    print(f"{indent}  yes:")
    render(node.high, indent + "    ")


print("greedy tree:")
render(tree.root)

# ---------------------------------------------------------------------------
# Evaluate it. The closed-form route sums per-node cost terms weighted by
# node mass; the traversal route sums prior * depth over leaves. They must
# agree to floating-point tolerance -- that redundancy is a free self-check.
# ---------------------------------------------------------------------------

ev = evaluate_by_formula(tree, ds)
print()
print(f"entropy lower bound  H(P) = {ev.entropy_bound:.6f} questions")
print(f"E[K] by closed form       = {ev.by_formula:.6f}")
print(f"E[K] by traversal         = {ev.by_traversal:.6f}")
print(f"worst reduction factor    = {ev.overall_rho:.6f}")
print(f"balance upper bound       = {ev.balance_bound:.6f}")
assert abs(ev.by_formula - ev.by_traversal) < 1e-9
assert ev.entropy_bound - 1e-9 <= ev.by_formula <= ev.balance_bound + 1e-9

# Depth of each object, for the curious: skewed priors push likely objects up.
print()
for item in walk(tree, ds):
    if isinstance(item.node, Leaf) and item.node.outcome is not None:
        name = ds.objects[item.node.outcome]
        print(f"  {name:6s} prior={ds.priors[item.node.outcome]:.2f} depth={item.depth}")
