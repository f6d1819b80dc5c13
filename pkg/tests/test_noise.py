"""Noise handling: budgets, explicit dilation, the implicit engine, identification."""

import math

import numpy as np
import pytest

from querylearn.builders import BuildConfig
from querylearn.dataset import Dataset, NoiseSpec
from querylearn.errors import InconsistentResponseError, ValidationError
from querylearn.infomath import binary_entropy, population, split_stats
from querylearn.noise import (
    ImplicitDilation,
    dilate_explicit,
    effective_budget,
    error_budget,
    identify_with_noise,
    simulate_errors,
)

from gen import noise_instance


def test_error_budget_toy3(toy3):
    assert error_budget(toy3) == (3, 1)


def test_error_budget_needs_two_objects():
    ds = Dataset(objects=("a",), queries=("q1",), matrix=np.array([[0]], dtype=np.uint8),
                 priors=np.array([1.0]))
    with pytest.raises(ValidationError, match="two objects"):
        error_budget(ds)


def test_error_budget_warns_on_duplicate_rows():
    ds = Dataset(
        objects=("a", "b"),
        queries=("q1", "q2"),
        matrix=np.array([[0, 1], [0, 1]], dtype=np.uint8),
        priors=np.array([0.5, 0.5]),
    )
    with pytest.warns(UserWarning, match="duplicate rows"):
        delta, eps = error_budget(ds)
    assert (delta, eps) == (0, 0)


def test_effective_budget_caps_at_prone_count(toy3):
    assert effective_budget(toy3, toy3.noise) == 1
    # a single error-prone query caps the budget below epsilon
    assert effective_budget(toy3, NoiseSpec(error_prone=(1,))) == 1
    big = Dataset(
        objects=("a", "b"),
        queries=tuple(f"q{j}" for j in range(1, 8)),
        matrix=np.array([[0] * 7, [1] * 7], dtype=np.uint8),
        priors=np.array([0.5, 0.5]),
    )
    # delta 7 -> epsilon 3, but only 2 prone queries
    assert effective_budget(big, NoiseSpec(error_prone=(0, 1))) == 2


def test_effective_budget_override_is_downward_only(toy3):
    assert effective_budget(toy3, NoiseSpec(error_prone=(1, 2), max_errors=0)) == 0
    with pytest.raises(ValidationError, match="exceeds the derived budget"):
        effective_budget(toy3, NoiseSpec(error_prone=(1, 2), max_errors=2))


# -- explicit dilation ----------------------------------------------------------


def test_dilation_layout_and_uniform_weights(toy3):
    dil = dilate_explicit(toy3)
    assert (dil.delta, dil.epsilon, dil.eps_prime) == (3, 1, 1)
    assert dil.dataset.objects == (
        "theta1", "theta1~q2", "theta1~q3",
        "theta2", "theta2~q2", "theta2~q3",
    )
    want = np.array([1 / 12, 1 / 12, 1 / 12, 1 / 4, 1 / 4, 1 / 4])
    np.testing.assert_allclose(dil.dataset.priors, want, atol=1e-12)
    np.testing.assert_array_equal(dil.dataset.object_groups, [0, 0, 0, 1, 1, 1])
    assert dil.source_of_group(1) == "theta2"
    # flipped coordinates land where they should
    np.testing.assert_array_equal(dil.dataset.matrix[1], [0, 1, 0])
    np.testing.assert_array_equal(dil.dataset.matrix[5], [1, 1, 0])


def test_dilation_model2_weights(toy3):
    spec = NoiseSpec(error_prone=(1, 2), model=2, p=0.25)
    dil = dilate_explicit(toy3, spec)
    want = np.array([3 / 20, 1 / 20, 1 / 20, 9 / 20, 3 / 20, 3 / 20])
    np.testing.assert_allclose(dil.dataset.priors, want, atol=1e-12)


def test_model1_is_model2_at_half(toy3):
    a = dilate_explicit(toy3).dataset.priors
    b = dilate_explicit(toy3, NoiseSpec(error_prone=(1, 2), model=2, p=0.5)).dataset.priors
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_dilation_two_flip_naming():
    ds = Dataset(
        objects=("a", "b"),
        queries=tuple(f"q{j}" for j in range(1, 6)),
        matrix=np.array([[0] * 5, [1] * 5], dtype=np.uint8),
        priors=np.array([0.5, 0.5]),
    )
    dil = dilate_explicit(ds, NoiseSpec(error_prone=(0, 1, 2)))
    assert dil.eps_prime == 2
    assert dil.dataset.objects[:7] == (
        "a", "a~q1", "a~q2", "a~q3", "a~q1+q2", "a~q1+q3", "a~q2+q3",
    )
    assert dil.dataset.n_objects == 14


def test_dilation_row_cap(toy3):
    with pytest.raises(ValidationError, match="above the cap"):
        dilate_explicit(toy3, cap=5)


def test_dilation_needs_a_spec(toy1):
    with pytest.raises(ValidationError, match="no noise declaration"):
        dilate_explicit(toy1)


# -- implicit engine -------------------------------------------------------------


def test_implicit_root_masses_match_source_priors(toy3):
    eng = ImplicitDilation(toy3)
    state = eng.root_state()
    np.testing.assert_allclose(eng.masses(state), [0.25, 0.75], atol=1e-12)
    assert eng.candidates(state) == [0, 1, 2]


def test_implicit_root_stats_toy3(toy3):
    eng = ImplicitDilation(toy3)
    state = eng.root_state()
    s1 = eng.split_stats(state, 0)
    assert s1.left_mass == pytest.approx(0.25, abs=1e-12)
    assert s1.rho == pytest.approx(0.75, abs=1e-12)
    assert s1.group_rhos == {0: 1.0, 1: 1.0}
    assert s1.cost == pytest.approx(1.0 - binary_entropy(0.75), abs=1e-12)

    s2 = eng.split_stats(state, 1)
    assert s2.left_mass == pytest.approx(5 / 12, abs=1e-12)
    assert s2.right_mass == pytest.approx(7 / 12, abs=1e-12)
    assert s2.rho == pytest.approx(7 / 12, abs=1e-12)
    assert s2.group_rhos[0] == pytest.approx(2 / 3, abs=1e-12)
    assert s2.group_rhos[1] == pytest.approx(2 / 3, abs=1e-12)
    want = 1.0 - binary_entropy(7 / 12) + binary_entropy(2 / 3)
    assert s2.cost == pytest.approx(want, abs=1e-12)


def test_group_rule_prefers_the_error_free_query(toy3):
    eng = ImplicitDilation(toy3)
    state = eng.root_state()
    q, cost = eng.select(state, "gisa")
    assert q == 0
    assert cost == pytest.approx(1.0 - binary_entropy(0.75), abs=1e-12)
    # the exact-split rule falls for the better-balanced but error-prone q2
    q, cost = eng.select(state, "gbs")
    assert q == 1
    assert cost == pytest.approx(7 / 12, abs=1e-12)


def test_answer_tracks_mismatch_counts(toy3):
    eng = ImplicitDilation(toy3)
    state = eng.answer(eng.root_state(), 1, 1)
    assert state.alive == (0, 1)
    assert state.delta == (1, 0)
    assert state.n_free == 1
    state = eng.answer(state, 2, 1)
    assert state.alive == (1,)
    assert state.resolved


def test_answer_rejects_impossible_patterns(toy3):
    eng = ImplicitDilation(toy3)
    state = eng.answer(eng.root_state(), 0, 0)   # error-free: only theta1 stays
    state = eng.answer(state, 1, 1)              # one flip spent
    with pytest.raises(InconsistentResponseError, match="rules out every object"):
        eng.answer(state, 2, 1)                  # a second flip is over budget


def test_answer_rejects_repeats_and_bad_values(toy3):
    eng = ImplicitDilation(toy3)
    state = eng.answer(eng.root_state(), 0, 0)
    with pytest.raises(ValidationError, match="already answered"):
        eng.answer(state, 0, 1)
    with pytest.raises(ValidationError, match="0 or 1"):
        eng.answer(state, 1, 2)


# -- identification --------------------------------------------------------------


def test_identify_asks_only_the_clean_query(toy3):
    run = identify_with_noise(toy3, np.array([0, 1, 1]))
    assert run.outcome == "theta1"
    assert run.asked == (("q1", 0),)
    run = identify_with_noise(toy3, {"q1": 1, "q2": 0, "q3": 1})
    assert run.outcome == "theta2"
    assert run.n_queries == 1


def test_identify_with_exact_split_rule_pays_extra(toy3):
    run = identify_with_noise(toy3, np.array([1, 1, 1]), rule="gbs")
    assert run.outcome == "theta2"
    assert run.asked == (("q2", 1), ("q3", 1))


def test_identify_accepts_a_callable(toy3):
    seen = []

    def respond(qid):
        seen.append(qid)
        return 0 if qid == "q1" else 1

    run = identify_with_noise(toy3, respond)
    assert run.outcome == "theta1"
    assert seen == ["q1"]


def test_identify_recovers_from_any_in_budget_corruption(toy3):
    eng = ImplicitDilation(toy3)
    for i, src in enumerate(toy3.objects):
        base = toy3.matrix[i].astype(int)
        patterns = [base.copy()]
        for j in toy3.noise.error_prone:
            row = base.copy()
            row[j] ^= 1
            patterns.append(row)
        for row in patterns:
            for rule in ("gisa", "gbs"):
                run = identify_with_noise(toy3, row, rule=rule)
                assert run.outcome == src
    assert eng.eps_prime == 1


# -- implicit vs explicit --------------------------------------------------------


def _explicit_node(dil, answered):
    mask = np.ones(dil.dataset.n_objects, dtype=bool)
    for q, r in answered:
        mask &= dil.dataset.matrix[:, q] == r
    return population(dil.dataset, np.where(mask)[0])


def _compare_node(eng, dil, state):
    pop = _explicit_node(dil, state.answered)
    assert pop.group_ids is not None
    np.testing.assert_array_equal(pop.group_ids, np.array(state.alive))
    np.testing.assert_allclose(eng.masses(state), pop.group_masses, atol=1e-9)

    answered = {q for q, _ in state.answered}
    explicit_cands = [
        q for q in range(dil.dataset.n_queries)
        if q not in answered
        and 0 < int(dil.dataset.matrix[pop.members, q].sum()) < pop.size
    ]
    cands = eng.candidates(state)
    assert cands == explicit_cands

    for q in cands:
        imp = eng.split_stats(state, q)
        exp = split_stats(pop, dil.dataset, q, objective="group-id")
        assert imp.left_mass == pytest.approx(exp.left_mass, abs=1e-9)
        assert imp.right_mass == pytest.approx(exp.right_mass, abs=1e-9)
        assert imp.rho == pytest.approx(exp.rho, abs=1e-9)
        assert imp.cost == pytest.approx(exp.cost, abs=1e-9)
        assert set(imp.group_rhos) == set(exp.group_rhos)
        for g, r in exp.group_rhos.items():
            assert imp.group_rhos[g] == pytest.approx(r, abs=1e-9)


@pytest.mark.parametrize("model,p", [(1, 0.5), (2, 0.25), (2, 0.05)])
def test_implicit_matches_explicit_along_random_paths(model, p):
    rng = np.random.default_rng(901 + model * 10 + int(p * 100))
    done = 0
    while done < 12:
        inst = noise_instance(rng, max_objects=8, max_queries=8, max_prone=4)
        if inst is None:
            continue
        ds, prone = inst
        spec = NoiseSpec(error_prone=prone, model=model, p=p)
        dil = dilate_explicit(ds, spec)
        eng = ImplicitDilation(ds, spec)
        state = eng.root_state()
        _compare_node(eng, dil, state)
        while not state.resolved and eng.candidates(state):
            q, _ = eng.select(state, "gisa")
            state = eng.answer(state, q, int(rng.integers(0, 2)))
            _compare_node(eng, dil, state)
        done += 1


# -- sampling --------------------------------------------------------------------


def test_simulated_errors_follow_model1(toy3):
    rng = np.random.default_rng(7)
    src = toy3.matrix[1].astype(int)
    counts = {0: 0, 1: 0}
    n = 20_000
    for _ in range(n):
        row = simulate_errors(toy3, None, "theta2", rng)
        assert row[0] == src[0]  # q1 never flips
        counts[int(np.sum(row != src))] += 1
    # model 1 over e in {0, 1}: weights C(2,0), C(2,1) -> 1/3, 2/3
    assert counts[0] / n == pytest.approx(1 / 3, abs=0.015)
    assert counts[1] / n == pytest.approx(2 / 3, abs=0.015)


def test_simulated_errors_at_p_zero_never_flip(toy3):
    spec = NoiseSpec(error_prone=(1, 2), model=2, p=0.0)
    rng = np.random.default_rng(11)
    for _ in range(200):
        row = simulate_errors(toy3, spec, 0, rng)
        np.testing.assert_array_equal(row, toy3.matrix[0])


def test_simulated_errors_feed_identification(toy3):
    rng = np.random.default_rng(3)
    hits = 0
    for _ in range(300):
        truth = "theta1" if rng.random() < 0.25 else "theta2"
        row = simulate_errors(toy3, None, truth, rng)
        run = identify_with_noise(toy3, row, config=BuildConfig())
        hits += run.outcome == truth
    assert hits == 300
