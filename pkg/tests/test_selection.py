import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from alforge import model, selection
from alforge.data import AugmentationSpec, Dataset, PoolState, init_start_set, gen_blobs
from alforge.model import init_params
from alforge.selection import (ScoreTable, farthest_first, inconsistency_from_probs,
                               prediction_entropy, sample_inconsistency,
                               score_consistency, score_entropy, score_kcenter,
                               score_uniform, select_kcenter, select_topk,
                               select_uniform, rank_pool, save_scores_csv)


def toy_dataset(n=12, seed=0, j=2):
    rng = np.random.default_rng(seed)
    return Dataset(rng.normal(0, 1, (n, 2)), rng.integers(0, j, n), j)


# ---------------------------------------------------------------------------
# entropy

def test_entropy_uniform_is_log_j():
    p = np.full(10, 0.1)
    assert np.isclose(prediction_entropy(p), np.log(10.0), atol=1e-12)


def test_entropy_one_hot_is_zero():
    p = np.zeros(4)
    p[2] = 1.0
    assert prediction_entropy(p) == pytest.approx(0.0, abs=1e-10)


def test_entropy_hand_value():
    got = prediction_entropy(np.array([0.7, 0.3]))
    want = -(0.7 * np.log(0.7) + 0.3 * np.log(0.3))
    assert np.isclose(got, want, atol=1e-15)
    assert np.isclose(got, 0.6108643020548935, atol=1e-12)


def test_score_entropy_covers_pool_and_matches_per_sample():
    ds = toy_dataset(15, seed=3)
    params = init_params(1, 2, 6, 2, scale=0.8)
    unl = [2, 5, 7, 11]
    table = score_entropy(params, ds, unl)
    assert set(table.scores) == set(unl)
    for i in unl:
        probs = model.forward(params, ds.features[i]).probs
        assert np.isclose(table.scores[i], prediction_entropy(probs), atol=1e-12)


# ---------------------------------------------------------------------------
# inconsistency

def test_inconsistency_spec_example():
    # two predictions (1,0) and (0,1): per-class mean .5, population var .25
    stack = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert inconsistency_from_probs(stack) == pytest.approx(0.5, abs=1e-15)


def test_inconsistency_identity_augmentation_is_zero():
    ds = toy_dataset(8, seed=1)
    params = init_params(2, 2, 5, 2, scale=0.7)
    spec = AugmentationSpec(sigma=0.0, n_eval_augs=4)
    table = score_consistency(params, ds, list(range(8)), spec, seed=9)
    assert all(v == pytest.approx(0.0, abs=1e-18) for v in table.scores.values())


def test_inconsistency_zero_weight_model_is_zero_whatever_the_augs():
    ds = toy_dataset(6, seed=2)
    params = init_params(0, 2, 4, 3, scale=0.0)
    spec = AugmentationSpec(sigma=2.0, n_eval_augs=6)
    table = score_consistency(params, ds, list(range(6)), spec, seed=1)
    assert all(v == 0.0 for v in table.scores.values())


def test_inconsistency_matches_two_pass_oracle():
    ds = toy_dataset(10, seed=4)
    params = init_params(3, 2, 6, 3, scale=0.9)
    spec = AugmentationSpec(sigma=0.4, n_eval_augs=5)
    table = score_consistency(params, ds, list(range(10)), spec, seed=21)
    from alforge.data import draw_augmentations
    for i in range(10):
        rng = np.random.default_rng([21, i])
        augs = draw_augmentations(ds.features[i], spec, 5, rng)
        probs = [model.forward(params, v).probs
                 for v in np.vstack([ds.features[i][None, :], augs])]
        expect = 0.0
        for c in range(3):
            vals = [p[c] for p in probs]
            m = sum(vals) / len(vals)
            expect += sum((v - m) ** 2 for v in vals) / len(vals)
        assert abs(table.scores[i] - expect) < 1e-12


def test_inconsistency_scores_do_not_depend_on_pool_order():
    ds = toy_dataset(9, seed=5)
    params = init_params(4, 2, 5, 2, scale=0.6)
    spec = AugmentationSpec(sigma=0.3, n_eval_augs=3)
    full = score_consistency(params, ds, [0, 1, 2, 3, 4, 5], spec, seed=2)
    part = score_consistency(params, ds, [5, 2, 0], spec, seed=2)
    for i in (0, 2, 5):
        assert full.scores[i] == part.scores[i]


@given(st.integers(0, 100_000))
@settings(max_examples=60, deadline=None)
def test_inconsistency_bounded_by_quarter_j(seed):
    rng = np.random.default_rng(seed)
    n_preds = int(rng.integers(1, 9))
    j = int(rng.integers(2, 6))
    stack = rng.dirichlet(np.full(j, 0.3), size=n_preds)
    val = inconsistency_from_probs(stack)
    assert 0.0 <= val <= j / 4 + 1e-12


# ---------------------------------------------------------------------------
# top-k

def test_topk_basic_and_tie_rule():
    t = ScoreTable({0: 3.0, 1: 1.0, 2: 2.0}, "entropy")
    assert select_topk(t, 2) == [0, 2]
    flat = ScoreTable({i: 1.0 for i in range(5)}, "entropy")
    assert select_topk(flat, 2) == [0, 1]
    assert select_topk(t, 0) == []
    with pytest.raises(ValueError):
        select_topk(t, 4)


def test_topk_matches_exhaustive_subset_argmax():
    rng = np.random.default_rng(0)
    for trial in range(40):
        n = int(rng.integers(2, 13))
        k = int(rng.integers(1, min(4, n) + 1))
        vals = rng.integers(0, 4, n).astype(float) if trial % 2 else rng.normal(0, 1, n)
        t = ScoreTable({i: float(v) for i, v in enumerate(vals)}, "consistency")
        got = select_topk(t, k)
        best, best_set = -np.inf, None
        for combo in itertools.combinations(range(n), k):
            s = sum(vals[c] for c in combo)
            if s > best:
                best, best_set = s, combo
        assert set(got) == set(best_set)


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_topk_invariant_under_monotone_transforms(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 10))
    k = int(rng.integers(1, n + 1))
    vals = rng.normal(0, 1, n)
    base = select_topk(ScoreTable({i: float(v) for i, v in enumerate(vals)}, "entropy"), k)
    for f in (lambda v: 2 * v + 5, np.exp, lambda v: np.arctan(v) * 3):
        t = ScoreTable({i: float(f(v)) for i, v in enumerate(vals)}, "entropy")
        assert select_topk(t, k) == base


# ---------------------------------------------------------------------------
# k-center

def test_kcenter_k1_picks_farthest_in_hidden_space():
    ds = toy_dataset(10, seed=6)
    params = init_params(5, 2, 4, 2, scale=0.5)
    pool = PoolState(labeled={0: int(ds.true_labels[0])},
                     unlabeled=list(range(1, 10)), cycle=0)
    got = select_kcenter(params, ds, pool, 1)
    emb = model.hidden_features(params, ds.features)
    dists = np.linalg.norm(emb[1:] - emb[0], axis=1)
    assert got == [1 + int(np.argmax(dists))]


def test_kcenter_duplicate_features_fall_back_to_index_order():
    X = np.tile([[0.5, -0.5]], (8, 1))
    ds = Dataset(X, np.zeros(8, dtype=int), 2)
    params = init_params(0, 2, 4, 2, scale=0.3)
    pool = PoolState(labeled={0: 0}, unlabeled=list(range(1, 8)), cycle=0)
    assert select_kcenter(params, ds, pool, 3) == [1, 2, 3]


def test_kcenter_requires_anchors_and_valid_k():
    ds = toy_dataset(6, seed=7)
    params = init_params(0, 2, 4, 2)
    empty = PoolState(labeled={}, unlabeled=list(range(6)), cycle=0)
    with pytest.raises(ValueError):
        select_kcenter(params, ds, empty, 1)
    pool = PoolState(labeled={0: 0}, unlabeled=list(range(1, 6)), cycle=0)
    with pytest.raises(ValueError):
        select_kcenter(params, ds, pool, 6)


def test_kcenter_score_table_prefix_equals_selection():
    ds = toy_dataset(14, seed=8)
    params = init_params(6, 2, 5, 2, scale=0.8)
    pool = init_start_set(ds, 3, balanced=False, seed=2)
    table = score_kcenter(params, ds, pool)
    table.validate(pool)
    for k in (1, 3, 5):
        assert select_topk(table, k) == select_kcenter(params, ds, pool, k)
    # pick-time distances never increase along the greedy order
    ordered = [table.scores[i] for i in table.ranking()]
    assert all(a >= b - 1e-12 for a, b in zip(ordered, ordered[1:]))


def test_farthest_first_two_approximation_small_cases():
    rng = np.random.default_rng(1)
    for _ in range(25):
        n = int(rng.integers(3, 9))
        k = int(rng.integers(1, 4))
        if k > n:
            continue
        pts = rng.normal(0, 1, (n, 2))
        anchors = rng.normal(0, 1, (1, 2))
        picked, _, _ = farthest_first(pts, anchors, k)

        def radius(centers):
            d = np.linalg.norm(pts[:, None, :] - centers[None, :, :], axis=2)
            return d.min(axis=1).max()

        greedy_r = radius(np.vstack([pts[picked], anchors]))
        best = min(radius(np.vstack([pts[list(c)], anchors]))
                   for c in itertools.combinations(range(n), k))
        assert greedy_r <= 2 * best + 1e-9


# ---------------------------------------------------------------------------
# uniform

def test_uniform_full_pool_and_determinism():
    pool = PoolState(labeled={0: 0}, unlabeled=list(range(1, 9)), cycle=0)
    assert sorted(select_uniform(pool, 8, seed=1)) == list(range(1, 9))
    assert select_uniform(pool, 3, seed=5) == select_uniform(pool, 3, seed=5)
    assert select_uniform(pool, 3, seed=5) != select_uniform(pool, 3, seed=6)


def test_uniform_frequencies_within_three_sigma():
    pool = PoolState(labeled={}, unlabeled=list(range(10)), cycle=0)
    counts = np.zeros(10)
    for draw in range(10_000):
        counts[select_uniform(pool, 1, seed=[9, draw])[0]] += 1
    sigma = np.sqrt(10_000 * 0.1 * 0.9)
    assert np.all(np.abs(counts - 1000) <= 3 * sigma)


# ---------------------------------------------------------------------------
# shared contracts

@given(st.integers(0, 10_000), st.sampled_from(selection.STRATEGIES))
@settings(max_examples=40, deadline=None)
def test_every_strategy_returns_k_unique_unlabeled_indices(seed, strategy):
    ds = gen_blobs(20, 2, seed=seed % 5)
    pool = init_start_set(ds, 4, balanced=True, seed=seed)
    params = init_params(seed, 2, 4, 2, scale=0.5)
    k = (seed % 5) + 1
    table = rank_pool(strategy, params, ds, pool, AugmentationSpec(sigma=0.2, n_eval_augs=2),
                      seed=[seed, 1])
    table.validate(pool)
    batch = select_topk(table, k)
    assert len(batch) == k
    assert len(set(batch)) == k
    assert set(batch) <= set(pool.unlabeled)


def test_scores_csv_format(tmp_path):
    t = ScoreTable({4: 0.25, 1: 1.5, 9: 0.25}, "entropy")
    path = tmp_path / "scores.csv"
    save_scores_csv(t, str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "idx,score,rank"
    assert lines[1].startswith("1,1.5") and lines[1].endswith(",1")
    # tie between idx 4 and 9 resolved to the smaller index
    assert lines[2].startswith("4,") and lines[2].endswith(",2")
    assert lines[3].startswith("9,") and lines[3].endswith(",3")


def test_score_uniform_is_a_random_permutation_device():
    pool = PoolState(labeled={}, unlabeled=list(range(12)), cycle=0)
    t1 = score_uniform(pool, seed=3)
    t2 = score_uniform(pool, seed=3)
    assert t1.scores == t2.scores
    assert set(t1.scores) == set(range(12))
