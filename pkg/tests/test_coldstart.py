import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from alforge import coldstart, model
from alforge.coldstart import (MeasureRecord, al_target_loss, measure_cross_entropy,
                               nested_balanced_sets, pearson, pred_marginal,
                               save_sweep_csv, start_size_rule, sweep_start_sizes,
                               uniform_prior, verify_prop1)
from alforge.data import AugmentationSpec, Dataset, gen_two_moons
from alforge.loop import ALConfig
from alforge.model import LossSpec, init_params


MOONS = gen_two_moons(40, 0.15, [13, 0])


def record_seq(hs, counts=None):
    counts = counts or list(range(2, 2 + 2 * len(hs), 2))
    prior = uniform_prior(2)
    return [MeasureRecord(c, h, 0.0, prior) for c, h in zip(counts, hs)]


# ---------------------------------------------------------------------------
# target loss and marginal

def test_target_loss_zero_weight_model_is_log_j():
    params = init_params(0, 2, 8, 2, scale=0.0)
    assert al_target_loss(params, MOONS) == pytest.approx(np.log(2), abs=1e-12)


def test_target_loss_matches_per_sample_recomputation():
    params = init_params(5, 2, 8, 2, scale=0.6)
    per_sample = [-np.log(max(model.forward(params, x).probs[y], model.PROB_FLOOR))
                  for x, y in zip(MOONS.features, MOONS.true_labels)]
    assert al_target_loss(params, MOONS) == pytest.approx(np.mean(per_sample), abs=1e-12)


def test_pred_marginal_uniform_for_zero_weights_and_sums_to_one():
    params = init_params(0, 2, 8, 2, scale=0.0)
    m = pred_marginal(params, MOONS)
    assert np.allclose(m, [0.5, 0.5], atol=1e-12)
    params = init_params(3, 2, 8, 2, scale=0.7)
    assert pred_marginal(params, MOONS).sum() == pytest.approx(1.0, abs=1e-9)


def test_pred_marginal_hand_average_three_samples():
    ds = Dataset(np.array([[0.0, 1.0], [1.0, -1.0], [-2.0, 0.5]]),
                 np.array([0, 1, 0]), 2)
    params = init_params(11, 2, 4, 2, scale=0.9)
    by_hand = sum(model.forward(params, x).probs for x in ds.features) / 3.0
    assert np.allclose(pred_marginal(params, ds), by_hand, atol=1e-15)


# ---------------------------------------------------------------------------
# the measure

def test_measure_uniform_pair_gives_log_j():
    p = uniform_prior(7)
    assert measure_cross_entropy(p, p) == pytest.approx(np.log(7), abs=1e-12)


def test_measure_hand_value():
    got = measure_cross_entropy(uniform_prior(2), np.array([0.9, 0.1]))
    assert got == pytest.approx(-0.5 * (np.log(0.9) + np.log(0.1)), abs=1e-15)
    assert got == pytest.approx(1.2039728043259361, abs=1e-12)


def test_measure_rejects_non_distributions():
    with pytest.raises(ValueError):
        measure_cross_entropy(np.array([0.5, 0.6]), uniform_prior(2))
    with pytest.raises(ValueError):
        measure_cross_entropy(uniform_prior(2), np.array([-0.1, 1.1]))
    with pytest.raises(ValueError):
        measure_cross_entropy(uniform_prior(2), uniform_prior(3))


@given(st.integers(0, 100_000))
@settings(max_examples=60, deadline=None)
def test_measure_gibbs_inequality(seed):
    rng = np.random.default_rng(seed)
    j = int(rng.integers(2, 6))
    p = rng.dirichlet(np.ones(j))
    q = rng.dirichlet(np.ones(j))
    self_h = measure_cross_entropy(p, p)
    assert measure_cross_entropy(p, q) >= self_h - 1e-12


# ---------------------------------------------------------------------------
# bound verification

def test_prop1_perfect_deterministic_classifier():
    joint = np.array([[0.5, 0.0], [0.0, 0.5]])
    classifier = np.eye(2)
    chk = verify_prop1(joint, classifier)
    assert chk.risk == pytest.approx(0.0, abs=1e-15)
    assert chk.lower == pytest.approx(0.0, abs=1e-12)
    assert chk.min_posterior == 0.0
    assert np.isinf(chk.upper)
    assert chk.bracket_holds()


def test_prop1_input_independent_classifier_reduces_to_measure():
    # when X and Y are independent and the classifier ignores X, the risk
    # collapses to the cross-entropy between p(Y) and the predicted marginal
    p_x = np.array([0.3, 0.7])
    p_y = np.array([0.4, 0.6])
    joint = np.outer(p_x, p_y)
    classifier = np.tile([0.2, 0.8], (2, 1))
    chk = verify_prop1(joint, classifier)
    assert chk.risk == pytest.approx(chk.measure_H, abs=1e-12)
    assert chk.bracket_holds()
    assert 0.0 < chk.min_posterior <= 1.0
    assert np.isfinite(chk.upper)


def test_prop1_never_predicted_class_is_an_error():
    joint = np.array([[0.5, 0.0], [0.0, 0.5]])
    classifier = np.array([[1.0, 0.0], [1.0, 0.0]])
    with pytest.raises(ValueError, match="class 1"):
        verify_prop1(joint, classifier)


def test_prop1_input_validation():
    ok = np.full((2, 2), 0.25)
    rows = np.full((2, 2), 0.5)
    with pytest.raises(ValueError):
        verify_prop1(ok * 0.9, rows)
    with pytest.raises(ValueError):
        verify_prop1(ok, rows - 1.0)
    with pytest.raises(ValueError):
        verify_prop1(ok, rows[:1])
    big = np.full((33, 33), 1.0 / 33 ** 2)
    with pytest.raises(ValueError):
        verify_prop1(big, np.full((33, 33), 1.0 / 33))


@given(st.integers(0, 100_000))
@settings(max_examples=40, deadline=None)
def test_prop1_bracket_random_instances(seed):
    rng = np.random.default_rng(seed)
    nx, ny = int(rng.integers(2, 9)), int(rng.integers(2, 9))
    joint = rng.dirichlet(np.ones(nx * ny)).reshape(nx, ny)
    classifier = rng.dirichlet(np.ones(ny), size=nx)
    chk = verify_prop1(joint, classifier)
    assert chk.bracket_holds(1e-9)


# ---------------------------------------------------------------------------
# start-size rule

def test_rule_spec_sequence():
    recs = record_seq([2.0, 1.2, 1.19, 1.185], counts=[4, 10, 20, 40])
    rec = start_size_rule(recs, 0.05)
    assert rec.size == 20 and rec.converged
    assert rec.deltas == pytest.approx([0.8, 0.01, 0.005])


def test_rule_flat_sequence_picks_second():
    rec = start_size_rule(record_seq([1.5, 1.5, 1.5], counts=[4, 8, 16]), 0.0)
    assert rec.size == 8 and rec.converged


def test_rule_steep_sequence_never_converges():
    rec = start_size_rule(record_seq([3.0, 2.0, 1.0], counts=[4, 8, 16]), 1e-6)
    assert rec.size == 16 and not rec.converged


def test_rule_input_validation():
    with pytest.raises(ValueError):
        start_size_rule(record_seq([1.0]), 0.1)
    with pytest.raises(ValueError):
        start_size_rule(record_seq([1.0, 0.9], counts=[8, 8]), 0.1)
    with pytest.raises(ValueError):
        start_size_rule(record_seq([1.0, 0.9]), -0.1)


@given(st.integers(0, 100_000))
@settings(max_examples=40, deadline=None)
def test_rule_monotone_in_epsilon(seed):
    rng = np.random.default_rng(seed)
    hs = np.abs(rng.normal(0, 1, int(rng.integers(2, 8)))).cumsum()[::-1]
    recs = record_seq(list(hs))
    e1, e2 = sorted(rng.uniform(0, 2, 2))
    assert start_size_rule(recs, e2).size <= start_size_rule(recs, e1).size


# ---------------------------------------------------------------------------
# sweeps

def test_nested_sets_are_nested_balanced_and_deterministic():
    sizes = [4, 10, 20]
    sets_a = nested_balanced_sets(MOONS, sizes, seed=3)
    sets_b = nested_balanced_sets(MOONS, sizes, seed=3)
    assert sets_a == sets_b
    for small, large in zip(sets_a, sets_a[1:]):
        assert set(small) <= set(large)
    for s, chosen in zip(sizes, sets_a):
        assert len(chosen) == s
        counts = np.bincount(MOONS.true_labels[chosen], minlength=2)
        assert counts.max() - counts.min() <= 1


def test_nested_sets_input_validation():
    with pytest.raises(ValueError):
        nested_balanced_sets(MOONS, [10, 10], seed=0)
    with pytest.raises(ValueError):
        nested_balanced_sets(MOONS, [4, MOONS.n + 2], seed=0)


def sweep_config(**kw):
    base = dict(start_size=4, epochs_per_cycle=30, sgd_batch=16, lr=0.3, seed=2,
                hidden_dim=8, loss=LossSpec(unsup_weight=0.0),
                augmentation=AugmentationSpec(sigma=0.2, n_eval_augs=2))
    base.update(kw)
    return ALConfig(**base)


def test_sweep_single_size_and_field_contents():
    recs = sweep_start_sizes(MOONS, [6], sweep_config())
    assert len(recs) == 1
    assert recs[0].labeled_count == 6
    assert np.isfinite(recs[0].measure_H) and np.isfinite(recs[0].target_loss)
    assert recs[0].seed == 2


def test_sweep_full_pool_reaches_training_loss():
    recs = sweep_start_sizes(MOONS, [MOONS.n], sweep_config(epochs_per_cycle=120))
    assert recs[0].target_loss < 0.3 < np.log(2)


def test_sweep_measure_tracks_loss_downward():
    recs = sweep_start_sizes(MOONS, [4, 12, 24], sweep_config())
    assert [r.labeled_count for r in recs] == [4, 12, 24]
    assert recs[-1].target_loss < recs[0].target_loss


def test_pearson_exact_and_validation():
    assert pearson([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)
    assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        pearson([1.0], [2.0])
    with pytest.raises(ValueError):
        pearson([1, 2], [1, 2, 3])


def test_sweep_csv_layout(tmp_path):
    prior = uniform_prior(2)
    recs = [MeasureRecord(4, 0.6931, 0.25, prior, seed=7),
            MeasureRecord(10, 0.5, 0.125, prior, seed=7)]
    path = tmp_path / "sweep.csv"
    save_sweep_csv(recs, str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "size,seed,measure_H,target_loss"
    assert lines[1].split(",")[:2] == ["4", "7"]
    assert float(lines[2].split(",")[2]) == 0.5
