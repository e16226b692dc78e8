import numpy as np
import pytest

from alforge import model, verify
from alforge.model import LossSpec, init_params
from alforge.verify import (CheckResult, check_consistency_oracle, check_gradient,
                            check_kcenter_quality, check_prop1_bracket,
                            check_topk_exhaustive, covering_radius,
                            finite_difference_grad, run_all_checks,
                            two_pass_variance)


def test_two_pass_variance_matches_numpy():
    rng = np.random.default_rng(0)
    for _ in range(20):
        vals = rng.normal(0, 3, int(rng.integers(1, 12)))
        assert two_pass_variance(list(vals)) == pytest.approx(
            np.var(vals, ddof=0), abs=1e-12)


def test_finite_difference_agrees_on_a_known_instance():
    params = init_params(3, 2, 3, 2, scale=0.5)
    X = np.array([[0.4, -1.2], [0.9, 0.3]])
    y = np.array([0, 1])
    spec = LossSpec(unsup_weight=0.0)
    _, grad = model.total_loss_and_grad(params, X, y, None, None, spec)
    fd = finite_difference_grad(params, X, y, None, None, spec)
    for name in ("W1", "b1", "W2", "b2"):
        assert np.allclose(getattr(grad, name), getattr(fd, name), atol=1e-7)


def test_covering_radius_hand_case():
    pts = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 3.0]])
    centers = np.array([[0.0, 0.0]])
    assert covering_radius(pts, centers) == pytest.approx(4.0)
    both = np.array([[0.0, 0.0], [4.0, 0.0]])
    assert covering_radius(pts, both) == pytest.approx(3.0)


def test_each_check_passes_at_reduced_size():
    assert check_gradient(seed=1, n_instances=10).passed
    assert check_consistency_oracle(seed=1, n_instances=50).passed
    assert check_topk_exhaustive(seed=1, n_instances=50).passed
    assert check_prop1_bracket(seed=1, n_instances=30).passed
    assert check_kcenter_quality(seed=1, n_instances=30).passed


def test_checks_record_instance_counts_and_errors():
    res = check_consistency_oracle(seed=2, n_instances=25)
    assert res.n_instances == 25
    assert res.max_error < 1e-12
    assert res.failing_instance is None
    assert "PASS" in res.row()


def test_run_all_checks_covers_every_check():
    results = run_all_checks(seed=3)
    names = [r.name for r in results]
    assert names == ["gradient_fd", "inconsistency_oracle", "topk_exhaustive",
                     "prop1_bracket", "kcenter_2approx"]


def test_corrupt_hook_trips_the_gradient_check(monkeypatch):
    monkeypatch.setenv("ALFORGE_VERIFY_CORRUPT", "grad")
    res = check_gradient(seed=0, n_instances=5)
    assert not res.passed
    assert res.failing_instance is not None
    assert "FAIL" in res.row()
    # the replay payload names the failing configuration
    assert {"instance", "seed", "rel_err"} <= set(res.failing_instance)


def test_failing_result_row_and_replay_shape():
    bad = CheckResult("gradient_fd", 3, 0.5, False, {"instance": 2, "seed": 0})
    assert "FAIL" in bad.row()
    assert bad.failing_instance["instance"] == 2
