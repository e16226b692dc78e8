"""Built-in oracle suite: every numerically delicate piece of the library
checked against an independent, deliberately naive reference computation.

The same checks back the release gate (`alforge verify`) and the test
suite. Setting ALFORGE_VERIFY_CORRUPT=grad perturbs one analytic gradient
entry, as a negative control that the gate actually bites.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass

import numpy as np

from . import model
from .data import AugmentationSpec, Dataset, augment
from .model import LossSpec
from .selection import ScoreTable, farthest_first, sample_inconsistency, select_topk
from .coldstart import verify_prop1

FD_EPS = 1e-5
FD_RTOL = 1e-4


@dataclass
class CheckResult:
    name: str
    n_instances: int
    max_error: float
    passed: bool
    failing_instance: dict | None = None

    def row(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name:<22} {self.n_instances:>9} {self.max_error:>12.3e} {status}"


def _rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-6)


def finite_difference_grad(params, labeled_X, labeled_y, aug_X, targets, spec,
                           eps: float = FD_EPS):
    """Central finite differences of the composite loss with frozen
    consistency targets, one coordinate at a time."""
    grads = []
    for tensor_name in ("W1", "b1", "W2", "b2"):
        t = getattr(params, tensor_name)
        g = np.zeros_like(t)
        it = np.nditer(t, flags=["multi_index"])
        for _ in it:
            ix = it.multi_index
            p_plus = params.copy()
            getattr(p_plus, tensor_name)[ix] += eps
            p_minus = params.copy()
            getattr(p_minus, tensor_name)[ix] -= eps
            f_plus = model.composite_loss(p_plus, labeled_X, labeled_y, aug_X, targets, spec)
            f_minus = model.composite_loss(p_minus, labeled_X, labeled_y, aug_X, targets, spec)
            g[ix] = (f_plus - f_minus) / (2 * eps)
        grads.append(g)
    return model.Gradients(*grads)


def _random_grad_instance(rng: np.random.Generator):
    """One random training configuration, resampled until every relu
    pre-activation clears the finite-difference step (the kink makes the
    two-sided difference meaningless within eps of zero)."""
    for _ in range(200):
        d = int(rng.integers(2, 5))
        h = int(rng.integers(2, 6))
        j = int(rng.integers(2, 5))
        activation = ["tanh", "relu"][int(rng.integers(0, 2))]
        n_lab = int(rng.integers(1, 4))
        n_unl = int(rng.integers(0, 3))
        m = int(rng.integers(1, 3))
        lam = [0.0, 0.5, 1.0][int(rng.integers(0, 3))]
        dist = ["squared_l2", "kl_divergence"][int(rng.integers(0, 2))]
        params = model.ModelParams(
            W1=rng.normal(0, 0.8, (h, d)), b1=rng.normal(0, 0.3, h),
            W2=rng.normal(0, 0.8, (j, h)), b2=rng.normal(0, 0.3, j),
            activation=activation)
        labeled_X = rng.normal(0, 1, (n_lab, d))
        labeled_y = rng.integers(0, j, n_lab)
        spec = LossSpec(distance=dist, unsup_weight=lam, n_train_augs=m)
        if n_unl > 0 and lam > 0:
            unlabeled_X = rng.normal(0, 1, (n_unl, d))
            aug_X = rng.normal(0, 1, (n_unl, m, d))
        else:
            unlabeled_X, aug_X = None, None
        if activation == "relu":
            stack = [labeled_X] + ([unlabeled_X, aug_X.reshape(-1, d)]
                                   if aug_X is not None else [])
            Z1 = np.vstack(stack) @ params.W1.T + params.b1
            if np.abs(Z1).min() <= 1e-3:
                continue
        return params, labeled_X, labeled_y, unlabeled_X, aug_X, spec
    raise RuntimeError("could not sample a kink-free relu instance")


def check_gradient(seed: int = 0, n_instances: int = 100) -> CheckResult:
    rng = np.random.default_rng([seed, 101])
    worst = 0.0
    corrupt = os.environ.get("ALFORGE_VERIFY_CORRUPT") == "grad"
    for i in range(n_instances):
        params, lX, ly, uX, aX, spec = _random_grad_instance(rng)
        _, grad = model.total_loss_and_grad(params, lX, ly, uX, aX, spec)
        if corrupt:
            grad.W1[0, 0] += 1e-2
        targets = model.consistency_targets(params, uX) if uX is not None else None
        fd = finite_difference_grad(params, lX, ly, aX, targets, spec)
        err = max(
            max((_rel_err(a, b) for a, b in zip(g.ravel(), f.ravel())), default=0.0)
            for g, f in ((grad.W1, fd.W1), (grad.b1, fd.b1),
                         (grad.W2, fd.W2), (grad.b2, fd.b2)))
        worst = max(worst, err)
        if err >= FD_RTOL:
            return CheckResult("gradient_fd", i + 1, worst, False,
                               {"instance": i, "seed": seed, "rel_err": err,
                                "activation": params.activation,
                                "distance": spec.distance,
                                "unsup_weight": spec.unsup_weight})
    return CheckResult("gradient_fd", n_instances, worst, True)


def two_pass_variance(values) -> float:
    """Textbook population variance, written naively on purpose."""
    n = len(values)
    mean = sum(values) / n
    return sum((v - mean) ** 2 for v in values) / n


def check_consistency_oracle(seed: int = 0, n_instances: int = 1000) -> CheckResult:
    rng = np.random.default_rng([seed, 102])
    worst = 0.0
    for i in range(n_instances):
        d = int(rng.integers(2, 5))
        h = int(rng.integers(2, 6))
        j = int(rng.integers(2, 5))
        params = model.init_params([seed, 102, i], d, h, j, scale=0.8,
                                   activation=["tanh", "relu"][i % 2])
        x = rng.normal(0, 1, d)
        n_augs = int(rng.integers(1, 9))
        spec = AugmentationSpec(kind="gaussian_jitter", sigma=float(rng.uniform(0.05, 0.8)),
                                n_eval_augs=n_augs)
        stream = np.random.default_rng([seed, 103, i])
        score = sample_inconsistency(params, x, spec, stream)
        # oracle: same augmentation stream, per-class two-pass variance on
        # per-sample forward passes
        stream2 = np.random.default_rng([seed, 103, i])
        inputs = [x] + [augment(x, spec, stream2) for _ in range(n_augs)]
        probs = [model.forward(params, v).probs for v in inputs]
        expect = sum(two_pass_variance([p[c] for p in probs]) for c in range(j))
        err = abs(score - expect)
        worst = max(worst, err)
        if err > 1e-12:
            return CheckResult("inconsistency_oracle", i + 1, worst, False,
                               {"instance": i, "seed": seed, "error": err})
    return CheckResult("inconsistency_oracle", n_instances, worst, True)


def check_topk_exhaustive(seed: int = 0, n_instances: int = 200) -> CheckResult:
    rng = np.random.default_rng([seed, 104])
    for i in range(n_instances):
        n = int(rng.integers(1, 13))
        k = int(rng.integers(0, min(4, n) + 1))
        if i % 2 == 0:
            vals = rng.normal(0, 1, n)  # continuous: ties impossible
        else:
            vals = rng.integers(0, 4, n).astype(float)  # ties common, sums exact
        table = ScoreTable({idx: float(v) for idx, v in enumerate(vals)}, "entropy")
        got = select_topk(table, k)
        best_sum, best_set = -np.inf, None
        for combo in itertools.combinations(range(n), k):
            s = sum(vals[c] for c in combo)
            if s > best_sum:  # first maximizer in lex order wins, same tie rule
                best_sum, best_set = s, combo
        if set(got) != set(best_set) or len(got) != k:
            return CheckResult("topk_exhaustive", i + 1, 1.0, False,
                               {"instance": i, "seed": seed, "scores": vals.tolist(),
                                "k": k, "got": got, "want": list(best_set)})
    return CheckResult("topk_exhaustive", n_instances, 0.0, True)


def check_prop1_bracket(seed: int = 0, n_instances: int = 100) -> CheckResult:
    rng = np.random.default_rng([seed, 105])
    worst = 0.0
    for i in range(n_instances):
        nx = int(rng.integers(2, 9))
        ny = int(rng.integers(2, 9))
        joint = rng.dirichlet(np.ones(nx * ny)).reshape(nx, ny)
        classifier = rng.dirichlet(np.ones(ny), size=nx)
        chk = verify_prop1(joint, classifier)
        slack = max(chk.lower - chk.risk, chk.risk - chk.upper)
        worst = max(worst, slack)
        if not chk.bracket_holds(1e-9):
            return CheckResult("prop1_bracket", i + 1, worst, False,
                               {"instance": i, "seed": seed, **chk.to_dict()})
    return CheckResult("prop1_bracket", n_instances, worst, True)


def covering_radius(points: np.ndarray, centers: np.ndarray) -> float:
    """Max over points of the distance to the nearest center."""
    diff = points[:, None, :] - centers[None, :, :]
    return float(np.sqrt((diff ** 2).sum(axis=2)).min(axis=1).max())


def check_kcenter_quality(seed: int = 0, n_instances: int = 100) -> CheckResult:
    rng = np.random.default_rng([seed, 106])
    worst_ratio = 0.0
    for i in range(n_instances):
        n = int(rng.integers(3, 11))
        k = int(rng.integers(1, min(3, n) + 1))
        d = int(rng.integers(1, 4))
        pts = rng.normal(0, 1, (n, d))
        anchors = rng.normal(0, 1, (int(rng.integers(1, 3)), d))
        picked, _, _ = farthest_first(pts, anchors, k)
        all_pts = np.vstack([pts, anchors])
        greedy_r = covering_radius(all_pts, np.vstack([pts[picked], anchors]))
        best_r = np.inf
        for combo in itertools.combinations(range(n), k):
            r = covering_radius(all_pts, np.vstack([pts[list(combo)], anchors]))
            best_r = min(best_r, r)
        ratio = greedy_r / best_r if best_r > 0 else 1.0
        worst_ratio = max(worst_ratio, ratio)
        if greedy_r > 2.0 * best_r + 1e-9:
            return CheckResult("kcenter_2approx", i + 1, worst_ratio, False,
                               {"instance": i, "seed": seed, "greedy": greedy_r,
                                "optimal": best_r, "ratio": ratio})
    return CheckResult("kcenter_2approx", n_instances, worst_ratio, True)


ALL_CHECKS = (
    check_gradient,
    check_consistency_oracle,
    check_topk_exhaustive,
    check_prop1_bracket,
    check_kcenter_quality,
)


def run_all_checks(seed: int = 0) -> list[CheckResult]:
    return [chk(seed) for chk in ALL_CHECKS]
