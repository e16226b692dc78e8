"""Cold-start analysis: the oracle-evaluated target loss, the label-free
cross-entropy measure that tracks it, exact verification of the
information-theoretic bounds relating the two on discrete instances, and
the start-size stopping rule built on the measure.

The measure needs no labels: it is the cross-entropy between an assumed
class prior (uniform by default) and the model's predicted-class marginal,
estimated by averaging softmax outputs over the whole training pool.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import model
from .data import Dataset, PoolState, fmt_float
from .model import ModelParams, PROB_FLOOR


@dataclass
class MeasureRecord:
    """One point of a start-size sweep."""

    labeled_count: int
    measure_H: float
    target_loss: float
    assumed_prior: np.ndarray
    seed: int | None = None


@dataclass
class BoundCheck:
    """The two-sided bracket around the conditional cross-entropy risk for
    one discrete instance. min_posterior is the smallest p(input | predicted
    class); input_entropy is the Shannon entropy of the input marginal."""

    lower: float
    risk: float
    upper: float
    min_posterior: float
    input_entropy: float
    measure_H: float

    def bracket_holds(self, tol: float = 1e-12) -> bool:
        return self.lower <= self.risk + tol and self.risk <= self.upper + tol

    def to_dict(self) -> dict:
        return {"lower": self.lower, "risk": self.risk, "upper": self.upper,
                "min_posterior": self.min_posterior,
                "input_entropy": self.input_entropy, "measure_H": self.measure_H}


@dataclass
class StartSizeRecommendation:
    size: int
    converged: bool
    deltas: list[float] = field(default_factory=list)


def al_target_loss(params: ModelParams, ds_train: Dataset) -> float:
    """Mean negative log-likelihood of the true labels over the ENTIRE
    training set. Uses the oracle for every sample, so it is observable
    only to the evaluation harness, never to selection."""
    return model.supervised_loss(params, ds_train.features, ds_train.true_labels)


def pred_marginal(params: ModelParams, ds_train: Dataset) -> np.ndarray:
    """p(predicted class) estimated as the average softmax vector over all
    training samples; no labels involved."""
    return model.predict_probs(params, ds_train.features).mean(axis=0)


def _check_distribution(p: np.ndarray, what: str) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or np.any(p < -1e-12) or not np.isclose(p.sum(), 1.0, atol=1e-9):
        raise ValueError(f"{what} is not a probability distribution")
    return p


def measure_cross_entropy(prior: np.ndarray, marginal: np.ndarray) -> float:
    """Cross-entropy H[prior, marginal] in nats, clamped away from log 0."""
    prior = _check_distribution(prior, "prior")
    marginal = _check_distribution(marginal, "marginal")
    if len(prior) != len(marginal):
        raise ValueError("distribution sizes differ")
    return float(-(prior * np.log(np.maximum(marginal, PROB_FLOOR))).sum())


def uniform_prior(n_classes: int) -> np.ndarray:
    return np.full(n_classes, 1.0 / n_classes)


def verify_prop1(joint: np.ndarray, classifier: np.ndarray) -> BoundCheck:
    """Exact bound check on one finite instance.

    joint[i, j] = p(input i, class j); classifier[i, j] = p(predicted
    class j | input i). Everything is computed by enumeration: the risk is
    the expected cross-entropy between the true and predicted class
    conditionals, and the bracket is

        measure - input_entropy <= risk <= measure - input_entropy
                                           - log(min_posterior)

    with min_posterior = min over (input, class) of p(input | predicted
    class). A deterministic classifier drives min_posterior to 0, which
    legitimately yields an infinite upper bound; conditioning on a class
    that is never predicted is an error instead.
    """
    joint = np.asarray(joint, dtype=float)
    classifier = np.asarray(classifier, dtype=float)
    if joint.ndim != 2 or classifier.shape != joint.shape:
        raise ValueError("joint and classifier must be matrices of equal shape")
    if joint.shape[0] > 32 or joint.shape[1] > 32:
        raise ValueError("supports larger than 32 states are not enumerable here")
    if np.any(joint < 0) or not np.isclose(joint.sum(), 1.0, atol=1e-9):
        raise ValueError("joint is not a probability distribution")
    if np.any(classifier < 0) or not np.allclose(classifier.sum(axis=1), 1.0, atol=1e-9):
        raise ValueError("classifier rows must be distributions")

    p_x = joint.sum(axis=1)
    p_y = joint.sum(axis=0)
    p_pred = classifier.T @ p_x  # marginal of the predicted class
    for j, pj in enumerate(p_pred):
        if pj <= 0.0:
            i = int(np.argmax(classifier[:, j] + p_x))
            raise ValueError(
                f"predicted class {j} has probability 0; p(input {i} | class {j}) undefined")

    # risk = E_x sum_y p(y|x) (-log p(pred=y|x)); only supported cells count
    with np.errstate(divide="ignore"):
        neg_log_pred = -np.log(classifier)
    mask = joint > 0
    risk = float((joint[mask] * neg_log_pred[mask]).sum())

    pos = p_x > 0
    input_entropy = float(-(p_x[pos] * np.log(p_x[pos])).sum())
    with np.errstate(divide="ignore"):
        measure = float(-(p_y[p_y > 0] * np.log(p_pred[p_y > 0])).sum())

    # p(input i | predicted j) by Bayes, exact
    posterior = (classifier * p_x[:, None]) / p_pred[None, :]
    min_post = float(posterior.min())
    lower = measure - input_entropy
    upper = np.inf if min_post <= 0 else measure - input_entropy - np.log(min_post)
    return BoundCheck(lower=lower, risk=risk, upper=float(upper),
                      min_posterior=min_post, input_entropy=input_entropy,
                      measure_H=measure)


def start_size_rule(measurements: list[MeasureRecord], epsilon: float) -> StartSizeRecommendation:
    """Smallest labeled count whose measure moved by at most epsilon from
    the previous measurement; if the curve never settles, the largest
    measured size with converged=False."""
    if len(measurements) < 2:
        raise ValueError("the rule needs at least two measurements")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    counts = [m.labeled_count for m in measurements]
    if any(b <= a for a, b in zip(counts, counts[1:])):
        raise ValueError("labeled counts must be strictly increasing")
    deltas = [abs(b.measure_H - a.measure_H)
              for a, b in zip(measurements, measurements[1:])]
    for d, m in zip(deltas, measurements[1:]):
        if d <= epsilon:
            return StartSizeRecommendation(m.labeled_count, True, deltas)
    return StartSizeRecommendation(measurements[-1].labeled_count, False, deltas)


def nested_balanced_sets(ds: Dataset, sizes: list[int], seed) -> list[list[int]]:
    """Start sets for a sweep: one shuffled order per class, each size takes
    a near-balanced quota of prefixes, so every smaller set is contained in
    every larger one and the curve reflects label growth, not resampling."""
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sizes must be strictly increasing")
    if sizes[-1] > ds.n:
        raise ValueError("largest size exceeds the dataset")
    rng = np.random.default_rng(seed)
    per_class = [rng.permutation(np.flatnonzero(ds.true_labels == c))
                 for c in range(ds.n_classes)]
    out = []
    for s in sizes:
        base, rem = divmod(s, ds.n_classes)
        chosen: list[int] = []
        for c in range(ds.n_classes):
            quota = base + (1 if c < rem else 0)
            if quota > len(per_class[c]):
                raise ValueError(f"class {c} has fewer than {quota} samples")
            chosen.extend(int(i) for i in per_class[c][:quota])
        out.append(sorted(chosen))
    return out


def sweep_start_sizes(ds_train: Dataset, sizes: list[int], config) -> list[MeasureRecord]:
    """Train once per start size on nested class-balanced sets and record
    the label-free measure next to the oracle-evaluated target loss."""
    from .loop import train_cycle  # deferred: loop imports this module

    prior = uniform_prior(ds_train.n_classes)
    records = []
    for size, chosen in zip(sizes, nested_balanced_sets(ds_train, sizes, [config.seed, 7])):
        labeled = {i: int(ds_train.true_labels[i]) for i in chosen}
        chosen_set = set(chosen)
        pool = PoolState(labeled=labeled,
                         unlabeled=[i for i in range(ds_train.n) if i not in chosen_set],
                         cycle=0)
        params = train_cycle(None, pool, ds_train, config)
        records.append(MeasureRecord(
            labeled_count=size,
            measure_H=measure_cross_entropy(prior, pred_marginal(params, ds_train)),
            target_loss=al_target_loss(params, ds_train),
            assumed_prior=prior,
            seed=config.seed,
        ))
    return records


def pearson(xs, ys) -> float:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError("pearson needs two equal-length series of >= 2 points")
    return float(np.corrcoef(xs, ys)[0, 1])


def save_sweep_csv(records: list[MeasureRecord], path: str) -> None:
    with open(path, "w", newline="") as f:
        f.write("size,seed,measure_H,target_loss\n")
        for r in records:
            f.write(f"{r.labeled_count},{r.seed if r.seed is not None else ''},"
                    f"{fmt_float(r.measure_H)},{fmt_float(r.target_loss)}\n")
