"""Acquisition strategies over the unlabeled pool.

Four strategies: uniform random, max predictive entropy, greedy k-center
in hidden-feature space, and prediction inconsistency under augmentation
(sum over classes of the population variance of the predicted probability
across the clean sample and its augmented copies). The batch objective is
additive over samples, so exact batch selection is plain top-K with
deterministic index tie-breaking.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import model
from .data import AugmentationSpec, Dataset, PoolState, draw_augmentations, fmt_float
from .model import ModelParams, PROB_FLOOR, SeedLike

STRATEGIES = ("uniform", "entropy", "kcenter", "consistency")


@dataclass
class ScoreTable:
    """Per-sample acquisition scores for the current unlabeled pool."""

    scores: dict[int, float]
    strategy: str
    rng_seed: SeedLike | None = None

    def ranking(self) -> list[int]:
        """Indices from best to worst; ties broken by smaller index."""
        return sorted(self.scores, key=lambda i: (-self.scores[i], i))

    def validate(self, pool: PoolState | None = None) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        vals = np.array(list(self.scores.values()))
        if vals.size and not np.all(np.isfinite(vals)):
            raise ValueError("non-finite score")
        if pool is not None and set(self.scores) != set(pool.unlabeled):
            raise ValueError("score table does not cover the unlabeled pool")


def _seed_list(seed: SeedLike) -> list[int]:
    if isinstance(seed, (int, np.integer)):
        return [int(seed)]
    return [int(s) for s in seed]


def prediction_entropy(probs: np.ndarray):
    """Shannon entropy of each probability row, in nats. Zero entries
    contribute zero (p log p -> 0)."""
    P = np.atleast_2d(np.asarray(probs, dtype=float))
    ent = -(P * np.log(np.maximum(P, PROB_FLOOR))).sum(axis=-1)
    return float(ent[0]) if np.ndim(probs) == 1 else ent


def inconsistency_from_probs(prob_stack: np.ndarray) -> float:
    """Sum over classes of the population variance across the rows of a
    (n_preds, n_classes) probability stack."""
    return float(np.var(prob_stack, axis=0, ddof=0).sum())


def score_entropy(params: ModelParams, ds: Dataset, unlabeled: Sequence[int]) -> ScoreTable:
    if len(unlabeled) == 0:
        raise ValueError("unlabeled pool is empty")
    probs = model.predict_probs(params, ds.features[list(unlabeled)])
    ent = prediction_entropy(probs)
    return ScoreTable({int(i): float(e) for i, e in zip(unlabeled, ent)}, "entropy")


def sample_inconsistency(params: ModelParams, x: np.ndarray, spec: AugmentationSpec,
                         rng: np.random.Generator) -> float:
    """Inconsistency of one sample: draw n_eval_augs augmentations and sum
    per-class population variances over the clean + augmented predictions."""
    augs = draw_augmentations(x, spec, spec.n_eval_augs, rng)
    stack = model.predict_probs(params, np.vstack([x[None, :], augs]))
    return inconsistency_from_probs(stack)


def score_consistency(params: ModelParams, ds: Dataset, unlabeled: Sequence[int],
                      spec: AugmentationSpec, seed: SeedLike) -> ScoreTable:
    """Inconsistency scores, one independent augmentation stream per sample
    (seeded by the global seed plus the sample index, so per-sample scores
    do not depend on pool order)."""
    if len(unlabeled) == 0:
        raise ValueError("unlabeled pool is empty")
    spec.validate()
    base = _seed_list(seed)
    scores = {}
    for idx in unlabeled:
        rng = np.random.default_rng(base + [int(idx)])
        scores[int(idx)] = sample_inconsistency(params, ds.features[idx], spec, rng)
    return ScoreTable(scores, "consistency", rng_seed=seed)


def select_topk(table: ScoreTable, k: int) -> list[int]:
    """The k best-scoring indices. The batch objective is a plain sum of
    per-sample scores, so this is the exact argmax over size-k subsets."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if k > len(table.scores):
        raise ValueError(f"k={k} exceeds pool size {len(table.scores)}")
    return table.ranking()[:k]


def farthest_first(points: np.ndarray, anchors: np.ndarray, k: int):
    """Greedy k-center: repeatedly take the point with the largest distance
    to the nearest anchor-or-already-picked point (ties -> lowest row).

    Returns (picked row ids, pick-time distances, n-point final min-dist).
    """
    m = len(points)
    if k > m:
        raise ValueError(f"k={k} exceeds candidate count {m}")
    if len(anchors) == 0:
        raise ValueError("farthest-first needs a nonempty anchor set")
    diff = points[:, None, :] - anchors[None, :, :]
    min_dist = np.sqrt((diff ** 2).sum(axis=2)).min(axis=1)
    picked: list[int] = []
    pick_dist: list[float] = []
    for _ in range(k):
        j = int(np.argmax(min_dist))
        picked.append(j)
        pick_dist.append(float(min_dist[j]))
        d_new = np.sqrt(((points - points[j]) ** 2).sum(axis=1))
        min_dist = np.minimum(min_dist, d_new)
        min_dist[j] = -np.inf  # never repick
    return picked, pick_dist, min_dist


def select_kcenter(params: ModelParams, ds: Dataset, pool: PoolState, k: int) -> list[int]:
    """k-center selection in the model's hidden-feature space with the
    labeled pool as the initial covered set."""
    if pool.n_labeled == 0:
        raise ValueError("k-center needs a nonempty labeled pool as anchors")
    if k > len(pool.unlabeled):
        raise ValueError(f"k={k} exceeds pool size {len(pool.unlabeled)}")
    emb_u = model.hidden_features(params, pool.unlabeled_features(ds))
    lab_idx = sorted(pool.labeled)
    emb_l = model.hidden_features(params, ds.features[lab_idx])
    picked, _, _ = farthest_first(emb_u, emb_l, k)
    return [int(pool.unlabeled[j]) for j in picked]


def score_kcenter(params: ModelParams, ds: Dataset, pool: PoolState) -> ScoreTable:
    """Rank the whole pool by greedy pick order, scored by the pick-time
    covering distance (non-increasing along the greedy order), so that
    select_topk reproduces select_kcenter exactly."""
    if pool.n_labeled == 0:
        raise ValueError("k-center needs a nonempty labeled pool as anchors")
    emb_u = model.hidden_features(params, pool.unlabeled_features(ds))
    lab_idx = sorted(pool.labeled)
    emb_l = model.hidden_features(params, ds.features[lab_idx])
    picked, dists, _ = farthest_first(emb_u, emb_l, len(pool.unlabeled))
    scores = {int(pool.unlabeled[j]): float(d) for j, d in zip(picked, dists)}
    return ScoreTable(scores, "kcenter")


def select_uniform(pool: PoolState, k: int, seed: SeedLike) -> list[int]:
    """Uniform sample without replacement from the unlabeled pool."""
    if k > len(pool.unlabeled):
        raise ValueError(f"k={k} exceeds pool size {len(pool.unlabeled)}")
    rng = np.random.default_rng(seed)
    return [int(i) for i in rng.choice(pool.unlabeled, size=k, replace=False)]


def score_uniform(pool: PoolState, seed: SeedLike) -> ScoreTable:
    """I.i.d. uniform scores: ranking by them is a uniformly random
    permutation, so top-k is a uniform k-subset."""
    rng = np.random.default_rng(seed)
    scores = {int(i): float(rng.random()) for i in pool.unlabeled}
    return ScoreTable(scores, "uniform", rng_seed=seed)


def rank_pool(strategy: str, params: ModelParams, ds: Dataset, pool: PoolState,
              aug_spec: AugmentationSpec, seed: SeedLike) -> ScoreTable:
    """Score the whole unlabeled pool under one strategy."""
    if strategy == "uniform":
        return score_uniform(pool, seed)
    if strategy == "entropy":
        return score_entropy(params, ds, pool.unlabeled)
    if strategy == "consistency":
        return score_consistency(params, ds, pool.unlabeled, aug_spec, seed)
    if strategy == "kcenter":
        return score_kcenter(params, ds, pool)
    raise ValueError(f"unknown strategy {strategy!r}")


def save_scores_csv(table: ScoreTable, path: str) -> None:
    order = table.ranking()
    with open(path, "w", newline="") as f:
        f.write("idx,score,rank\n")
        for rank, idx in enumerate(order, start=1):
            f.write(f"{idx},{fmt_float(table.scores[idx])},{rank}\n")
