"""The pool-based active learning loop.

Each cycle trains the classifier semi-supervised on the current pools
(warm-started from the previous cycle by default), logs evaluation-only
quantities (test accuracy, full-train-set target loss, the label-free
cross-entropy measure), selects the next batch with the configured
acquisition strategy, reveals its labels through the oracle, and updates
the pools. After the last selection the model is trained once more.

Seeding layout (all numpy SeedSequence lists, so streams never collide):
  [seed, 0]        start-set draw
  [seed, 3]        parameter init
  [seed, t, 0]     supervised shuffling in cycle t
  [seed, t, 1]     unlabeled sampling + training augmentations in cycle t
  [seed, 4, t]     selection randomness after cycle t (per-sample streams
                   append the sample index)
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import coldstart, model
from .data import (AugmentationSpec, Dataset, PoolState, apply_selection,
                   draw_augmentations, fmt_float, init_start_set)
from .model import LossSpec, ModelParams
from .selection import STRATEGIES, rank_pool, select_topk


@dataclass
class ALConfig:
    """Everything that determines a run, including the seed."""

    start_size: int = 10
    batch_per_cycle: int = 10
    n_cycles: int = 4
    doubling: bool = False
    epochs_per_cycle: int = 200
    sgd_batch: int = 16
    lr: float = 0.5
    momentum: float = 0.9
    seed: int = 0
    strategy: str = "consistency"
    warm_start: bool = True
    balanced_start: bool = True
    hidden_dim: int = 32
    activation: str = "tanh"
    init_scale: float = 0.3
    loss: LossSpec = field(default_factory=LossSpec)
    augmentation: AugmentationSpec = field(default_factory=AugmentationSpec)

    def batch_size_at(self, t: int) -> int:
        """Size of the batch acquired after cycle t (0-based). With the
        doubling schedule the sizes go K, 2K, 4K, ..."""
        return self.batch_per_cycle * (2 ** t if self.doubling else 1)

    def total_budget(self) -> int:
        return self.start_size + sum(self.batch_size_at(t) for t in range(self.n_cycles))

    def violations(self, n_train: int | None = None) -> list[str]:
        """All config problems at once (the CLI reports the full list)."""
        out = []
        if self.start_size < 1:
            out.append("start_size must be >= 1")
        if self.batch_per_cycle < 1:
            out.append("batch_per_cycle must be >= 1")
        if self.n_cycles < 0:
            out.append("n_cycles must be >= 0")
        if self.epochs_per_cycle < 0:
            out.append("epochs_per_cycle must be >= 0")
        if self.sgd_batch < 1:
            out.append("sgd_batch must be >= 1")
        if self.lr <= 0:
            out.append("lr must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            out.append("momentum must be in [0, 1)")
        if self.strategy not in STRATEGIES:
            out.append(f"strategy must be one of {STRATEGIES}")
        if self.hidden_dim < 1:
            out.append("hidden_dim must be >= 1")
        if self.activation not in model.ACTIVATIONS:
            out.append(f"activation must be one of {model.ACTIVATIONS}")
        if self.init_scale < 0:
            out.append("init_scale must be >= 0")
        try:
            self.loss.validate()
        except ValueError as e:
            out.append(str(e))
        try:
            self.augmentation.validate()
        except ValueError as e:
            out.append(str(e))
        if n_train is not None:
            if self.start_size > n_train:
                out.append(f"start_size {self.start_size} exceeds pool size {n_train}")
            if self.total_budget() > n_train:
                out.append(f"label budget {self.total_budget()} exceeds pool size {n_train}")
        return out


@dataclass
class CycleRecord:
    """Per-cycle log line. `selected` is the batch whose labels formed this
    cycle's labeled set (the start set for cycle 0), so records at cycle 0
    are identical across strategies."""

    cycle: int
    labeled_count: int
    test_accuracy: float
    target_loss: float
    measure_H: float
    selected: list[int]
    wallclock_ms: float = 0.0


@dataclass
class RunResult:
    records: list[CycleRecord]
    final_params: ModelParams
    final_pool: PoolState
    truncated: bool


def _init_params(ds: Dataset, config: ALConfig) -> ModelParams:
    return model.init_params([config.seed, 3], ds.input_dim, config.hidden_dim,
                             ds.n_classes, config.init_scale, config.activation)


def train_cycle(params: ModelParams | None, pool: PoolState, ds: Dataset,
                config: ALConfig) -> ModelParams:
    """One training stage: epochs_per_cycle epochs of momentum SGD on the
    supervised loss plus the weighted consistency loss.

    Supervised minibatches sweep a fresh shuffle of the labeled set each
    epoch; each step also draws one unlabeled batch (with replacement) and
    fresh augmentations for the consistency term. With warm_start the
    incoming params are the starting point, otherwise (or when params is
    None) training restarts from the seeded init. When unsup_weight is 0
    the unlabeled stream is never touched, so the trajectory is
    bit-identical to a purely supervised run.
    """
    if pool.n_labeled == 0:
        raise ValueError("cannot train with an empty labeled pool")
    if not config.warm_start or params is None:
        params = _init_params(ds, config)
    if config.epochs_per_cycle == 0:
        return params
    X_lab, y_lab = pool.labeled_arrays(ds)
    unl = np.array(pool.unlabeled, dtype=int)
    rng_sup = np.random.default_rng([config.seed, pool.cycle, 0])
    rng_unsup = np.random.default_rng([config.seed, pool.cycle, 1])
    spec = config.loss
    use_unsup = spec.unsup_weight > 0 and len(unl) > 0
    velocity = None
    for _ in range(config.epochs_per_cycle):
        order = rng_sup.permutation(len(X_lab))
        for lo in range(0, len(order), config.sgd_batch):
            sel = order[lo:lo + config.sgd_batch]
            if use_unsup:
                u_sel = rng_unsup.choice(len(unl), size=config.sgd_batch, replace=True)
                ux = ds.features[unl[u_sel]]
                aug = np.stack([
                    draw_augmentations(x, config.augmentation, spec.n_train_augs, rng_unsup)
                    for x in ux])
                _, grad = model.total_loss_and_grad(params, X_lab[sel], y_lab[sel],
                                                    ux, aug, spec)
            else:
                _, grad = model.total_loss_and_grad(params, X_lab[sel], y_lab[sel],
                                                    None, None, spec)
            params, velocity = model.sgd_step(params, grad, config.lr,
                                              config.momentum, velocity)
    return params


def accuracy(params: ModelParams, ds: Dataset) -> float:
    probs = model.predict_probs(params, ds.features)
    return float((probs.argmax(axis=1) == ds.true_labels).mean())


def _evaluate(params: ModelParams, pool: PoolState, ds_train: Dataset,
              ds_test: Dataset, selected: list[int], ms: float) -> CycleRecord:
    prior = np.full(ds_train.n_classes, 1.0 / ds_train.n_classes)
    marginal = coldstart.pred_marginal(params, ds_train)
    return CycleRecord(
        cycle=pool.cycle,
        labeled_count=pool.n_labeled,
        test_accuracy=accuracy(params, ds_test),
        target_loss=coldstart.al_target_loss(params, ds_train),
        measure_H=coldstart.measure_cross_entropy(prior, marginal),
        selected=list(selected),
        wallclock_ms=ms,
    )


def run_al(ds_train: Dataset, ds_test: Dataset, config: ALConfig) -> RunResult:
    """The full loop: start set, n_cycles train/select/label rounds, and a
    final training pass. Returns one record per training stage (so
    n_cycles+1 records unless the pool ran out, which sets `truncated`)."""
    problems = config.violations()
    if config.start_size > ds_train.n:
        problems.append(f"start_size {config.start_size} exceeds pool size {ds_train.n}")
    if problems:
        raise ValueError("; ".join(problems))
    if config.balanced_start and config.start_size % ds_train.n_classes != 0:
        raise ValueError("balanced start needs start_size divisible by n_classes")

    pool = init_start_set(ds_train, config.start_size, config.balanced_start,
                          seed=[config.seed, 0])
    params: ModelParams | None = None
    selected = sorted(pool.labeled)
    records: list[CycleRecord] = []
    truncated = False
    for t in range(config.n_cycles + 1):
        t0 = time.perf_counter()
        params = train_cycle(params, pool, ds_train, config)
        ms = (time.perf_counter() - t0) * 1e3
        records.append(_evaluate(params, pool, ds_train, ds_test, selected, ms))
        if t == config.n_cycles:
            break
        k_t = config.batch_size_at(t)
        if k_t > len(pool.unlabeled):
            truncated = True
            break
        table = rank_pool(config.strategy, params, ds_train, pool,
                          config.augmentation, [config.seed, 4, t])
        batch = select_topk(table, k_t)
        pool = apply_selection(pool, batch, ds_train)
        selected = batch
    return RunResult(records, params, pool, truncated)


def _trial_worker(payload) -> RunResult:
    ds_train, ds_test, config = payload
    return run_al(ds_train, ds_test, config)


def run_trials(ds_train: Dataset, ds_test: Dataset, config: ALConfig,
               n_trials: int) -> list[RunResult]:
    """Independent repetitions with seeds seed, seed+1, ... Parallelism is
    capped by the ALFORGE_THREADS env var (default 1, serial); results are
    ordered by trial either way."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    configs = [replace(config, seed=config.seed + i) for i in range(n_trials)]
    threads = int(os.environ.get("ALFORGE_THREADS", "1") or "1")
    if threads > 1 and n_trials > 1:
        with ProcessPoolExecutor(max_workers=min(threads, n_trials)) as ex:
            return list(ex.map(_trial_worker, [(ds_train, ds_test, c) for c in configs]))
    return [run_al(ds_train, ds_test, c) for c in configs]


def aggregate_curves(results: list[RunResult]) -> dict:
    """Mean/std curves by cycle over trials (population std, so a single
    trial reports zero spread). Truncated trials are cut to the shortest
    common length."""
    n_cycles = min(len(r.records) for r in results)
    out = {"cycle": [], "labeled": [], "acc_mean": [], "acc_std": [],
           "target_loss_mean": [], "target_loss_std": [],
           "measure_H_mean": [], "measure_H_std": []}
    for t in range(n_cycles):
        recs = [r.records[t] for r in results]
        acc = np.array([r.test_accuracy for r in recs])
        tl = np.array([r.target_loss for r in recs])
        mh = np.array([r.measure_H for r in recs])
        out["cycle"].append(recs[0].cycle)
        out["labeled"].append(recs[0].labeled_count)
        out["acc_mean"].append(float(acc.mean()))
        out["acc_std"].append(float(acc.std()))
        out["target_loss_mean"].append(float(tl.mean()))
        out["target_loss_std"].append(float(tl.std()))
        out["measure_H_mean"].append(float(mh.mean()))
        out["measure_H_std"].append(float(mh.std()))
    return out


def save_records_csv(results: list[RunResult], path: str) -> None:
    """Per-cycle records for every trial. The ms column is pinned to 0 so
    that reruns of the same config are byte-identical; real wall time lives
    in the run summary JSON."""
    with open(path, "w", newline="") as f:
        f.write("trial,cycle,labeled,acc,target_loss,measure_H,ms\n")
        for trial, res in enumerate(results):
            for r in res.records:
                f.write(",".join([
                    str(trial), str(r.cycle), str(r.labeled_count),
                    fmt_float(r.test_accuracy), fmt_float(r.target_loss),
                    fmt_float(r.measure_H), "0",
                ]) + "\n")
