"""Synthetic datasets, augmentation operators, the labeling oracle, and
labeled/unlabeled pool bookkeeping.

Generators are deterministic per seed. Train/test splits are made by
calling a generator twice with different derived seeds; since the draws
are continuous, the splits are disjoint with probability one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import SeedLike

GRID_TEMPLATE_NAMES = (
    "h_stripes", "v_stripes", "checker", "frame",
    "plus", "diag_x", "disk", "half",
)


def fmt_float(v: float) -> str:
    """Full-precision float formatting used by every CSV writer."""
    return "%.17g" % v


@dataclass
class Dataset:
    """Feature matrix with hidden ground-truth labels. `true_labels` is
    only ever read through oracle_label or by analysis code."""

    features: np.ndarray  # (n, input_dim) float64
    true_labels: np.ndarray  # (n,) int
    n_classes: int
    split: str = "train"  # train | test
    name: str = "unnamed"

    @property
    def n(self) -> int:
        return len(self.features)

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    def validate(self) -> None:
        if self.n == 0:
            raise ValueError("dataset is empty")
        if self.split not in ("train", "test"):
            raise ValueError(f"bad split {self.split!r}")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("non-finite features")
        if self.true_labels.min() < 0 or self.true_labels.max() >= self.n_classes:
            raise ValueError("label outside [0, n_classes)")
        if len(self.true_labels) != self.n:
            raise ValueError("label count mismatch")


@dataclass
class PoolState:
    """Partition of the train indices into revealed-label and unlabeled
    sets. `labeled` preserves insertion order; `unlabeled` keeps ascending
    dataset order so tie-breaking downstream is reproducible."""

    labeled: dict[int, int]
    unlabeled: list[int]
    cycle: int = 0

    @property
    def n_labeled(self) -> int:
        return len(self.labeled)

    def labeled_arrays(self, ds: Dataset) -> tuple[np.ndarray, np.ndarray]:
        """(X, y) for the labeled set in ascending index order."""
        idx = sorted(self.labeled)
        X = ds.features[idx]
        y = np.array([self.labeled[i] for i in idx], dtype=int)
        return X, y

    def unlabeled_features(self, ds: Dataset) -> np.ndarray:
        return ds.features[self.unlabeled]

    def check_partition(self, n: int) -> None:
        lab = set(self.labeled)
        unl = set(self.unlabeled)
        if lab & unl:
            raise ValueError("labeled and unlabeled sets overlap")
        if lab | unl != set(range(n)):
            raise ValueError("pool does not cover the train set")
        if len(self.unlabeled) != len(unl):
            raise ValueError("duplicate unlabeled index")


@dataclass
class AugmentationSpec:
    """How augmented copies x~ are drawn, both for the consistency loss
    and for the selection metric (which uses n_eval_augs of them)."""

    kind: str = "gaussian_jitter"  # gaussian_jitter | shift_flip
    sigma: float = 0.3
    max_shift: int = 1
    n_eval_augs: int = 10

    def validate(self) -> None:
        if self.kind not in ("gaussian_jitter", "shift_flip"):
            raise ValueError(f"unknown augmentation {self.kind!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.max_shift < 0:
            raise ValueError("max_shift must be >= 0")
        if self.n_eval_augs < 1:
            raise ValueError("n_eval_augs must be >= 1")


# ---------------------------------------------------------------------------
# generators

def _two_moons_raw(n: int, noise_sigma: float, rng: np.random.Generator):
    """Raw interleaving half-circles before standardization. Class 0 sits
    on the upper unit arc centered at (0,0); class 1 on the lower arc
    centered at (1, 0.5). Angles are drawn uniformly, not gridded, so two
    different seeds almost surely share no point."""
    half = n // 2
    t0 = rng.uniform(0.0, np.pi, half)
    t1 = rng.uniform(0.0, np.pi, n - half)
    x0 = np.column_stack([np.cos(t0), np.sin(t0)])
    x1 = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    X = np.vstack([x0, x1])
    if noise_sigma > 0:
        X = X + rng.normal(0.0, noise_sigma, X.shape)
    y = np.concatenate([np.zeros(half, dtype=int), np.ones(n - half, dtype=int)])
    return X, y


def gen_two_moons(n: int, noise_sigma: float = 0.1, seed: SeedLike = 0,
                  split: str = "train") -> Dataset:
    """Two interleaving half-circles, standardized per dimension."""
    if n < 2:
        raise ValueError("two moons needs n >= 2")
    if n % 2 != 0:
        raise ValueError("n must be even (balanced classes)")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    rng = np.random.default_rng(seed)
    X, y = _two_moons_raw(n, noise_sigma, rng)
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    return Dataset(X, y, 2, split=split, name="two_moons")


def _balanced_counts(n: int, n_classes: int) -> np.ndarray:
    counts = np.full(n_classes, n // n_classes)
    counts[: n % n_classes] += 1
    return counts


def gen_blobs(n: int, n_classes: int = 3, centers_seed: SeedLike = 0,
              spread: float = 0.5, seed: SeedLike = 0, split: str = "train") -> Dataset:
    """Isotropic Gaussian clusters in 2-D with (near-)equal class counts.

    Cluster centers depend only on centers_seed, so train and test splits
    share geometry while drawing disjoint samples from `seed`.
    """
    if n_classes < 2:
        raise ValueError("need at least two classes")
    if n < n_classes:
        raise ValueError("need at least one sample per class")
    if spread < 0:
        raise ValueError("spread must be >= 0")
    centers = np.random.default_rng(centers_seed).uniform(-4.0, 4.0, (n_classes, 2))
    rng = np.random.default_rng(seed)
    counts = _balanced_counts(n, n_classes)
    X = np.vstack([centers[c] + rng.normal(0.0, 1.0, (counts[c], 2)) * spread
                   for c in range(n_classes)])
    y = np.concatenate([np.full(counts[c], c, dtype=int) for c in range(n_classes)])
    return Dataset(X, y, n_classes, split=split, name="blobs")


def grid_template(name: str, grid_dim: int) -> np.ndarray:
    """A binary grid_dim x grid_dim pattern, flattened."""
    g = grid_dim
    r, c = np.indices((g, g))
    if name == "h_stripes":
        t = (r % 2 == 0)
    elif name == "v_stripes":
        t = (c % 2 == 0)
    elif name == "checker":
        t = ((r + c) % 2 == 0)
    elif name == "frame":
        t = (r == 0) | (r == g - 1) | (c == 0) | (c == g - 1)
    elif name == "plus":
        mid = g // 2
        t = (r == mid) | (c == mid)
    elif name == "diag_x":
        t = (r == c) | (r + c == g - 1)
    elif name == "disk":
        ctr = (g - 1) / 2.0
        t = (r - ctr) ** 2 + (c - ctr) ** 2 <= (g / 3.0) ** 2
    elif name == "half":
        t = r < g // 2
    else:
        raise ValueError(f"unknown template {name!r}")
    return t.astype(float).ravel()


def gen_grid_patterns(n: int, n_classes: int = 4, grid_dim: int = 5,
                      noise: float = 0.1, seed: SeedLike = 0,
                      split: str = "train") -> Dataset:
    """Image-like data: each class is a fixed binary template plus i.i.d.
    Gaussian pixel noise. Gives shift/flip augmentation something to act on."""
    if grid_dim < 4:
        raise ValueError("grid_dim must be >= 4")
    if not 1 <= n_classes <= len(GRID_TEMPLATE_NAMES):
        raise ValueError(f"n_classes must be in [1, {len(GRID_TEMPLATE_NAMES)}]")
    if n < n_classes:
        raise ValueError("need at least one sample per class")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    templates = [grid_template(GRID_TEMPLATE_NAMES[c], grid_dim)
                 for c in range(n_classes)]
    rng = np.random.default_rng(seed)
    counts = _balanced_counts(n, n_classes)
    rows, labels = [], []
    for c in range(n_classes):
        block = np.tile(templates[c], (counts[c], 1))
        if noise > 0:
            block = block + rng.normal(0.0, noise, block.shape)
        rows.append(block)
        labels.append(np.full(counts[c], c, dtype=int))
    return Dataset(np.vstack(rows), np.concatenate(labels), n_classes,
                   split=split, name="grid_patterns")


# ---------------------------------------------------------------------------
# augmentation

def shift_flip_grid(x: np.ndarray, dx: int, dy: int, flip: bool) -> np.ndarray:
    """Pure shift-and-flip on a flattened square grid: translate by
    (dy rows, dx cols) with zero padding, then optionally mirror columns."""
    g = int(round(np.sqrt(len(x))))
    if g * g != len(x):
        raise ValueError("shift_flip needs a flattened square grid")
    img = np.asarray(x, dtype=float).reshape(g, g)
    out = np.zeros_like(img)
    src_r = slice(max(0, -dy), g - max(0, dy))
    dst_r = slice(max(0, dy), g - max(0, -dy))
    src_c = slice(max(0, -dx), g - max(0, dx))
    dst_c = slice(max(0, dx), g - max(0, -dx))
    out[dst_r, dst_c] = img[src_r, src_c]
    if flip:
        out = out[:, ::-1]
    return out.ravel()


def augment(x: np.ndarray, spec: AugmentationSpec, rng: np.random.Generator) -> np.ndarray:
    """One augmented copy of x. Consumes rng state deterministically."""
    x = np.asarray(x, dtype=float)
    if spec.kind == "gaussian_jitter":
        return x + rng.normal(0.0, spec.sigma, x.shape)
    if spec.kind == "shift_flip":
        s = spec.max_shift
        dx, dy = (int(v) for v in rng.integers(-s, s + 1, 2))
        flip = bool(rng.integers(0, 2))
        return shift_flip_grid(x, dx, dy, flip)
    raise ValueError(f"unknown augmentation {spec.kind!r}")


def draw_augmentations(x: np.ndarray, spec: AugmentationSpec, n: int,
                       rng: np.random.Generator) -> np.ndarray:
    """(n, input_dim) stack of independent augmentations of x."""
    return np.stack([augment(x, spec, rng) for _ in range(n)])


# ---------------------------------------------------------------------------
# oracle and pool bookkeeping

def oracle_label(ds: Dataset, idx: int) -> int:
    """The annotator stand-in: reveal the ground-truth label of one sample."""
    if not 0 <= idx < ds.n:
        raise IndexError(f"sample index {idx} outside [0, {ds.n})")
    return int(ds.true_labels[idx])


def init_start_set(ds: Dataset, start_size: int, balanced: bool = True,
                   seed: SeedLike = 0) -> PoolState:
    """Draw the initial labeled set uniformly (optionally with exactly
    start_size / n_classes samples per class) and label it via the oracle."""
    if not 1 <= start_size <= ds.n:
        raise ValueError("start_size must be in [1, n]")
    rng = np.random.default_rng(seed)
    if balanced:
        if start_size % ds.n_classes != 0:
            raise ValueError("balanced start needs start_size divisible by n_classes")
        per = start_size // ds.n_classes
        chosen: list[int] = []
        for c in range(ds.n_classes):
            members = np.flatnonzero(ds.true_labels == c)
            if len(members) < per:
                raise ValueError(f"class {c} has fewer than {per} samples")
            chosen.extend(int(i) for i in rng.choice(members, per, replace=False))
    else:
        chosen = [int(i) for i in rng.choice(ds.n, start_size, replace=False)]
    chosen_set = set(chosen)
    labeled = {i: oracle_label(ds, i) for i in sorted(chosen)}
    unlabeled = [i for i in range(ds.n) if i not in chosen_set]
    return PoolState(labeled=labeled, unlabeled=unlabeled, cycle=0)


def apply_selection(pool: PoolState, batch: Sequence[int], ds: Dataset) -> PoolState:
    """Move `batch` from unlabeled to labeled (labels revealed by the
    oracle) and advance the cycle counter. Returns a new PoolState."""
    batch = [int(b) for b in batch]
    unl = set(pool.unlabeled)
    if len(set(batch)) != len(batch):
        raise ValueError("selection batch contains duplicates")
    for b in batch:
        if b not in unl:
            raise ValueError(f"index {b} is not in the unlabeled pool")
    labeled = dict(pool.labeled)
    for b in batch:
        labeled[b] = oracle_label(ds, b)
    batch_set = set(batch)
    unlabeled = [i for i in pool.unlabeled if i not in batch_set]
    return PoolState(labeled=labeled, unlabeled=unlabeled, cycle=pool.cycle + 1)


# ---------------------------------------------------------------------------
# serialization

def save_dataset_csv(ds: Dataset, path: str) -> None:
    cols = [f"f{j}" for j in range(ds.input_dim)] + ["label"]
    with open(path, "w", newline="") as f:
        f.write(",".join(cols) + "\n")
        for i in range(ds.n):
            vals = [fmt_float(v) for v in ds.features[i]]
            f.write(",".join(vals + [str(int(ds.true_labels[i]))]) + "\n")


def load_dataset_csv(path: str, n_classes: int | None = None,
                     split: str = "train", name: str = "loaded") -> Dataset:
    with open(path) as f:
        header = f.readline().strip().split(",")
        if header[-1] != "label" or not all(h == f"f{j}" for j, h in enumerate(header[:-1])):
            raise ValueError(f"unexpected dataset header {header}")
        rows = [line.strip().split(",") for line in f if line.strip()]
    X = np.array([[float(v) for v in r[:-1]] for r in rows])
    y = np.array([int(r[-1]) for r in rows], dtype=int)
    if n_classes is None:
        n_classes = int(y.max()) + 1
    ds = Dataset(X, y, n_classes, split=split, name=name)
    ds.validate()
    return ds


def save_pool_json(pool: PoolState, path: str) -> None:
    doc = {
        "cycle": pool.cycle,
        "labeled": [{"idx": int(i), "label": int(l)} for i, l in pool.labeled.items()],
        "unlabeled": [int(i) for i in pool.unlabeled],
    }
    with open(path, "w", newline="") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


def load_pool_json(path: str) -> PoolState:
    with open(path) as f:
        doc = json.load(f)
    labeled = {int(e["idx"]): int(e["label"]) for e in doc["labeled"]}
    return PoolState(labeled=labeled, unlabeled=[int(i) for i in doc["unlabeled"]],
                     cycle=int(doc["cycle"]))
