"""Selection-quality analyses over a frozen model and a ranked pool.

These are the evaluation-side tools: they may read ground-truth labels
(they judge what a strategy picked), but they are strictly downstream of
selection; nothing here feeds back into scoring.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.stats import spearmanr

from . import model
from .data import Dataset, fmt_float
from .model import ModelParams
from .selection import ScoreTable, prediction_entropy

DEFAULT_THRESHOLDS = (0.6, 0.7, 0.8, 0.9, 0.95)


def _top_indices(ranked: ScoreTable, frac: float) -> list[int]:
    if not 0.0 < frac <= 1.0:
        raise ValueError("frac must be in (0, 1]")
    order = ranked.ranking()
    k = max(1, math.ceil(frac * len(order)))
    return order[:k]


def overconfident_miscount(params: ModelParams, ds: Dataset, ranked: ScoreTable,
                           frac: float, thresholds=DEFAULT_THRESHOLDS) -> dict[float, int]:
    """Among the top `frac` of the ranking, how many samples the model gets
    wrong while asserting a maximum probability above each threshold."""
    top = _top_indices(ranked, frac)
    probs = model.predict_probs(params, ds.features[top])
    pred = probs.argmax(axis=1)
    conf = probs.max(axis=1)
    wrong = pred != ds.true_labels[top]
    return {float(t): int(np.sum(wrong & (conf > t))) for t in thresholds}


def rank_group_entropy(params: ModelParams, ds: Dataset, ranked: ScoreTable,
                       n_groups: int = 100) -> list[float]:
    """Mean predictive entropy per contiguous rank group, best-ranked group
    first. Pools smaller than n_groups get one group per sample; otherwise
    the remainder is spread over the leading groups."""
    order = ranked.ranking()
    if not order:
        raise ValueError("empty ranking")
    ent = prediction_entropy(model.predict_probs(params, ds.features[order]))
    groups = np.array_split(ent, min(n_groups, len(order)))
    return [float(g.mean()) for g in groups]


def top_frac_diversity(params: ModelParams, ds: Dataset, ranked: ScoreTable,
                       frac: float) -> float:
    """Mean pairwise Euclidean distance between hidden-feature embeddings
    of the top `frac` ranked samples. Low values mean the strategy piles
    its picks into one region."""
    top = _top_indices(ranked, frac)
    if len(top) < 2:
        raise ValueError("top fraction must contain at least 2 samples")
    emb = model.hidden_features(params, ds.features[top])
    diff = emb[:, None, :] - emb[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    iu = np.triu_indices(len(top), k=1)
    return float(dist[iu].mean())


@dataclass
class ClassBalanceReport:
    class_hist: np.ndarray  # fraction of selected samples per class
    class_error: np.ndarray  # per-class test error rate
    rank_correlation: float  # Spearman; nan when degenerate
    degenerate: bool


def class_dist_vs_error(params: ModelParams, ds_test: Dataset, selected,
                        ds_train: Dataset) -> ClassBalanceReport:
    """Class distribution of a selected batch against per-class test error.
    A good strategy samples hard classes more often."""
    selected = list(selected)
    if not selected:
        raise ValueError("selected batch is empty")
    J = ds_train.n_classes
    sel_labels = ds_train.true_labels[selected]
    hist = np.bincount(sel_labels, minlength=J) / len(selected)
    pred = model.predict_probs(params, ds_test.features).argmax(axis=1)
    err = np.zeros(J)
    for c in range(J):
        members = ds_test.true_labels == c
        err[c] = float((pred[members] != c).mean()) if members.any() else np.nan
    degenerate = (np.isnan(err).any() or np.allclose(err, err[0])
                  or np.allclose(hist, hist[0]))
    if degenerate:
        corr = float("nan")
    else:
        res = spearmanr(hist, err)
        corr = float(getattr(res, "statistic", getattr(res, "correlation", res[0])))
    return ClassBalanceReport(hist, err, corr, degenerate)


@dataclass
class PCAResult:
    coords: np.ndarray  # (n, 2)
    components: np.ndarray  # (2, d) rows are principal directions
    variances: np.ndarray  # (2,) eigenvalues, non-increasing
    rank_deficient: bool


def _power_iteration(C: np.ndarray, rng: np.random.Generator,
                     tol: float = 1e-9, max_iter: int = 100000):
    """Dominant eigenpair of a PSD matrix by plain power iteration with a
    deterministic seeded start vector."""
    v = rng.normal(size=len(C))
    v /= np.linalg.norm(v)
    for _ in range(max_iter):
        w = C @ v
        norm = np.linalg.norm(w)
        if norm < 1e-300:
            return 0.0, v  # C annihilates v: treat as a zero eigenvalue
        w /= norm
        if np.linalg.norm(w - v) < tol:
            v = w
            break
        v = w
    lam = float(v @ C @ v)
    return lam, v


def _fix_sign(v: np.ndarray) -> np.ndarray:
    for entry in v:
        if abs(entry) > 1e-12:
            return v if entry > 0 else -v
    return v


def pca_project(features: np.ndarray, tol: float = 1e-9) -> PCAResult:
    """Project onto the top-2 principal directions of the centered data,
    computed by power iteration with deflation. Sign convention: the first
    nonzero loading of each component is positive. Rank-deficient inputs
    (fewer than 2 meaningful directions) get a zeroed second coordinate and
    a flag instead of an error."""
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2 or X.shape[1] < 2:
        raise ValueError("pca needs an (n >= 2) x (d >= 2) matrix")
    Xc = X - X.mean(axis=0)
    C = (Xc.T @ Xc) / len(Xc)
    rng = np.random.default_rng(0)
    lam1, v1 = _power_iteration(C, rng, tol)
    C2 = C - lam1 * np.outer(v1, v1)
    lam2, v2 = _power_iteration(C2, rng, tol)
    # deflation noise can leave a tiny negative or a stale component
    scale = max(lam1, 1.0)
    rank_deficient = lam2 <= tol * scale
    v1 = _fix_sign(v1)
    v2 = _fix_sign(v2)
    coords = np.column_stack([Xc @ v1, np.zeros(len(Xc)) if rank_deficient else Xc @ v2])
    if rank_deficient:
        lam2 = 0.0
    return PCAResult(coords=coords, components=np.vstack([v1, v2]),
                     variances=np.array([lam1, lam2]), rank_deficient=rank_deficient)


# ---------------------------------------------------------------------------
# boundary geometry (used by the cold-start demonstration)

def decision_boundary_points(params: ModelParams, bounds, resolution: int = 200) -> np.ndarray:
    """Approximate the 2-D decision boundary as the grid points where the
    predicted class flips between axis neighbors. bounds = (xmin, xmax,
    ymin, ymax)."""
    if params.input_dim != 2:
        raise ValueError("boundary extraction only works for 2-D inputs")
    xmin, xmax, ymin, ymax = bounds
    xs = np.linspace(xmin, xmax, resolution)
    ys = np.linspace(ymin, ymax, resolution)
    XX, YY = np.meshgrid(xs, ys)
    grid = np.column_stack([XX.ravel(), YY.ravel()])
    pred = model.predict_probs(params, grid).argmax(axis=1).reshape(resolution, resolution)
    flip = np.zeros_like(pred, dtype=bool)
    flip[:, :-1] |= pred[:, :-1] != pred[:, 1:]
    flip[:-1, :] |= pred[:-1, :] != pred[1:, :]
    pts = grid.reshape(resolution, resolution, 2)[flip]
    return pts


def distance_to_boundary(points: np.ndarray, boundary: np.ndarray) -> np.ndarray:
    """Euclidean distance from each point to its nearest boundary point.
    An empty boundary (constant prediction) gives +inf distances."""
    points = np.atleast_2d(points)
    if len(boundary) == 0:
        return np.full(len(points), np.inf)
    diff = points[:, None, :] - boundary[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=2)).min(axis=1)


# ---------------------------------------------------------------------------
# report emission

DIAGNOSTIC_FILES = ("overconfident.csv", "group_entropy.csv", "diversity.csv",
                    "class_distribution.csv", "pca.csv")


def write_reports(out_dir: str, params: ModelParams, ds: Dataset, ranked: ScoreTable,
                  frac: float = 0.01, thresholds=DEFAULT_THRESHOLDS,
                  ds_test: Dataset | None = None) -> dict:
    """Run every diagnostic and write one CSV per diagnostic plus an index
    JSON. Returns the index document."""
    os.makedirs(out_dir, exist_ok=True)
    top = _top_indices(ranked, frac)

    counts = overconfident_miscount(params, ds, ranked, frac, thresholds)
    with open(os.path.join(out_dir, "overconfident.csv"), "w", newline="") as f:
        f.write("threshold,count\n")
        for t in sorted(counts):
            f.write(f"{fmt_float(t)},{counts[t]}\n")

    means = rank_group_entropy(params, ds, ranked)
    with open(os.path.join(out_dir, "group_entropy.csv"), "w", newline="") as f:
        f.write("group,mean_entropy\n")
        for g, m in enumerate(means):
            f.write(f"{g},{fmt_float(m)}\n")

    div = top_frac_diversity(params, ds, ranked, frac) if len(top) >= 2 else float("nan")
    with open(os.path.join(out_dir, "diversity.csv"), "w", newline="") as f:
        f.write("frac,mean_pairwise_dist\n")
        f.write(f"{fmt_float(frac)},{fmt_float(div)}\n")

    balance = class_dist_vs_error(params, ds_test if ds_test is not None else ds, top, ds)
    with open(os.path.join(out_dir, "class_distribution.csv"), "w", newline="") as f:
        f.write("class,selected_fraction,test_error\n")
        for c in range(ds.n_classes):
            f.write(f"{c},{fmt_float(balance.class_hist[c])},"
                    f"{fmt_float(balance.class_error[c])}\n")

    emb = model.hidden_features(params, ds.features)
    pca = pca_project(emb)
    top_set = set(top)
    with open(os.path.join(out_dir, "pca.csv"), "w", newline="") as f:
        f.write("x,y,true_class,selected\n")
        for i in range(ds.n):
            f.write(f"{fmt_float(pca.coords[i, 0])},{fmt_float(pca.coords[i, 1])},"
                    f"{int(ds.true_labels[i])},{1 if i in top_set else 0}\n")

    index = {
        "files": list(DIAGNOSTIC_FILES),
        "strategy": ranked.strategy,
        "top_frac": frac,
        "n_top": len(top),
        "rank_correlation": balance.rank_correlation,
        "class_balance_degenerate": balance.degenerate,
        "pca_rank_deficient": pca.rank_deficient,
        "pca_variances": [float(v) for v in pca.variances],
    }
    with open(os.path.join(out_dir, "index.json"), "w", newline="") as f:
        json.dump(index, f, indent=1, allow_nan=True)
        f.write("\n")
    return index
