"""Inspect what a selection strategy is actually picking.

Trains a model from a deliberately small start set, ranks the unlabeled pool
with the chosen strategy, and writes the full diagnostic bundle (overconfident
miscounts, rank-group entropies, top-fraction diversity, class balance vs
error, 2-D projection with the would-be picks flagged). Prints the headline
numbers so the CSVs are optional reading.

    python3 scripts/diagnostics_demo.py --strategy entropy --start-size 4
"""

import argparse

from alforge import data, diagnostics, selection
from alforge.data import AugmentationSpec, init_start_set
from alforge.loop import ALConfig, accuracy, train_cycle
from alforge.model import LossSpec


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--strategy", default="entropy",
                    choices=list(selection.STRATEGIES))
    ap.add_argument("--n-train", type=int, default=500)
    ap.add_argument("--noise", type=float, default=0.1)
    ap.add_argument("--data-seed", type=int, default=7)
    ap.add_argument("--start-size", type=int, default=4)
    ap.add_argument("--batch", type=int, default=10)
    ap.add_argument("--epochs", type=int, default=600)
    ap.add_argument("--lr", type=float, default=0.2)
    ap.add_argument("--unsup-weight", type=float, default=0.0)
    ap.add_argument("--sigma", type=float, default=0.2)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/diagnostics")
    args = ap.parse_args()

    ds = data.gen_two_moons(args.n_train, args.noise, [args.data_seed, 10])
    ds_test = data.gen_two_moons(args.n_train, args.noise,
                                 [args.data_seed, 11], split="test")
    cfg = ALConfig(start_size=args.start_size, batch_per_cycle=args.batch,
                   epochs_per_cycle=args.epochs, sgd_batch=64, lr=args.lr,
                   seed=args.seed, strategy=args.strategy,
                   loss=LossSpec(unsup_weight=args.unsup_weight),
                   augmentation=AugmentationSpec(sigma=args.sigma))

    pool = init_start_set(ds, args.start_size, balanced=True,
                          seed=[args.seed, 0])
    params = train_cycle(None, pool, ds, cfg)
    table = selection.rank_pool(args.strategy, params, ds, pool,
                                cfg.augmentation, [args.seed, 4, 0])
    batch = selection.select_topk(table, args.batch)

    frac = 0.05
    index = diagnostics.write_reports(args.out, params, ds, table,
                                      frac=frac, ds_test=ds_test)

    print(f"strategy={args.strategy} start_size={args.start_size} "
          f"test acc={accuracy(params, ds_test):.4f}")
    miscounts = diagnostics.overconfident_miscount(params, ds, table, frac)
    print(f"overconfident misclassifications in the top 5%: {miscounts}")
    spread = diagnostics.top_frac_diversity(params, ds, table, frac)
    print(f"top-5% pairwise hidden-feature spread: {spread:.3f}")
    report = diagnostics.class_dist_vs_error(params, ds_test, batch, ds)
    corr = ("n/a (degenerate)" if report.degenerate
            else f"{report.rank_correlation:.3f}")
    print(f"rank corr(picked-class share, per-class test error): {corr}")
    print(f"\nreports written to {args.out}: {', '.join(index['files'])}")


if __name__ == "__main__":
    main()
