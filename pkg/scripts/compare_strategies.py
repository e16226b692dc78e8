"""Compare all selection strategies on one synthetic benchmark.

Runs paired trials (shared seeds, so every strategy sees the same start set
and the same data) and prints the mean accuracy curve per strategy, plus a
final-cycle ranking. Curves land in <out>/curve_<strategy>.csv.

Typical invocation:

    python3 scripts/compare_strategies.py --dataset two_moons --trials 10 \
        --cycles 4 --unsup-weight 0.3 --out runs/compare
"""

import argparse
import csv
import os

from alforge import data
from alforge.data import AugmentationSpec
from alforge.loop import ALConfig, aggregate_curves, run_trials
from alforge.model import LossSpec
from alforge.selection import STRATEGIES


def build_datasets(kind: str, n_train: int, n_test: int, noise: float,
                   data_seed: int):
    if kind == "two_moons":
        return (data.gen_two_moons(n_train, noise, [data_seed, 10]),
                data.gen_two_moons(n_test, noise, [data_seed, 11], split="test"))
    if kind == "blobs":
        return (data.gen_blobs(n_train, 3, 1, noise, [data_seed, 10]),
                data.gen_blobs(n_test, 3, 1, noise, [data_seed, 11], split="test"))
    if kind == "grid_patterns":
        return (data.gen_grid_patterns(n_train, 4, 5, noise, [data_seed, 10]),
                data.gen_grid_patterns(n_test, 4, 5, noise, [data_seed, 11],
                                       split="test"))
    raise SystemExit(f"unknown dataset {kind!r}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dataset", default="two_moons",
                    choices=["two_moons", "blobs", "grid_patterns"])
    ap.add_argument("--n-train", type=int, default=500)
    ap.add_argument("--n-test", type=int, default=500)
    ap.add_argument("--noise", type=float, default=0.15)
    ap.add_argument("--data-seed", type=int, default=7)
    ap.add_argument("--start-size", type=int, default=10)
    ap.add_argument("--batch", type=int, default=10)
    ap.add_argument("--cycles", type=int, default=4)
    ap.add_argument("--epochs", type=int, default=600)
    ap.add_argument("--lr", type=float, default=0.2)
    ap.add_argument("--unsup-weight", type=float, default=0.3)
    ap.add_argument("--sigma", type=float, default=0.2)
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--seed", type=int, default=300)
    ap.add_argument("--balanced", action=argparse.BooleanOptionalAction,
                    default=True)
    ap.add_argument("--out", default="runs/compare")
    args = ap.parse_args()

    ds_train, ds_test = build_datasets(args.dataset, args.n_train,
                                       args.n_test, args.noise, args.data_seed)
    aug_kind = "shift_flip" if args.dataset == "grid_patterns" else "gaussian_jitter"
    os.makedirs(args.out, exist_ok=True)

    finals = {}
    for strategy in STRATEGIES:
        cfg = ALConfig(start_size=args.start_size, batch_per_cycle=args.batch,
                       n_cycles=args.cycles, epochs_per_cycle=args.epochs,
                       sgd_batch=64, lr=args.lr, seed=args.seed,
                       strategy=strategy, balanced_start=args.balanced,
                       loss=LossSpec(unsup_weight=args.unsup_weight),
                       augmentation=AugmentationSpec(kind=aug_kind,
                                                     sigma=args.sigma))
        results = run_trials(ds_train, ds_test, cfg, args.trials)
        curve = aggregate_curves(results)
        finals[strategy] = (curve["acc_mean"][-1], curve["acc_std"][-1])

        path = os.path.join(args.out, f"curve_{strategy}.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["cycle", "labeled", "acc_mean", "acc_std",
                        "target_loss_mean", "measure_H_mean"])
            for i in range(len(curve["cycle"])):
                w.writerow([curve["cycle"][i], curve["labeled"][i],
                            f"{curve['acc_mean'][i]:.6f}",
                            f"{curve['acc_std'][i]:.6f}",
                            f"{curve['target_loss_mean'][i]:.6f}",
                            f"{curve['measure_H_mean'][i]:.6f}"])

        steps = " ".join(f"{a:.3f}" for a in curve["acc_mean"])
        print(f"{strategy:>12}  acc by cycle: {steps}")

    print()
    ranked = sorted(finals.items(), key=lambda kv: -kv[1][0])
    for strategy, (mean, std) in ranked:
        print(f"{strategy:>12}  final acc {mean:.4f} +- {std:.4f} "
              f"({args.trials} trials)")
    print(f"\ncurves written to {args.out}/curve_<strategy>.csv")


if __name__ == "__main__":
    main()
