"""Pick a start-set size without looking at any labels.

Sweeps nested balanced start sets of increasing size, trains one model per
size, and tracks the label-free measure H[prior, predicted marginal] next to
the (normally unobservable) full-train-set cross-entropy. The measure is
what you can compute in practice; the sweep shows how tightly it follows the
real loss, and the plateau rule turns it into a size recommendation.

    python3 scripts/coldstart_sweep.py --sizes 4 10 20 40 100 --seeds 5
"""

import argparse

import numpy as np

from alforge import coldstart, data
from alforge.data import AugmentationSpec
from alforge.loop import ALConfig
from alforge.model import LossSpec


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-train", type=int, default=500)
    ap.add_argument("--noise", type=float, default=0.1)
    ap.add_argument("--data-seed", type=int, default=7)
    ap.add_argument("--sizes", type=int, nargs="+",
                    default=[4, 10, 20, 40, 100])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--epochs", type=int, default=600)
    ap.add_argument("--lr", type=float, default=0.2)
    ap.add_argument("--unsup-weight", type=float, default=1.0)
    ap.add_argument("--sigma", type=float, default=0.2)
    ap.add_argument("--epsilon", type=float, default=0.05,
                    help="plateau threshold on the measure delta")
    ap.add_argument("--out", default=None,
                    help="optional path for the per-seed sweep CSV")
    args = ap.parse_args()

    ds = data.gen_two_moons(args.n_train, args.noise, [args.data_seed, 10])
    per_seed = []
    for seed in range(args.seeds):
        cfg = ALConfig(epochs_per_cycle=args.epochs, sgd_batch=64, lr=args.lr,
                       seed=seed, loss=LossSpec(unsup_weight=args.unsup_weight),
                       augmentation=AugmentationSpec(sigma=args.sigma))
        per_seed.append(coldstart.sweep_start_sizes(ds, args.sizes, cfg))

    mh = [float(np.mean([recs[i].measure_H for recs in per_seed]))
          for i in range(len(args.sizes))]
    tl = [float(np.mean([recs[i].target_loss for recs in per_seed]))
          for i in range(len(args.sizes))]

    print(f"{'size':>6} {'measure_H':>12} {'target_loss':>12}")
    for size, h, t in zip(args.sizes, mh, tl):
        print(f"{size:>6} {h:>12.4f} {t:>12.4f}")

    r = coldstart.pearson(mh, tl)
    print(f"\npearson(measure_H, target_loss) over sizes: {r:.4f}")

    prior = coldstart.uniform_prior(ds.n_classes)
    mean_records = [coldstart.MeasureRecord(labeled_count=size, measure_H=h,
                                            target_loss=t, assumed_prior=prior)
                    for size, h, t in zip(args.sizes, mh, tl)]
    rec = coldstart.start_size_rule(mean_records, args.epsilon)
    verdict = "converged" if rec.converged else "NOT converged; sweep larger sizes"
    print(f"recommended start size: {rec.size} ({verdict}, "
          f"deltas {[round(d, 4) for d in rec.deltas]})")

    if args.out:
        flat = [r for recs in per_seed for r in recs]
        coldstart.save_sweep_csv(flat, args.out)
        print(f"per-seed sweep written to {args.out}")


if __name__ == "__main__":
    main()
