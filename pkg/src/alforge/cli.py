"""Command-line front end.

Subcommands: generate (datasets), run (the AL loop over one or all
strategies), sweep (start-size analysis), diagnose (selection-quality
reports from saved snapshots), verify (the built-in oracle suite).

Configs are plain `key = value` text files; every value has a default and
flags override the file. Each run emits a manifest JSON with the fully
resolved configuration and a dataset fingerprint; feeding the manifest
back via --config reproduces the outputs byte for byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__, data, diagnostics, loop, selection, snapshot, verify
from .coldstart import pearson, save_sweep_csv, start_size_rule, sweep_start_sizes
from .data import AugmentationSpec, Dataset
from .loop import ALConfig
from .model import ACTIVATIONS, DISTANCES, LossSpec

DATASET_KINDS = ("two_moons", "blobs", "grid_patterns")

# key -> (type, default); None defaults are resolved per dataset kind
_ALC = ALConfig()
_LOSS = LossSpec()
_AUG = AugmentationSpec()
SCHEMA: dict[str, tuple[type, object]] = {
    "dataset": (str, "two_moons"),
    "n_train": (int, 500),
    "n_test": (int, 500),
    "noise": (float, 0.1),
    "spread": (float, 0.5),
    "classes": (int, None),
    "centers_seed": (int, 0),
    "grid_dim": (int, 5),
    "data_seed": (int, 0),
    "start_size": (int, _ALC.start_size),
    "batch_per_cycle": (int, _ALC.batch_per_cycle),
    "n_cycles": (int, _ALC.n_cycles),
    "doubling": (bool, _ALC.doubling),
    "epochs_per_cycle": (int, _ALC.epochs_per_cycle),
    "sgd_batch": (int, _ALC.sgd_batch),
    "lr": (float, _ALC.lr),
    "momentum": (float, _ALC.momentum),
    "seed": (int, _ALC.seed),
    "strategy": (str, _ALC.strategy),
    "warm_start": (bool, _ALC.warm_start),
    "balanced_start": (bool, _ALC.balanced_start),
    "hidden_dim": (int, _ALC.hidden_dim),
    "activation": (str, _ALC.activation),
    "init_scale": (float, _ALC.init_scale),
    "distance": (str, _LOSS.distance),
    "unsup_weight": (float, _LOSS.unsup_weight),
    "n_train_augs": (int, _LOSS.n_train_augs),
    "aug_kind": (str, _AUG.kind),
    "sigma": (float, _AUG.sigma),
    "max_shift": (int, _AUG.max_shift),
    "n_eval_augs": (int, _AUG.n_eval_augs),
    "trials": (int, 5),
    "out": (str, "runs"),
}

_DEFAULT_CLASSES = {"two_moons": 2, "blobs": 3, "grid_patterns": 4}


class ConfigError(ValueError):
    pass


def _parse_value(key: str, raw: str):
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    typ, _ = SCHEMA[key]
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        return typ(raw)
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r} as {typ.__name__}")


def parse_config_file(path: str) -> dict:
    """Plain `key = value` lines; '#' starts a comment; keys must be known."""
    out = {}
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value, got {line!r}")
            key, raw = (s.strip() for s in line.split("=", 1))
            out[key] = _parse_value(key, raw)
    return out


def resolve_config(overrides: dict) -> dict:
    cfg = {k: default for k, (_, default) in SCHEMA.items()}
    cfg.update(overrides)
    if cfg["dataset"] not in DATASET_KINDS:
        raise ConfigError(f"dataset must be one of {DATASET_KINDS}")
    if cfg["classes"] is None:
        cfg["classes"] = _DEFAULT_CLASSES[cfg["dataset"]]
    if cfg["dataset"] == "two_moons" and cfg["classes"] != 2:
        raise ConfigError("two_moons always has 2 classes")
    return cfg


def load_config(path: str | None, overrides: dict) -> dict:
    """File (text key=value, or a manifest JSON), then explicit overrides."""
    base: dict = {}
    if path:
        if path.endswith(".json"):
            with open(path) as f:
                doc = json.load(f)
            base = doc["config"] if "config" in doc else doc
            base = {k: v for k, v in base.items() if k in SCHEMA}
        else:
            base = parse_config_file(path)
    base.update(overrides)
    return resolve_config(base)


def build_datasets(cfg: dict) -> tuple[Dataset, Dataset]:
    """Train and test splits drawn from disjoint derived seed streams."""
    kind = cfg["dataset"]
    tr_seed = [cfg["data_seed"], 10]
    te_seed = [cfg["data_seed"], 11]
    if kind == "two_moons":
        tr = data.gen_two_moons(cfg["n_train"], cfg["noise"], tr_seed, split="train")
        te = data.gen_two_moons(cfg["n_test"], cfg["noise"], te_seed, split="test")
    elif kind == "blobs":
        tr = data.gen_blobs(cfg["n_train"], cfg["classes"], cfg["centers_seed"],
                            cfg["spread"], tr_seed, split="train")
        te = data.gen_blobs(cfg["n_test"], cfg["classes"], cfg["centers_seed"],
                            cfg["spread"], te_seed, split="test")
    else:
        tr = data.gen_grid_patterns(cfg["n_train"], cfg["classes"], cfg["grid_dim"],
                                    cfg["noise"], tr_seed, split="train")
        te = data.gen_grid_patterns(cfg["n_test"], cfg["classes"], cfg["grid_dim"],
                                    cfg["noise"], te_seed, split="test")
    return tr, te


def build_alconfig(cfg: dict) -> ALConfig:
    return ALConfig(
        start_size=cfg["start_size"], batch_per_cycle=cfg["batch_per_cycle"],
        n_cycles=cfg["n_cycles"], doubling=cfg["doubling"],
        epochs_per_cycle=cfg["epochs_per_cycle"], sgd_batch=cfg["sgd_batch"],
        lr=cfg["lr"], momentum=cfg["momentum"], seed=cfg["seed"],
        strategy=cfg["strategy"], warm_start=cfg["warm_start"],
        balanced_start=cfg["balanced_start"], hidden_dim=cfg["hidden_dim"],
        activation=cfg["activation"], init_scale=cfg["init_scale"],
        loss=LossSpec(distance=cfg["distance"], unsup_weight=cfg["unsup_weight"],
                      n_train_augs=cfg["n_train_augs"]),
        augmentation=AugmentationSpec(kind=cfg["aug_kind"], sigma=cfg["sigma"],
                                      max_shift=cfg["max_shift"],
                                      n_eval_augs=cfg["n_eval_augs"]),
    )


def dataset_fingerprint(*datasets: Dataset) -> str:
    h = hashlib.sha256()
    for ds in datasets:
        h.update(np.ascontiguousarray(ds.features, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(ds.true_labels, dtype="<i8").tobytes())
    return h.hexdigest()


def write_manifest(path: str, command: str, cfg: dict, fingerprint: str) -> None:
    doc = {
        "artifact_version": __version__,
        "command": command,
        "seed": cfg.get("seed"),
        "dataset_fingerprint": fingerprint,
        "output_dir": cfg.get("out"),
        "config": cfg,
    }
    with open(path, "w", newline="") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")


def _fail(msg: str, code: int = 1) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


# ---------------------------------------------------------------------------
# subcommands

def cmd_generate(args) -> int:
    if args.n < 1:
        return _fail("--n must be >= 1", 2)
    if args.seed < 0:
        return _fail("--seed must be >= 0", 2)
    overrides = {"dataset": args.kind, "n_train": args.n, "noise": args.noise,
                 "spread": args.spread, "centers_seed": args.centers_seed,
                 "grid_dim": args.grid_dim, "data_seed": args.seed}
    if args.classes is not None:
        overrides["classes"] = args.classes
    try:
        cfg = resolve_config(overrides)
        kind = cfg["dataset"]
        seed = [cfg["data_seed"], 10 if args.split == "train" else 11]
        if kind == "two_moons":
            ds = data.gen_two_moons(args.n, cfg["noise"], seed, split=args.split)
        elif kind == "blobs":
            ds = data.gen_blobs(args.n, cfg["classes"], cfg["centers_seed"],
                                cfg["spread"], seed, split=args.split)
        else:
            ds = data.gen_grid_patterns(args.n, cfg["classes"], cfg["grid_dim"],
                                        cfg["noise"], seed, split=args.split)
    except (ConfigError, ValueError) as e:
        return _fail(f"--kind {args.kind}: {e}", 2)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, f"{kind}_{args.split}.csv")
    data.save_dataset_csv(ds, csv_path)
    meta = {
        "command": "generate", "kind": kind, "split": args.split, "n": ds.n,
        "input_dim": ds.input_dim, "classes": ds.n_classes, "seed": args.seed,
        "noise": cfg["noise"], "spread": cfg["spread"],
        "centers_seed": cfg["centers_seed"], "grid_dim": cfg["grid_dim"],
        "fingerprint": dataset_fingerprint(ds), "artifact_version": __version__,
    }
    with open(os.path.join(args.out, f"{kind}_{args.split}.meta.json"), "w", newline="") as f:
        json.dump(meta, f, indent=1, sort_keys=True)
        f.write("\n")
    print(csv_path)
    return 0


def _collect_overrides(args) -> dict:
    out = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set needs key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = _parse_value(k.strip(), v)
    if getattr(args, "strategy", None):
        out["strategy"] = args.strategy
    if getattr(args, "trials", None) is not None:
        out["trials"] = args.trials
    if getattr(args, "seed", None) is not None:
        out["seed"] = args.seed
    if getattr(args, "out", None):
        out["out"] = args.out
    return out


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config, _collect_overrides(args))
    except (ConfigError, FileNotFoundError) as e:
        return _fail(str(e), 2)
    ds_train, ds_test = build_datasets(cfg)
    alc = build_alconfig(cfg)
    problems = alc.violations(ds_train.n)
    if alc.balanced_start and alc.start_size % ds_train.n_classes != 0:
        problems.append("balanced start needs start_size divisible by classes")
    if cfg["strategy"] == "all":
        # "all" fans out over the real strategies below
        problems = [p for p in problems if not p.startswith("strategy")]
    if problems:
        for p in problems:
            print(f"config error: {p}", file=sys.stderr)
        return 2

    out_dir = cfg["out"]
    os.makedirs(out_dir, exist_ok=True)
    strategies = list(selection.STRATEGIES) if cfg["strategy"] == "all" else [cfg["strategy"]]
    summary = {"strategies": {}, "trials": cfg["trials"], "artifact_version": __version__}
    for strat in strategies:
        t0 = time.perf_counter()
        results = loop.run_trials(ds_train, ds_test,
                                  replace(alc, strategy=strat),
                                  cfg["trials"])
        elapsed = time.perf_counter() - t0
        loop.save_records_csv(results, os.path.join(out_dir, f"records_{strat}.csv"))
        snapshot.save_model(results[0].final_params,
                            os.path.join(out_dir, f"model_{strat}.alfg"))
        data.save_pool_json(results[0].final_pool,
                            os.path.join(out_dir, f"pool_{strat}.json"))
        summary["strategies"][strat] = {
            "curves": loop.aggregate_curves(results),
            "truncated": [r.truncated for r in results],
            "wallclock_s": elapsed,
        }
    with open(os.path.join(out_dir, "summary.json"), "w", newline="") as f:
        json.dump(summary, f, indent=1)
        f.write("\n")
    write_manifest(os.path.join(out_dir, "manifest.json"), "run", cfg,
                   dataset_fingerprint(ds_train, ds_test))
    print(out_dir)
    return 0


def cmd_sweep(args) -> int:
    try:
        cfg = load_config(args.config, _collect_overrides(args))
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except (ConfigError, FileNotFoundError, ValueError) as e:
        return _fail(str(e), 2)
    if len(sizes) < 2:
        return _fail("--sizes needs at least two sizes (the rule compares steps)", 2)
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        return _fail("--sizes must be strictly increasing", 2)
    ds_train, _ = build_datasets(cfg)
    if sizes[-1] > ds_train.n:
        return _fail(f"largest size {sizes[-1]} exceeds n_train {ds_train.n}", 2)
    alc = build_alconfig(cfg)

    all_records = []
    for i in range(args.seeds):
        all_records.extend(
            sweep_start_sizes(ds_train, sizes, replace(alc, seed=alc.seed + i)))
    out_dir = cfg["out"]
    os.makedirs(out_dir, exist_ok=True)
    save_sweep_csv(all_records, os.path.join(out_dir, "sweep.csv"))

    mean_h = [float(np.mean([r.measure_H for r in all_records if r.labeled_count == s]))
              for s in sizes]
    mean_tl = [float(np.mean([r.target_loss for r in all_records if r.labeled_count == s]))
               for s in sizes]
    means = [type(all_records[0])(labeled_count=s, measure_H=h, target_loss=t,
                                  assumed_prior=all_records[0].assumed_prior)
             for s, h, t in zip(sizes, mean_h, mean_tl)]
    rec = start_size_rule(means, args.epsilon)
    doc = {
        "sizes": sizes, "epsilon": args.epsilon, "seeds": args.seeds,
        "mean_measure_H": mean_h, "mean_target_loss": mean_tl,
        "delta_H": rec.deltas, "chosen_size": rec.size, "converged": rec.converged,
        "pearson_correlation": pearson(mean_h, mean_tl),
    }
    with open(os.path.join(out_dir, "recommendation.json"), "w", newline="") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")
    write_manifest(os.path.join(out_dir, "manifest.json"), "sweep", cfg,
                   dataset_fingerprint(ds_train))
    print(json.dumps({"chosen_size": rec.size, "converged": rec.converged}))
    return 0


def cmd_diagnose(args) -> int:
    for path in (args.model, args.pool, args.data):
        if not os.path.exists(path):
            return _fail(f"missing input file: {path}")
    try:
        params = snapshot.load_model(args.model)
        pool = data.load_pool_json(args.pool)
        ds = data.load_dataset_csv(args.data)
        ds_test = data.load_dataset_csv(args.test_data, split="test") \
            if args.test_data else None
    except ValueError as e:
        return _fail(str(e))
    if args.strategy not in selection.STRATEGIES:
        return _fail(f"--strategy {args.strategy!r} must be one of "
                     f"{selection.STRATEGIES}", 2)
    if not pool.unlabeled:
        return _fail("pool has no unlabeled samples to rank")
    try:
        thresholds = tuple(float(t) for t in args.thresholds.split(","))
    except ValueError:
        return _fail(f"--thresholds: cannot parse {args.thresholds!r}", 2)
    aug = AugmentationSpec(kind=args.aug_kind, sigma=args.sigma,
                           max_shift=args.max_shift, n_eval_augs=args.n_eval_augs)
    ranked = selection.rank_pool(args.strategy, params, ds, pool, aug, [args.seed, 4, 0])
    index = diagnostics.write_reports(args.out, params, ds, ranked,
                                      frac=args.top_frac, thresholds=thresholds,
                                      ds_test=ds_test)
    index["inputs"] = {"model": args.model, "pool": args.pool, "data": args.data,
                       "test_data": args.test_data, "seed": args.seed}
    with open(os.path.join(args.out, "index.json"), "w", newline="") as f:
        json.dump(index, f, indent=1)
        f.write("\n")
    print(args.out)
    return 0


def cmd_verify(args) -> int:
    results = verify.run_all_checks(args.seed)
    print(f"{'check':<22} {'instances':>9} {'max error':>12} status")
    ok = True
    for r in results:
        print(r.row())
        if not r.passed:
            ok = False
            print("replay: " + json.dumps(r.failing_instance), file=sys.stderr)
    print("all checks passed" if ok else "VERIFICATION FAILED", file=sys.stderr)
    return 0 if ok else 1


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="alforge",
                                description="consistency-based semi-supervised "
                                            "active learning, desk scale")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset CSV + metadata")
    g.add_argument("--kind", required=True, choices=DATASET_KINDS)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--noise", type=float, default=0.1)
    g.add_argument("--spread", type=float, default=0.5)
    g.add_argument("--classes", type=int, default=None)
    g.add_argument("--centers-seed", type=int, default=0)
    g.add_argument("--grid-dim", type=int, default=5)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--split", choices=("train", "test"), default="train")
    g.add_argument("--out", default=".")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="run the active learning loop")
    r.add_argument("--config", help="key = value config file, or a manifest JSON")
    r.add_argument("--strategy", help="uniform|entropy|kcenter|consistency|all")
    r.add_argument("--trials", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--out")
    r.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any config key (repeatable)")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="start-size sweep and stopping rule")
    s.add_argument("--config")
    s.add_argument("--sizes", required=True, help="comma-separated start sizes")
    s.add_argument("--epsilon", type=float, required=True,
                   help="convergence threshold on the measure delta")
    s.add_argument("--seeds", type=int, default=5)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.add_argument("--set", action="append", metavar="KEY=VALUE")
    s.set_defaults(func=cmd_sweep)

    d = sub.add_parser("diagnose", help="selection-quality reports from snapshots")
    d.add_argument("--model", required=True, help="model snapshot (.alfg)")
    d.add_argument("--pool", required=True, help="pool snapshot JSON")
    d.add_argument("--data", required=True, help="train dataset CSV")
    d.add_argument("--test-data", default=None)
    d.add_argument("--strategy", default="consistency")
    d.add_argument("--top-frac", type=float, default=0.01)
    d.add_argument("--thresholds", default="0.6,0.7,0.8,0.9,0.95")
    d.add_argument("--aug-kind", default="gaussian_jitter")
    d.add_argument("--sigma", type=float, default=0.3)
    d.add_argument("--max-shift", type=int, default=1)
    d.add_argument("--n-eval-augs", type=int, default=10)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", default="diagnostics")
    d.set_defaults(func=cmd_diagnose)

    v = sub.add_parser("verify", help="run the built-in oracle checks")
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
