"""Command-line interface: simulate, featurize, train, predict, change, evaluate."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import load_config
from .dataset import FeatureTable, featurize_container
from .estimator import fit_location_model, predict_weight, weight_change
from .evaluation import STUDIES, results_summary, results_table, location_table, run_studies
from .simulator import derive_seed, generate_dataset

MODEL_SUFFIX = ".model"


def _config(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.seed = int(args.seed)
    return cfg


def _pipeline(cfg) -> dict:
    p = cfg.pipeline
    return dict(threshold_factor=p.threshold_factor, refractory_s=p.refractory_s, pre_trigger_s=p.pre_trigger_s)


def _table(path, cfg) -> FeatureTable:
    """A dataset directory is featurised on the fly; a file is read as a feature table."""
    path = Path(path)
    if path.is_dir():
        return featurize_container(path, **_pipeline(cfg))
    if not path.is_file():
        raise FileNotFoundError(f"{path} not found")
    return FeatureTable.from_kv(io.read_kv(path))


def _models(path) -> dict:
    path = Path(path)
    files = sorted(path.glob("*" + MODEL_SUFFIX)) if path.is_dir() else [path]
    if not files or not files[0].is_file():
        raise FileNotFoundError(f"no model files at {path}")
    models = {}
    for f in files:
        m = io.load_model(f)
        models[m.location_id] = m
    return models


def cmd_simulate(args) -> int:
    cfg = _config(args)
    names = [f"L{i + 1}" for i in range(len(cfg.geometry.locations))]
    manifest, records = generate_dataset(
        cfg.setup(), cfg.locations(), [float(w) for w in cfg.dataset.weights_g],
        int(cfg.dataset.samples_per_class), cfg.dataset.noise_snr_db, cfg.seed, location_names=names,
    )
    out = io.write_dataset(args.out, manifest, records)
    print(f"wrote {len(manifest.entries)} records to {out}")
    return 0


def cmd_featurize(args) -> int:
    cfg = _config(args)
    table = featurize_container(args.dataset, **_pipeline(cfg))
    io.write_kv(args.out, table.to_kv())
    print(f"wrote {len(table)} feature rows ({len(table.sensor_ids)} sensors) to {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    table = _table(args.dataset, cfg)
    est = cfg.estimator
    wanted = args.location or table.locations
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for lid in wanted:
        if lid not in table.locations:
            raise KeyError(f"location {lid} not in dataset")
        li = table.locations.index(lid)
        sub = table.subset(np.flatnonzero(table.location_ids == lid))
        model = fit_location_model(
            sub.matrix(est.sensors), sub.weights_g, lid, est.train_classes_g, est.train_fraction,
            est.ridge_lambda, est.variance_target, derive_seed(cfg.seed, "split", li),
            tuple(sorted(int(s) for s in est.sensors)),
        )
        io.save_model(out / f"{lid}{MODEL_SUFFIX}", model)
        rows.append({
            "location": lid, "components": model.pca.k,
            "train_rows": int(sum(model.samples_per_class)), "intercept_g": model.intercept,
        })
    sys.stdout.write(io.format_table(rows, ("location", "components", "train_rows", "intercept_g")))
    return 0


def cmd_predict(args) -> int:
    cfg = _config(args)
    table = _table(args.dataset, cfg)
    models = _models(args.model)
    if args.sample:
        idx = [table.find(s) for s in args.sample]
    else:
        idx = [i for i in range(len(table)) if table.location_ids[i] in models]
    rows = []
    for i in idx:
        lid = table.location_ids[i]
        if lid not in models:
            raise KeyError(f"no model for location {lid}")
        m = models[lid]
        est = predict_weight(m, table.matrix(m.sensor_ids)[i])
        rows.append({
            "sample": table.names[i] if table.names else i, "location": lid,
            "true_g": float(table.weights_g[i]), "predicted_g": est.grams,
        })
    sys.stdout.write(io.format_table(rows, ("sample", "location", "true_g", "predicted_g")))
    return 0


def cmd_change(args) -> int:
    cfg = _config(args)
    table = _table(args.dataset, cfg)
    models = _models(args.model)
    est = []
    for ref in (args.before, args.after):
        i = table.find(ref)
        lid = table.location_ids[i]
        if args.location and lid != args.location:
            raise ValueError(f"sample {ref} is at {lid}, not {args.location}")
        if lid not in models:
            raise KeyError(f"no model for location {lid}")
        m = models[lid]
        est.append(predict_weight(m, table.matrix(m.sensor_ids)[i], ref))
    print(f"{weight_change(*est):.4f}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    if args.seeds is not None:
        cfg.studies.seeds = int(args.seeds)
    names = list(STUDIES) if args.study == "all" else [args.study]
    results = run_studies(cfg, names, dataset=args.dataset)
    table = results_table(results)
    if args.out:
        out = Path(args.out)
        io.write_text(out / "results.tsv", table)
        io.write_text(out / "locations.tsv", location_table(results))
        io.write_kv(out / "summary.kv", results_summary(results))
    sys.stdout.write(table)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shelfvib", description="Shelf weight-change estimation from plate vibration.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", default="default", help='JSON config file or "default"')
        sp.set_defaults(func=func)
        return sp

    sp = add("simulate", cmd_simulate, "write a synthetic dataset container")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", required=True)

    sp = add("featurize", cmd_featurize, "turn a dataset container into a feature table")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--out", required=True)

    sp = add("train", cmd_train, "fit one model per location")
    sp.add_argument("--dataset", required=True, help="dataset directory or feature table")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--location", action="append", help="restrict to this location (repeatable)")
    sp.add_argument("--out", required=True, help="directory for model files")

    sp = add("predict", cmd_predict, "estimate weights of samples")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--model", required=True, help="model file or directory of model files")
    sp.add_argument("--sample", action="append", help="file name or location/weight/index")

    sp = add("change", cmd_change, "signed weight change between two samples")
    sp.add_argument("before")
    sp.add_argument("after")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--location")

    sp = add("evaluate", cmd_evaluate, "run evaluation studies and print result tables")
    sp.add_argument("--study", choices=[*STUDIES, "all"], default="all")
    sp.add_argument("--dataset", help="use a stored dataset instead of simulating")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--seeds", type=int, help="number of repetitions")
    sp.add_argument("--out")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # report, never traceback
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"shelfvib: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
