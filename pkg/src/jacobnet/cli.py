"""Command-line entry point: ``jacobnet {gen,train,eval,workspace,optbench}``.

Exit codes: 0 success, 2 usage, 3 I/O failure, 4 data or model mismatch.
Outputs go to ``--out`` or, when omitted, to ``$JACOBNET_OUTPUT_DIR`` (falling
back to the working directory).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import dataset as ds
from .exceptions import JacobNetError, ShapeMismatch
from .metrics import (BenchReport, classification_metrics, regression_metrics, time_method,
                      write_reports)
from .model import (DESK_PLAN, FULL_PLAN, TrainConfig, build_combined, load_model,
                    optimizer_curves, pretrain_encoder, save_model, train_cycle)
from .nn.optim import ALGOS
from .robots import fanuc_am120ib_10l, puma560

log = logging.getLogger("jacobnet")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DATA = 0, 2, 3, 4
OUTPUT_ENV = "JACOBNET_OUTPUT_DIR"
PLANS = {"desk": DESK_PLAN, "full": FULL_PLAN}
THRESHOLDS = (0.25, 0.5, 0.75)


class InputError(JacobNetError):
    """A declared input is missing or unreadable."""


def _out_dir(args):
    d = Path(args.out or os.environ.get(OUTPUT_ENV) or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _load(directory, variant, split):
    try:
        return ds.load_dataset(directory, variant, split)
    except FileNotFoundError as exc:
        raise InputError(f"missing dataset file: {exc.filename}") from None


def _load_model(path):
    try:
        return load_model(path)
    except FileNotFoundError:
        raise InputError(f"missing model file: {path}") from None


def _features(data, args):
    return ds.kinematic_view(data.features) if args.kinematic_view else data.features


# --------------------------------------------------------------------------- #
# gen
# --------------------------------------------------------------------------- #

def cmd_gen(args):
    opts = ds.SampleOptions(
        variant=args.variant, plim=args.plim, cutoff=args.cutoff, test_ratio=args.test_ratio,
        seed=args.seed, parallel=args.parallel, n_jobs=args.threads, n_starts=args.starts,
        pose_position_range=tuple(args.pose_range), dh_free_range=tuple(args.dh_range),
    )
    train, test = ds.nnsample(args.num, opts)
    for p in ds.save_dataset(_out_dir(args), train, test):
        print(p)
    return EXIT_OK


# --------------------------------------------------------------------------- #
# train
# --------------------------------------------------------------------------- #

def _training_data(args):
    jac = _load(args.jacob, args.jacob_variant, "train")
    Xj = _features(jac, args)
    if args.conf:
        conf = _load(args.conf, args.conf_variant, "train")
        Xc, yc = conf.features, conf.labels
    else:
        Xc, yc = Xj, jac.reachable.astype(float)
    if Xc.shape[1] != Xj.shape[1]:
        raise ShapeMismatch(f"confidence data has {Xc.shape[1]} columns, Jacobian data "
                            f"{Xj.shape[1]}; pass --kinematic-view to drop dynamics")
    return Xc, yc, Xj, jac.labels


def _train_config(args, epochs=None):
    return TrainConfig(batch_size=args.batch_size,
                       epochs=args.epochs if epochs is None else epochs,
                       pretrain_epochs=args.pretrain_epochs,
                       validation_split=args.validation_split, optimizer=args.optimizer,
                       learning_rate=args.lr, seed=args.seed)


def cmd_train(args):
    Xc, yc, Xj, Yj = _training_data(args)
    cfg = _train_config(args)
    model = build_combined(Xj.shape[1], PLANS[args.plan], args.seed, args.dropout,
                           args.threshold)
    rng = np.random.default_rng(cfg.seed)
    history = pretrain_encoder(model, Xj, Yj, cfg, rng=rng)
    train_cycle(model, Xc, yc, Xj, Yj, cfg, rng=rng, history=history)
    out = _out_dir(args)
    model_path = Path(args.model) if args.model else out / "model.jcb"
    save_model(model, model_path)
    hist_path = Path(args.history) if args.history else out / "history.csv"
    history.to_csv(hist_path)
    print(model_path)
    print(hist_path)
    return EXIT_OK


# --------------------------------------------------------------------------- #
# eval
# --------------------------------------------------------------------------- #

def _ik_exists(m_vec_pose):
    """Existence check by multi-start numerical IK for one feature row."""
    from .kinematics import Pose, ikine_multistart
    row = np.asarray(m_vec_pose, dtype=float)
    m = ds.parse_manipulator(row[:-6])
    target = Pose.from_rpy(row[-6:-3], row[-3:])
    return ikine_multistart(m, target, rng=np.random.default_rng(0)).converged


def cmd_eval(args):
    from .baselines import baseline_fit_predict
    model = _load_model(args.model)
    out = _out_dir(args)
    written = []
    if args.conf:
        test = _load(args.conf, args.conf_variant, "test")
        X, y = _features(test, args), test.labels[:, 0]
        scores = model.confidence(X)
        t_nn = time_method(model.confidence, X, args.repetitions)
        reports = [BenchReport(f"NN({str(t).lstrip('0')})", classification_metrics(y, scores, t),
                               t_nn) for t in THRESHOLDS]
        if args.baselines:
            train = _load(args.conf, args.conf_variant, "train")
            Xtr = _features(train, args)
            for kind in ("logistic", "linear", "ridge"):
                s = baseline_fit_predict(kind, (Xtr, train.labels[:, 0]), X, alpha=args.alpha)
                t = time_method(lambda Z, k=kind: baseline_fit_predict(
                    k, (Xtr, train.labels[:, 0]), Z, alpha=args.alpha), X, 3)
                reports.append(BenchReport(kind.capitalize(), classification_metrics(y, s), t))
        if args.ik_timing:
            rows = test.features[:args.ik_timing]
            t_ik = time_method(_ik_exists, rows, 3, batched=False)
            reports.append(BenchReport("IK", {}, t_ik))
        path = out / "conf_report.csv"
        write_reports(path, reports, "classification")
        written.append(path)
    if args.jacob:
        test = _load(args.jacob, args.jacob_variant, "test")
        X = _features(test, args)
        keep = test.reachable
        if not keep.any():
            raise ShapeMismatch("test split holds no reachable rows")
        X, Y = X[keep], test.labels[keep]
        pred = model.estimate(X).reshape(len(X), -1)
        t_nn = time_method(model.estimate, X, args.repetitions)
        reports = [BenchReport("NN", regression_metrics(Y, pred), t_nn)]
        if args.baselines:
            train = _load(args.jacob, args.jacob_variant, "train")
            tk = train.reachable
            Xtr, Ytr = _features(train, args)[tk], train.labels[tk]
            for kind in ("linear", "ridge"):
                p = baseline_fit_predict(kind, (Xtr, Ytr), X, alpha=args.alpha)
                t = time_method(lambda Z, k=kind: baseline_fit_predict(
                    k, (Xtr, Ytr), Z, alpha=args.alpha), X, 3)
                reports.append(BenchReport(kind.capitalize(), regression_metrics(Y, p), t))
        path = out / "est_report.csv"
        write_reports(path, reports, "regression")
        written.append(path)
    if not written:
        raise InputError("eval needs --conf and/or --jacob")
    for p in written:
        print(p)
    return EXIT_OK


# --------------------------------------------------------------------------- #
# workspace
# --------------------------------------------------------------------------- #

def _robot(args):
    if args.free is not None:
        return ds.parse_manipulator(ds._dh_vector(np.asarray(args.free, dtype=float)))
    return {"puma560": puma560, "fanuc": fanuc_am120ib_10l}[args.robot]()


def cmd_workspace(args):
    from .kinematics import rpy2r
    from .workspace import (GridGeometry, WorkspaceSpec, compare_workspaces, gen_workspace_ik,
                            gen_workspace_nn)
    model = _load_model(args.model)
    m = _robot(args)
    lo, hi = args.bounds
    geom = GridGeometry(((lo, hi),) * 3, (args.resolution,) * 3)
    spec = WorkspaceSpec(kind=args.kind, orientation_samples=args.orientation_samples)
    if args.kind == "constant-orientation":
        spec.fixed_rotation = rpy2r(args.rpy)
    elif args.kind == "total-orientation":
        spec.orientation_range = tuple(zip(args.orientation_range[0::2],
                                           args.orientation_range[1::2]))
    elif args.kind == "orientation":
        spec.fixed_position = np.asarray(args.position, dtype=float)
        geom = GridGeometry(((0.0, 2 * np.pi),) * 3, (args.resolution,) * 3)
    ik = gen_workspace_ik(m, spec, geom, seed=args.seed, n_jobs=args.threads or 1)
    nn = gen_workspace_nn(model, m, spec, geom, args.threshold, seed=args.seed)
    report = compare_workspaces(ik, nn)
    out = _out_dir(args)
    ik.to_csv(out / "workspace_ik.csv")
    nn.to_csv(out / "workspace_nn.csv")
    ik.write_rle(out / "workspace_ik.rle")
    nn.write_rle(out / "workspace_nn.rle")
    with open(out / "workspace_report.json", "w") as fh:
        json.dump({**report, "kind": args.kind, "threshold": args.threshold,
                   "ik_cells": ik.count, "nn_cells": nn.count}, fh, indent=2)
    print(json.dumps(report))
    return EXIT_OK


# --------------------------------------------------------------------------- #
# optbench
# --------------------------------------------------------------------------- #

def cmd_optbench(args):
    if args.target == "est":
        data = _load(args.jacob, args.jacob_variant, "train")
        X, Y = _features(data, args), data.labels
    else:
        data = _load(args.conf, args.conf_variant, "train")
        X, Y = _features(data, args), data.labels
    if args.max_rows:
        X, Y = X[:args.max_rows], Y[:args.max_rows]
    cfg = _train_config(args)
    curves = optimizer_curves(X, Y, args.optimizers, args.target, PLANS[args.plan], cfg,
                              args.dropout)
    out = _out_dir(args)
    for algo, rows in curves.items():
        path = out / f"optbench_{args.target}_{algo}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "train_loss", "val_loss"])
            for ep, tl, vl in rows:
                w.writerow([ep, repr(float(tl)), repr(float(vl))])
        print(path)
    return EXIT_OK


# --------------------------------------------------------------------------- #
# argument parsing
# --------------------------------------------------------------------------- #

def _common(p):
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or .)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None, help="cap on worker processes")


def _data_flags(p):
    p.add_argument("--conf", help="directory with confidence CSVs")
    p.add_argument("--conf-variant", default="conf-kine", choices=("conf-kine", "conf-dyna"))
    p.add_argument("--jacob", help="directory with Jacobian CSVs")
    p.add_argument("--jacob-variant", default="jacob-0", choices=("jacob-0", "jacob-e"))
    p.add_argument("--kinematic-view", action="store_true",
                   help="drop the dynamics block of 96-wide features")


def _train_flags(p):
    p.add_argument("--plan", default="desk", choices=sorted(PLANS))
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--pretrain-epochs", type=int, default=5)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--validation-split", type=float, default=0.2)
    p.add_argument("--optimizer", default="adam", choices=ALGOS)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--dropout", type=float, default=0.0)


def build_parser():
    parser = argparse.ArgumentParser(prog="jacobnet", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a labelled dataset")
    _common(p)
    p.add_argument("--variant", required=True, choices=ds.VARIANTS)
    p.add_argument("--num", type=int, required=True)
    p.add_argument("--plim", type=int, default=50)
    p.add_argument("--cutoff", type=float, default=0.03)
    p.add_argument("--test-ratio", type=float, default=0.01)
    p.add_argument("--starts", type=int, default=8, help="random IK starts besides q = 0")
    p.add_argument("--pose-range", type=float, nargs=2, default=(-0.4, 0.4))
    p.add_argument("--dh-range", type=float, nargs=2, default=(0.0, 0.5))
    p.add_argument("--parallel", action="store_true")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="pretrain the encoder, then cycle-train both heads")
    _common(p)
    _data_flags(p)
    _train_flags(p)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--model", help="output model path (default OUT/model.jcb)")
    p.add_argument("--history", help="output history CSV (default OUT/history.csv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="benchmark a trained model on the test split")
    _common(p)
    _data_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--baselines", action="store_true")
    p.add_argument("--alpha", type=float, default=0.5, help="ridge penalty")
    p.add_argument("--repetitions", type=int, default=5)
    p.add_argument("--ik-timing", type=int, default=0,
                   help="also time the IK existence check on this many test poses")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("workspace", help="compare IK and NN workspaces on a grid")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--robot", default="puma560", choices=("puma560", "fanuc"))
    p.add_argument("--free", type=float, nargs=4, metavar=("D3", "D4", "A2", "A3"),
                   help="PUMA-family member with these free DH values")
    p.add_argument("--kind", default="constant-orientation",
                   choices=("reachable", "constant-orientation", "total-orientation",
                            "dexterous", "orientation"))
    p.add_argument("--bounds", type=float, nargs=2, default=(-0.4, 0.4))
    p.add_argument("--resolution", type=int, default=20)
    p.add_argument("--rpy", type=float, nargs=3, default=(0.0, 0.0, 0.0))
    p.add_argument("--orientation-range", type=float, nargs=6,
                   default=(0.0, 0.5, 0.0, 0.5, 0.0, 0.5))
    p.add_argument("--orientation-samples", type=int, default=16)
    p.add_argument("--position", type=float, nargs=3, default=(0.3, 0.0, 0.0))
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_workspace)

    p = sub.add_parser("optbench", help="loss curves for every optimizer")
    _common(p)
    _data_flags(p)
    _train_flags(p)
    p.add_argument("--target", default="est", choices=("est", "conf"))
    p.add_argument("--optimizers", nargs="+", default=list(ALGOS), choices=ALGOS)
    p.add_argument("--max-rows", type=int, default=None)
    p.set_defaults(func=cmd_optbench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command in ("optbench",) and not (args.jacob if args.target == "est" else args.conf):
        parser.error(f"optbench --target {args.target} needs --{args.target.replace('est', 'jacob')}")
    if args.command == "train" and not args.jacob:
        parser.error("train needs --jacob")
    try:
        return args.func(args)
    except (JacobNetError, ValueError) as exc:
        print(f"jacobnet {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"jacobnet {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
