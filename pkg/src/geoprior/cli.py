"""``geoprior`` command line: synth, train-geo, predict-geo, fuse, eval, resample.

Every command accepts ``--config FILE`` (flat ``key = value`` lines; keys are
the long flag names) and writes the effective configuration next to its
outputs, so ``geoprior <cmd> --config <echo>`` reproduces a run.

Exit status: 0 success, 2 usage error, 3 validation error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .domain import ClassVocabulary, ProbMatrix, validate_dataset
from .encode import FEATURE_CONVENTIONS, encode_observations
from .errors import DatasetValidationError, GeoPriorError, HeaderMismatch, InvalidConfig, VocabularyMismatch
from .fusion import DEFAULT_EPSILON, fuse_file
from .geonet import GeoNetConfig, init_network, load_checkpoint, predict_proba, save_checkpoint, train
from .imbalance import STRATEGIES
from .imbalance.resample import (
    cluster_oversample,
    random_oversample,
    random_undersample,
    smote_plan,
    weights_plan,
)
from .io import (
    read_observation_rows,
    read_observations,
    read_prob_matrix,
    write_observation_rows,
    write_observations,
    write_prob_matrix,
)
from .metrics import AVERAGINGS, eval_report
from .synth import SynthSpec, describe_generator, generate_dataset

log = logging.getLogger("geoprior")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4

OUT_DIR_ENV = "GEOPRIOR_OUT_DIR"
_INTERNAL_KEYS = {"config", "func", "command", "verbose"}
_REQUIRED = {
    "synth": ["out"],
    "train-geo": ["train", "out"],
    "predict-geo": ["model", "input", "out"],
    "fuse": ["image_probs", "geo_probs", "out"],
    "eval": ["probs", "truth", "out"],
    "resample": ["input", "method", "out"],
}
_DEFAULT_OUT_FILES = {"predict-geo": "geo_probs.csv", "fuse": "fused_probs.csv"}


def read_config_file(path) -> dict[str, str]:
    values = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidConfig(f"{path}:{n}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def write_config_echo(args: argparse.Namespace, path: Path) -> None:
    items = {k: v for k, v in vars(args).items() if k not in _INTERNAL_KEYS and v is not None}
    lines = [f"# geoprior {__version__} effective configuration", f"command = {args.command}"]
    lines += [f"{k} = {items[k]}" for k in sorted(items)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _add_common(p):
    p.add_argument("--config", help="flat key = value file; command-line flags win")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="geoprior", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = subs["synth"] = sub.add_parser("synth", help="generate a synthetic sighting dataset")
    _add_common(p)
    p.add_argument("--pairs", dest="n_pairs", type=int, default=10)
    p.add_argument("--classes", type=int, help="derived as 2 * pairs; only checked")
    p.add_argument("--train-size", dest="n_train", type=int, default=5000)
    p.add_argument("--test-size", dest="n_test", type=int, default=1000)
    p.add_argument("--gamma", dest="imbalance_gamma", type=float, default=1.5)
    p.add_argument("--geo-sigma", type=float, default=3.0)
    p.add_argument("--pair-separation", type=float, default=6.0)
    p.add_argument("--season-width", type=float, default=20.0)
    p.add_argument("--image-confusion", type=float, default=0.45)
    p.add_argument("--image-concentration", type=float, default=1.0)
    p.add_argument("--image-majority-bias", type=float, default=1.0)
    p.add_argument("--region", default="15,70,-165,-55", help="lat_min,lat_max,lon_min,lon_max")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_synth)

    p = subs["train-geo"] = sub.add_parser("train-geo", help="train the geo prior network")
    _add_common(p)
    p.add_argument("--train")
    p.add_argument("--val")
    p.add_argument("--out", help="output directory for model.json and history.csv")
    p.add_argument("--hidden-width", type=int, default=64)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--lr-decay", type=float, default=0.98)
    p.add_argument("--features", default="lat_lon_date", help=" | ".join(FEATURE_CONVENTIONS))
    p.add_argument("--strategy", default="none", help=" | ".join(STRATEGIES))
    p.add_argument("--mixup", type=float, default=0.0, help="Beta(a, a) MixUp parameter; 0 disables")
    p.add_argument("--weight-cap", type=float)
    p.add_argument("--smote-k", type=int, default=5)
    p.add_argument("--cluster-k", type=int, default=3)
    p.add_argument("--crl-eta", type=float, default=0.5)
    p.add_argument("--crl-margin", type=float, default=0.2)
    p.set_defaults(func=cmd_train_geo)

    p = subs["predict-geo"] = sub.add_parser("predict-geo", help="write P(y|x) for observations")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--input")
    p.add_argument("--out", help="probability CSV to write")
    p.set_defaults(func=cmd_predict_geo)

    p = subs["fuse"] = sub.add_parser("fuse", help="fuse image and geo probabilities")
    _add_common(p)
    p.add_argument("--image-probs")
    p.add_argument("--geo-probs")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--out", help="probability CSV to write")
    p.set_defaults(func=cmd_fuse)

    p = subs["eval"] = sub.add_parser("eval", help="top-k micro/macro accuracy report")
    _add_common(p)
    p.add_argument("--probs")
    p.add_argument("--truth")
    p.add_argument("--topk", default="1,3")
    p.add_argument("--average", default="micro,macro")
    p.add_argument("--out", help="output directory for report.json and per_class.csv")
    p.set_defaults(func=cmd_eval)

    p = subs["resample"] = sub.add_parser("resample", help="apply an imbalance resampling method")
    _add_common(p)
    p.add_argument("--in", dest="input")
    p.add_argument("--method", help="smote | cluster | oversample | undersample | weights")
    p.add_argument("--scheme", default="inverse", help="weights: inverse | inverse_log")
    p.add_argument("--cap", type=float, help="weights: maximum class weight")
    p.add_argument("--k", type=int, default=5, help="smote: neighbours")
    p.add_argument("--clusters", type=int, default=3, help="cluster: k-means clusters per class")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_resample)
    return parser, subs


def parse_args(argv=None) -> argparse.Namespace:
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    sub = subs[args.command]
    if args.config:
        values = read_config_file(args.config)
        command = values.pop("command", args.command)
        if command != args.command:
            raise InvalidConfig(f"config is for {command!r}, not {args.command!r}")
        known = {a.dest for a in sub._actions} - _INTERNAL_KEYS - {"help"}
        unknown = sorted(set(values) - known)
        if unknown:
            raise InvalidConfig(f"unknown config keys: {', '.join(unknown)}")
        sub.set_defaults(**values)
        args = parser.parse_args(argv)

    if getattr(args, "out", None) is None and os.environ.get(OUT_DIR_ENV):
        base = Path(os.environ[OUT_DIR_ENV])
        args.out = str(base / _DEFAULT_OUT_FILES[args.command]) if args.command in _DEFAULT_OUT_FILES else str(base)
    missing = [k for k in _REQUIRED[args.command] if getattr(args, k, None) is None]
    if missing:
        sub.error("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))
    return args


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_for_file(args, out_file: Path) -> None:
    out_file.parent.mkdir(parents=True, exist_ok=True)
    write_config_echo(args, out_file.with_name(out_file.stem + ".config.txt"))


def cmd_synth(args) -> None:
    n_classes = 2 * args.n_pairs
    if args.classes is not None and args.classes != n_classes:
        raise InvalidConfig(f"--classes is derived (2 x --pairs = {n_classes}), got {args.classes}")
    try:
        region = tuple(float(v) for v in str(args.region).split(","))
    except ValueError:
        raise InvalidConfig(f"--region must be four comma-separated numbers, got {args.region!r}") from None
    if len(region) != 4:
        raise InvalidConfig("--region needs lat_min,lat_max,lon_min,lon_max")
    spec = SynthSpec(
        n_pairs=args.n_pairs,
        n_train=args.n_train,
        n_test=args.n_test,
        imbalance_gamma=args.imbalance_gamma,
        geo_sigma=args.geo_sigma,
        pair_separation=args.pair_separation,
        season_width=args.season_width,
        image_confusion=args.image_confusion,
        image_concentration=args.image_concentration,
        image_majority_bias=args.image_majority_bias,
        region=region,
        seed=args.seed,
    )
    out = generate_dataset(spec)
    d = _out_dir(args.out)
    write_observations(out.train, d / "train.csv")
    write_observations(out.test, d / "test.csv")
    write_prob_matrix(out.image_probs, d / "image_probs.csv")
    (d / "generator.txt").write_text(describe_generator(out), encoding="utf-8")
    write_config_echo(args, d / "config.txt")
    log.info("wrote %d train / %d test observations to %s", len(out.train), len(out.test), d)


def cmd_train_geo(args) -> None:
    if args.features not in FEATURE_CONVENTIONS:
        raise InvalidConfig(f"--features must be one of {', '.join(FEATURE_CONVENTIONS)}")
    train_set = read_observations(args.train)
    val_set = None
    if args.val:
        val_set = _read_with_vocabulary(args.val, train_set.vocabulary, "validation set")
    config = GeoNetConfig(
        classes=len(train_set.vocabulary),
        hidden_width=args.hidden_width,
        seed=args.seed,
        learning_rate=args.lr,
        momentum=args.momentum,
        lr_decay=args.lr_decay,
        epochs=args.epochs,
        batch_size=args.batch_size,
    )
    net = init_network(config, train_set.vocabulary, FEATURE_CONVENTIONS[args.features])
    net, history = train(
        net,
        train_set,
        val_set,
        args.strategy,
        mixup_alpha=args.mixup,
        weight_cap=args.weight_cap,
        smote_k=args.smote_k,
        cluster_k=args.cluster_k,
        crl_eta=args.crl_eta,
        crl_margin=args.crl_margin,
    )
    d = _out_dir(args.out)
    save_checkpoint(net, d / "model.json")
    (d / "history.csv").write_text(history.to_csv(), encoding="utf-8")
    write_config_echo(args, d / "config.txt")
    last = history.records[-1]
    log.info("trained %d epochs: loss %.4f, train top-1 %.4f", last.epoch, last.loss, last.train_top1)


def _read_with_vocabulary(path, vocabulary: ClassVocabulary, what: str):
    """Read observations whose species must all be in ``vocabulary``."""
    rows = read_observation_rows(path)
    unknown = sorted({r.get("label_l3", "").strip() for r in rows} - set(vocabulary.classes))
    if unknown:
        raise VocabularyMismatch(f"{what} has species outside the vocabulary: {unknown[:5]}")
    return validate_dataset(rows, vocabulary)


def cmd_predict_geo(args) -> None:
    net = load_checkpoint(args.model)
    data = _read_with_vocabulary(args.input, net.vocabulary, "input")
    P = predict_proba(net, encode_observations(data.observations, net.feature_convention))
    out = Path(args.out)
    _echo_for_file(args, out)
    write_prob_matrix(ProbMatrix(data.obs_ids, net.vocabulary.classes, P), out)


def cmd_fuse(args) -> None:
    fused = fuse_file(read_prob_matrix(args.image_probs), read_prob_matrix(args.geo_probs), args.epsilon)
    out = Path(args.out)
    _echo_for_file(args, out)
    write_prob_matrix(fused, out)


def _int_list(text, what):
    try:
        values = [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise InvalidConfig(f"{what} must be comma-separated integers") from None
    if not values:
        raise InvalidConfig(f"{what} is empty")
    return values


def cmd_eval(args) -> None:
    ks = _int_list(args.topk, "--topk")
    averagings = [a.strip() for a in str(args.average).split(",") if a.strip()]
    bad = [a for a in averagings if a not in AVERAGINGS]
    if bad or not averagings:
        raise InvalidConfig(f"--average accepts {', '.join(AVERAGINGS)}")
    probs = read_prob_matrix(args.probs)
    try:
        truth = _read_with_vocabulary(args.truth, ClassVocabulary(probs.classes), "truth")
    except VocabularyMismatch as exc:
        raise HeaderMismatch(str(exc)) from None
    report = eval_report(probs, truth, ks, averagings)
    d = _out_dir(args.out)
    (d / "report.json").write_text(report.to_text(), encoding="utf-8")
    (d / "per_class.csv").write_text(report.per_class_csv(), encoding="utf-8")
    write_config_echo(args, d / "config.txt")
    for (k, a), v in report.cells.items():
        print(f"top-{k} {a}: {v:.6f}")


def cmd_resample(args) -> None:
    data = read_observations(args.input)
    y = data.labels()
    C = len(data.vocabulary)
    labels = data.vocabulary.classes
    ids = data.obs_ids
    d = _out_dir(args.out)
    method = args.method

    if method == "weights":
        plan = weights_plan(y, C, args.scheme, args.cap)
        counts = np.bincount(y, minlength=C)
        lines = ["class,count,weight"] + [f"{labels[c]},{counts[c]},{float(plan.weights[c])!r}" for c in range(C)]
        (d / "weights.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    elif method == "smote":
        X = encode_observations(data.observations)
        plan = smote_plan(X, y, C, k=args.k, seed=args.seed)
        lines = ["sample_id,label,origin,f0,f1,f2,f3,f4,f5"]
        for oid, c, x in zip(ids, y, X):
            lines.append(",".join([oid, labels[c], "original"] + [repr(float(v)) for v in x]))
        for i, e in enumerate(plan.entries, start=1):
            lines.append(",".join([f"smote{i:06d}", labels[e.class_index], "synthetic"] + [repr(v) for v in e.features]))
        (d / "features.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    elif method in ("oversample", "undersample", "cluster"):
        if method == "oversample":
            plan = random_oversample(y, C, args.seed)
        elif method == "undersample":
            plan = random_undersample(y, C, args.seed)
        else:
            plan = cluster_oversample(encode_observations(data.observations), y, C, args.clusters, args.seed)
        rows = data.to_rows()
        if method == "undersample":
            out_rows = [rows[e.source] for e in plan.entries]
        else:
            out_rows = list(rows)
            dup_n: dict[int, int] = {}
            for e in plan.entries:
                dup_n[e.source] = dup_n.get(e.source, 0) + 1
                out_rows.append({**rows[e.source], "obs_id": f"{ids[e.source]}~dup{dup_n[e.source]}"})
        write_observation_rows(out_rows, d / "resampled.csv")
    else:
        raise InvalidConfig("--method must be one of smote, cluster, oversample, undersample, weights")

    (d / "plan.tsv").write_text(plan.to_table(ids=ids, labels=labels), encoding="utf-8")
    write_config_echo(args, d / "config.txt")


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        args = parse_args(argv)
        if not args.verbose:
            log.setLevel(logging.WARNING)
        args.func(args)
    except DatasetValidationError as exc:
        for v in exc.violations:
            print(f"error: {v}", file=sys.stderr)
        return EXIT_VALIDATION
    except GeoPriorError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: I/O: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
