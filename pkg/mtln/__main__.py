import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from mtln.common.config import ConfigError
from mtln.common.config import load_config
from mtln.common.ellipse import circumference_mm
from mtln.common.ellipse import fit_ellipse
from mtln.common.image import PgmError
from mtln.common.image import read_image
from mtln.common.image import write_pgm
from mtln.evaluate.evaluator import evaluate_model
from mtln.evaluate.evaluator import is_multi_task
from mtln.evaluate.evaluator import predict
from mtln.evaluate.metrics import THRESHOLD
from mtln.evaluate.report import format_summary
from mtln.evaluate.report import format_value
from mtln.evaluate.report import write_metrics
from mtln.evaluate.report import write_tuner_reports
from mtln.preprocess.augment import augment_dataset
from mtln.preprocess.external import load_external
from mtln.preprocess.manifest import ManifestError
from mtln.preprocess.manifest import dataset_paths
from mtln.preprocess.manifest import load_dataset
from mtln.preprocess.manifest import read_manifest
from mtln.preprocess.manifest import save_dataset
from mtln.preprocess.manifest import write_manifest
from mtln.preprocess.phantom import generate_phantoms
from mtln.preprocess.split import split_dataset
from mtln.train.checkpoint import CheckpointError
from mtln.train.checkpoint import load_checkpoint
from mtln.train.checkpoint import restore_params
from mtln.train.logging import Logger
from mtln.train.logging import MLFlowLogger
from mtln.train.logging.logger import BEST_CHECKPOINT
from mtln.train.trainer import NonFiniteLossError
from mtln.train.trainer import train
from mtln.train.trainer import write_loss_log

EXIT_MISSING_INPUT = 1
EXIT_CONFIG = 2
EXIT_NON_FINITE = 3

PREDICTION_FIELDS = [
    "filename",
    "cx",
    "cy",
    "a",
    "b",
    "theta",
    "hc_mm",
    "tuner_cx",
    "tuner_cy",
    "tuner_a",
    "tuner_b",
    "tuner_theta",
    "tuner_hc_mm",
]


def add_common_args(parser):
    parser.add_argument("-c", "--config", help="JSON run configuration file", type=Path)
    parser.add_argument("-s", "--seed", help="Seed overriding the configured one", type=int)
    parser.add_argument("-o", "--out", help="Output directory", type=Path)
    parser.add_argument("-l", "--logging", help="Logging level", default="INFO")


def parse_args(argv=None):
    formatter = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="mtln", formatter_class=formatter)
    subparsers = parser.add_subparsers(dest="command", required=True)

    phantom = subparsers.add_parser(
        "phantom", help="Generate a synthetic phantom dataset", formatter_class=formatter
    )
    add_common_args(phantom)
    phantom.add_argument("-n", "--num", help="Number of phantoms", type=int, default=32)
    phantom.add_argument("--height", help="Frame height, defaults to the config", type=int)
    phantom.add_argument("--width", help="Frame width, defaults to the config", type=int)

    ingest = subparsers.add_parser(
        "ingest", help="Convert an external CSV+PGM dataset", formatter_class=formatter
    )
    add_common_args(ingest)
    ingest.add_argument("--csv", help="External manifest CSV", type=Path, required=True)
    ingest.add_argument("--images", help="Directory of external PGM images", type=Path)

    for name, description in [
        ("augment", "Augment the base images of a dataset with flips and rotations"),
        ("split", "Assign train/val/test splits per base image"),
    ]:
        command = subparsers.add_parser(name, help=description, formatter_class=formatter)
        add_common_args(command)
        command.add_argument("-d", "--dataset", help="Dataset directory", type=Path)

    train_parser = subparsers.add_parser(
        "train", help="Train an MTLN", formatter_class=formatter
    )
    add_common_args(train_parser)
    train_parser.add_argument("-d", "--dataset", help="Dataset directory", type=Path)
    train_parser.add_argument("--checkpoint", help="Checkpoint to resume from", type=Path)
    train_parser.add_argument("--mlflow", help="Log to MLFlow", action="store_true")

    eval_parser = subparsers.add_parser(
        "eval", help="Evaluate a checkpoint on a split", formatter_class=formatter
    )
    add_common_args(eval_parser)
    eval_parser.add_argument("-d", "--dataset", help="Dataset directory", type=Path)
    eval_parser.add_argument("--checkpoint", help="Checkpoint file", type=Path, required=True)
    eval_parser.add_argument("--split", help="Split to evaluate", default="test")
    eval_parser.add_argument(
        "--filled", help="Hausdorff distance over filled regions", action="store_true"
    )

    infer = subparsers.add_parser(
        "infer", help="Predict masks and ellipses for PGM images", formatter_class=formatter
    )
    add_common_args(infer)
    infer.add_argument("--checkpoint", help="Checkpoint file", type=Path, required=True)
    infer.add_argument("--images", help="Directory of PGM images", type=Path, required=True)
    infer.add_argument("--pixel-size", help="Pixel size in mm", type=float, default=0.1)

    return parser.parse_args(argv)


def dataset_dir(args, config):
    dataset = getattr(args, "dataset", None)
    return Path(config["paths"]["dataset"]) if dataset is None else dataset


def out_dir(args, default):
    out = Path(default) if args.out is None else args.out
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_phantom(args, config, executor):
    data = config["data"]
    height = data["height"] if args.height is None else args.height
    width = data["width"] if args.width is None else args.width
    samples = generate_phantoms(args.num, config["seed"], height, width, executor)
    save_dataset(out_dir(args, config["paths"]["dataset"]), samples, executor, config["seed"])


def cmd_ingest(args, config, executor):
    data = config["data"]
    images = args.csv.parent if args.images is None else args.images
    samples = load_external(args.csv, images, (data["external_height"], data["external_width"]))
    save_dataset(out_dir(args, config["paths"]["dataset"]), samples, executor)


def cmd_augment(args, config, executor):
    manifest, samples = load_dataset(dataset_dir(args, config), executor=executor)
    augmented = augment_dataset(samples, executor)
    save_dataset(out_dir(args, dataset_dir(args, config)), augmented, executor, manifest.seed)


def cmd_split(args, config, executor):
    source = dataset_dir(args, config)
    if args.out is not None and args.out != source:
        raise ConfigError("split rewrites the manifest in place, --out must be the dataset")
    manifest_path, _, _ = dataset_paths(source)
    if not manifest_path.exists():
        raise FileNotFoundError(f"No manifest found at {manifest_path}")
    data = config["data"]
    manifest = split_dataset(
        read_manifest(manifest_path), config["seed"], data["test_fraction"], data["val_fraction"]
    )
    write_manifest(manifest_path, manifest)


def cmd_train(args, config, executor):
    run = out_dir(args, config["paths"]["run"])
    checkpoint = None if args.checkpoint is None else load_checkpoint(args.checkpoint)
    if checkpoint is not None:
        config = checkpoint.config
    loggers = [Logger(config["train"]["log_every_n_epoch"], checkpoint_dir=run)]
    if args.mlflow:
        loggers.append(
            MLFlowLogger(
                uri=os.getenv("MLFLOW_SERVER_URI"),
                log_every_n_epoch=config["train"]["log_every_n_epoch"],
            )
        )
    manifest, samples = load_dataset(dataset_dir(args, config), executor=executor)
    best, loss_log = train(config, manifest, samples, loggers, checkpoint, executor)
    (run / "config.json").write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")
    write_loss_log(run / "loss_log.csv", loss_log)
    logging.info(f"Best checkpoint from epoch {best.epoch} written to {run / BEST_CHECKPOINT}")


def cmd_eval(args, config, executor):
    checkpoint = load_checkpoint(args.checkpoint)
    manifest, samples = load_dataset(dataset_dir(args, config), split=args.split, executor=executor)
    evaluation = evaluate_model(
        checkpoint, manifest, samples, args.split, executor, contour=not args.filled
    )
    out = out_dir(args, Path(config["paths"]["run"]) / "eval")
    write_metrics(out / "metrics.csv", evaluation.reports)
    summary = format_summary(evaluation.summary)
    if evaluation.tuner_reports is None:
        summary += "ellipse tuner: absent (single-task checkpoint)\n"
    else:
        write_tuner_reports(out / "tuner.csv", evaluation.tuner_reports)
    (out / "summary.txt").write_text(summary, encoding="utf-8")
    logging.info(f"Summary on split '{args.split}':\n{summary}")


def ellipse_columns(ellipse, pixel_size_mm):
    if ellipse is None:
        return [None] * 6
    return [*ellipse[:5], circumference_mm(ellipse, pixel_size_mm)]


def infer_image(params, with_tuner, pixel_size_mm, path):
    image = read_image(path)
    prediction = predict(params, image)
    mask = prediction.probs >= THRESHOLD
    try:
        fitted = fit_ellipse(mask)
    except ValueError as e:
        logging.warning(f"Caught exception for file={path.name}, error={e}")
        fitted = None
    tuner = prediction.tuner_ellipse.canonical() if with_tuner else None
    try:
        tuner_columns = ellipse_columns(tuner, pixel_size_mm)
    except ValueError as e:
        logging.warning(f"Caught exception for file={path.name}, error={e}")
        tuner_columns = ellipse_columns(None, pixel_size_mm)
    row = [path.name, *ellipse_columns(fitted, pixel_size_mm), *tuner_columns]
    return mask, row


def cmd_infer(args, config, executor):
    checkpoint = load_checkpoint(args.checkpoint)
    params = restore_params(checkpoint)
    if not args.images.is_dir():
        raise FileNotFoundError(f"Image directory {args.images} does not exist")
    paths = sorted(args.images.glob("*.pgm"))
    out = out_dir(args, Path(config["paths"]["run"]) / "infer")
    (out / "masks").mkdir(exist_ok=True)
    with_tuner = is_multi_task(checkpoint)
    rows = []
    for path, (mask, row) in zip(
        paths,
        executor.map(lambda p: infer_image(params, with_tuner, args.pixel_size, p), paths),
    ):
        write_pgm(out / "masks" / f"{path.stem}.pgm", mask)
        rows.append(row)
    with open(out / "predictions.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(PREDICTION_FIELDS)
        writer.writerows([format_value(v) for v in row] for row in rows)
    logging.info(f"Wrote predictions for {len(rows)} images to {out}")


COMMANDS = {
    "phantom": cmd_phantom,
    "ingest": cmd_ingest,
    "augment": cmd_augment,
    "split": cmd_split,
    "train": cmd_train,
    "eval": cmd_eval,
    "infer": cmd_infer,
}


def main(argv=None):
    args = parse_args(argv)
    logging.basicConfig(
        format="%(asctime)s %(levelname)s: %(message)s",
        level=getattr(logging, args.logging.upper()),
        datefmt="%Y-%m-%d %H:%M:%S",
    )
    try:
        overrides = {} if args.seed is None else {"seed": args.seed}
        config = load_config(args.config, overrides)
        with ThreadPoolExecutor(max_workers=config["data"]["workers"]) as executor:
            COMMANDS[args.command](args, config, executor)
    except ConfigError as e:
        logging.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG
    except (FileNotFoundError, ManifestError, CheckpointError, PgmError) as e:
        logging.error(f"Missing or unreadable input: {e}")
        return EXIT_MISSING_INPUT
    except NonFiniteLossError as e:
        logging.error(str(e))
        return EXIT_NON_FINITE
    except ValueError as e:
        logging.error(f"Invalid input: {e}")
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
