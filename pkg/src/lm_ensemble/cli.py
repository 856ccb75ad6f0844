"""Command-line pipeline: validate, run a strategy, evaluate, or synthesize.

Every subcommand writes ``<subcommand>-report.json`` (plus prediction/model
files where applicable) into the working directory unless ``--out DIR`` is
given, and prints an aligned text summary.  Exit codes: 0 success, 1 input
or run failure, 2 usage error.  Set the environment variable
``LM_ENSEMBLE_LOG`` to a level name (e.g. DEBUG) for progress logging.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .classifier import TrainConfig, save_classifier
from .data import (
    AlignmentError,
    EnsembleInput,
    FormatError,
    holdout_split,
    read_labels_csv,
    scan_manifest,
    write_labels_csv,
)
from .deep import DeepTrainConfig, train_deep
from .evaluate import compare, format_table, report_to_dict
from .semi import run_semi
from .shallow import combine_probs, optimize_alpha, predict
from .synth import SCENARIO_NAMES, generate, preset

log = logging.getLogger("lm_ensemble")


# ---------------------------------------------------------------------------
# argparse helpers (range errors at parse time make bad values usage errors)


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer")
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer")
    if value < 0:
        raise argparse.ArgumentTypeError("must be a non-negative integer")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number")
    if not value > 0.0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _nonneg_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number")
    if value < 0.0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def _fraction(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number")
    if not (0.0 < value < 1.0):
        raise argparse.ArgumentTypeError("must lie strictly between 0 and 1")
    return value


# ---------------------------------------------------------------------------
# shared output plumbing


def _out_dir(args) -> Path:
    out = Path(args.out) if args.out else Path.cwd()
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_report(args, name: str, doc: dict) -> Path:
    path = _out_dir(args) / f"{name}-report.json"
    path.write_text(
        json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8"
    )
    return path


def _print_kv(pairs) -> None:
    width = max(len(k) for k, _ in pairs)
    print("\n".join(f"{k.ljust(width)}  {v}" for k, v in pairs))


def _load_input(manifest: str) -> EnsembleInput:
    from .data import load_manifest

    log.info("loading manifest %s", manifest)
    return load_manifest(manifest)


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        hidden_dim=args.hidden,
        seed=args.seed,
    )


def _add_semi_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pca", type=_positive_int, default=None, metavar="DIM",
                   help="project concatenated embeddings to DIM components first")
    p.add_argument("--hidden", type=_positive_int, default=16, metavar="H",
                   help="hidden layer width (default 16)")
    p.add_argument("--lr", type=_positive_float, default=0.1, metavar="LR",
                   help="learning rate (default 0.1)")
    p.add_argument("--epochs", type=_positive_int, default=200, metavar="E",
                   help="training epochs (default 200)")
    p.add_argument("--batch-size", type=_positive_int, default=32, metavar="B",
                   help="mini-batch size (default 32)")
    p.add_argument("--seed", type=int, default=0, metavar="S",
                   help="seed for initialization and shuffling (default 0)")


# ---------------------------------------------------------------------------
# subcommands


def _cmd_validate(args) -> int:
    inp, issues = scan_manifest(args.manifest)
    doc = {
        "manifest": str(args.manifest),
        "valid": not issues,
        "violations": [{"location": i.location, "message": i.message} for i in issues],
    }
    _write_report(args, "validate", doc)
    if issues:
        for issue in issues:
            print(str(issue), file=sys.stderr)
        print(f"{len(issues)} violation(s)", file=sys.stderr)
        return 1
    assert inp is not None
    _print_kv(
        [
            ("manifest", str(args.manifest)),
            ("examples", str(inp.dataset.num_examples)),
            ("classes", str(inp.dataset.num_classes)),
            ("models", ", ".join(inp.model_ids)),
            ("knowledge", "yes" if inp.knowledge is not None else "no"),
            ("violations", "0"),
        ]
    )
    return 0


def _cmd_shallow(args) -> int:
    inp = _load_input(args.manifest)
    m = inp.dataset.num_examples
    subset = None
    eval_rows = None
    if args.split == "holdout":
        train_rows, eval_rows = holdout_split(args.seed, m, args.holdout_frac)
        subset = train_rows
    result = optimize_alpha(
        inp,
        grid_resolution=args.grid,
        random_restarts=args.restarts,
        seed=args.seed,
        row_subset=subset,
    )
    combined = combine_probs(result.weights, inp)
    preds = predict(combined)
    gold = np.asarray(inp.dataset.labels)
    if eval_rows is not None:
        loss = int(np.count_nonzero(preds[eval_rows] != gold[eval_rows]))
        accuracy = 1.0 - loss / eval_rows.size
    else:
        loss, accuracy = result.loss, result.accuracy
    doc = {
        "alpha": [float(a) for a in result.weights.alpha],
        "loss": loss,
        "accuracy": accuracy,
        "evaluations": result.evaluations,
    }
    _write_report(args, "shallow", doc)
    write_labels_csv(_out_dir(args) / "shallow-predictions.csv", inp.dataset.ids, preds)
    _print_kv(
        [
            ("alpha", ", ".join(repr(float(a)) for a in result.weights.alpha)),
            ("split", args.split),
            ("loss", str(loss)),
            ("accuracy", f"{accuracy:.4f}"),
            ("evaluations", str(result.evaluations)),
        ]
    )
    return 0


def _cmd_semi(args) -> int:
    inp = _load_input(args.manifest)
    result = run_semi(inp, _train_config(args), pca_dim=args.pca)
    doc = {
        "loss": result.loss,
        "accuracy": result.accuracy,
        "epochs_run": result.epochs_run,
        "final_train_ce": result.final_train_ce,
    }
    _write_report(args, "semi", doc)
    out = _out_dir(args)
    save_classifier(result.model, out / "semi-classifier.json")
    write_labels_csv(out / "semi-predictions.csv", inp.dataset.ids, result.predictions)
    _print_kv(
        [
            ("loss", str(result.loss)),
            ("accuracy", f"{result.accuracy:.4f}"),
            ("epochs_run", str(result.epochs_run)),
            ("final_train_ce", f"{result.final_train_ce:.6f}"),
        ]
    )
    return 0


def _cmd_deep(args) -> int:
    inp = _load_input(args.manifest)
    config = DeepTrainConfig(
        base=_train_config(args),
        beta_grid_step=args.beta_step,
        rl_weight=args.rl_weight,
        rounds=args.rounds,
    )
    result = train_deep(inp, config, pca_dim=args.pca)
    doc = {
        "beta": result.beta.value,
        "reward": result.reward,
        "loss": result.loss,
        "accuracy": result.accuracy,
        "rounds": result.rounds,
        "trace": [
            {
                "round": t.round,
                "beta": t.beta,
                "reward": t.reward,
                "train_ce": t.train_ce,
                "zero_one": t.zero_one,
            }
            for t in result.trace
        ],
    }
    _write_report(args, "deep", doc)
    out = _out_dir(args)
    save_classifier(result.model, out / "deep-classifier.json")
    write_labels_csv(out / "deep-predictions.csv", inp.dataset.ids, result.predictions)
    _print_kv(
        [
            ("beta", repr(result.beta.value)),
            ("reward", f"{result.reward:.4f}"),
            ("loss", str(result.loss)),
            ("accuracy", f"{result.accuracy:.4f}"),
            ("rounds", str(result.rounds)),
        ]
    )
    return 0


def _strategy_name(path: Path) -> str:
    stem = path.stem
    return stem[: -len("-predictions")] if stem.endswith("-predictions") else stem


def _cmd_eval(args) -> int:
    inp = _load_input(args.manifest)
    ds = inp.dataset
    results = []
    for pred_path in args.pred:
        path = Path(pred_path)
        ids, labels = read_labels_csv(path)
        if tuple(ids) != ds.ids:
            raise FormatError(
                "prediction ids do not match the manifest's labels file", path
            )
        labels = np.asarray(labels)
        bad = np.nonzero(labels >= ds.num_classes)[0]
        if bad.size:
            raise FormatError(
                f"predicted class {labels[bad[0]]} out of range [0, {ds.num_classes - 1}]",
                path,
                int(bad[0]) + 2,
            )
        results.append((_strategy_name(path), labels))
    report = compare(results, ds.labels, args.baseline, test=args.test)
    _write_report(args, "eval", report_to_dict(report))
    print(format_table(report))
    return 0


def _cmd_synth(args) -> int:
    scenario = preset(args.scenario, args.seed)
    manifest = generate(scenario, args.out)
    doc = {
        "scenario": scenario.name,
        "seed": scenario.seed,
        "m": scenario.m,
        "c": scenario.c,
        "n": scenario.n,
        "dims": list(scenario.dims),
        "knowledge_dim": scenario.knowledge_dim,
        "manifest": str(manifest),
    }
    _write_report(args, "synth", doc)
    _print_kv(
        [
            ("scenario", scenario.name),
            ("seed", str(scenario.seed)),
            ("examples", str(scenario.m)),
            ("classes", str(scenario.c)),
            ("models", str(scenario.n)),
            ("manifest", str(manifest)),
        ]
    )
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lm-ensemble",
        description="Ensemble precomputed language-model outputs: weighted "
        "probability fusion, an embedding classifier, and a knowledge-reward "
        "training loop, with validation and evaluation tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a manifest and all referenced files")
    p.add_argument("manifest")
    p.add_argument("--out", metavar="DIR", help="directory for the report (default: cwd)")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("shallow", help="search simplex weights for probability fusion")
    p.add_argument("manifest")
    p.add_argument("--grid", type=_positive_int, default=100, metavar="G",
                   help="lattice resolution (default 100)")
    p.add_argument("--restarts", type=_nonneg_int, default=32, metavar="R",
                   help="coordinate-descent restarts when sampling (default 32)")
    p.add_argument("--seed", type=int, default=0, metavar="S", help="search seed (default 0)")
    p.add_argument("--split", choices=("train", "holdout"), default="holdout",
                   help="tune on everything, or tune on a train part and score "
                   "the holdout part (default holdout)")
    p.add_argument("--holdout-frac", type=_fraction, default=0.2, metavar="F",
                   help="holdout fraction for --split holdout (default 0.2)")
    p.add_argument("--out", metavar="DIR", help="directory for outputs (default: cwd)")
    p.set_defaults(func=_cmd_shallow)

    p = sub.add_parser("semi", help="train the concatenated-embedding classifier")
    p.add_argument("manifest")
    _add_semi_flags(p)
    p.add_argument("--out", metavar="DIR", help="directory for outputs (default: cwd)")
    p.set_defaults(func=_cmd_semi)

    p = sub.add_parser("deep", help="train the classifier with knowledge-reward weighting")
    p.add_argument("manifest")
    _add_semi_flags(p)
    p.add_argument("--lambda", dest="rl_weight", type=_nonneg_float, default=1.0, metavar="L",
                   help="compensator strength; 0 disables it (default 1.0)")
    p.add_argument("--rounds", type=_positive_int, default=None, metavar="R",
                   help="reward/training alternations (default: --epochs)")
    p.add_argument("--beta-step", type=_positive_float, default=0.01, metavar="B",
                   help="grid step for the beta search (default 0.01)")
    p.add_argument("--out", metavar="DIR", help="directory for outputs (default: cwd)")
    p.set_defaults(func=_cmd_deep)

    p = sub.add_parser("eval", help="compare prediction files against a baseline")
    p.add_argument("manifest")
    p.add_argument("--pred", nargs="+", required=True, metavar="FILE",
                   help="prediction CSV files (id,label) aligned to the manifest")
    p.add_argument("--baseline", required=True, metavar="NAME",
                   help="strategy name (prediction file stem) used as the null")
    p.add_argument("--test", choices=("binomial", "mcnemar"), default="binomial",
                   help="significance test (default binomial)")
    p.add_argument("--out", metavar="DIR", help="directory for the report (default: cwd)")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="generate a deterministic synthetic scenario")
    p.add_argument("scenario", type=str.upper, choices=SCENARIO_NAMES,
                   help="scenario letter (complementary experts, separable "
                   "embeddings, knowledge-aligned, adversarial knowledge)")
    p.add_argument("--out", required=True, metavar="DIR", help="output directory")
    p.add_argument("--seed", type=int, default=0, metavar="S", help="generator seed (default 0)")
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None) -> int:
    level = os.environ.get("LM_ENSEMBLE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    try:
        return args.func(args)
    except (FormatError, AlignmentError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
