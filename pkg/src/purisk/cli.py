"""Command-line entry point: train, calibrate, predict, evaluate, report, synth.

Stages talk through files in one output directory, so any stage can be
rerun on its own.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .alpha import calibrate
from .confidence import predict_all, write_predictions_csv
from .config import RunConfig, load_config
from .cv import plans_to_json
from .data import LabelKind, load_dataset, read_labels_csv, write_dataset, write_labels_csv
from .errors import DataIOError, FlatCurve, PuRiskError, ValidationError
from .metrics import build_report, render_markdown
from .scoring import (read_avg_scores_csv, read_scores_csv, run_pipeline, write_avg_scores_csv,
                      write_scores_csv)
from .synth import SynthConfig, generate, read_truth_csv, write_truth_csv

log = logging.getLogger("purisk")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2, 3, 4

EPILOG = """exit codes:
  0  success
  1  usage error (bad arguments)
  2  I/O error (missing or unreadable file)
  3  validation error (bad data, configuration or design preconditions)
  4  numerical error (e.g. flat D curve: no upward bend to locate alpha*)
"""

MANIFEST = "run_manifest.json"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_json(path: Path):
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None


def _require(path: Path) -> Path:
    if not path.is_file():
        raise DataIOError(f"missing input file: {path}")
    return path


def record_stage(out: Path, stage: str, settings: dict, inputs: list[Path],
                 outputs: list[Path]) -> None:
    """Update ``run_manifest.json`` with one stage's settings and content hashes.

    Contains no timestamps, so identical reruns give an identical manifest.
    Settings that differ from the previous run of the same stage are listed
    under ``changed_settings``.
    """
    path = out / MANIFEST
    manifest = _read_json(path) if path.exists() else {}
    previous = manifest.get("stages", {}).get(stage)
    changed = {}
    if previous:
        old = previous.get("settings", {})
        changed = {k: {"previous": old.get(k), "current": v}
                   for k, v in settings.items() if old.get(k) != v}
        changed.update({k: {"previous": v, "current": None}
                        for k, v in old.items() if k not in settings})
        if not changed:
            changed = previous.get("changed_settings", {})
    manifest["tool"] = "purisk"
    manifest["version"] = __version__
    manifest.setdefault("stages", {})[stage] = {
        "settings": settings,
        "inputs": {str(p): sha256(p) for p in inputs},
        "outputs": {p.name: sha256(p) for p in outputs},
        "changed_settings": changed,
    }
    _write_json(path, manifest)


# commands -------------------------------------------------------------------

def cmd_train(cfg: RunConfig) -> int:
    if not cfg.dataset:
        raise DataIOError("no dataset given (use --dataset or the config key 'dataset')")
    data_path = _require(Path(cfg.dataset))
    dataset = load_dataset(data_path)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    saver = None
    if cfg.save_models:
        model_dir = out / "model"
        model_dir.mkdir(exist_ok=True)

        def _save(forest):
            p = forest.provenance
            forest.save(model_dir / f"{p['seed_index']}_{p['fold']}_{p['bag']}.forest")

        saver = _save

    matrix = run_pipeline(dataset, cfg.seed_plan(), cfg.forest_config(), cfg.n_folds, cfg.n_bags,
                          cfg.corr_threshold, cfg.threads, on_forest=saver)
    files = [out / "folds.json", out / "scores.csv", out / "avg_scores.csv", out / "labels.csv",
             out / "training_report.json"]
    _write_json(files[0], plans_to_json(matrix.fold_plans, matrix.bags))
    write_scores_csv(matrix, files[1])
    write_avg_scores_csv(matrix, files[2])
    write_labels_csv(dataset, files[3])
    _write_json(files[4], {
        "n_cases": len(dataset),
        "label_counts": {k.value: v for k, v in sorted(dataset.label_counts().items())},
        "scores_per_case": len(cfg.seeds) * cfg.n_bags,
        "negative_scoring": "per (seed, bag): mean over the fold forests; fold recorded as -1",
        "selection_masks": [
            {"seed": s, "fold": f, "bag": b, **m.to_dict()}
            for (s, f, b), m in sorted(matrix.masks.items())
        ],
    })
    settings = {k: v for k, v in cfg.to_dict().items() if k not in ("threads", "output_dir")}
    record_stage(out, "train", settings, [data_path], files)
    print(f"trained {len(matrix.bags)} forests; scores for {len(matrix.scores())} cases in {out}")
    return EXIT_OK


def cmd_calibrate(cfg: RunConfig) -> int:
    out = Path(cfg.output_dir)
    avg_path, labels_path = _require(out / "avg_scores.csv"), _require(out / "labels.csv")
    avg = read_avg_scores_csv(avg_path)
    labels = read_labels_csv(labels_path)
    missing = sorted(set(avg) - set(labels))
    if missing:
        raise ValidationError(f"{len(missing)} scored case(s) lack labels, e.g. {missing[0]!r}")
    yp = [v for c, v in avg.items() if labels[c].label == LabelKind.POSITIVE]
    yu = [v for c, v in avg.items() if labels[c].label == LabelKind.UNLABELED]
    cal = calibrate(yp, yu, list(avg.values()), cfg.bandwidth_rule(), cfg.alpha_grid_step,
                    cfg.median_window, allow_flat=True)
    result = cal.to_json()
    result["n_positive"], result["n_unlabeled"], result["n_scored"] = len(yp), len(yu), len(avg)
    if cal.threshold is not None:
        n_pos = sum(v > cal.threshold for v in avg.values())
        result["n_predicted_positive"] = n_pos
    target = out / "calibration.json"
    _write_json(target, result)
    settings = {"alpha_grid_step": cfg.alpha_grid_step, "median_window": cfg.median_window,
                "bandwidth": cfg.bandwidth}
    record_stage(out, "calibrate", settings, [avg_path, labels_path], [target])
    if cal.alpha_star is None:
        print(f"warning: {cal.diagnostics[0]}; partial calibration written to {target}",
              file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"alpha* = {cal.alpha_star:.3f}, threshold = {cal.threshold:.6f}")
    return EXIT_OK


def cmd_predict(cfg: RunConfig) -> int:
    out = Path(cfg.output_dir)
    cal_path = _require(out / "calibration.json")
    cal = _read_json(cal_path)
    if cal.get("threshold") is None:
        raise FlatCurve("calibration has no threshold (alpha* could not be located)")
    scores_path = _require(out / "scores.csv")
    matrix = read_scores_csv(scores_path)
    preds = predict_all(matrix.scores(), matrix.avg_scores(), cal["threshold"])
    target = out / "predictions.csv"
    write_predictions_csv(preds, target)
    record_stage(out, "predict", {}, [scores_path, cal_path], [target])
    n_pos = sum(p.is_positive for p in preds)
    print(f"{n_pos} of {len(preds)} cases predicted positive")
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig, truth_path: str | None = None) -> int:
    from .confidence import read_predictions_csv

    out = Path(cfg.output_dir)
    pred_path, labels_path = _require(out / "predictions.csv"), _require(out / "labels.csv")
    inputs = [pred_path, labels_path]
    preds = read_predictions_csv(pred_path)
    labels = read_labels_csv(labels_path)
    cal_path = out / "calibration.json"
    calibration = _read_json(cal_path) if cal_path.exists() else None
    if calibration is not None:
        inputs.append(cal_path)
    truth = None
    if truth_path:
        inputs.append(_require(Path(truth_path)))
        truth = read_truth_csv(truth_path)
    missing = [p.case_id for p in preds if p.case_id not in labels]
    if missing:
        raise ValidationError(f"{len(missing)} prediction(s) lack labels, e.g. {missing[0]!r}")
    report = build_report(preds, labels, cfg.confidence_cutoff, truth, calibration)
    target = out / "report.json"
    _write_json(target, report)
    record_stage(out, "evaluate", {"confidence_cutoff": cfg.confidence_cutoff,
                                   "truth": truth_path}, inputs, [target])
    r, s = report["global_recall"], report["global_specificity"]
    fmt = lambda x: "absent" if x["value"] is None else f"{x['value']:.3f} (n={x['n']})"
    print(f"recall {fmt(r)}; specificity {fmt(s)}")
    return EXIT_OK


def cmd_report(cfg: RunConfig) -> int:
    out = Path(cfg.output_dir)
    src = _require(out / "report.json")
    target = out / "report.md"
    target.write_text(render_markdown(_read_json(src)), encoding="utf-8")
    record_stage(out, "report", {}, [src], [target])
    print(f"wrote {target}")
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = SynthConfig(n_total=args.n_total, true_alpha=args.true_alpha,
                      label_fraction=args.label_fraction, separation=args.separation,
                      n_features=args.n_features, n_sources=args.n_sources, seed=args.seed,
                      n_certified_negatives=args.n_negatives)
    dataset, truth = generate(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_dataset(dataset, out / "dataset.csv")
    write_truth_csv(truth, out / "truth.csv")
    print(f"wrote {len(dataset)} cases to {out / 'dataset.csv'} (truth in {out / 'truth.csv'})")
    return EXIT_OK


# argument parsing -------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat TOML file with RunConfig keys")
    p.add_argument("--out", dest="output_dir", help="output directory (config: output_dir)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="purisk", description=__doc__.splitlines()[0],
                     epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"purisk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="cross-validated bagged forests -> scores",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    _common(p)
    p.add_argument("--dataset")
    p.add_argument("--seeds", type=int, nargs="+")
    p.add_argument("--n-folds", type=int)
    p.add_argument("--n-bags", type=int)
    p.add_argument("--n-trees", type=int)
    p.add_argument("--mtry", type=int)
    p.add_argument("--min-node-size", type=int)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--bootstrap-fraction", type=float)
    p.add_argument("--corr-threshold", type=float)
    p.add_argument("--threads", type=int, help="worker threads; outputs do not depend on it")
    p.add_argument("--save-models", action="store_true", default=None)

    p = sub.add_parser("calibrate", help="estimate alpha* and the threshold",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    _common(p)
    p.add_argument("--alpha-grid-step", type=float)
    p.add_argument("--median-window", type=int)
    p.add_argument("--bandwidth", help="'silverman' or a fixed positive bandwidth")

    for name, text in (("predict", "classify and attach Beta confidence"),
                       ("report", "render report.md from report.json")):
        p = sub.add_parser(name, help=text, epilog=EPILOG,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        _common(p)

    p = sub.add_parser("evaluate", help="recall, specificity and fairness tables",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    _common(p)
    p.add_argument("--confidence-cutoff", type=float)
    p.add_argument("--truth", help="truth.csv from 'synth' for ground-truth metrics")

    p = sub.add_parser("synth", help="write a synthetic dataset with known truth",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    d = SynthConfig()
    p.add_argument("--out", required=True)
    p.add_argument("--n-total", type=int, default=d.n_total)
    p.add_argument("--true-alpha", type=float, default=d.true_alpha)
    p.add_argument("--label-fraction", type=float, default=d.label_fraction)
    p.add_argument("--separation", type=float, default=d.separation)
    p.add_argument("--n-features", type=int, default=d.n_features)
    p.add_argument("--n-sources", type=int, default=d.n_sources)
    p.add_argument("--n-negatives", type=int, default=d.n_certified_negatives)
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


_OVERRIDES = ("dataset", "seeds", "n_folds", "n_bags", "n_trees", "mtry", "min_node_size",
              "max_depth", "bootstrap_fraction", "corr_threshold", "threads", "save_models",
              "alpha_grid_step", "median_window", "bandwidth", "confidence_cutoff", "output_dir")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            return cmd_synth(args)
        overrides = {k: getattr(args, k, None) for k in _OVERRIDES}
        cfg = load_config(args.config, overrides)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "calibrate":
            return cmd_calibrate(cfg)
        if args.command == "predict":
            return cmd_predict(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.truth)
        return cmd_report(cfg)
    except PuRiskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
