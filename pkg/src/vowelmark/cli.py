"""Batch command line: ingest, extract, survey, select, train, cv, pipeline, report.

Exit status is 0 on success, 1 for unusable input and 2 when a computation
fails. ``VOWELMARK_LOG`` sets the log level (default WARNING).
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import featureset, model, select
from .dataset import CorpusError, import_directory, load_corpus, write_manifest

log = logging.getLogger("vowelmark")

EXIT_OK, EXIT_INPUT, EXIT_COMPUTE = 0, 1, 2


class InputError(Exception):
    """Bad arguments or unreadable input files."""


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_table(args) -> featureset.FeatureTable:
    path = Path(args.table) if args.table else Path(args.out) / "features.csv"
    try:
        table = featureset.FeatureTable.from_csv(path)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read feature table: {exc}") from exc
    if args.early:
        table = featureset.early_subset(table)
    if args.subjects:
        ids = _read_list(args.subjects)
        table = table.select_subjects(ids)
    if len(table) == 0:
        raise InputError("no subjects left after filtering")
    return table


def _read_list(path) -> list[str]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(str(exc)) from exc
    return [ln.split("#")[0].strip() for ln in lines if ln.split("#")[0].strip()]


def _subset(args, table) -> list[str]:
    if not args.subset:
        return list(table.names)
    names = _read_list(args.subset)
    unknown = [n for n in names if n not in table.names]
    if unknown:
        raise InputError(f"unknown features in subset: {', '.join(unknown)}")
    if not names:
        raise InputError("empty feature subset")
    return names


def _write_list(path, names):
    Path(path).write_text("".join(f"{n}\n" for n in names), encoding="utf-8")


def _validator(args, table) -> model.CrossValidator:
    if args.loso:
        return model.CrossValidator(table, scheme="loso", threads=args.threads)
    return model.CrossValidator(table, args.folds, args.reps, args.seed, threads=args.threads)


def cmd_ingest(args) -> int:
    out = _out_dir(args)
    try:
        manifest = import_directory(args.import_dir) if args.import_dir else load_corpus(args.manifest)
    except (OSError, CorpusError) as exc:
        raise InputError(str(exc)) from exc
    write_manifest(manifest, out / "manifest.csv")
    c = manifest.counts
    print(f"{c['subjects']} subjects ({c['ALS']} ALS, {c['HC']} HC), {c['entries']} recordings")
    return EXIT_OK


def cmd_extract(args) -> int:
    out = _out_dir(args)
    try:
        manifest = load_corpus(args.manifest)
    except (OSError, CorpusError) as exc:
        raise InputError(str(exc)) from exc
    table, rows = featureset.extract_corpus(manifest, threads=args.threads)
    table.to_csv(out / "features.csv")
    with open(out / "extraction_log.tsv", "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), delimiter="\t", lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    missing = table.missing_counts()
    flagged = {s: m for s, m in missing.items() if m}
    print(f"{len(table)} subjects, {len(table.names)} features; "
          f"{len(flagged)} subjects with missing values")
    return EXIT_OK


def cmd_survey(args) -> int:
    table = _load_table(args)
    out = _out_dir(args)
    try:
        rows = featureset.correlation_survey(table)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    text = featureset.format_survey(rows)
    (out / "survey.txt").write_text(text, encoding="utf-8")
    dens = out / "density"
    dens.mkdir(exist_ok=True)
    for row in rows[:args.top]:
        try:
            curves = featureset.density_export(table.columns([row.feature])[:, 0], table.labels, row.feature)
        except ValueError as exc:
            log.warning("no density for %s: %s", row.feature, exc)
            continue
        curves.to_csv(dens / f"{row.feature}.csv")
    print(featureset.format_survey(rows, args.top), end="")
    return EXIT_OK


def cmd_select(args) -> int:
    table = _load_table(args)
    out = _out_dir(args)
    ranking = select.rank_features(table, args.fs, args.k_neighbors)
    (out / f"ranking_{args.fs}.txt").write_text(ranking.report(), encoding="utf-8")
    print("\n".join(ranking.top(args.top)))
    return EXIT_OK


def cmd_train(args) -> int:
    table = _load_table(args)
    out = _out_dir(args)
    names = _subset(args, table)
    fitted = model.fit_final_model(table, names)
    model.save_model(fitted, out / "model.json")
    labels, _ = model.apply_model(fitted, table)
    m = model.Confusion.from_labels(table.labels, labels)
    r = model.metrics(m.tp, m.tn, m.fp, m.fn)
    print(f"training accuracy {r.accuracy:.1f} % on {len(table)} subjects, {len(names)} features")
    return EXIT_OK


def cmd_cv(args) -> int:
    table = _load_table(args)
    out = _out_dir(args)
    names = _subset(args, table)
    report = _validator(args, table).evaluate(names)
    (out / "cv_report.txt").write_text(report.to_text(), encoding="utf-8")
    print(report.summary())
    return EXIT_OK


def cmd_pipeline(args) -> int:
    table = _load_table(args)
    out = _out_dir(args)
    candidates = _subset(args, table)
    ranking = select.rank_features(table, args.fs, args.k_neighbors)
    (out / f"ranking_{args.fs}.txt").write_text(ranking.report(), encoding="utf-8")
    order = [f for f in ranking.features if f in candidates]
    cv = _validator(args, table)
    limit = min(args.max_features or len(order), len(order))
    best_n, best_acc = 1, -np.inf
    with open(out / "accuracy_curve.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n_features", "acc_mean", "acc_sd", "sens_mean", "sens_sd", "spec_mean", "spec_sd"])
        for n in range(1, limit + 1):
            rep = cv.evaluate(order[:n])
            w.writerow([n] + [f"{v:.4f}" for v in (rep.acc_mean, rep.acc_sd, rep.sens_mean,
                                                    rep.sens_sd, rep.spec_mean, rep.spec_sd)])
            if rep.acc_mean > best_acc:
                best_n, best_acc = n, rep.acc_mean
    log.info("best subset size %d (%.2f %%)", best_n, best_acc)
    bss = select.backward_stepwise(order[:best_n], cv.accuracy)
    (out / "stepwise.txt").write_text(bss.report(), encoding="utf-8")
    _write_list(out / "subset.txt", bss.features)
    final = cv.evaluate(bss.features)
    (out / "report.txt").write_text(
        f"# ranking: {ranking.method}; best N = {best_n} ({best_acc:.4f} %)\n" + final.to_text(),
        encoding="utf-8")
    model.save_model(model.fit_final_model(table, bss.features), out / "model.json")
    print(f"{ranking.method}: N={best_n} -> {len(bss.features)} features after stepwise removal")
    print(final.summary())
    return EXIT_OK


def cmd_report(args) -> int:
    table = _load_table(args)
    out = _out_dir(args)
    try:
        fitted = model.load_model(args.model)
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"cannot read model: {exc}") from exc
    missing = [f for f in fitted.feature_names if f not in table.names]
    if missing:
        raise InputError(f"table lacks model features: {', '.join(missing)}")
    labels, scores = model.apply_model(fitted, table)
    with open(out / "predictions.tsv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["subject_id", "label", "score", "predicted"])
        for sid, lab, s, p in zip(table.subject_ids, table.labels, scores, labels):
            w.writerow([sid, int(lab), f"{s:.6f}", int(p)])
    c = model.Confusion.from_labels(table.labels, labels)
    m = model.metrics(c.tp, c.tn, c.fp, c.fn)
    print(f"TP={c.tp} TN={c.tn} FP={c.fp} FN={c.fn}  "
          f"Acc {m.accuracy:.1f} %  Sens {m.sensitivity:.1f} %  Spec {m.specificity:.1f} %")
    return EXIT_OK


COMMANDS = {
    "ingest": (cmd_ingest, "validate a manifest (or build one from a directory tree)"),
    "extract": (cmd_extract, "compute the 131-feature table"),
    "survey": (cmd_survey, "correlation survey and class density exports"),
    "select": (cmd_select, "rank features"),
    "train": (cmd_train, "train an LDA model on a feature subset"),
    "cv": (cmd_cv, "cross-validate LDA on a feature subset"),
    "pipeline": (cmd_pipeline, "rank, sweep subset size, prune stepwise, train"),
    "report": (cmd_report, "apply a saved model to a feature table"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", help="corpus manifest (subject_id, vowel, label, path)")
    common.add_argument("--table", help="feature table (default: OUT/features.csv)")
    common.add_argument("--out", default="vowelmark-out", help="output directory")
    common.add_argument("--seed", type=int, default=model.DEFAULT_SEED)
    common.add_argument("--folds", type=int, default=8)
    common.add_argument("--reps", type=int, default=40)
    common.add_argument("--loso", action="store_true", help="leave-one-subject-out instead of k-fold")
    common.add_argument("--fs", choices=select.METHODS, default="lasso")
    common.add_argument("--k-neighbors", type=int, default=11)
    common.add_argument("--subset", help="file listing feature names, one per line")
    common.add_argument("--subjects", help="file listing subject ids to keep")
    common.add_argument("--early", action="store_true",
                        help="keep controls and the early-stage ALS speakers only")
    common.add_argument("--max-features", type=int, default=None)
    common.add_argument("--top", type=int, default=10)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--model", help="model file for `report`")
    common.add_argument("--import-dir", help="directory tree of WAV files for `ingest`")

    parser = argparse.ArgumentParser(prog="vowelmark", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=helptext)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("VOWELMARK_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.command in ("ingest",) and not (args.manifest or args.import_dir):
        print("error: --manifest or --import-dir is required", file=sys.stderr)
        return EXIT_INPUT
    if args.command == "extract" and not args.manifest:
        print("error: --manifest is required", file=sys.stderr)
        return EXIT_INPUT
    if args.command == "report" and not args.model:
        print("error: --model is required", file=sys.stderr)
        return EXIT_INPUT
    try:
        return COMMANDS[args.command][0](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
