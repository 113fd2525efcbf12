"""``accpulse`` command line: synth, extract, train, evaluate, predict.

Exit codes: 0 success, 2 usage or data error, 3 internal assertion.
"""

from __future__ import annotations

import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import __version__, evaluation, svm
from .errors import AccPulseError, ConfigError, SingleClassError
from .features import FEATURE_NAMES, feature_indices, resolve_feature_set
from .files import (REJECTION_COLUMNS, atomic_write_text, csv_text, feature_rows, fmt,
                    read_case, read_features, write_case, write_features)
from .pipeline import find_case_dirs, process_case_dir
from .synth import corpus_from_config, generate_case

log = logging.getLogger("accpulse")

EXIT_DATA = 2
EXIT_ASSERT = 3


def _feature_set(ctx, param, value):
    try:
        return resolve_feature_set(value)
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from exc


def _positive(ctx, param, value):
    if value is not None and value <= 0:
        raise click.BadParameter("must be positive")
    return value


@click.group()
@click.version_option(__version__, prog_name="accpulse")
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def cli(verbose):
    """Circulation detection from accelerometer and ECG signals."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


# --------------------------------------------------------------------------
# synth
# --------------------------------------------------------------------------


@cli.command()
@click.argument("config_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_dir", type=click.Path(file_okay=False))
def synth(config_file, out_dir):
    """Generate a synthetic corpus described by CONFIG_FILE into OUT_DIR."""
    try:
        config = json.loads(Path(config_file).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{config_file}: invalid JSON ({exc})") from exc
    cases = corpus_from_config(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for params in cases:
        rec, _ = generate_case(params)
        write_case(rec, out / params.patient_id)
    click.echo(f"wrote {len(cases)} cases to {out}")


# --------------------------------------------------------------------------
# extract
# --------------------------------------------------------------------------


@cli.command()
@click.argument("in_dirs", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("-o", "--out", "out_csv", required=True, type=click.Path(dir_okay=False),
              help="Feature CSV to write.")
@click.option("--rejections", type=click.Path(dir_okay=False),
              help="Rejection log CSV (default: <out>.rejected.csv).")
@click.option("--jobs", default=1, show_default=True, callback=_positive,
              help="Worker processes.")
def extract(in_dirs, out_csv, rejections, jobs):
    """Cut, prefilter and featurise every case in IN_DIRS.

    A directory without a signals.csv of its own is treated as a corpus
    and its case subdirectories are processed in name order.
    """
    dirs = find_case_dirs(in_dirs)
    if jobs > 1 and len(dirs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(process_case_dir, dirs))
    else:
        results = [process_case_dir(d) for d in dirs]
    records = [r for acc, _ in results for r in acc]
    rejected = [r for _, rej in results for r in rej]
    write_features(out_csv, feature_rows(records))
    rej_path = rejections or str(out_csv) + ".rejected.csv"
    atomic_write_text(rej_path, csv_text(REJECTION_COLUMNS,
                                         [(p, fmt(t), r) for p, t, r in rejected]))
    click.echo(f"{len(dirs)} cases: {len(records)} snippets accepted, "
               f"{len(rejected)} rejected")


# --------------------------------------------------------------------------
# train
# --------------------------------------------------------------------------


def _load_table(path):
    table = read_features(path)
    if len(table) == 0:
        raise SingleClassError(f"{path}: no snippets")
    if np.unique(table.labels).size < 2:
        raise SingleClassError(f"{path}: all snippets carry the same label")
    return table


@cli.command()
@click.argument("features_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--out", "out_model", required=True, type=click.Path(dir_okay=False),
              help="Model JSON to write.")
@click.option("--gamma", type=float, callback=_positive, help="Fixed RBF width.")
@click.option("--c", "c_value", type=float, callback=_positive, help="Fixed box constraint.")
@click.option("--grid", is_flag=True, help="Select (gamma, C) by grouped CV on the 240-point grid.")
@click.option("--folds", default=20, show_default=True, callback=_positive)
@click.option("--features", "names", default="all", show_default=True, callback=_feature_set,
              help="all, ecg-only, acc-only or comma-separated names (v1,v2,...).")
@click.option("--seed", default=0, show_default=True, type=click.IntRange(min=0))
@click.option("--jobs", default=1, show_default=True, callback=_positive)
@click.option("--cv-table", type=click.Path(dir_okay=False), help="Also write the CV table as CSV.")
def train(features_csv, out_model, gamma, c_value, grid, folds, names, seed, jobs, cv_table):
    """Train a calibrated SVM on FEATURES_CSV."""
    if grid == (gamma is not None or c_value is not None):
        raise click.UsageError("give either --grid or both --gamma and --c")
    if not grid and (gamma is None or c_value is None):
        raise click.UsageError("--gamma and --c must be given together")
    table = _load_table(features_csv)
    X = table.X[:, feature_indices(names)]
    if grid:
        res = svm.grid_search_cv(X, table.labels, table.patient_ids, n_folds=folds,
                                 seed=seed, jobs=jobs)
        gamma, c_value = res.gamma, res.C
        rows = [(fmt(r["gamma"]), fmt(r["C"]), fmt(r["mean_balanced_accuracy"]))
                for r in res.table]
        text = csv_text(("gamma", "C", "mean_balanced_accuracy"), rows)
        click.echo(text, nl=False)
        if cv_table:
            atomic_write_text(cv_table, text)
    model = svm.fit_model(X, table.labels, gamma, c_value, groups=table.patient_ids,
                          seed=seed, feature_order=names)
    svm.save_model(model, out_model)
    click.echo(f"selected gamma={gamma!r} C={c_value!r}; "
               f"{model.support_vectors.shape[0]} support vectors, "
               f"{len(names)} features")


# --------------------------------------------------------------------------
# evaluate
# --------------------------------------------------------------------------


@cli.command()
@click.argument("features_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--splits", default=50, show_default=True, callback=_positive)
@click.option("--feature-set", "names", default="all", show_default=True,
              callback=_feature_set, help="all, ecg-only, acc-only or a comma list.")
@click.option("--folds", default=20, show_default=True, callback=_positive)
@click.option("--seed", default=0, show_default=True, type=click.IntRange(min=0))
@click.option("--jobs", default=1, show_default=True, callback=_positive)
@click.option("--out", "out_json", required=True, type=click.Path(dir_okay=False),
              help="Report JSON.")
@click.option("--roc", "roc_csv", type=click.Path(dir_okay=False),
              help="Mean ROC CSV (fpr, tpr_mean, tpr_lo, tpr_hi).")
@click.option("--plot", "plot_svg", type=click.Path(dir_okay=False), help="ROC plot (SVG).")
def evaluate(features_csv, splits, names, folds, seed, jobs, out_json, roc_csv, plot_svg):
    """Repeated patient-wise train/test evaluation on FEATURES_CSV."""
    table = _load_table(features_csv)
    report = evaluation.run_protocol(table.X, table.labels, table.patient_ids,
                                     n_splits=splits, folds=folds, feature_names=names,
                                     master_seed=seed, rhythms=table.rhythms, jobs=jobs)
    atomic_write_text(out_json, json.dumps(report.to_dict(), indent=1) + "\n")
    roc = report.roc_mean
    if roc_csv:
        rows = zip(*(map(fmt, roc[k]) for k in ("fpr", "tpr_mean", "tpr_lo", "tpr_hi")))
        atomic_write_text(roc_csv, csv_text(("fpr", "tpr_mean", "tpr_lo", "tpr_hi"),
                                            list(rows) if roc["tpr_mean"] else []))
    if plot_svg and roc["tpr_mean"]:
        from .plots import roc_svg

        roc_svg(plot_svg, [(f"{len(names)} features", roc)])
    for name in evaluation.METRICS:
        if name in report.aggregate:
            a = report.aggregate[name]
            click.echo(f"{name:18s} {a['mean']:.3f} ({a['ci_lo']:.3f}, {a['ci_hi']:.3f})")
    if report.failed_splits:
        click.echo(f"{len(report.failed_splits)} of {splits} splits failed; see report",
                   err=True)


# --------------------------------------------------------------------------
# predict
# --------------------------------------------------------------------------


@cli.command()
@click.argument("model_json", type=click.Path(exists=True, dir_okay=False))
@click.argument("case_dir", type=click.Path(exists=True, file_okay=False))
@click.option("-o", "--out", "out_csv", required=True, type=click.Path(dir_okay=False),
              help="Timeline CSV.")
@click.option("--plot", "plot_svg", type=click.Path(dir_okay=False), help="Timeline plot (SVG).")
def predict(model_json, case_dir, out_csv, plot_svg):
    """Per-snippet P(SC) timeline for CASE_DIR."""
    model = svm.load_model(model_json)
    if not set(model.feature_order or FEATURE_NAMES) <= set(FEATURE_NAMES):
        raise ConfigError(f"{model_json}: unknown feature names in model")
    rec = read_case(case_dir)
    points = evaluation.timeline(model, rec)
    if not points:
        click.echo(f"warning: {case_dir}: no accepted snippets", err=True)
    rows = [(fmt(p.start_time_s), fmt(p.probability), str(p.label),
             fmt(p.smoothed_probability)) for p in points]
    atomic_write_text(out_csv, csv_text(("start_time_s", "prob", "label", "prob_smoothed"),
                                        rows))
    if plot_svg and points:
        from .plots import timeline_svg

        timeline_svg(plot_svg, points, rec)
    click.echo(f"{len(points)} snippets")


def main(argv=None) -> int:
    """Entry point; maps errors to exit codes instead of tracebacks."""
    try:
        cli.main(args=argv, prog_name="accpulse", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.UsageError as exc:
        exc.show()
        return EXIT_DATA
    except click.ClickException as exc:
        exc.show()
        return EXIT_DATA
    except (AccPulseError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA
    except AssertionError as exc:
        click.echo(f"internal error: {exc}", err=True)
        return EXIT_ASSERT
    return 0


if __name__ == "__main__":
    sys.exit(main())
