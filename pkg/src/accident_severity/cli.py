"""Command-line pipeline: clean, eda, screen, split, balance, train, evaluate,
importance, roc, compare and repro.

Stages hand off through files in the output directory, and every stage
records its artifacts in ``manifest.json`` there.  Exit codes: 0 success,
1 computation error, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, screening
from .config import ConfigError, PipelineConfig, load_config
from .encoding import MODEL_FEATURES, model_feature_columns
from .evaluate import (
    EvaluationError, auc, compare_models, confusion, cv_auc, metrics, report_json, roc_curve,
)
from .forest import DecisionTree, ModelFormatError, importance_mdg, load_model, save_model, train_forest
from .partition import kfold_indices, rebalance, train_test_split
from .prep import clean, resolve_column
from .table import (
    TableError, group_count, missingness_report, read_csv, read_schema, write_csv, write_schema,
)

logger = logging.getLogger("accident_severity")

KAGGLE_URL = "https://www.kaggle.com/datasets/sobhanmoosavi/us-accidents"

# reference results for the California 500-tree run, used by the repro divergence report
REFERENCE = {
    "accuracy": 0.812,
    "auc": 0.800,
    "sensitivity": 0.792,
    "specificity": 0.898,
    "ppv": 0.971,
    "f1": 0.873,
    "top6": ("Wind_Speed(mph)", "Pressure(in)", "Humidity(%)", "Clear", "Visibility(mi)", "Cloud"),
}
REPRO_TOLERANCE = 0.03
EDA_GROUPS = ("Month", "Timezone", "Day", "State")


class InputError(Exception):
    """Missing or unusable input; exit code 2."""


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """One command's view of the output directory and its manifest entry."""

    def __init__(self, cfg: PipelineConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.out = Path(cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.artifacts: dict[str, str] = {}
        self.inputs: dict[str, str] = {}
        self.started = time.perf_counter()

    def path(self, name) -> Path:
        return self.out / name

    def require(self, name, producer) -> Path:
        p = self.path(name)
        if not p.exists():
            raise InputError(f"{p} not found; run `{producer}` first")
        self.inputs[name] = _sha256(p)
        return p

    def write_text(self, name, text):
        p = self.path(name)
        p.write_text(text, encoding="utf-8")
        self.artifacts[name] = _sha256(p)

    def write_json(self, name, doc):
        self.write_text(name, report_json(doc))

    def write_table(self, name, table):
        write_csv(table, self.path(name))
        self.artifacts[name] = _sha256(self.path(name))
        schema_name = name.rsplit(".", 1)[0] + ".schema.json"
        write_schema(table.schema, self.path(schema_name))
        self.artifacts[schema_name] = _sha256(self.path(schema_name))

    def read_table(self, name, producer):
        p = self.require(name, producer)
        schema_path = self.path(name.rsplit(".", 1)[0] + ".schema.json")
        schema = read_schema(schema_path) if schema_path.exists() else None
        return read_csv(p, schema, self.cfg.missing_markers)

    def finish(self):
        manifest_path = self.path("manifest.json")
        manifest = {}
        if manifest_path.exists():
            try:
                manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            except json.JSONDecodeError:
                manifest = {}
        manifest["tool"] = "accident-severity"
        manifest["version"] = __version__
        manifest["config"] = self.cfg.snapshot()
        stages = manifest.setdefault("stages", {})
        stages[self.command] = {
            "seconds": round(time.perf_counter() - self.started, 3),
            "seed": self.cfg.seed,
            "inputs": dict(sorted(self.inputs.items())),
            "artifacts": dict(sorted(self.artifacts.items())),
        }
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# -- stage implementations -------------------------------------------------------------------


def cmd_clean(cfg: PipelineConfig) -> None:
    if not cfg.input:
        raise InputError("no input CSV given (use --input or `input =` in the config)")
    src = Path(cfg.input)
    if not src.is_file():
        raise InputError(f"input file not found: {src}")
    run = Run(cfg, "clean")
    run.inputs[str(src)] = _sha256(src)
    raw = read_csv(src, missing_markers=cfg.missing_markers)
    report = missingness_report(raw)
    run.write_text("missingness.tsv", report.to_tsv())
    run.write_json("missingness.json", report.to_dict())
    try:
        cleaned, summary = clean(raw, cfg.cleaning)
    except ValueError as exc:
        raise ValueError(f"clean stage failed: {exc}") from exc
    run.write_table("cleaned.csv", cleaned)
    run.write_json("clean_summary.json", dict(summary.to_dict(), seed=cfg.seed))
    run.write_text("clean_log.txt", summary.to_text())
    run.finish()


def cmd_eda(cfg: PipelineConfig) -> None:
    run = Run(cfg, "eda")
    t = run.read_table("cleaned.csv", "clean")
    doc = {}
    for col in (cfg.target,) + EDA_GROUPS:
        name = resolve_column(t, col)
        if name is None:
            raise InputError(f"column {col!r} not in cleaned table")
        ft = group_count(t, name)
        run.write_text(f"eda_{col.lower()}.tsv", ft.to_tsv())
        doc[col] = ft.to_dict()
    run.write_json("eda.json", doc)
    run.finish()


def cmd_screen(cfg: PipelineConfig) -> None:
    run = Run(cfg, "screen")
    t = run.read_table("cleaned.csv", "clean")
    _check_target(t, cfg)
    rows = screening.screen_all(t, cfg.target, cfg.alpha)
    run.write_text("screening.tsv", screening.to_tsv(rows))
    run.write_text("screening.json", screening.to_json(rows))
    run.finish()


def _check_target(t, cfg):
    if cfg.target not in t:
        raise InputError(f"target column {cfg.target!r} not in table")
    levels = set(t.values(cfg.target).tolist())
    if cfg.positive not in levels:
        raise InputError(f"positive label {cfg.positive!r} not among target levels {sorted(map(str, levels))}")


def cmd_split(cfg: PipelineConfig) -> None:
    run = Run(cfg, "split")
    t = run.read_table("cleaned.csv", "clean")
    _check_target(t, cfg)
    if cfg.rebalance_order == "before_split":
        t = rebalance(t, cfg.target, cfg.rebalance())
    split = train_test_split(t, cfg.split_ratio, cfg.seed, cfg.target if cfg.stratify else None)
    run.write_table("train.csv", split.train)
    run.write_table("test.csv", split.test)
    run.write_json("split.json", {
        "seed": cfg.seed, "ratio": cfg.split_ratio, "stratified": cfg.stratify,
        "rebalance_order": cfg.rebalance_order,
        "n_train": split.train.row_count, "n_test": split.test.row_count,
        "train_classes": group_count(split.train, cfg.target).as_dict(),
        "test_classes": group_count(split.test, cfg.target).as_dict(),
    })
    run.finish()


def cmd_balance(cfg: PipelineConfig) -> None:
    run = Run(cfg, "balance")
    t = run.read_table("train.csv", "split")
    if cfg.rebalance_order == "train":
        out = rebalance(t, cfg.target, cfg.rebalance())
        note = f"{cfg.rebalance_mode} to ratio {cfg.target_ratio}"
    else:
        out = t
        note = f"training partition left as is (rebalance_order = {cfg.rebalance_order})"
    run.write_table("train_balanced.csv", out)
    run.write_json("balance.json", {
        "seed": cfg.seed, "note": note,
        "before": group_count(t, cfg.target).as_dict(), "after": group_count(out, cfg.target).as_dict(),
    })
    run.finish()


def _training_table(run):
    if run.path("train_balanced.csv").exists():
        return run.read_table("train_balanced.csv", "balance")
    return run.read_table("train.csv", "split")


def _feature_columns(run, t):
    cfg = run.cfg
    if cfg.features is not None:
        cols = model_feature_columns(t, cfg.include_coordinates, cfg.features)
    elif any(resolve_column(t, f) is not None for f in MODEL_FEATURES):
        cols = model_feature_columns(t, cfg.include_coordinates)
    else:
        cols = [s.name for s in t.schema if s.name != cfg.target and s.kind in ("numeric", "boolean", "categorical")]
    if cfg.screen_filter:
        run.require("screening.json", "screen")
        rows = json.loads(run.path("screening.json").read_text(encoding="utf-8"))
        keep = {r["variable"] for r in rows if r["decision"] == "important"}
        cols = [c for c in cols if c in keep]
    if not cols:
        raise InputError("no feature columns selected for training")
    return cols


def _fit(cfg, t, features, estimator=None):
    return train_forest(t, cfg.target, cfg.forest(), features=features, pos_label=cfg.positive, estimator=estimator)


def cmd_train(cfg: PipelineConfig) -> None:
    run = Run(cfg, "train")
    t = _training_table(run)
    _check_target(t, cfg)
    features = _feature_columns(run, t)
    model = _fit(cfg, t, features)
    save_model(model, run.path("model.rf"))
    run.artifacts["model.rf"] = _sha256(run.path("model.rf"))
    info = {
        "seed": cfg.seed, "n_rows": t.row_count, "n_trees": cfg.n_trees,
        "features": features, "classes": group_count(t, cfg.target).as_dict(),
    }
    if cfg.oob:
        info["oob_accuracy"] = model.forest.oob_score_
    run.write_json("train.json", info)
    run.finish()


def _load_model(run):
    try:
        return load_model(run.require("model.rf", "train"))
    except ModelFormatError as exc:
        raise InputError(str(exc)) from exc


def _score_table(model, t):
    return model.forest.predict_proba_positive(model.design(t))


def cmd_evaluate(cfg: PipelineConfig) -> None:
    run = Run(cfg, "evaluate")
    model = _load_model(run)
    test = run.read_table("test.csv", "split")
    _check_target(test, cfg)
    actual = test.values(cfg.target)
    scores = _score_table(model, test)
    predicted = model.forest.predict(model.design(test))
    report = metrics(confusion(actual, predicted, cfg.positive))
    doc = report.to_dict()
    doc["seed"] = cfg.seed
    try:
        doc["auc"] = auc(scores, actual, cfg.positive)
    except EvaluationError as exc:
        doc["auc"] = None
        logger.warning("test AUC undefined: %s", exc)
    lines = ["score\tactual"] + [f"{s!r}\t{a}" for s, a in zip(scores.tolist(), actual.tolist())]
    run.write_text("scores.tsv", "\n".join(lines) + "\n")
    if cfg.cv_folds >= 2:
        est = _cross_validated_auc(run, model)
        run.write_text("cv_auc.tsv", est.to_tsv())
        run.write_json("cv_auc.json", dict(est.to_dict(), seed=cfg.seed))
        doc["cv_auc"] = est.to_dict()
    run.write_text("metrics.tsv", report.to_tsv())
    run.write_json("metrics.json", doc)
    run.finish()


def _cross_validated_auc(run, model):
    """k-fold AUC on the unbalanced training partition; each fold is rebalanced like the full run."""
    cfg = run.cfg
    t = run.read_table("train.csv", "split")
    features = list(model.encoder.columns)
    folds = []
    for k, (tr, te) in enumerate(kfold_indices(t.values(cfg.target), cfg.cv_folds, cfg.seed)):
        fold_train = t.take(tr)
        if cfg.rebalance_order == "train":
            fold_train = rebalance(fold_train, cfg.target, cfg.rebalance())
        fold_model = _fit(cfg, fold_train, features)
        held = t.take(te)
        folds.append((_score_table(fold_model, held), held.values(cfg.target)))
    return cv_auc(folds, cfg.positive)


def cmd_roc(cfg: PipelineConfig) -> None:
    run = Run(cfg, "roc")
    p = run.require("scores.tsv", "evaluate")
    scores, actual = [], []
    for line in p.read_text(encoding="utf-8").splitlines()[1:]:
        s, a = line.split("\t", 1)
        scores.append(float(s))
        actual.append(a)
    curve = roc_curve(scores, actual, cfg.positive)
    run.write_text("roc.tsv", curve.to_tsv())
    run.write_text("roc.svg", curve.to_svg("Hit rate vs false alarm"))
    run.finish()


def cmd_importance(cfg: PipelineConfig) -> None:
    run = Run(cfg, "importance")
    model = _load_model(run)
    per_col = importance_mdg(model)
    grouped = importance_mdg(model, aggregate=True)
    run.write_text("importance.tsv", _importance_tsv(per_col))
    run.write_text("importance_grouped.tsv", _importance_tsv(grouped))
    top = per_col[0][1] if per_col and per_col[0][1] > 0 else 1.0
    bars = ["variable\tMeanDecreaseGini\trelative"] + [f"{n}\t{v:.6f}\t{v / top:.6f}" for n, v in per_col]
    run.write_text("importance_bars.tsv", "\n".join(bars) + "\n")
    run.finish()


def _importance_tsv(pairs):
    return "\n".join(["Variable\tMeanDecreaseGini"] + [f"{n}\t{v:.2f}" for n, v in pairs]) + "\n"


def cmd_compare(cfg: PipelineConfig) -> None:
    run = Run(cfg, "compare")
    t = _training_table(run)
    test = run.read_table("test.csv", "split")
    _check_target(t, cfg)
    if run.path("model.rf").exists():
        forest_model = _load_model(run)
        features = list(forest_model.encoder.columns)
    else:
        features = _feature_columns(run, t)
        forest_model = _fit(cfg, t, features)
    tree_model = _fit(cfg, t, features, DecisionTree(random_state=cfg.seed, pos_label=cfg.positive))
    actual = test.values(cfg.target)
    reports = []
    for m in (tree_model, forest_model):
        reports.append(metrics(confusion(actual, m.forest.predict(m.design(test)), cfg.positive)))
    comp = compare_models(reports[0], reports[1])
    run.write_text("comparison.tsv", comp.to_tsv())
    run.write_json("comparison.json", dict(comp.to_dict(), seed=cfg.seed))
    run.finish()


def cmd_repro(cfg: PipelineConfig) -> None:
    if not cfg.input or not Path(cfg.input).is_file():
        raise InputError(
            f"the US-Accidents CSV was not found at {cfg.input!r}. Download it from {KAGGLE_URL} "
            "and pass its path with --input; it is never bundled."
        )
    if not cfg.cleaning.state_filter:
        cfg.cleaning.state_filter = "CA"
    for stage in (cmd_clean, cmd_eda, cmd_screen, cmd_split, cmd_balance, cmd_train, cmd_evaluate,
                  cmd_roc, cmd_importance, cmd_compare):
        logger.info("repro: %s", stage.__name__)
        stage(cfg)
    run = Run(cfg, "repro")
    doc = divergence_report(
        json.loads(run.require("metrics.json", "evaluate").read_text(encoding="utf-8")),
        run.require("importance_grouped.tsv", "importance").read_text(encoding="utf-8"),
    )
    doc["seed"] = cfg.seed
    run.write_json("divergence.json", doc)
    lines = ["quantity\tcomputed\treference\tverdict"]
    for row in doc["rows"]:
        lines.append(f"{row['quantity']}\t{row['computed']}\t{row['reference']}\t{row['verdict']}")
    run.write_text("divergence.tsv", "\n".join(lines) + "\n")
    run.finish()


def divergence_report(metrics_doc: dict, importance_tsv: str) -> dict:
    """Compare a full run against the reference California results."""
    rows = []
    for key in ("accuracy", "auc", "sensitivity", "specificity", "ppv", "f1"):
        got = metrics_doc.get(key)
        ref = REFERENCE[key]
        if key in ("accuracy", "auc"):
            ok = got is not None and abs(got - ref) <= REPRO_TOLERANCE
            verdict = "pass" if ok else "fail"
        else:
            verdict = "info"
        rows.append({"quantity": key, "computed": got, "reference": ref, "verdict": verdict})
    top = [line.split("\t")[0] for line in importance_tsv.splitlines()[1:7]]
    ref_top = {n.split("(")[0].lower() for n in REFERENCE["top6"]}
    overlap = sum(1 for n in top if n.split("(")[0].lower() in ref_top)
    rows.append({
        "quantity": "top6_mdg_overlap", "computed": overlap, "reference": 6,
        "verdict": "pass" if overlap >= 4 else "fail",
    })
    return {"rows": rows, "top6": top, "tolerance": REPRO_TOLERANCE}


COMMANDS = {
    "clean": cmd_clean,
    "eda": cmd_eda,
    "screen": cmd_screen,
    "split": cmd_split,
    "balance": cmd_balance,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "roc": cmd_roc,
    "importance": cmd_importance,
    "compare": cmd_compare,
    "repro": cmd_repro,
}

HELP = {
    "clean": "read the raw CSV, write cleaned.csv and missingness reports",
    "eda": "class and group frequency tables",
    "screen": "univariate tests of each variable against the target",
    "split": "seeded train/test partition",
    "balance": "rebalance the training partition",
    "train": "fit the forest and write model.rf",
    "evaluate": "test-set metrics, scores and cross-validated AUC",
    "roc": "ROC curve table and SVG from the test scores",
    "importance": "mean decrease in Gini per variable",
    "compare": "single tree vs forest on the same split",
    "repro": "full run on the US-Accidents file plus a divergence report",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--config", default=argparse.SUPPRESS, help="key = value configuration file")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    g.add_argument("--out", default=argparse.SUPPRESS, help="output directory for stage artifacts")
    g.add_argument("--positive", default=argparse.SUPPRESS, help="label of the positive class")
    g.add_argument("--target", default=argparse.SUPPRESS, help="target column (default Severity)")
    g.add_argument("--input", default=argparse.SUPPRESS, help="raw CSV for clean/repro")
    g.add_argument("--state", dest="state_filter", default=argparse.SUPPRESS, help="keep only this State code")
    g.add_argument("--n-trees", dest="n_trees", type=int, default=argparse.SUPPRESS)
    g.add_argument("--jobs", dest="n_jobs", type=int, default=argparse.SUPPRESS, help="tree-training workers")
    g.add_argument("--cv-folds", dest="cv_folds", type=int, default=argparse.SUPPRESS)
    g.add_argument("--rebalance", dest="rebalance_mode", choices=("oversample", "undersample", "both"),
                   default=argparse.SUPPRESS)
    g.add_argument("--screen-filter", dest="screen_filter", action="store_true", default=argparse.SUPPRESS,
                   help="train only on variables screening marked important")
    g.add_argument("--include-coordinates", dest="include_coordinates", action="store_true",
                   default=argparse.SUPPRESS)
    g.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="accident-severity", parents=[common],
                                     description="Accident severity Random Forest pipeline")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=HELP[name])
    return parser


_OVERRIDES = ("seed", "out", "positive", "target", "input", "n_trees", "n_jobs", "cv_folds",
              "rebalance_mode", "screen_filter", "include_coordinates")


def resolve_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    for key in _OVERRIDES:
        if hasattr(args, key):
            setattr(cfg, key, getattr(args, key))
    if hasattr(args, "state_filter"):
        cfg.cleaning.state_filter = args.state_filter
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(args)
        COMMANDS[args.command](cfg)
    except (InputError, ConfigError, TableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError) as exc:
        print(f"error in {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
