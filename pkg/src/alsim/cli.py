"""Command-line entry point.

Subcommands: synth (generate a synthetic task on disk), retrieve (run
caption matching + similarity capping), run (execute an experiment per
seed, emit JSONL + summary CSV), report (per-class accuracy matrix from
a JSONL report), validate (check files against the format contracts).

Every command exits 0 on success; on failure it prints one line
"<error-class>: <message>" to stderr and exits nonzero.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, config, formats, synth
from ._kernels import BACKEND
from .core import FeaturePool, l2_normalize
from .errors import AlsimError, ConfigError, DataInconsistencyError, ParseError
from .harness import TaskData, run_all
from .retrieval import (
    CaptionCorpus,
    RetrievedSet,
    SynonymTable,
    apply_capped_filter,
    drop_multiclass,
    match_captions,
)


def _out_path(directory, name):
    return os.path.join(directory, name)


def cmd_synth(args) -> int:
    spec = synth.SynthSpec(
        num_classes=args.classes,
        dim=args.dim,
        spread=args.sigma,
        tail_exponent=args.gamma,
        pool_size=args.pool_size,
        test_per_class=args.test_per_class,
        retrieved_max=args.retrieved_max,
        domain_gap=args.delta,
        seed=args.seed,
    )
    task = synth.generate_task(spec)
    out = os.environ.get("ALSIM_OUT_DIR") or args.out
    os.makedirs(out, exist_ok=True)
    formats.write_features(_out_path(out, "train.alfp"), task.train.ids, task.train.features)
    formats.write_features(_out_path(out, "test.alfp"), task.test.ids, task.test.features)
    formats.write_features(
        _out_path(out, "retrieved.alfp"), task.retrieved.ids, task.retrieved.features
    )
    all_ids = np.concatenate([task.train.ids, task.test.ids, task.retrieved.ids])
    all_labels = np.concatenate([task.train.labels, task.test.labels, task.retrieved.labels])
    formats.write_labels(_out_path(out, "labels.csv"), all_ids, all_labels)
    formats.write_features(
        _out_path(out, "prototypes.alfp"),
        np.arange(spec.num_classes, dtype=np.int64),
        task.prototypes,
    )
    print(
        f"wrote train/test/retrieved/prototypes + labels.csv to {out} "
        f"(K={spec.num_classes}, d={spec.dim})"
    )
    return 0


def cmd_retrieve(args) -> int:
    corpus_ids, captions = formats.read_captions(args.corpus)
    corpus = CaptionCorpus(np.array(corpus_ids, dtype=np.int64), captions)
    table = _load_synonyms(args.synonyms)
    matched = match_captions(corpus, table)
    if args.drop_multiclass:
        matched = drop_multiclass(matched)

    ids, feats = formats.read_features(args.features)
    proto_ids, prototypes = formats.read_features(args.prototypes)
    if len(proto_ids) != table.num_classes:
        raise DataInconsistencyError(
            f"{args.prototypes}: {len(proto_ids)} prototypes for {table.num_classes} classes"
        )
    capped = apply_capped_filter(
        matched,
        FeaturePool(ids, l2_normalize(feats.astype(np.float64)), None, table.num_classes),
        l2_normalize(prototypes.astype(np.float64)),
        mode=args.cap_mode,
        cap=args.cap,
        ratio=args.ratio,
        top_x=args.top_x or table.num_classes,
    )
    formats.write_retrieved_csv(args.out, table.class_names, capped)
    for name, n_matched, n_kept in zip(
        table.class_names, matched.counts(), capped.counts()
    ):
        print(f"{name}: matched={n_matched} kept={n_kept}", file=sys.stderr)
    print(f"wrote {args.out}")
    return 0


def cmd_run(args) -> int:
    overrides = {}
    if args.seed is not None:
        overrides[("harness", "seeds")] = args.seed
    if args.strategy is not None:
        overrides[("harness", "strategy")] = args.strategy
    if args.adaptation is not None:
        overrides[("harness", "adaptation")] = args.adaptation
    if args.rda is not None:
        overrides[("harness", "rda")] = args.rda
    if args.cap is not None:
        overrides[("retrieval", "cap")] = args.cap
    if args.rounds is not None:
        overrides[("harness", "rounds")] = args.rounds
    if args.budget is not None:
        overrides[("harness", "budget")] = args.budget
    if args.allow_tfs_without_rda:
        overrides[("harness", "allow_tfs_without_rda")] = "on"
    plan = config.parse_run_config(args.config, overrides)

    data = _load_task(plan)
    per_seed = run_all(plan.experiment, data)

    os.makedirs(plan.out_dir, exist_ok=True)
    lines = []
    for _, records in per_seed:
        for record in records:
            lines.append(
                formats.report_line(
                    record,
                    plan.experiment.strategy,
                    plan.experiment.adaptation,
                    plan.experiment.rda_enabled,
                )
            )
    jsonl_path = _out_path(plan.out_dir, plan.jsonl_name)
    formats.write_text(jsonl_path, "\n".join(lines) + "\n")
    summary_path = _out_path(plan.out_dir, plan.summary_name)
    formats.write_text(summary_path, formats.summary_csv_text(per_seed))
    print(f"wrote {jsonl_path} and {summary_path}")
    return 0


def cmd_report(args) -> int:
    rows = formats.parse_report(args.jsonl)
    if not rows:
        raise ParseError(f"{args.jsonl}: no report lines")
    k = len(rows[0]["per_class_accuracy"])
    rounds = sorted({row["round"] for row in rows})
    by_round: dict[int, list] = {r: [] for r in rounds}
    for row in rows:
        if len(row["per_class_accuracy"]) != k:
            raise ParseError(f"{args.jsonl}: mixed per-class vector lengths")
        by_round[row["round"]].append(row["per_class_accuracy"])
    matrix = np.column_stack(
        [np.mean(np.array(by_round[r]), axis=0) for r in rounds]
    )
    order = np.argsort(-matrix[:, 0], kind="stable")
    matrix = matrix[order]
    text = "\n".join(",".join(formats.float17(v) for v in row) for row in matrix) + "\n"
    if args.out:
        formats.write_text(args.out, text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_validate(args) -> int:
    if args.kind == "features":
        ids, feats = formats.read_features(args.path)
        if not np.all(np.isfinite(feats)):
            raise DataInconsistencyError(f"{args.path}: non-finite feature values")
        if len(np.unique(ids)) != len(ids):
            raise DataInconsistencyError(f"{args.path}: duplicate ids")
        if args.unit_norm:
            norms = np.linalg.norm(feats.astype(np.float64), axis=1)
            worst = float(np.abs(norms - 1.0).max(initial=0.0))
            if worst > args.unit_norm_tol:
                raise DataInconsistencyError(
                    f"{args.path}: rows deviate from unit norm by {worst:.3g}"
                )
        print(f"ok: {args.path} n={len(ids)} d={feats.shape[1]}")
    elif args.kind == "labels":
        mapping = formats.read_labels(args.path)
        if any(v < 0 for v in mapping.values()):
            raise ParseError(f"{args.path}: negative class index")
        print(f"ok: {args.path} entries={len(mapping)}")
    elif args.kind == "captions":
        ids, captions = formats.read_captions(args.path)
        CaptionCorpus(np.array(ids, dtype=np.int64), captions)
        print(f"ok: {args.path} entries={len(ids)}")
    else:
        raise ConfigError(f"unknown validation kind {args.kind!r}")
    return 0


def _load_synonyms(path) -> SynonymTable:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read synonyms {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict) or not raw:
        raise ParseError(f"{path}: expected a non-empty object of class -> [synonyms]")
    names, synonym_lists = [], []
    for name, syns in raw.items():
        if not isinstance(syns, list) or not all(isinstance(s, str) for s in syns):
            raise ParseError(f"{path}: synonyms for {name!r} must be a list of strings")
        names.append(name)
        synonym_lists.append(syns)
    return SynonymTable(names, synonym_lists)


def _load_task(plan: config.RunPlan) -> TaskData:
    paths = plan.paths
    train = formats.load_pool(paths["train_features"], paths["train_labels"])
    test = formats.load_pool(
        paths["test_features"], paths["test_labels"], num_classes=train.num_classes
    )
    retrieved_features = None
    retrieved_set = None
    prototypes = None
    if plan.experiment.rda_enabled:
        ids, feats = formats.read_features(paths["retrieved_features"])
        retrieved_features = FeaturePool(
            ids, feats.astype(np.float64), None, train.num_classes
        )
        if paths["retrieved_labels"] is not None:
            mapping = formats.read_labels(paths["retrieved_labels"])
            by_class = [[] for _ in range(train.num_classes)]
            for i in ids:
                cls = mapping.get(int(i))
                if cls is None:
                    raise ParseError(
                        f"{paths['retrieved_labels']}: no class for retrieved id {int(i)}"
                    )
                by_class[cls].append(int(i))
            retrieved_set = RetrievedSet(
                [np.array(sorted(members), dtype=np.int64) for members in by_class]
            )
        else:
            class_names = _read_class_names(paths["class_names"])
            if len(class_names) != train.num_classes:
                raise ConfigError(
                    f"{paths['class_names']}: {len(class_names)} names for "
                    f"{train.num_classes} classes"
                )
            retrieved_set = RetrievedSet(
                formats.read_retrieved_csv(paths["retrieved_set"], class_names)
            )
    if paths["prototypes"] is not None:
        _, prototypes = formats.read_features(paths["prototypes"])
        prototypes = prototypes.astype(np.float64)
    return TaskData(
        train=train,
        test=test,
        retrieved_features=retrieved_features,
        retrieved_set=retrieved_set,
        prototypes=prototypes,
    )


def _read_class_names(path) -> list:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return [line.strip() for line in handle if line.strip()]
    except OSError as exc:
        raise ConfigError(f"cannot read class names {path}: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alsim",
        description="Deterministic active-learning simulation over frozen embeddings",
    )
    parser.add_argument("--version", action="version",
                        version=f"alsim {__version__} (kernels: {BACKEND})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic task on disk")
    p.add_argument("--classes", type=int, default=20)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--sigma", type=float, default=0.35, help="within-class spread")
    p.add_argument("--gamma", type=float, default=1.0, help="long-tail exponent")
    p.add_argument("--pool-size", type=int, default=2000)
    p.add_argument("--test-per-class", type=int, default=20)
    p.add_argument("--retrieved-max", type=int, default=100)
    p.add_argument("--delta", type=float, default=0.2, help="retrieved-pool domain gap")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("retrieve", help="caption matching + similarity capping")
    p.add_argument("--corpus", required=True, help="caption TSV (id<TAB>caption)")
    p.add_argument("--synonyms", required=True, help="JSON object: class name -> [synonyms]")
    p.add_argument("--features", required=True, help="ALFP features for corpus ids")
    p.add_argument("--prototypes", required=True, help="ALFP class prototypes")
    p.add_argument("--drop-multiclass", action="store_true",
                   help="discard ids matched by more than one class")
    p.add_argument("--cap-mode", choices=["count", "ratio", "none"], default="count")
    p.add_argument("--cap", type=int, default=500)
    p.add_argument("--ratio", type=float, default=0.5)
    p.add_argument("--top-x", type=int, default=None)
    p.add_argument("--out", required=True, help="output CSV (class_name,id)")
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--seed", help="override seeds (comma-separated)")
    p.add_argument("--strategy")
    p.add_argument("--adaptation")
    p.add_argument("--rda", choices=["on", "off"])
    p.add_argument("--cap")
    p.add_argument("--rounds")
    p.add_argument("--budget")
    p.add_argument("--allow-tfs-without-rda", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="per-class accuracy matrix from a JSONL report")
    p.add_argument("jsonl")
    p.add_argument("--out", default=None, help="output CSV path (default: stdout)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("validate", help="validate a file against its format contract")
    p.add_argument("kind", choices=["features", "labels", "captions"])
    p.add_argument("path")
    p.add_argument("--unit-norm", action="store_true",
                   help="require feature rows to be unit-norm")
    p.add_argument("--unit-norm-tol", type=float, default=1e-5)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AlsimError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io-error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
