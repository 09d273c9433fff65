"""Bit-exact file formats.

Feature file (".alfp"): 20-byte header = magic "ALFP", u32 version (1),
u64 row count n, u32 dim d, all little-endian; then n*d float32 values
row-major; then n u64 ids. Total length is exactly 20 + 4nd + 8n bytes.

Label CSV: one "id,class" pair per line, no header. Caption TSV: one
"id<TAB>caption" per line. Retrieved-set CSV: "class_name,id" per line.
Report JSONL: fixed key order, floats at 17 significant digits.

All writers are atomic (temp file + rename) so a crashed run never
leaves a torn file behind.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile

import numpy as np

from .core import FeaturePool, RoundRecord
from .errors import FileFormatError, IOFailure, ParseError

MAGIC = b"ALFP"
VERSION = 1
HEADER = struct.Struct("<4sIQI")  # magic, version, n, d

_REPORT_KEYS = (
    "seed",
    "round",
    "strategy",
    "adaptation",
    "rda",
    "selected_ids",
    "accuracy",
    "macro_f1",
    "per_class_accuracy",
    "labeled_count",
    "wall_ms",
)


def _atomic_write(path, data: bytes):
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-alsim-")
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(data)
            os.replace(tmp, path)
        except BaseException:
            os.unlink(tmp)
            raise
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def write_features(path, ids, features):
    """Write an ALFP feature file (features stored as float32)."""
    ids = np.asarray(ids, dtype=np.int64)
    features = np.asarray(features)
    if features.ndim != 2 or len(ids) != features.shape[0]:
        raise FileFormatError("need one id per feature row")
    if len(ids) and ids.min() < 0:
        raise FileFormatError("ids must be non-negative to fit the unsigned id field")
    header = HEADER.pack(MAGIC, VERSION, features.shape[0], features.shape[1])
    body = np.ascontiguousarray(features, dtype="<f4").tobytes()
    tail = ids.astype("<u8").tobytes()
    _atomic_write(path, header + body + tail)


def read_features(path) -> tuple[np.ndarray, np.ndarray]:
    """Read an ALFP file; returns (ids int64, features float32)."""
    try:
        with open(path, "rb") as handle:
            blob = handle.read()
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc
    if len(blob) < HEADER.size:
        raise FileFormatError(f"{path}: too short for an ALFP header")
    magic, version, n, d = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FileFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FileFormatError(f"{path}: unsupported version {version}")
    expected = HEADER.size + 4 * n * d + 8 * n
    if len(blob) != expected:
        raise FileFormatError(
            f"{path}: file is {len(blob)} bytes, header implies exactly {expected}"
        )
    features = np.frombuffer(blob, dtype="<f4", count=n * d, offset=HEADER.size)
    ids = np.frombuffer(blob, dtype="<u8", count=n, offset=HEADER.size + 4 * n * d)
    if len(ids) and ids.max() > np.iinfo(np.int64).max:
        raise FileFormatError(f"{path}: id exceeds the signed 64-bit range")
    return ids.astype(np.int64), features.reshape(n, d).copy()


def load_pool(features_path, labels_path=None, num_classes=None) -> FeaturePool:
    """Assemble a FeaturePool from an ALFP file and an optional label CSV.

    The label CSV may cover more ids than the pool (a combined file is
    fine) but must cover every pool id.
    """
    ids, features = read_features(features_path)
    labels = None
    if labels_path is not None:
        mapping = read_labels(labels_path)
        try:
            labels = np.array([mapping[int(i)] for i in ids], dtype=np.int64)
        except KeyError as exc:
            raise ParseError(f"{labels_path}: no label for pool id {exc.args[0]}") from None
        if num_classes is None:
            num_classes = int(max(mapping.values())) + 1
    if num_classes is None:
        raise FileFormatError("num_classes is required when no labels are given")
    return FeaturePool(ids, features.astype(np.float64), labels, num_classes)


def write_labels(path, ids, classes):
    lines = [f"{int(i)},{int(c)}" for i, c in zip(ids, classes)]
    _atomic_write(path, ("\n".join(lines) + "\n").encode("utf-8"))


def read_labels(path) -> dict:
    mapping: dict[int, int] = {}
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"{path}:{lineno}: expected 'id,class', got {line!r}")
        try:
            mapping[int(parts[0])] = int(parts[1])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: non-integer field in {line!r}") from None
    return mapping


def write_captions(path, ids, captions):
    lines = []
    for i, caption in zip(ids, captions):
        if "\t" in caption or "\n" in caption:
            raise FileFormatError(f"caption for id {i} contains a tab or newline")
        lines.append(f"{int(i)}\t{caption}")
    _atomic_write(path, ("\n".join(lines) + "\n").encode("utf-8"))


def read_captions(path) -> tuple[list, list]:
    """Parse a caption TSV; returns (ids, captions)."""
    ids, captions = [], []
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(f"{path}:{lineno}: expected 'id<TAB>caption'")
        try:
            ids.append(int(parts[0]))
        except ValueError:
            raise ParseError(f"{path}:{lineno}: non-integer id {parts[0]!r}") from None
        captions.append(parts[1])
    return ids, captions


def write_retrieved_csv(path, class_names, retrieved_set):
    lines = [
        f"{class_names[k]},{int(i)}"
        for k, ids in enumerate(retrieved_set.by_class)
        for i in ids
    ]
    _atomic_write(path, ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8"))


def read_retrieved_csv(path, class_names) -> list:
    """Parse 'class_name,id' rows into per-class id lists (sorted)."""
    index = {name: k for k, name in enumerate(class_names)}
    by_class: list[list[int]] = [[] for _ in class_names]
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        name, _, raw_id = line.partition(",")
        if name not in index:
            raise ParseError(f"{path}:{lineno}: unknown class name {name!r}")
        try:
            by_class[index[name]].append(int(raw_id))
        except ValueError:
            raise ParseError(f"{path}:{lineno}: non-integer id {raw_id!r}") from None
    return [np.array(sorted(set(ids)), dtype=np.int64) for ids in by_class]


def _read_lines(path):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return handle.read().splitlines()
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc


def float17(x) -> str:
    return format(float(x), ".17g")


def report_line(record: RoundRecord, strategy: str, adaptation: str, rda: bool) -> str:
    """Serialize one round as a JSON object with fixed key order and
    floats at 17 significant digits."""
    parts = [
        f'"seed": {int(record.seed)}',
        f'"round": {int(record.round)}',
        f'"strategy": {json.dumps(strategy)}',
        f'"adaptation": {json.dumps(adaptation)}',
        f'"rda": {"true" if rda else "false"}',
        f'"selected_ids": [{", ".join(str(int(i)) for i in record.selected_ids)}]',
        f'"accuracy": {float17(record.accuracy)}',
        f'"macro_f1": {float17(record.macro_f1)}',
        f'"per_class_accuracy": [{", ".join(float17(v) for v in record.per_class_accuracy)}]',
        f'"labeled_count": {int(record.labeled_count)}',
        f'"wall_ms": {float17(record.wall_ms)}',
    ]
    return "{" + ", ".join(parts) + "}"


def parse_report(path) -> list:
    """Read a report JSONL file into dicts, checking the fixed key order."""
    rows = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{lineno}: invalid JSON ({exc})") from None
        if tuple(row.keys()) != _REPORT_KEYS:
            raise ParseError(f"{path}:{lineno}: unexpected report keys {tuple(row.keys())}")
        rows.append(row)
    return rows


def summary_csv_text(per_seed_records) -> str:
    """Per-round mean and population std of the metrics across seeds."""
    by_round: dict[int, list] = {}
    for _, records in per_seed_records:
        for record in records:
            by_round.setdefault(record.round, []).append(record)
    lines = ["round,seeds,accuracy_mean,accuracy_std,macro_f1_mean,macro_f1_std,labeled_count"]
    for round_index in sorted(by_round):
        rows = by_round[round_index]
        acc = np.array([r.accuracy for r in rows])
        f1 = np.array([r.macro_f1 for r in rows])
        lines.append(
            ",".join(
                [
                    str(round_index),
                    str(len(rows)),
                    float17(acc.mean()),
                    float17(acc.std()),
                    float17(f1.mean()),
                    float17(f1.std()),
                    str(int(rows[0].labeled_count)),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def write_text(path, text: str):
    _atomic_write(path, text.encode("utf-8"))
