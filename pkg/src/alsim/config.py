"""Experiment config files: flat key = value pairs under INI-style
sections named after the modules they configure.

Unknown sections or keys are errors, and every schema violation in the
file is reported at once rather than one at a time. Paths are resolved
relative to the config file.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass

from .adapt import TrainConfig
from .errors import ConfigError
from .harness import ADAPTATIONS, STRATEGIES, ExperimentConfig

_BOOL = {"on": True, "true": True, "1": True, "yes": True,
         "off": False, "false": False, "0": False, "no": False}

# section -> key -> (parser, default); None default means optional/absent
_SCHEMA = {
    "data": {
        "train_features": ("path", None),
        "train_labels": ("path", None),
        "test_features": ("path", None),
        "test_labels": ("path", None),
        "retrieved_features": ("path", None),
        "retrieved_labels": ("path", None),
        "retrieved_set": ("path", None),
        "class_names": ("path", None),
        "prototypes": ("path", None),
    },
    "harness": {
        "rounds": ("int", 6),
        "budget": ("int", None),
        "strategy": ("choice:" + "|".join(STRATEGIES), "random"),
        "adaptation": ("choice:" + "|".join(ADAPTATIONS), "linear_probe"),
        "rda": ("bool", False),
        "seeds": ("seeds", (0,)),
        "warm_start": ("bool", True),
        "include_retrieved_counts": ("bool", True),
        "tfs_count_update": ("choice:oracle|pseudo", "oracle"),
        "allow_tfs_without_rda": ("bool", False),
        "pcb_fraction": ("float", 0.10),
        "retrieved_weight": ("float", 1.0),
    },
    "retrieval": {
        "cap_mode": ("choice:count|ratio|none", "count"),
        "cap": ("int", 500),
        "ratio": ("float", 0.5),
        "top_x": ("int", None),
        "drop_multiclass": ("bool", False),
    },
    "adapt": {
        "lr_head": ("float", 1e-4),
        "lr_temperature": ("float", 1e-4),
        "epochs": ("int", 50),
        "batch_size": ("int", 32),
        "weight_decay": ("float", 1e-2),
        "prototype_init": ("choice:class_means|supplied", "class_means"),
    },
    "output": {
        "out_dir": ("path", "."),
        "jsonl": ("str", "report.jsonl"),
        "summary": ("str", "summary.csv"),
        "timing": ("bool", False),
    },
}


@dataclass(frozen=True)
class RunPlan:
    """Fully parsed cmd_run inputs: experiment config plus file paths."""

    experiment: ExperimentConfig
    paths: dict
    out_dir: str
    jsonl_name: str
    summary_name: str


def _parse_value(kind, raw, where, problems):
    if kind == "str":
        return raw
    if kind == "path":
        return raw
    if kind == "int":
        try:
            return int(raw)
        except ValueError:
            problems.append(f"{where}: expected an integer, got {raw!r}")
            return None
    if kind == "float":
        try:
            return float(raw)
        except ValueError:
            problems.append(f"{where}: expected a number, got {raw!r}")
            return None
    if kind == "bool":
        if raw.lower() in _BOOL:
            return _BOOL[raw.lower()]
        problems.append(f"{where}: expected on/off, got {raw!r}")
        return None
    if kind == "seeds":
        try:
            seeds = tuple(int(part.strip()) for part in raw.split(",") if part.strip())
        except ValueError:
            problems.append(f"{where}: expected comma-separated integers, got {raw!r}")
            return None
        if not seeds:
            problems.append(f"{where}: at least one seed is required")
            return None
        return seeds
    if kind.startswith("choice:"):
        choices = kind.split(":", 1)[1].split("|")
        if raw in choices:
            return raw
        problems.append(f"{where}: expected one of {choices}, got {raw!r}")
        return None
    raise AssertionError(f"unknown schema kind {kind}")


def parse_run_config(path, overrides=None) -> RunPlan:
    """Parse and validate a cmd_run config file.

    `overrides` maps (section, key) to a raw string value, used by CLI
    flags. All violations are collected and raised together.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path, "r", encoding="utf-8") as handle:
            parser.read_file(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc

    problems: list[str] = []
    values: dict = {}
    for section, keys in _SCHEMA.items():
        for key, (_, default) in keys.items():
            values[(section, key)] = default

    for section in parser.sections():
        if section not in _SCHEMA:
            problems.append(f"unknown section [{section}]")
            continue
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                problems.append(f"unknown key {key!r} in [{section}]")
                continue
            kind = _SCHEMA[section][key][0]
            parsed = _parse_value(kind, raw.strip(), f"[{section}] {key}", problems)
            if parsed is not None:
                values[(section, key)] = parsed

    for (section, key), raw in (overrides or {}).items():
        kind = _SCHEMA[section][key][0]
        parsed = _parse_value(kind, raw, f"--{key}", problems)
        if parsed is not None:
            values[(section, key)] = parsed

    required = [("data", "train_features"), ("data", "train_labels"),
                ("data", "test_features"), ("data", "test_labels")]
    if values[("harness", "rda")]:
        required += [("data", "retrieved_features"), ("data", "prototypes")]
    for section, key in required:
        if values[(section, key)] is None:
            problems.append(f"missing required key {key!r} in [{section}]")
    if values[("harness", "rda")] and values[("data", "retrieved_labels")] is None:
        if values[("data", "retrieved_set")] is None or values[("data", "class_names")] is None:
            problems.append(
                "[data] rda needs either retrieved_labels or retrieved_set + class_names"
            )

    if problems:
        raise ConfigError("; ".join(problems))

    base = os.path.dirname(os.path.abspath(path))

    def resolve(section, key):
        value = values[(section, key)]
        return None if value is None else os.path.join(base, value)

    train_cfg = TrainConfig(
        lr_head=values[("adapt", "lr_head")],
        lr_temperature=values[("adapt", "lr_temperature")],
        epochs=values[("adapt", "epochs")],
        batch_size=values[("adapt", "batch_size")],
        weight_decay=values[("adapt", "weight_decay")],
        seed=0,
    )
    experiment = ExperimentConfig(
        rounds=values[("harness", "rounds")],
        budget_per_round=values[("harness", "budget")],
        strategy=values[("harness", "strategy")],
        adaptation=values[("harness", "adaptation")],
        rda_enabled=values[("harness", "rda")],
        cap_mode=values[("retrieval", "cap_mode")],
        cap=values[("retrieval", "cap")],
        cap_ratio=values[("retrieval", "ratio")],
        cap_top_x=values[("retrieval", "top_x")],
        train=train_cfg,
        seeds=values[("harness", "seeds")],
        warm_start=values[("harness", "warm_start")],
        include_retrieved_in_counts=values[("harness", "include_retrieved_counts")],
        tfs_count_update=values[("harness", "tfs_count_update")],
        allow_tfs_without_rda=values[("harness", "allow_tfs_without_rda")],
        drop_multiclass_retrieved=values[("retrieval", "drop_multiclass")],
        pcb_fraction=values[("harness", "pcb_fraction")],
        prototype_init=values[("adapt", "prototype_init")],
        retrieved_weight=values[("harness", "retrieved_weight")],
        record_timing=values[("output", "timing")],
    )
    paths = {key: resolve("data", key) for key in _SCHEMA["data"]}

    out_dir = os.environ.get("ALSIM_OUT_DIR") or resolve("output", "out_dir")
    return RunPlan(
        experiment=experiment,
        paths=paths,
        out_dir=out_dir,
        jsonl_name=values[("output", "jsonl")],
        summary_name=values[("output", "summary")],
    )
