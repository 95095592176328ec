"""Operator command line: extract / train / evaluate / predict / serve.

stdout carries machine-readable results, stderr carries diagnostics, and every
run prints the effective seed so results can be reproduced. Exit codes:
0 success, 1 data error, 2 configuration error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataset_io import parse_dataset_csv
from .ensemble_voting import CLASSIFIER_NAMES
from .errors import PdadsvError
from .eval_harness import (
    DEFAULT_GRID,
    MODEL_FILE_SUFFIX,
    cross_validate,
    load_model,
    save_model,
    train_final,
)
from .gbdt_core import BaggingParams, TreeParams
from .service_api import DEFAULT_BIND, DEFAULT_MAX_UPLOAD_MB, serve
from .signal_features import FEATURE_NAMES, DspConfig, decode_wav, extract_features

EXIT_OK = 0
EXIT_DATA = 1
EXIT_CONFIG = 2
EXIT_INTERNAL = 3


class ConfigError(Exception):
    pass


def _coerce(raw: str, target_type):
    if target_type is bool:
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}")
    if target_type is int:
        return int(raw)
    if target_type is float:
        return float(raw)
    return raw


def load_config(path: str | None):
    """Flat key=value file with tree./bagging./dsp. namespaces; returns the
    three override dicts."""
    overrides = {"tree": {}, "bagging": {}, "dsp": {}}
    if path is None:
        return overrides
    fields = {
        "tree": {f.name: f.type for f in dataclasses.fields(TreeParams)},
        "bagging": {f.name: f.type for f in dataclasses.fields(BaggingParams)},
        "dsp": {f.name: f.type for f in dataclasses.fields(DspConfig)},
    }
    types = {"int": int, "float": float, "bool": bool, "str": str,
             int: int, float: float, bool: bool}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise ConfigError(f"cannot read config file: {e}")
    for line_no, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{line_no}: expected key=value")
        key, _, value = stripped.partition("=")
        key = key.strip()
        ns, _, name = key.partition(".")
        if not name:
            ns, name = "tree", ns  # bare keys target the boosting params
        if ns not in fields or name not in fields[ns]:
            raise ConfigError(f"{path}:{line_no}: unknown key {key!r}")
        declared = fields[ns][name]
        base = types.get(declared)
        if base is None:
            # dataclass field types arrive as strings under future annotations
            lowered = str(declared)
            base = (bool if "bool" in lowered else int if "int" in lowered
                    else float if "float" in lowered else str)
        try:
            overrides[ns][name] = _coerce(value.strip(), base)
        except (ValueError, ConfigError) as e:
            raise ConfigError(f"{path}:{line_no}: {e}")
    return overrides


def _params_from(args, overrides):
    tree = TreeParams(**{**overrides["tree"], "seed": args.seed})
    bagging = BaggingParams(**{**overrides["bagging"], "seed": args.seed})
    dsp = DspConfig(**overrides["dsp"])
    return tree, bagging, dsp


def _load_mapping(path: str | None):
    if path is None:
        return None
    mapping = {}
    try:
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            key, _, value = stripped.partition("=")
            mapping[key.strip()] = value.strip()
    except OSError as e:
        raise ConfigError(f"cannot read mapping file: {e}")
    return mapping


def _read_dataset(args):
    mapping = _load_mapping(getattr(args, "mapping", None))
    with open(args.data, "r", encoding="utf-8", newline="") as fh:
        return parse_dataset_csv(fh, mapping=mapping,
                                 strict=not getattr(args, "lenient", False))


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_extract(args, overrides) -> int:
    _, _, dsp = _params_from(args, overrides)
    source = Path(args.input)
    if source.is_dir():
        files = sorted(source.glob("*.wav"))
    elif source.exists():
        files = [source]
    else:
        print(f"error: input {source} does not exist", file=sys.stderr)
        return EXIT_CONFIG

    failures = 0
    with open(args.output, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FEATURE_NAMES)
        for path in files:
            try:
                clip = decode_wav(path.read_bytes())
                vec = extract_features(clip, dsp).to_array()
            except (OSError, PdadsvError) as exc:
                failures += 1
                print(f"error: {path}: {exc}", file=sys.stderr)
                continue
            writer.writerow(repr(float(v)) for v in vec)
            print(f"extracted: {path}", file=sys.stderr)
    return EXIT_DATA if failures else EXIT_OK


def cmd_train(args, overrides) -> int:
    tree, bagging, _ = _params_from(args, overrides)
    ds = _read_dataset(args)
    grid = DEFAULT_GRID if args.grid else None
    bundle = train_final(ds, seed=args.seed, tree_params=tree,
                         bagging_params=bagging, grid=grid)
    out = args.output
    if not out.endswith(MODEL_FILE_SUFFIX):
        print(f"note: model files conventionally end in {MODEL_FILE_SUFFIX}",
              file=sys.stderr)
    save_model(bundle, out)
    print(json.dumps({
        "model": out,
        "weights": [float(w) for w in bundle.weights.values],
        "classifiers": list(CLASSIFIER_NAMES),
        "inner_accuracy": bundle.metadata["inner_accuracy"],
    }))
    return EXIT_OK


def cmd_evaluate(args, overrides) -> int:
    tree, bagging, _ = _params_from(args, overrides)
    ds = _read_dataset(args)
    k = len(ds.subjects()) if args.loso else args.k
    grid = DEFAULT_GRID if args.grid else None
    report = cross_validate(ds, k=k, seed=args.seed, tree_params=tree,
                            bagging_params=bagging, grid=grid)
    if args.json:
        print(json.dumps(report.to_dict(), indent=1))
    else:
        print(report.format_table())
        agg = report.aggregate["accuracy"]
        print(f"mean accuracy: {agg['mean']:.4f} +/- {agg['std']:.4f} "
              f"({k}-fold subject-grouped)")
    return EXIT_OK


def cmd_predict(args, overrides) -> int:
    bundle = load_model(args.model)
    with open(args.features, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        print("error: empty feature file", file=sys.stderr)
        return EXIT_DATA
    start = 0
    if rows[0] and not _is_number(rows[0][0]):
        header = [c.strip() for c in rows[0]]
        if header != list(FEATURE_NAMES):
            print("error: header does not match the 32 canonical feature names",
                  file=sys.stderr)
            return EXIT_DATA
        start = 1
    for row_no, row in enumerate(rows[start:], start=start + 1):
        if not row:
            continue
        try:
            values = [float(c) for c in row]
        except ValueError:
            print(f"error: row {row_no}: non-numeric value", file=sys.stderr)
            return EXIT_DATA
        if len(values) != 32:
            print(f"error: row {row_no}: expected 32 features, got {len(values)}",
                  file=sys.stderr)
            return EXIT_DATA
        pred = bundle.predict(np.array(values))
        print(json.dumps({
            "row": row_no,
            "final_label": pred.final_label,
            "votes": dict(zip(CLASSIFIER_NAMES, pred.votes)),
            "weights": [float(w) for w in bundle.weights.values],
            "weighted_tally_positive": pred.weighted_tally_positive,
            "probabilities": dict(zip(CLASSIFIER_NAMES, pred.probabilities)),
        }))
    return EXIT_OK


def _is_number(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def cmd_serve(args, overrides) -> int:
    import os

    from .service_api import BIND_ENV, MODEL_ENV
    model = args.model or os.environ.get(MODEL_ENV)
    bind = args.bind or os.environ.get(BIND_ENV) or DEFAULT_BIND
    serve(model_path=model, bind=bind,
          max_upload_mb=args.max_upload_mb, ui_dir=args.ui)
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdadsv",
        description="Voice screening pipeline: feature extraction, ensemble "
                    "training, evaluation and serving.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--seed", type=int, default=42,
                        help="seed for every stochastic step (default 42)")
    parser.add_argument("--config", metavar="FILE",
                        help="flat key=value file overriding tree./bagging./dsp. "
                             "parameters")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="compute 32-feature rows from WAV files")
    p.add_argument("--in", dest="input", required=True, metavar="WAV_OR_DIR")
    p.add_argument("--out", dest="output", required=True, metavar="CSV")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="fit the four-classifier ensemble")
    p.add_argument("--data", required=True, metavar="CSV")
    p.add_argument("--out", dest="output", required=True, metavar="MODEL")
    p.add_argument("--mapping", metavar="FILE", help="column-name mapping file")
    p.add_argument("--lenient", action="store_true",
                   help="drop subjects without 3 consistent recordings")
    p.add_argument("--grid", action=argparse.BooleanOptionalAction, default=True,
                   help="search the documented hyper-parameter grid on the "
                        "inner split (default on)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="subject-grouped cross-validation")
    p.add_argument("--data", required=True, metavar="CSV")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--loso", action="store_true",
                   help="leave-one-subject-out instead of k folds")
    p.add_argument("--json", action="store_true", help="emit the full report")
    p.add_argument("--mapping", metavar="FILE")
    p.add_argument("--lenient", action="store_true")
    p.add_argument("--grid", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="score 32-column feature rows")
    p.add_argument("--model", required=True, metavar="MODEL")
    p.add_argument("--features", required=True, metavar="CSV")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("serve", help="run the HTTP inference service")
    p.add_argument("--model", metavar="MODEL",
                   help="bundle path (falls back to PDADSV_MODEL)")
    p.add_argument("--bind", metavar="HOST:PORT",
                   help=f"listen address (PDADSV_BIND, default {DEFAULT_BIND})")
    p.add_argument("--max-upload-mb", type=int, default=DEFAULT_MAX_UPLOAD_MB)
    p.add_argument("--ui", metavar="DIR", help="static UI directory to mount")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    print(f"seed: {args.seed}", file=sys.stderr)
    try:
        overrides = load_config(args.config)
        return args.func(args, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PdadsvError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        import traceback
        traceback.print_exc()
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
