"""Command-line pipeline: atoms -> train -> eval -> rules/prune/intervene.

Every command is deterministic given its inputs and --seed: randomness all
flows from that one flag, artifact files are written in sorted order, and
floats serialize at full round-trip precision. Exit codes: 0 success,
2 missing input, 3 corrupt input, 4 shape/config mismatch, 5 backend
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as _dt
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .backends import BackendConfig, extract_claims, make_backend
from .datasets import BINARY_LABEL_MAP, SPLIT_NAMES, load_dataset
from .errors import (
    BackendError,
    ConfigError,
    DataError,
    FactlogicError,
    ProtocolError,
    ReviewError,
    ShapeError,
)
from .evaluate import AtomCache, evaluate_sample
from .intervention import (
    candidate_to_record,
    generate_candidates,
    load_decisions,
    review,
)
from .metrics import accuracy, macro_f1
from .model import config_digest, load_model, predict_indices, save_model
from .rules import PruneConfig, extract_rules, prune, render_rules
from .templates import default_template_path, enumerate_groundings, load_templates
from .training import TrainConfig, grid_search, train

LABEL_MAPS = {"none": None, "binary": BINARY_LABEL_MAP}


# --- manifest ----------------------------------------------------------------

def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out_dir: Path, command: str, args_payload: dict, seed: int,
                   backend_kind: str | None, dataset_path: Path | None,
                   artifacts: list[Path], started: str) -> None:
    manifest = {
        "command": command,
        "config_digest": config_digest(args_payload),
        "seed": seed,
        "dataset_digest": _sha256_file(dataset_path) if dataset_path else None,
        "backend_kind": backend_kind,
        "started": started,
        "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "artifacts": [
            {"path": str(p), "sha256": _sha256_file(p)} for p in artifacts if p.exists()
        ],
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def verify_manifest(path: str | Path) -> bool:
    """Recompute artifact digests named by a manifest; True when all match."""
    manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    return all(
        _sha256_file(Path(entry["path"])) == entry["sha256"]
        for entry in manifest["artifacts"]
    )


def _utcnow() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


# --- shared loading helpers --------------------------------------------------

def _backend_config_from_args(args) -> BackendConfig:
    return BackendConfig(
        kind=args.backend,
        endpoint=getattr(args, "endpoint", "") or "",
        model=getattr(args, "model", "") or "",
        sample_budget=getattr(args, "sample_budget", 10),
        fixture_path=getattr(args, "fixture", None),
        seed=args.seed,
    )


def _load_vectors(vectors_dir: Path, split: str) -> tuple[list[str], np.ndarray, list[str]]:
    path = vectors_dir / f"vectors_{split}.jsonl"
    if not path.exists():
        raise FileNotFoundError(f"vectors file not found: {path}")
    ids: list[str] = []
    labels: list[str] = []
    rows: list[list[float]] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            ids.append(str(record["id"]))
            labels.append(str(record["label"]))
            rows.append([float(v) for v in record["values"]])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}:{lineno}: corrupt vectors line: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: empty split")
    return ids, np.asarray(rows, dtype=np.float64), labels


def _load_meta(vectors_dir: Path) -> dict:
    path = vectors_dir / "atoms_meta.json"
    if not path.exists():
        raise FileNotFoundError(f"atoms meta not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"corrupt atoms meta {path}: {exc}") from exc


def _labels_to_indices(labels: list[str], label_set: list[str]) -> np.ndarray:
    index = {label: i for i, label in enumerate(label_set)}
    try:
        return np.asarray([index[l] for l in labels], dtype=int)
    except KeyError as exc:
        raise DataError(f"label {exc} missing from the label set") from exc


def _check_model_matches_meta(model, meta: dict) -> None:
    if list(model.labels) != list(meta["label_set"]):
        raise ShapeError("checkpoint label set does not match the vectors' label set")
    if list(model.group_sizes) != list(meta["group_sizes"]):
        raise ShapeError("checkpoint grouping does not match the vectors' grouping")


# --- atoms -------------------------------------------------------------------

def cmd_atoms(args) -> int:
    started = _utcnow()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    label_map = LABEL_MAPS.get(args.label_map, None) if args.label_map else None
    dataset = load_dataset(
        Path(args.dataset),
        format=args.format,
        label_map=label_map,
        seed=args.seed,
        max_words=args.max_words,
    )
    templates = load_templates(args.templates) if args.templates else load_templates(default_template_path())
    templates = sorted(templates, key=lambda t: t.id)
    backend_config = _backend_config_from_args(args)
    backend = make_backend(backend_config)
    cache = AtomCache(args.cache, defer_writes=True) if args.cache else AtomCache()

    samples = sorted(dataset.samples, key=lambda s: s.id)
    if args.extract_claims:
        samples = [
            s if s.claims else dataclasses.replace(s, claims=tuple(extract_claims(s.text, backend)) or None)
            for s in samples
        ]

    def evaluate(sample):
        return sample.id, evaluate_sample(sample, templates, backend, cache, args.seed)

    try:
        if args.parallel > 1:
            with ThreadPoolExecutor(max_workers=args.parallel) as pool:
                results = dict(pool.map(evaluate, samples))
        else:
            results = dict(evaluate(s) for s in samples)
    except BackendError as exc:
        missing = _count_uncached(samples, templates, cache)
        print(f"backend unreachable; {missing} questions still unanswered: {exc}", file=sys.stderr)
        return 2
    cache.flush()

    label_of = {s.id: s.label for s in samples}
    artifacts = []
    for split in SPLIT_NAMES:
        member_ids = sorted(dataset.splits.get(split, []))
        path = out_dir / f"vectors_{split}.jsonl"
        with path.open("w", encoding="utf-8") as handle:
            for sample_id in member_ids:
                vector = results[sample_id]
                handle.write(
                    json.dumps(
                        {
                            "id": sample_id,
                            "label": label_of[sample_id],
                            "values": vector.values.tolist(),
                        }
                    )
                    + "\n"
                )
        artifacts.append(path)

    any_vector = next(iter(results.values()))
    meta = {
        "label_set": list(dataset.label_set),
        "predicate_ids": list(any_vector.predicate_ids),
        "group_sizes": list(any_vector.group_sizes),
        "num_atoms": int(any_vector.values.shape[0]),
        "backend_kind": backend_config.kind,
        "seed": args.seed,
        "dataset": Path(args.dataset).name,
        "splits": {split: len(dataset.splits.get(split, [])) for split in SPLIT_NAMES},
    }
    meta_path = out_dir / "atoms_meta.json"
    meta_path.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    artifacts.append(meta_path)
    if args.cache:
        artifacts.append(Path(args.cache))

    total_atoms = sum(r.values.shape[0] for r in results.values())
    unknown = sum(int(np.sum(r.values == 0.0)) for r in results.values())
    print(f"samples {len(samples)} atoms {total_atoms} unknown {unknown}")
    print(f"cache entries {len(cache)}")

    write_manifest(out_dir, "atoms", _args_payload(args), args.seed,
                   backend_config.kind, Path(args.dataset), artifacts, started)
    return 0


def _count_uncached(samples, templates, cache: AtomCache) -> int:
    missing = 0
    for sample in samples:
        for template in templates:
            for atom in enumerate_groundings(sample, template):
                if cache.get(sample.id, template.id, atom.question) is None:
                    missing += 1
    return missing


# --- train -------------------------------------------------------------------

def _train_config_from_args(args) -> tuple[TrainConfig, dict]:
    overrides = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        overrides = json.loads(path.read_text(encoding="utf-8"))
    grids = {
        "c_grid": tuple(overrides.pop("c_grid", (10, 20, 30, 40, 50))),
        "weight_decay_grid": tuple(overrides.pop("weight_decay_grid", (1e-3, 5e-4, 1e-4))),
    }
    known = {f.name for f in dataclasses.fields(TrainConfig)}
    unknown = set(overrides) - known
    if unknown:
        raise ConfigError(f"unknown training config keys: {sorted(unknown)}")
    overrides["seed"] = args.seed
    return TrainConfig(**overrides), grids


def cmd_train(args) -> int:
    started = _utcnow()
    vectors_dir = Path(args.vectors)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = _load_meta(vectors_dir)
    _, train_values, train_labels = _load_vectors(vectors_dir, "train")
    _, val_values, val_labels = _load_vectors(vectors_dir, "validation")
    if train_values.shape[1] != meta["num_atoms"]:
        raise ShapeError("vectors do not match the recorded atom layout")
    label_set = tuple(meta["label_set"])
    y_train = _labels_to_indices(train_labels, list(label_set))
    y_val = _labels_to_indices(val_labels, list(label_set))
    config, grids = _train_config_from_args(args)

    if args.grid:
        config, model, report, cells = grid_search(
            train_values, y_train, val_values, y_val,
            label_set, tuple(meta["predicate_ids"]), tuple(meta["group_sizes"]),
            base_config=config,
            c_grid=grids["c_grid"],
            weight_decay_grid=grids["weight_decay_grid"],
        )
        cells_path = out_dir / "grid_cells.json"
        cells_path.write_text(
            json.dumps([dataclasses.asdict(c) for c in cells], indent=2) + "\n",
            encoding="utf-8",
        )
        print(
            f"grid selected conjunctions {config.conjunctions} "
            f"weight_decay {config.weight_decay} val_acc {report.final_val_accuracy:.4f}"
        )
    else:
        model, report = train(
            train_values, y_train, val_values, y_val,
            label_set, tuple(meta["predicate_ids"]), tuple(meta["group_sizes"]),
            config, verbose=True,
        )

    checkpoint_path = out_dir / "checkpoint.json"
    save_model(model, checkpoint_path)
    report_path = out_dir / "train_report.json"
    report_path.write_text(report.to_json(), encoding="utf-8")
    print(
        f"selected epoch {report.selected_epoch} "
        f"val_acc {report.final_val_accuracy:.4f} val_f1 {report.final_val_macro_f1:.4f}"
    )
    artifacts = [checkpoint_path, report_path]
    if args.grid:
        artifacts.append(cells_path)
    write_manifest(out_dir, "train", _args_payload(args), args.seed, None, None, artifacts, started)
    return 0


# --- eval --------------------------------------------------------------------

def cmd_eval(args) -> int:
    vectors_dir = Path(args.vectors)
    meta = _load_meta(vectors_dir)
    model = load_model(args.checkpoint)
    _check_model_matches_meta(model, meta)
    _, values, labels = _load_vectors(vectors_dir, args.split)
    if values.shape[1] != model.num_atoms:
        raise ShapeError("vectors do not match the checkpoint's atom layout")
    y_true = _labels_to_indices(labels, list(model.labels))
    y_pred = predict_indices(model, values)
    print(f"accuracy {accuracy(y_true, y_pred):.4f}")
    print(f"macro_f1 {macro_f1(y_true, y_pred, len(model.labels)):.4f}")
    return 0


# --- rules -------------------------------------------------------------------

def _semantics_map(template_arg: str | None) -> dict[int, str]:
    templates = load_templates(template_arg) if template_arg else load_templates(default_template_path())
    return {t.predicate.id: t.predicate.semantics for t in templates}


def cmd_rules(args) -> int:
    started = _utcnow()
    model = load_model(args.checkpoint)
    ruleset = extract_rules(model, args.weight_threshold)
    report = render_rules(ruleset, _semantics_map(args.templates))
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(report, encoding="utf-8")
    print(f"conjunctions {len(ruleset.conjunctions)} rule terms {ruleset.size()}")
    if out_path.parent.is_dir():
        write_manifest(out_path.parent, "rules", _args_payload(args), args.seed,
                       None, None, [out_path], started)
    return 0


# --- prune -------------------------------------------------------------------

def cmd_prune(args) -> int:
    started = _utcnow()
    vectors_dir = Path(args.vectors)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = _load_meta(vectors_dir)
    model = load_model(args.checkpoint)
    _check_model_matches_meta(model, meta)
    _, values, labels = _load_vectors(vectors_dir, args.split)
    if values.shape[1] != model.num_atoms:
        raise ShapeError("vectors do not match the checkpoint's atom layout")
    y_true = _labels_to_indices(labels, list(model.labels))

    before = accuracy(y_true, predict_indices(model, values))
    config = PruneConfig(epsilon=args.epsilon, weight_threshold=args.weight_threshold)
    pruned, ruleset, steps = prune(model, values, y_true, config)
    after = accuracy(y_true, predict_indices(pruned, values))

    checkpoint_path = out_dir / "pruned_checkpoint.json"
    save_model(pruned, checkpoint_path)
    rules_path = out_dir / "rules.txt"
    rules_path.write_text(render_rules(ruleset, _semantics_map(args.templates)), encoding="utf-8")
    print(f"accuracy before {before:.4f} after {after:.4f} removal steps {steps}")
    print(f"conjunctions {len(ruleset.conjunctions)} rule terms {ruleset.size()}")
    write_manifest(out_dir, "prune", _args_payload(args), args.seed, None, None,
                   [checkpoint_path, rules_path], started)
    return 0


# --- intervene ---------------------------------------------------------------

def cmd_intervene(args) -> int:
    started = _utcnow()
    backend = make_backend(_backend_config_from_args(args))
    template_path = Path(args.templates) if args.templates else default_template_path()
    templates = load_templates(template_path)
    candidates = generate_candidates(backend, [t.text for t in templates], args.iterations)

    decisions = []
    if args.decisions:
        decisions = load_decisions(args.decisions)
    elif args.interactive:
        from .intervention import ReviewDecision

        for candidate in candidates:
            answer = input(f"accept candidate {candidate.text!r}? [y/N] ").strip().lower()
            if answer != "y":
                decisions.append(ReviewDecision(candidate_text=candidate.text, action="reject"))
                continue
            template_text = input("template text (with {slot} placeholders): ").strip()
            slots = tuple(s.strip() for s in input("slots (comma-separated): ").split(",") if s.strip())
            sources = tuple(s.strip() for s in input("slot sources (comma-separated): ").split(",") if s.strip())
            semantics = input("predicate semantics (affirmative reading): ").strip()
            decisions.append(
                ReviewDecision(
                    candidate_text=candidate.text,
                    action="accept",
                    template_text=template_text,
                    slots=slots,
                    slot_sources=sources,
                    semantics=semantics,
                )
            )

    accepted = review(candidates, decisions, template_path) if decisions else []

    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", encoding="utf-8") as handle:
        for candidate in candidates:
            handle.write(json.dumps(candidate_to_record(candidate)) + "\n")
    print(f"candidates {len(candidates)} accepted {len(accepted)}")
    write_manifest(out_path.parent, "intervene", _args_payload(args), args.seed,
                   backend.kind, None, [out_path, template_path], started)
    return 0


# --- parser ------------------------------------------------------------------

def _args_payload(args) -> dict:
    payload = {k: v for k, v in vars(args).items() if k != "func"}
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in payload.items()}


def _add_backend_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", choices=("mock", "open", "closed"), default="mock")
    parser.add_argument("--endpoint", default="", help="answer server URL (or FACTLOGIC_ENDPOINT)")
    parser.add_argument("--model", default="", help="model name forwarded to the server")
    parser.add_argument("--fixture", default=None, help="mock fixture file")
    parser.add_argument("--sample-budget", type=int, default=10, help="decode samples per question (closed)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="factlogic", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("atoms", help="answer grounded questions and write atom vectors")
    p.add_argument("--dataset", required=True)
    p.add_argument("--format", choices=("generic-jsonl", "liar-tsv"), default="generic-jsonl")
    p.add_argument("--templates", default=None, help="template file (bundled set by default)")
    p.add_argument("--label-map", choices=tuple(LABEL_MAPS), default="none")
    p.add_argument("--max-words", type=int, default=None)
    p.add_argument("--cache", default=None, help="append-only answer cache file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--extract-claims", action="store_true",
                   help="fill missing sample claims via the backend before evaluation")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_atoms)

    p = sub.add_parser("train", help="train the rule model on atom vectors")
    p.add_argument("--vectors", required=True, help="directory produced by atoms")
    p.add_argument("--config", default=None, help="JSON training config")
    p.add_argument("--grid", action="store_true", help="sweep the hyperparameter grid")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="report accuracy and macro-F1 on a split")
    p.add_argument("--vectors", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=SPLIT_NAMES, default="test")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rules", help="render the learned rules as text")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--templates", default=None)
    p.add_argument("--weight-threshold", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rules)

    p = sub.add_parser("prune", help="thin the model against a validation budget")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vectors", required=True)
    p.add_argument("--split", choices=SPLIT_NAMES, default="validation")
    p.add_argument("--templates", default=None)
    p.add_argument("--epsilon", type=float, default=0.005)
    p.add_argument("--weight-threshold", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("intervene", help="generate candidate templates and apply review")
    p.add_argument("--templates", default=None)
    p.add_argument("--iterations", type=int, default=3)
    p.add_argument("--decisions", default=None, help="review decisions file (JSON lines)")
    p.add_argument("--interactive", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="candidates report file")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_intervene)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, ConfigError, ReviewError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ShapeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (BackendError, ProtocolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    except FactlogicError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
