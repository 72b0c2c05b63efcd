"""Command-line surface: train, predict, score, synth.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure, 5 checkpoint mismatch. Reports go to stdout, diagnostics to
stderr. Every command is deterministic given its inputs, seed, and
config, and the fully resolved configuration is echoed next to each
command's outputs.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .autograd import NumericError
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .corpus import (
    CorpusError, TypeInventory, gold_chains, parse_corpus, write_predictions,
)
from .embeddings import (
    DirectoryEmbeddings, EmbeddingFormatError, load_embeddings, synth_embeddings,
    write_embeddings,
)
from .metrics import evaluate_pairs, format_report, machine_lines
from .model import EmbeddingMismatchError, ModelConfig, ModelConfigError
from .training import TrainConfig, predict_chains, run_training

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_CHECKPOINT = 5


class ConfigError(ValueError):
    pass


# Config-file keys (snake_case) accepted for training runs.
_TRAIN_KEYS = {
    "mini_batch_size": ("batch_size", int),
    "max_epochs": ("max_epochs", int),
    "early_stop_patience": ("early_stop_patience", int),
    "max_doc_length": ("max_doc_tokens", int),
    "learning_rate": ("learning_rate", float),
    "anneal_factor": ("anneal_factor", float),
    "anneal_patience": ("anneal_patience", int),
    "proposal_loss_weight": ("proposal_weight", float),
    "seed": ("seed", int),
    "supervise_first_pass": ("supervise_first_pass", bool),
}
_MODEL_KEYS = {
    "window": ("window", int),
    "top_span_ratio": ("top_span_ratio", float),
    "max_antecedents": ("max_antecedents", int),
    "ffnn_hidden_layers": ("ffnn_hidden_layers", int),
    "ffnn_hidden_units": ("ffnn_hidden_units", int),
    "ffnn_dropout": ("ffnn_dropout", float),
    "word_dropout": ("word_dropout", float),
    "distance_dim": ("distance_dim", int),
    "distance_kind": ("distance_kind", str),
    "refine": ("refine", bool),
}


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config file {path} is not valid JSON: {err}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    known = set(_TRAIN_KEYS) | set(_MODEL_KEYS) | {"optimizer", "type_signal",
                                                   "layers", "dim"}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
    if data.get("optimizer", "adamax") != "adamax":
        raise ConfigError("only the adamax optimizer is supported")
    return data


def _pick(mapping: dict, file_values: dict, overrides: dict) -> dict:
    out = {}
    for file_key, (field_name, cast) in mapping.items():
        if file_key in file_values:
            out[field_name] = cast(file_values[file_key])
    for field_name, value in overrides.items():
        if value is not None:
            out[field_name] = value
    return out


def _echo_config(directory: Path, payload: dict) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    (directory / "resolved_config.json").write_text(text, encoding="utf-8")


def _inventory(args) -> TypeInventory:
    if getattr(args, "types", None):
        return TypeInventory.from_file(args.types)
    return TypeInventory.default()


def cmd_synth(args) -> int:
    inventory = _inventory(args)
    docs = parse_corpus(args.corpus, inventory)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for doc in docs:
        emb = synth_embeddings(doc, args.seed, args.layers, args.dim,
                               args.type_signal)
        write_embeddings(emb, out / f"{doc.doc_id}.e3ce")
    _echo_config(out, {
        "command": "synth", "corpus": str(args.corpus), "seed": args.seed,
        "layers": args.layers, "dim": args.dim, "type_signal": args.type_signal,
    })
    print(f"wrote {len(docs)} embedding files to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    inventory = _inventory(args)
    file_values = _load_config_file(args.config)
    overrides = {
        "max_epochs": args.max_epochs,
        "learning_rate": args.learning_rate,
        "seed": args.seed,
    }
    train_config = dataclasses.replace(
        TrainConfig(), **_pick(_TRAIN_KEYS, file_values, overrides))

    docs = parse_corpus(args.corpus, inventory)
    if not docs:
        raise CorpusError(f"{args.corpus}: empty corpus")
    dev_docs = parse_corpus(args.dev, inventory) if args.dev else None
    source = DirectoryEmbeddings(args.embeddings)
    probe = source.get(docs[0])

    model_overrides = {"refine": False if args.no_refine else None}
    model_config = ModelConfig(
        dim=probe.dim, layers=probe.layers, num_types=len(inventory),
        **_pick(_MODEL_KEYS, file_values, model_overrides))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "train.log"
    with open(log_path, "w", encoding="utf-8", newline="\n") as log_fh:
        result = run_training(docs, dev_docs, source, inventory, model_config,
                              train_config,
                              log=lambda line: print(line, file=log_fh))
    save_checkpoint(out / "model.ckpt", result.model, result.optimizer,
                    result.config)
    _echo_config(out, {
        "command": "train", "corpus": str(args.corpus),
        "dev": str(args.dev) if args.dev else None,
        "embeddings": str(args.embeddings),
        "model_config": dataclasses.asdict(model_config),
        "train_config": dataclasses.asdict(train_config),
    })
    print(f"best epoch {result.best_epoch}: dev avg_f={result.best_avg_f:.4f}")
    print(f"checkpoint: {out / 'model.ckpt'}")
    return EXIT_OK


def cmd_predict(args) -> int:
    inventory_override = getattr(args, "types", None)
    model, _, _ = load_checkpoint(args.checkpoint)
    inventory = (TypeInventory.from_file(inventory_override)
                 if inventory_override else model.inventory)
    if tuple(inventory.types) != tuple(model.inventory.types):
        raise CheckpointError("type inventory does not match the checkpoint")
    docs = parse_corpus(args.corpus, inventory)
    source = DirectoryEmbeddings(args.embeddings)
    if docs:
        probe = source.get(docs[0])
        if probe.layers != model.config.layers or probe.dim != model.config.dim:
            raise CheckpointError(
                f"checkpoint expects {model.config.layers}x{model.config.dim} "
                f"embeddings, directory has {probe.layers}x{probe.dim}")
    mode = "no-refine" if args.no_refine else None
    predictions = predict_chains(docs, source, model, decode_mode=args.decode,
                                 mode=mode, workers=args.workers)
    out = Path(args.out)
    if out.parent:
        out.parent.mkdir(parents=True, exist_ok=True)
    write_predictions(docs, predictions, out, inventory)
    sidecar = out.with_name(out.name + ".config.json")
    sidecar.write_text(json.dumps({
        "command": "predict", "corpus": str(args.corpus),
        "checkpoint": str(args.checkpoint), "decode": args.decode,
        "no_refine": bool(args.no_refine), "workers": args.workers,
    }, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    print(f"wrote predictions for {len(docs)} documents to {out}")
    return EXIT_OK


def cmd_score(args) -> int:
    inventory = _inventory(args)
    gold_docs = parse_corpus(args.gold, inventory)
    sys_docs = parse_corpus(args.system, inventory)
    sys_by_id = {d.doc_id: d for d in sys_docs}
    extra = set(sys_by_id) - {d.doc_id for d in gold_docs}
    if extra:
        print(f"warning: system file has {len(extra)} documents not in gold; "
              f"ignored", file=sys.stderr)
    pairs = []
    from .corpus import ChainSet  # empty prediction for missing docs
    for doc in gold_docs:
        sys_doc = sys_by_id.get(doc.doc_id)
        if sys_doc is None:
            print(f"warning: no system output for document {doc.doc_id!r}",
                  file=sys.stderr)
            pairs.append((gold_chains(doc), ChainSet(())))
            continue
        if len(sys_doc.tokens) != len(doc.tokens):
            print(f"warning: token count mismatch on {doc.doc_id!r}",
                  file=sys.stderr)
        pairs.append((gold_chains(doc), gold_chains(sys_doc)))
    report = evaluate_pairs(pairs)
    if args.machine:
        for line in machine_lines(report):
            print(line)
    else:
        print(format_report(report))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evcoref",
        description="event coreference: train, predict, score, synth")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--types", default=None,
                       help="type inventory file (one name per line)")

    p_train = sub.add_parser("train", help="train a model")
    common(p_train)
    p_train.add_argument("--corpus", required=True)
    p_train.add_argument("--dev", default=None)
    p_train.add_argument("--embeddings", required=True,
                         help="directory of <doc_id>.e3ce files")
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.add_argument("--max-epochs", type=int, default=None)
    p_train.add_argument("--learning-rate", type=float, default=None)
    p_train.add_argument("--no-refine", action="store_true")
    p_train.set_defaults(func=cmd_train)

    p_predict = sub.add_parser("predict", help="decode a corpus")
    common(p_predict)
    p_predict.add_argument("--corpus", required=True)
    p_predict.add_argument("--embeddings", required=True)
    p_predict.add_argument("--checkpoint", required=True)
    p_predict.add_argument("--out", required=True, help="output JSONL file")
    p_predict.add_argument("--decode", choices=("type-guided", "naive", "type-rule"),
                           default="type-guided")
    p_predict.add_argument("--no-refine", action="store_true")
    p_predict.set_defaults(func=cmd_predict)

    p_score = sub.add_parser("score", help="score system output against gold")
    common(p_score)
    p_score.add_argument("--gold", required=True)
    p_score.add_argument("--system", required=True)
    p_score.add_argument("--machine", action="store_true",
                         help="emit key=value lines instead of a table")
    p_score.set_defaults(func=cmd_score)

    p_synth = sub.add_parser("synth", help="write synthetic embeddings")
    common(p_synth)
    p_synth.add_argument("--corpus", required=True)
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument("--layers", type=int, default=3)
    p_synth.add_argument("--dim", type=int, default=32)
    p_synth.add_argument("--type-signal", type=float, default=0.0)
    p_synth.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", None) is None:
        args.seed = 0
    try:
        return args.func(args)
    except (ConfigError, ModelConfigError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckpointError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except NumericError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CorpusError, EmbeddingFormatError, EmbeddingMismatchError,
            FileNotFoundError, NotADirectoryError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
