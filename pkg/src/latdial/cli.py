"""Command-line pipeline: prepare, train, evaluate, sweep-k, sample, chat.

One flat JSON config file drives everything; command-line flags override
file values. Exit codes: 0 success, 1 configuration or input validation
error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .chat import ChatSession, run_chat
from .config import ConfigError, RunConfig, TrainConfig, load_config
from .corpus import (
    EOS_ID,
    CorpusFormatError,
    Vocabulary,
    build_vocabulary,
    load_corpus,
    load_embeddings,
    load_exchanges,
    make_exchanges,
    save_exchanges,
)
from .metrics import MetricsReport, evaluate, strip_special
from .model import DialogModel
from .trainer import ResponseSampler, Trainer, TrainingDiverged, load_model_for_eval

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    # bad flags are validation errors, not runtime failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _data_paths(cfg: RunConfig) -> Dict[str, Path]:
    data = cfg.resolved_output_dir() / "data"
    return {
        "dir": data,
        "vocab": data / "vocab.txt",
        "embeddings": data / "embeddings.npy",
        "train": data / "train.exchanges",
        "valid": data / "valid.exchanges",
        "test": data / "test.exchanges",
    }


def _require_prepared(cfg: RunConfig, *keys: str) -> Dict[str, Path]:
    paths = _data_paths(cfg)
    missing = [str(paths[k]) for k in ("vocab", "embeddings", *keys) if not paths[k].exists()]
    if missing:
        raise ConfigError(
            "prepared cache missing (%s); run the prepare subcommand first"
            % ", ".join(missing)
        )
    return paths


def cmd_prepare(cfg: RunConfig) -> int:
    cfg.validate(require_paths=True)
    paths = _data_paths(cfg)
    paths["dir"].mkdir(parents=True, exist_ok=True)

    splits = {
        "train": cfg.train_path,
        "valid": cfg.valid_path,
        "test": cfg.test_path,
    }
    dialogues = {name: load_corpus(p, cfg.corpus_format) for name, p in splits.items()}
    for name, dlgs in dialogues.items():
        if not dlgs:
            raise ConfigError(f"{name} corpus has no usable dialogues")

    vocab = build_vocabulary(dialogues["train"], cfg.train.vocab_limit)
    vocab.save(paths["vocab"])
    table = load_embeddings(cfg.embedding_path, vocab, cfg.train.embed_dim, seed=cfg.seed)
    table.save(paths["embeddings"])

    for name, dlgs in dialogues.items():
        exchanges = make_exchanges(
            dlgs, vocab, cfg.train.context_window, cfg.train.max_utterance_len
        )
        if not exchanges:
            raise ConfigError(f"{name} corpus produced no exchanges")
        save_exchanges(exchanges, paths[name])
        print(f"prepare: {name}: {len(dlgs)} dialogues -> {len(exchanges)} exchanges")
    print(f"prepare: vocabulary {len(vocab)} tokens, "
          f"embedding coverage {table.coverage:.1%} -> {paths['dir']}")
    return EXIT_OK


def _load_prepared(cfg: RunConfig, *keys: str):
    paths = _require_prepared(cfg, *keys)
    vocab = Vocabulary.load(paths["vocab"])
    embeddings = np.load(paths["embeddings"])
    exchanges = {k: load_exchanges(paths[k]) for k in keys}
    return vocab, embeddings, exchanges


def cmd_train(cfg: RunConfig) -> int:
    cfg.validate(require_paths=False)
    vocab, embeddings, exchanges = _load_prepared(cfg, "train", "valid")
    out_dir = cfg.resolved_output_dir()
    model = DialogModel(len(vocab), cfg.train, embedding_matrix=embeddings)
    trainer = Trainer(model, cfg.train, str(out_dir), eval_embeddings=embeddings)
    records = trainer.train(exchanges["train"], exchanges["valid"], run_config=cfg)
    last = records[-1]
    print(f"train: {len(records)} epochs, final l_rec {last.l_rec:.4f}, "
          f"checkpoints under {out_dir / 'ckpt'}")
    return EXIT_OK


def _resolve_checkpoint(cfg: RunConfig, checkpoint: Optional[str]) -> Path:
    if checkpoint:
        path = Path(checkpoint)
        if not path.exists():
            raise ConfigError(f"checkpoint does not exist: {path}")
        return path
    best = cfg.resolved_output_dir() / "ckpt" / "best.json"
    if not best.exists():
        raise ConfigError(
            "no --checkpoint given and %s not found; train first" % best
        )
    epoch = json.loads(best.read_text())["epoch"]
    return cfg.resolved_output_dir() / "ckpt" / f"epoch-{epoch}"


def _write_report(report: MetricsReport, out_dir: Path, stem: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / f"{stem}.json"
    json_path.write_text(report.to_json())
    (out_dir / f"{stem}.csv").write_text(
        report.csv_header() + "\n" + report.to_csv_row() + "\n"
    )
    return json_path


def cmd_evaluate(cfg: RunConfig, checkpoint: Optional[str], n_samples: Optional[int]) -> int:
    cfg.validate(require_paths=False)
    _, embeddings, exchanges = _load_prepared(cfg, "test")
    ckpt = _resolve_checkpoint(cfg, checkpoint)
    model = load_model_for_eval(str(ckpt))
    sampler = ResponseSampler(model, seed=cfg.seed)
    report = evaluate(
        sampler,
        exchanges["test"],
        embeddings,
        EOS_ID,
        n_samples=n_samples or cfg.train.n_samples,
    )
    json_path = _write_report(report, cfg.resolved_output_dir() / "eval", "report")
    print(report.to_json(), end="")
    print(f"evaluate: report written to {json_path}")
    return EXIT_OK


def cmd_sweep_k(cfg: RunConfig, k_values: List[int], n_samples: Optional[int]) -> int:
    cfg.validate(require_paths=False)
    if not k_values:
        raise ConfigError("sweep-k needs at least one K value")
    if any(k < 1 for k in k_values):
        raise ConfigError("K values must be >= 1")
    vocab, embeddings, exchanges = _load_prepared(cfg, "train", "valid", "test")
    sweep_dir = cfg.resolved_output_dir() / "sweep-k"
    rows = []
    for k in k_values:
        train_cfg = dataclasses.replace(cfg.train, prior="mixture", mixture_k=k)
        run_dir = sweep_dir / f"k-{k}"
        model = DialogModel(len(vocab), train_cfg, embedding_matrix=embeddings)
        trainer = Trainer(model, train_cfg, str(run_dir), eval_embeddings=embeddings)
        trainer.train(exchanges["train"], exchanges["valid"])
        sampler = ResponseSampler(model, seed=cfg.seed)
        report = evaluate(
            sampler,
            exchanges["test"],
            embeddings,
            EOS_ID,
            n_samples=n_samples or cfg.train.n_samples,
        )
        _write_report(report, run_dir, "report")
        rows.append({"k": k, **report.to_dict()})
        print(f"sweep-k: K={k} done")

    sweep_dir.mkdir(parents=True, exist_ok=True)
    (sweep_dir / "sweep.json").write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n")
    header = "k," + MetricsReport.csv_header()
    lines = [header]
    for row in rows:
        lines.append(str(row["k"]) + "," + ",".join(
            "%.6f" % row[f] for f in MetricsReport.FIELDS))
    (sweep_dir / "sweep.csv").write_text("\n".join(lines) + "\n")
    print(f"sweep-k: table written to {sweep_dir / 'sweep.csv'}")
    return EXIT_OK


def cmd_sample(cfg: RunConfig, checkpoint: Optional[str], n_samples: Optional[int]) -> int:
    cfg.validate(require_paths=False)
    vocab, _, exchanges = _load_prepared(cfg, "test")
    ckpt = _resolve_checkpoint(cfg, checkpoint)
    model = load_model_for_eval(str(ckpt))
    sampler = ResponseSampler(model, seed=cfg.seed)
    n = n_samples or cfg.train.n_samples
    out_path = cfg.resolved_output_dir() / "samples.jsonl"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w") as f:
        for ex in exchanges["test"]:
            samples = sampler(ex, n)
            record = {
                "context": [
                    " ".join(vocab.decode(strip_special(u.tokens, EOS_ID)))
                    for u in ex.context
                ],
                "reference": " ".join(
                    vocab.decode(strip_special(ex.response.tokens, EOS_ID))
                ),
                "samples": [" ".join(vocab.decode(s)) for s in samples],
            }
            f.write(json.dumps(record, sort_keys=True) + "\n")
    print(f"sample: {len(exchanges['test'])} contexts x {n} samples -> {out_path}")
    return EXIT_OK


def cmd_chat(cfg: RunConfig, checkpoint: Optional[str], n_samples: Optional[int]) -> int:
    cfg.validate(require_paths=False)
    paths = _require_prepared(cfg)
    vocab = Vocabulary.load(paths["vocab"])
    ckpt = _resolve_checkpoint(cfg, checkpoint)
    model = load_model_for_eval(str(ckpt))
    n = n_samples or 1
    session = ChatSession(
        model, vocab, seed=cfg.seed, n_samples=n, show_all=n > 1
    )
    return run_chat(session, sys.stdin, sys.stdout)


def build_parser() -> _Parser:
    parser = _Parser(prog="latdial", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_ckpt in (
        ("prepare", False),
        ("train", False),
        ("evaluate", True),
        ("sweep-k", False),
        ("sample", True),
        ("chat", True),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--n-samples", type=int, default=None,
                       help="responses sampled per context")
        if needs_ckpt:
            p.add_argument("--checkpoint", default=None,
                           help="checkpoint directory (default: best epoch)")
        if name == "sweep-k":
            p.add_argument("--k", default="1,3,5",
                           help="comma-separated mixture sizes, e.g. 1,3,5")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, overrides={"seed": args.seed})
        if args.command == "prepare":
            return cmd_prepare(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.checkpoint, args.n_samples)
        if args.command == "sweep-k":
            k_values = [int(v) for v in str(args.k).split(",") if v.strip()]
            return cmd_sweep_k(cfg, k_values, args.n_samples)
        if args.command == "sample":
            return cmd_sample(cfg, args.checkpoint, args.n_samples)
        if args.command == "chat":
            return cmd_chat(cfg, args.checkpoint, args.n_samples)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, CorpusFormatError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDiverged as e:
        where = f" (last good checkpoint: {e.last_checkpoint})" if e.last_checkpoint else ""
        print(f"training diverged: {e}{where}", file=sys.stderr)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as e:  # noqa: BLE001 - CLI boundary
        logger.exception("unhandled failure")
        print(f"runtime failure: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
