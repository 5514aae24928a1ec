"""Command-line interface: checkpoint creation and text encoding.

Exit codes: 0 success, 2 configuration or usage errors, 3 data errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from encoder_bridge.embfile import write_embedding_file
from encoder_bridge.errors import CheckpointError, InputError
from encoder_bridge.model import (
    POOLINGS,
    ROLES,
    Encoder,
    load_checkpoint,
    make_checkpoint,
    save_checkpoint,
)
from encoder_bridge.vocab import Vocabulary


def read_texts_tsv(path: Path) -> dict[str, str]:
    """``id<TAB>text`` lines; blank lines and leading ``#`` comments skipped."""
    if not path.exists():
        raise InputError(f"input file not found: {path}")
    out: dict[str, str] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise InputError(f"{path}:{lineno}: expected id<TAB>text")
            text_id, text = parts
            if text_id in out:
                raise InputError(f"{path}:{lineno}: duplicate id {text_id!r}")
            out[text_id] = text
    if not out:
        raise InputError(f"{path}: no texts found")
    return out


def _cmd_encode(args: argparse.Namespace) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    if ckpt.model_id != args.model_id:
        raise CheckpointError(
            f"checkpoint belongs to model {ckpt.model_id!r}, not {args.model_id!r}"
        )
    texts = read_texts_tsv(Path(args.input))
    encoder = Encoder(ckpt, args.role)
    rows = encoder.encode(list(texts.values()))
    write_embedding_file(list(texts), rows, args.output)
    print(f"encoded {len(texts)} texts at dimension {ckpt.dim} -> {args.output}")
    return 0


def _cmd_make_checkpoint(args: argparse.Namespace) -> int:
    vocab_path = Path(args.vocab)
    if not vocab_path.exists():
        raise InputError(f"vocabulary file not found: {vocab_path}")
    words = [
        line.strip()
        for line in vocab_path.read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    ]
    vocab = Vocabulary.build(words)
    ckpt = make_checkpoint(
        args.model_id, vocab, dim=args.dim, seed=args.seed, pooling=args.pooling
    )
    save_checkpoint(ckpt, args.output)
    print(
        f"wrote checkpoint {args.output} "
        f"(model {args.model_id}, vocab {len(vocab)}, dim {args.dim}, {args.pooling})"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="encoder-bridge",
        description="Encode id<TAB>text files into binary embedding containers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    enc = sub.add_parser("encode", help="encode a TSV of texts into an embedding file")
    enc.add_argument("--model-id", required=True, help="model the checkpoint must match")
    enc.add_argument("--checkpoint", required=True, help="path to a .npz checkpoint")
    enc.add_argument("--role", required=True, choices=ROLES)
    enc.add_argument("--input", required=True, help="id<TAB>text file")
    enc.add_argument("--output", required=True, help="embedding container to write")
    enc.set_defaults(func=_cmd_encode)

    mk = sub.add_parser("make-checkpoint", help="create a seeded random checkpoint")
    mk.add_argument("--model-id", required=True)
    mk.add_argument("--vocab", required=True, help="text file, one word per line")
    mk.add_argument("--dim", type=int, default=32)
    mk.add_argument("--seed", type=int, default=0)
    mk.add_argument("--pooling", choices=POOLINGS, default="mean")
    mk.add_argument("--output", required=True, help="checkpoint path to write")
    mk.set_defaults(func=_cmd_make_checkpoint)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return 2
    except (InputError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
