from __future__ import annotations

import argparse
import logging

from ..cli import Context, Router, argument
from ..services.datasets import EC_TASK, EIREG_TASK, load_records, write_tokens
from ..services.preprocess import Vocabulary

router = Router(name="preprocess")
logger = logging.getLogger(__name__)


@router.command("preprocess", help="Tokenize a dataset and build its vocabulary (--out is a directory).")
@argument("--input", required=True, help="E-c or EI-reg TSV file")
@argument("--task", choices=(EC_TASK, EIREG_TASK), required=True)
@argument("--emotion", default=None, help="emotion to keep from an EI-reg file")
@argument("--min-count", type=int, default=1, help="drop tokens seen fewer times")
def preprocess(args: argparse.Namespace, ctx: Context) -> None:
    records = load_records(args.input, args.task, args.emotion)
    vocab = Vocabulary.build((r.tokens.tokens for r in records), min_count=args.min_count)
    ctx.out.mkdir(parents=True, exist_ok=True)
    vocab.save(ctx.out / "vocab.txt")
    write_tokens(records, ctx.out / "tokens.tsv")
    logger.info("vocabulary hash %s", vocab.content_hash)
    print(f"{len(records)} tweets, vocabulary of {len(vocab)} tokens -> {ctx.out}")
