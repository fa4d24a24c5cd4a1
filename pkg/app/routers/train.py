from __future__ import annotations

import argparse
import logging
from typing import List, Optional

import numpy as np

from ..cli import Context, Router, argument, ensure_parent, vocab_path_for
from ..config import EMOTIONS, NetworkSettings
from ..nn.networks import CLASSIFIER, REGRESSOR, ModelBundle, config_from_settings, save_bundle
from ..nn.training import MSE, XENT, AdamState, TrainPlan, train, write_loss_log
from ..services.datasets import TweetRecord, encode_records, load_ec, load_eireg
from ..services.preprocess import Vocabulary, load_embeddings, random_embeddings

router = Router(name="train")
logger = logging.getLogger(__name__)

_COMMON = (
    argument("--vocab", default=None, help="vocabulary file (default: built from the training data)"),
    argument("--embeddings", default=None, help="word2vec-style text embeddings"),
    argument("--epochs", type=int, default=None, help="override the preset epoch count"),
)


def _with_common(func):
    for decorate in reversed(_COMMON):
        func = decorate(func)
    return func


def _train_network(
    records: List[TweetRecord],
    args: argparse.Namespace,
    ctx: Context,
    kind: str,
    preset: NetworkSettings,
    epochs: int,
    loss: str,
    emotion: Optional[str] = None,
) -> ModelBundle:
    settings = ctx.settings
    if args.vocab:
        vocab = Vocabulary.load(args.vocab)
    else:
        vocab = Vocabulary.build(r.tokens.tokens for r in records)
    records = encode_records(records, vocab)

    if args.embeddings:
        loaded = load_embeddings(args.embeddings, vocab, seed=ctx.seed, init_range=settings.embedding_init_range)
        table = loaded.table
    else:
        table = random_embeddings(vocab, settings.embedding_dim, ctx.seed, settings.embedding_init_range)

    config = config_from_settings(kind, preset, table.dim, settings.max_seq_len, emotion)
    bundle = ModelBundle.initialize(config, table.weights.value, np.random.default_rng(ctx.seed), vocab.content_hash)
    plan = TrainPlan(epochs=epochs, batch_size=preset.batch_size, loss=loss, seed=ctx.seed)
    result = train(bundle, records, plan, AdamState.from_settings(settings.adam))

    out = ensure_parent(ctx.out)
    save_bundle(result.bundle, out)
    if not args.vocab:
        vocab.save(vocab_path_for(out))
    write_loss_log(result.losses, out.with_suffix(".loss.csv"))
    print(f"trained {kind} on {len(records)} tweets for {epochs} epochs, final loss {result.losses[-1]:.6f} -> {out}")
    return result.bundle


@router.command("train-clf", help="Train the multi-label emotion classifier on an E-c file.")
@argument("--train", required=True, help="E-c TSV file")
@_with_common
def train_classifier(args: argparse.Namespace, ctx: Context) -> None:
    preset = ctx.settings.eccu
    records = load_ec(args.train)
    _train_network(records, args, ctx, CLASSIFIER, preset, args.epochs or preset.epochs, XENT)


@router.command("train-reg", help="Train the intensity regressor for one emotion on an EI-reg file.")
@argument("--train", required=True, help="EI-reg TSV file")
@argument("--emotion", required=True, choices=EMOTIONS)
@_with_common
def train_regressor(args: argparse.Namespace, ctx: Context) -> None:
    epochs = args.epochs or ctx.settings.eipu_epochs(args.emotion)
    logger.info("training %s regressor for %d epochs", args.emotion, epochs)
    records = load_eireg(args.train, args.emotion)
    _train_network(records, args, ctx, REGRESSOR, ctx.settings.eipu, epochs, MSE, args.emotion)
