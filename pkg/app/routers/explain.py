from __future__ import annotations

import argparse
import logging
from pathlib import Path

from ..cli import Context, Router, argument, ensure_parent, load_model_vocab
from ..config import EMOTIONS
from ..errors import ContractError
from ..nn.networks import REGRESSOR, load_bundle
from ..services.datasets import EIREG_TASK, encode_records, load_records
from ..services.explain import EXACT_LIMIT, AttributionMode, attribute, render_heatmap, write_attribution_csv

router = Router(name="explain")
logger = logging.getLogger(__name__)

AUTO = "auto"


@router.command("explain", help="Attribute intensity predictions to tokens and render an HTML heatmap.")
@argument("--model", required=True, type=Path, help="trained intensity regressor")
@argument("--input", required=True, help="EI-reg TSV file")
@argument("--emotion", default=None, choices=EMOTIONS)
@argument("--vocab", default=None)
@argument("--mode", default=AUTO, choices=(AUTO, "exact", "sampled"), help="auto: exact up to 12 tokens")
@argument("--samples", type=int, default=None, help="permutations in sampled mode (default: SHAPLEY_SAMPLES)")
@argument("--limit", type=int, default=20, help="number of tweets to explain")
@argument("--csv", default=None, type=Path, help="also dump id,token,S,I rows")
def explain(args: argparse.Namespace, ctx: Context) -> None:
    bundle = load_bundle(args.model)
    if bundle.config.kind != REGRESSOR:
        raise ContractError("token attribution is provided for intensity regressors only")
    vocab = load_model_vocab(args.model, args.vocab, bundle.vocab_hash)
    emotion = args.emotion or bundle.config.emotion
    records = encode_records(load_records(args.input, EIREG_TASK, emotion), vocab)[: args.limit]
    samples = args.samples or ctx.settings.shapley_samples

    attributions = []
    for record in records:
        length = min(len(record.token_ids()), bundle.config.max_seq_len)
        if args.mode == AUTO:
            mode = AttributionMode.EXACT if length <= EXACT_LIMIT else AttributionMode.SAMPLED
        else:
            mode = AttributionMode(args.mode)
        attributions.append(
            attribute(
                bundle,
                record.tokens.tokens,
                record.token_ids(),
                tweet_id=record.id,
                mode=mode,
                samples=samples,
                seed=ctx.seed,
                emotion=emotion,
                gold=record.intensity,
            )
        )
        logger.info("explained %s with %s mode", record.id, mode.value)

    ensure_parent(ctx.out).write_text(render_heatmap(attributions), encoding="utf-8")
    if args.csv:
        write_attribution_csv(attributions, ensure_parent(args.csv))
    print(f"{len(attributions)} tweets explained -> {ctx.out}")
