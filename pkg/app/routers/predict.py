from __future__ import annotations

import argparse
import json
import logging
from pathlib import Path
from typing import List, Optional

import numpy as np

from ..cli import Context, Router, argument, ensure_parent, load_model_vocab
from ..config import EMOTIONS
from ..errors import ContractError, FormatError
from ..nn.networks import CLASSIFIER, MAGIC, load_bundle, predict
from ..services.boosting import load_gbt, predict_many
from ..services.datasets import EC_TASK, EIREG_TASK, encode_records, load_records, write_predictions
from ..services.fusion import FeatureSet, fuse
from ..services.metrics import threshold
from .features import load_feature_sources, manifest_path_for

router = Router(name="predict")
logger = logging.getLogger(__name__)


def _ordered_sources(model_path: Path, sources: List[FeatureSet]) -> List[FeatureSet]:
    manifest_file = manifest_path_for(model_path)
    if not manifest_file.exists():
        raise FormatError(f"{manifest_file} not found next to the fused model")
    manifest = json.loads(manifest_file.read_text(encoding="utf-8"))
    by_name = {s.source: s for s in sources}
    ordered = []
    for group in manifest["columns"]:
        source = by_name.get(group["source"])
        if source is None:
            raise ContractError(f"fused model needs feature source {group['source']!r}")
        if source.width != group["stop"] - group["start"]:
            raise ContractError(f"source {group['source']!r} has width {source.width}, model expects {group['stop'] - group['start']}")
        ordered.append(source)
    return ordered


def _predict_network(args: argparse.Namespace, ctx: Context) -> None:
    bundle = load_bundle(args.model)
    vocab = load_model_vocab(args.model, args.vocab, bundle.vocab_hash)
    if bundle.config.kind == CLASSIFIER:
        records = encode_records(load_records(args.input, EC_TASK), vocab)
        scores = np.vstack([predict(bundle, r.token_ids()) for r in records])
        write_predictions([r.id for r in records], threshold(scores, ctx.settings.decision_threshold), ctx.out, bundle.config.labels)
    else:
        emotion = args.emotion or bundle.config.emotion
        records = encode_records(load_records(args.input, EIREG_TASK, emotion), vocab)
        values = np.array([float(predict(bundle, r.token_ids())[0]) for r in records])
        write_predictions([r.id for r in records], values, ctx.out, bundle.config.labels)
    print(f"{len(records)} predictions from {bundle.config.kind} -> {ctx.out}")


def _predict_fused(args: argparse.Namespace, ctx: Context) -> None:
    if not args.features:
        raise ContractError("a fused model needs --features NAME=PATH for every source it was trained on")
    model = load_gbt(args.model)
    sources = _ordered_sources(args.model, load_feature_sources(args.features))
    ids: Optional[List[str]] = None
    if args.input:
        ids = [r.id for r in load_records(args.input, EIREG_TASK, args.emotion or _manifest_emotion(args.model))]
    fused = fuse(sources, ids=ids)
    values = predict_many(model, fused.matrix)
    write_predictions(fused.ids, values, ctx.out, ("intensity",))
    print(f"{len(fused.ids)} fused predictions -> {ctx.out}")


def _manifest_emotion(model_path: Path) -> Optional[str]:
    return json.loads(manifest_path_for(model_path).read_text(encoding="utf-8")).get("emotion")


@router.command("predict", help="Predict with a classifier, regressor or fused model.")
@argument("--model", required=True, type=Path)
@argument("--input", default=None, help="TSV file of tweets (optional for fused models)")
@argument("--emotion", default=None, choices=EMOTIONS)
@argument("--vocab", default=None, help="vocabulary file (default: next to the model)")
@argument("--features", action="append", default=None, metavar="NAME=PATH", help="feature sources of a fused model")
def predict_command(args: argparse.Namespace, ctx: Context) -> None:
    with open(args.model, "rb") as fh:
        is_network = fh.read(len(MAGIC)) == MAGIC
    ensure_parent(ctx.out)
    if is_network:
        if not args.input:
            raise ContractError("--input is required for network models")
        _predict_network(args, ctx)
    else:
        _predict_fused(args, ctx)
