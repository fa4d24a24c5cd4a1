from __future__ import annotations

import argparse
import json
import logging
from pathlib import Path
from typing import List, Sequence

import numpy as np

from ..cli import Context, Router, argument, ensure_parent, load_model_vocab
from ..config import EMOTIONS
from ..errors import UndefinedCorrelationError
from ..nn.networks import extract_features, load_bundle
from ..services.boosting import gbt_train, predict_many, save_gbt
from ..services.datasets import EC_TASK, EIREG_TASK, encode_records, load_eireg, load_records
from ..services.fusion import (
    FeatureSet,
    fuse,
    ingest_external_features,
    parse_source_spec,
    select_sources,
    write_features,
)
from ..services.metrics import pearson

router = Router(name="features")
logger = logging.getLogger(__name__)


def manifest_path_for(model_path: Path) -> Path:
    return model_path.with_suffix(".manifest.json")


def load_feature_sources(specs: Sequence[str]) -> List[FeatureSet]:
    sources = []
    for spec in specs:
        name, path = parse_source_spec(spec)
        sources.append(ingest_external_features(path, name))
    return sources


@router.command("extract-features", help="Write the pooled and output activations of a trained network per tweet.")
@argument("--model", required=True, type=Path)
@argument("--input", required=True, help="E-c or EI-reg TSV file")
@argument("--task", choices=(EC_TASK, EIREG_TASK), required=True)
@argument("--emotion", default=None, choices=EMOTIONS)
@argument("--vocab", default=None, help="vocabulary file (default: next to the model)")
@argument("--source", default=None, help="source name (default: the model kind)")
def extract(args: argparse.Namespace, ctx: Context) -> None:
    bundle = load_bundle(args.model)
    vocab = load_model_vocab(args.model, args.vocab, bundle.vocab_hash)
    records = encode_records(load_records(args.input, args.task, args.emotion), vocab)
    source = args.source or bundle.config.kind
    feature_set = FeatureSet.from_vectors(
        source, (extract_features(bundle, r.token_ids(), r.id, source) for r in records)
    )
    write_features(feature_set, ensure_parent(ctx.out))
    print(f"{len(records)} vectors of width {feature_set.width} from {source} -> {ctx.out}")


@router.command("ingest-features", help="Validate an external id,f0,f1,... feature file and register it under a name.")
@argument("--input", required=True)
@argument("--source", required=True, help="name used when fusing, e.g. deepmoji")
def ingest(args: argparse.Namespace, ctx: Context) -> None:
    feature_set = ingest_external_features(args.input, args.source)
    write_features(feature_set, ensure_parent(ctx.out))
    print(f"{len(feature_set.vectors)} vectors of width {feature_set.width} as {args.source} -> {ctx.out}")


@router.command("train-fusion", help="Train the boosted-tree regressor on concatenated feature sources.")
@argument("--train", required=True, help="EI-reg TSV file with gold intensities")
@argument("--emotion", required=True, choices=EMOTIONS)
@argument("--features", action="append", required=True, metavar="NAME=PATH", help="feature source, repeatable, in order")
@argument("--preset", default=None, choices=("c1", "c2"), help="boosting preset (default: per emotion)")
def train_fusion(args: argparse.Namespace, ctx: Context) -> None:
    preset = ctx.settings.fusion_preset(args.emotion, args.preset)
    records = load_eireg(args.train, args.emotion)
    sources = select_sources(load_feature_sources(args.features), preset.excluded_sources)
    fused = fuse(sources, ids=[r.id for r in records])
    target = np.array([r.intensity for r in records])
    model = gbt_train(
        fused.matrix,
        target,
        max_depth=preset.max_depth,
        learning_rate=preset.learning_rate,
        n_estimators=preset.n_estimators,
        reg_lambda=preset.reg_lambda,
        min_samples_leaf=preset.min_samples_leaf,
    )
    out = ensure_parent(ctx.out)
    save_gbt(model, out)
    manifest = json.loads(fused.manifest_json())
    manifest["emotion"] = args.emotion
    manifest_path_for(out).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    fit = predict_many(model, fused.matrix)
    try:
        train_r = f"{pearson(fit, target):.4f}"
    except UndefinedCorrelationError:
        train_r = "undefined"
    print(f"{len(model.trees)} trees over {','.join(fused.sources)} (width {fused.matrix.shape[1]}), train pearson {train_r} -> {out}")
