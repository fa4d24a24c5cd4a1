from __future__ import annotations

import argparse
import logging
from pathlib import Path

from ..cli import Context, Router, argument, ensure_parent
from ..config import EMOTIONS, config_fingerprint
from ..db import get_db
from ..services.baselines import LEARNER_NOTE, NBOW_AFFECT, TFIDF, WEIGHTINGS, bow_baseline, embedding_inputs
from ..services.datasets import EC_TASK, EIREG_TASK, load_eireg, load_records, read_predictions, write_predictions
from ..services.fusion import ingest_external_features, parse_source_spec
from ..services.metrics import evaluate_intensity, evaluate_multilabel
from ..services.preprocess import Vocabulary
from ..services.registry import record_report

router = Router(name="evaluate")
logger = logging.getLogger(__name__)


def notes_path_for(predictions_path: Path) -> Path:
    return predictions_path.with_suffix(".notes.txt")


@router.command("evaluate", help="Score a predictions file against gold data (text report at --out, metrics CSV next to it).")
@argument("--pred", required=True, help="predictions CSV")
@argument("--gold", required=True, help="E-c or EI-reg TSV file")
@argument("--task", choices=(EC_TASK, EIREG_TASK), required=True)
@argument("--emotion", default=None, choices=EMOTIONS)
@argument("--vocab", default=None, help="vocabulary included in the config fingerprint")
@argument("--model-name", default="", help="label used in the report and the results registry")
@argument("--note", action="append", default=[], help="free-text line added to the report header")
@argument("--record", action="store_true", help="store the report in the results database")
def evaluate(args: argparse.Namespace, ctx: Context) -> None:
    vocab_hash = Vocabulary.load(args.vocab).content_hash if args.vocab else ""
    fingerprint = config_fingerprint(ctx.settings, vocab_hash, ctx.seed)
    predictions = read_predictions(args.pred)
    records = load_records(args.gold, args.task, args.emotion)
    if args.task == EC_TASK:
        report = evaluate_multilabel(predictions, records, fingerprint, ctx.settings.decision_threshold, args.model_name)
    else:
        report = evaluate_intensity(predictions, records, fingerprint, args.model_name)
    notes_file = notes_path_for(Path(args.pred))
    if notes_file.exists():
        report.notes.extend(line for line in notes_file.read_text(encoding="utf-8").splitlines() if line)
    report.notes.extend(args.note)

    out = ensure_parent(ctx.out)
    out.write_text(report.to_text(), encoding="utf-8")
    report.to_csv(out.with_name(f"{out.stem}.metrics.csv"))
    if args.record:
        db = get_db(ctx.settings.database_url)
        db.create_schema()
        db.run(lambda session: record_report(session, report).id)
    print(report.to_text(), end="")


@router.command("baseline", help="Bag-of-words intensity baseline (ridge regression) for one emotion.")
@argument("--train", required=True, help="EI-reg TSV file")
@argument("--test", required=True, help="EI-reg TSV file to predict")
@argument("--emotion", required=True, choices=EMOTIONS)
@argument("--weighting", default=TFIDF, choices=WEIGHTINGS)
@argument("--embeddings", default=None, help="word2vec-style text embeddings (nbow, nbow+a)")
@argument("--affect", default=None, metavar="NAME=PATH", help="external affect features (nbow+a)")
def baseline(args: argparse.Namespace, ctx: Context) -> None:
    train = load_eireg(args.train, args.emotion)
    test = load_eireg(args.test, args.emotion)
    embeddings = None
    if args.embeddings:
        train, test, embeddings = embedding_inputs(
            train, test, args.embeddings, seed=ctx.seed, init_range=ctx.settings.embedding_init_range
        )
    affect = None
    if args.affect:
        name, path = parse_source_spec(args.affect)
        affect = ingest_external_features(path, name)
    elif args.weighting == NBOW_AFFECT:
        logger.warning("nbow+a without --affect features")

    values = bow_baseline(train, test, args.weighting, embeddings, affect, alpha=ctx.settings.ridge_alpha)
    write_predictions([r.id for r in test], values, ensure_parent(ctx.out), (args.emotion,))
    note = LEARNER_NOTE.format(alpha=ctx.settings.ridge_alpha)
    notes_path_for(ctx.out).write_text(f"{args.weighting} baseline; {note}\n", encoding="utf-8")
    logger.info(note)
    print(f"{args.weighting} baseline, {len(test)} predictions ({note}) -> {ctx.out}")
