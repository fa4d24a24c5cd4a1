from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

import pandas as pd
from sqlalchemy.orm import Session

from ..config import EMOTIONS
from ..errors import ContractError
from ..models import Report, ReportMetric
from .metrics import EvalReport

logger = logging.getLogger(__name__)

AVERAGE_COLUMN = "Average"


def record_report(session: Session, report: EvalReport) -> Report:
    row = Report(
        model_name=report.model_name or "unnamed",
        task=report.task,
        emotion=report.emotion,
        fingerprint=report.fingerprint,
        notes="; ".join(report.notes) or None,
    )
    for entry in report.rows():
        row.metrics.append(ReportMetric(scope=str(entry["scope"]), name=str(entry["metric"]), value=float(entry["value"])))
    session.add(row)
    session.flush()
    logger.info("recorded %s report %d for %s", report.task, row.id, row.model_name)
    return row


def latest_scores(session: Session, metric: str = "pearson") -> Dict[str, Dict[str, float]]:
    """model -> emotion -> overall ``metric`` of the most recent report."""
    rows = (
        session.query(Report.model_name, Report.emotion, ReportMetric.value)
        .join(ReportMetric, ReportMetric.report_id == Report.id)
        .filter(ReportMetric.scope == "overall", ReportMetric.name == metric, Report.emotion.isnot(None))
        .order_by(Report.created_at, Report.id)
        .all()
    )
    scores: Dict[str, Dict[str, float]] = {}
    for model_name, emotion, value in rows:
        scores.setdefault(model_name, {})[emotion] = float(value)
    return scores


def comparison_table(session: Session, metric: str = "pearson") -> pd.DataFrame:
    """Model x emotion table of the latest scores with an average over the emotions present."""
    scores = latest_scores(session, metric)
    columns = ["Model", *EMOTIONS, AVERAGE_COLUMN]
    data: List[Dict[str, Optional[float]]] = []
    for model_name in sorted(scores):
        row: Dict[str, Optional[float]] = {"Model": model_name}
        present = [scores[model_name][e] for e in EMOTIONS if e in scores[model_name]]
        for emotion in EMOTIONS:
            row[emotion] = scores[model_name].get(emotion)
        row[AVERAGE_COLUMN] = sum(present) / len(present) if present else None
        data.append(row)
    return pd.DataFrame(data, columns=columns)


def export_table(frame: pd.DataFrame, path: Union[str, Path]) -> None:
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        frame.to_csv(path, index=False)
    elif suffix == ".xlsx":
        frame.to_excel(path, index=False)
    else:
        raise ContractError(f"summary table must be .csv or .xlsx, got {suffix or 'no suffix'}")
