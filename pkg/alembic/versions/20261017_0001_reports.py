"""Evaluation report registry

Revision ID: 20261017_0001_reports
Revises:
Create Date: 2026-10-17 00:01:00.000000
"""

from __future__ import annotations

import sqlalchemy as sa
from alembic import op

revision = "20261017_0001_reports"
down_revision = None
branch_labels = None
depends_on = None


def upgrade() -> None:
    op.create_table(
        "reports",
        sa.Column("id", sa.Integer(), primary_key=True),
        sa.Column("model_name", sa.String(length=128), nullable=False),
        sa.Column("task", sa.String(length=16), nullable=False),
        sa.Column("emotion", sa.String(length=16), nullable=True),
        sa.Column("fingerprint", sa.String(length=64), nullable=False),
        sa.Column("created_at", sa.DateTime(timezone=True), nullable=True),
        sa.Column("notes", sa.String(length=512), nullable=True),
    )
    op.create_index("ix_reports_model_emotion", "reports", ["model_name", "emotion"])

    op.create_table(
        "report_metrics",
        sa.Column("id", sa.Integer(), primary_key=True),
        sa.Column("report_id", sa.Integer(), sa.ForeignKey("reports.id", ondelete="CASCADE"), nullable=False),
        sa.Column("scope", sa.String(length=32), nullable=False),
        sa.Column("name", sa.String(length=32), nullable=False),
        sa.Column("value", sa.Float(), nullable=False),
        sa.UniqueConstraint("report_id", "scope", "name", name="uq_report_metric"),
    )


def downgrade() -> None:
    op.drop_table("report_metrics")
    op.drop_index("ix_reports_model_emotion", table_name="reports")
    op.drop_table("reports")
