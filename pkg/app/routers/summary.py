from __future__ import annotations

import argparse

from ..cli import Context, Router, argument, ensure_parent
from ..db import get_db
from ..services.registry import comparison_table, export_table

router = Router(name="summary")


@router.command("summary", help="Export the model x emotion comparison table from recorded reports (.csv or .xlsx).")
@argument("--metric", default="pearson", help="overall metric to tabulate")
def summary(args: argparse.Namespace, ctx: Context) -> None:
    db = get_db(ctx.settings.database_url)
    db.create_schema()
    table = db.run_without_commit(lambda session: comparison_table(session, args.metric))
    export_table(table, ensure_parent(ctx.out))
    if table.empty:
        print("no recorded reports")
    else:
        print(table.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
