from __future__ import annotations

import logging
import sys
from typing import List, Optional

from .cli import Context, build_parser
from .config import get_settings
from .errors import TweetAffectError
from .nn.tensor import set_debug_checks
from .routers import evaluate, explain, features, predict, preprocess, summary, train

logging.basicConfig(level=logging.INFO, format="%(levelname)s [%(name)s] %(message)s")
logger = logging.getLogger(__name__)

ROUTERS = (
    preprocess.router,
    train.router,
    features.router,
    predict.router,
    explain.router,
    evaluate.router,
    summary.router,
)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser(ROUTERS)
    args = parser.parse_args(argv)
    try:
        settings = get_settings(args.config)
        logging.getLogger().setLevel(settings.log_level.upper())
        set_debug_checks(settings.debug_checks)
        seed = settings.seed if args.seed is None else args.seed
        args.handler(args, Context(settings=settings, seed=seed, out=args.out))
    except TweetAffectError as exc:
        logger.error("%s: %s", args.command, exc)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
