"""Command routing for the ``tweetaffect`` command line.

Handlers register on a :class:`Router` per feature area; :func:`build_parser`
turns every router into argparse subcommands that share ``--seed``,
``--config`` and ``--out``.
"""
from __future__ import annotations

import argparse
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from .config import Settings
from .errors import ContractError
from .services.preprocess import Vocabulary

PROG = "tweetaffect"


@dataclass
class Context:
    settings: Settings
    seed: int
    out: Path


Handler = Callable[[argparse.Namespace, Context], Any]


@dataclass
class Command:
    name: str
    help: str
    handler: Handler
    arguments: List[Tuple[Tuple[str, ...], Dict[str, Any]]] = field(default_factory=list)


class Router:
    def __init__(self, name: str):
        self.name = name
        self.commands: List[Command] = []

    def command(self, name: str, help: str = "") -> Callable[[Handler], Handler]:
        def decorator(func: Handler) -> Handler:
            arguments = list(reversed(getattr(func, "__cli_arguments__", [])))
            self.commands.append(Command(name=name, help=help, handler=func, arguments=arguments))
            return func

        return decorator


def argument(*flags: str, **kwargs: Any) -> Callable[[Handler], Handler]:
    def decorator(func: Handler) -> Handler:
        func.__dict__.setdefault("__cli_arguments__", []).append((flags, kwargs))
        return func

    return decorator


def build_parser(routers: Sequence[Router]) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=PROG, description="Emotion classification and intensity toolkit for tweets.")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for router in routers:
        for command in router.commands:
            sub = subparsers.add_parser(command.name, help=command.help, description=command.help)
            sub.add_argument("--seed", type=int, default=None, help="random seed (default: SEED from config)")
            sub.add_argument("--config", default=None, help="versioned KEY=value config file")
            sub.add_argument("--out", required=True, type=Path, help="primary output path")
            for flags, kwargs in command.arguments:
                sub.add_argument(*flags, **kwargs)
            sub.set_defaults(handler=command.handler)
    return parser


def vocab_path_for(model_path: Path) -> Path:
    return model_path.with_suffix(".vocab.txt")


def load_model_vocab(model_path: Path, vocab_path: Optional[str], expected_hash: str) -> Vocabulary:
    vocab = Vocabulary.load(vocab_path or vocab_path_for(model_path))
    if expected_hash and vocab.content_hash != expected_hash:
        raise ContractError(f"vocabulary does not match the one {model_path} was trained with")
    return vocab


def ensure_parent(path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    return path
