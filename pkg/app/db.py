from __future__ import annotations

from functools import lru_cache
from typing import Any, Callable, Optional

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine, make_url
from sqlalchemy.orm import DeclarativeBase, Session, sessionmaker

from .config import get_settings


class Base(DeclarativeBase):
    """Declarative base for ORM models."""


@lru_cache()
def get_engine(database_url: Optional[str] = None) -> Engine:
    url = database_url or get_settings().database_url
    connect_args = {"check_same_thread": False} if make_url(url).get_backend_name() == "sqlite" else {}
    return create_engine(url, future=True, echo=False, connect_args=connect_args)


class Database:
    """Runs a unit of work in a fresh session, committing on success."""

    def __init__(self, session_factory: Callable[[], Session]):
        self._session_factory = session_factory

    def run(self, func: Callable[[Session], Any]) -> Any:
        with self._session_factory() as session:
            try:
                result = func(session)
                session.commit()
                return result
            except Exception:
                session.rollback()
                raise

    def run_without_commit(self, func: Callable[[Session], Any]) -> Any:
        with self._session_factory() as session:
            return func(session)

    def create_schema(self) -> None:
        with self._session_factory() as session:
            Base.metadata.create_all(session.get_bind())


@lru_cache()
def get_db(database_url: Optional[str] = None) -> Database:
    factory = sessionmaker(bind=get_engine(database_url), autoflush=False, expire_on_commit=False, class_=Session)
    return Database(factory)
