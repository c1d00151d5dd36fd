import logging
import sqlalchemy
from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker, scoped_session

from db.db_models import Base

SessionFactory = None
ledger_engine = None


def init_engine(url: str) -> sqlalchemy.engine.base.Engine:
    """
    Initialize the run-ledger engine and session factory, creating tables on first use.

    :param url: SQLAlchemy database URL, e.g. `sqlite:///runs.db`
    :return: the engine bound to the module-level SessionFactory
    """
    global SessionFactory, ledger_engine
    try:
        engine = create_engine(url, pool_pre_ping=True)
    except Exception as exc:
        logging.error(f"Error creating ledger engine for {url}: {exc}")
        raise
    ledger_engine = engine
    SessionFactory = scoped_session(sessionmaker(autocommit=False, autoflush=False, bind=engine))
    create_tables(engine)
    return engine


def create_tables(engine) -> None:
    """Creates all tables defined in the ORM models."""
    try:
        Base.metadata.create_all(bind=engine)
        logging.debug("Ledger tables are ready.")
    except Exception as error:
        logging.error(f"Error while creating tables: {error}")
        raise


def dispose_engine() -> None:
    """Drop the session factory and release pooled connections."""
    global SessionFactory, ledger_engine
    if SessionFactory is not None:
        SessionFactory.remove()
    if ledger_engine is not None:
        ledger_engine.dispose()
    SessionFactory = None
    ledger_engine = None
