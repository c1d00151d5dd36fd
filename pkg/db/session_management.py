import logging
from sqlalchemy.orm import Session
from contextlib import contextmanager
from typing import Callable, Generator, Optional

from db import sql_db


@contextmanager
def managed_session(session_factory: Optional[Callable[[], Session]] = None) -> Generator[Session, None, None]:
    """
    Scope one unit of work on the run ledger: commit at the end of the block, roll back if it raises.

    :param session_factory: callable returning a session; defaults to the ledger's SessionFactory
    :yield: A SQLAlchemy session
    """
    factory = session_factory if session_factory is not None else sql_db.SessionFactory
    if factory is None:
        raise RuntimeError("The run ledger is not initialized; call init_engine first.")
    session = factory()
    try:
        yield session
        session.commit()
    except Exception as exc:
        logging.error(f"Ledger session error, rolling back: {exc}")
        session.rollback()
        raise
    finally:
        session.close()
