import logging
from typing import Optional

from db import sql_db
from db.db_models import EventRecord, RunRecord
from db.session_management import managed_session


def ledger_enabled() -> bool:
    return sql_db.SessionFactory is not None


def log_event(
    command: str, event_type: str, component: str, event_description: str, run_id: Optional[int] = None
) -> None:
    """
    Logs an event, and stores it in the run ledger when one is configured.

    :param command: CLI command the event belongs to
    :param event_type: Type of the event (e.g., "Resource cap", "Failure")
    :param component: Module that raised the event
    :param event_description: Free text description
    :param run_id: Ledger run the event is attached to, if any
    """
    logging.info(f"[{command}] {event_type} in {component}: {event_description}")
    if not ledger_enabled():
        return
    session = sql_db.SessionFactory()
    try:
        session.add(
            EventRecord(
                run_id=run_id,
                command=command,
                event_type=event_type,
                component=component,
                event_description=event_description,
            )
        )
        session.commit()
    except Exception as exc:
        session.rollback()
        logging.error(f"Failed to log event: {exc}")
    finally:
        session.close()


def start_run(command: str, input_digest: str) -> Optional[int]:
    """Open a ledger row for a command run; None when the ledger is disabled or unreachable."""
    if not ledger_enabled():
        return None
    try:
        with managed_session() as session:
            run = RunRecord(command=command, input_digest=input_digest, status="running")
            session.add(run)
            session.flush()
            run_id = run.run_id
        return run_id
    except Exception as exc:
        logging.error(f"Failed to record run start: {exc}")
        return None


def finish_run(run_id: Optional[int], status: str, exit_code: int, wall_time: float) -> None:
    if run_id is None or not ledger_enabled():
        return
    try:
        with managed_session() as session:
            run = session.get(RunRecord, run_id)
            if run is None:
                raise LookupError(f"Run {run_id} not found in the ledger.")
            run.status = status
            run.exit_code = exit_code
            run.wall_time = wall_time
    except Exception as exc:
        logging.error(f"Failed to record run end: {exc}")
