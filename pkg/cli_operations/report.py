import sys
import logging
from fractions import Fraction
from typing import Optional

from backend_operations.psets import ReturnSetDesc, desc_to_document
from backend_operations.utils import python_version, utc_now
from cli_operations.instance_io import dump_document


class EventCollector(logging.Handler):
    """Collects warnings raised while a command runs; they are cap and fallback events."""

    def __init__(self, level: int = logging.WARNING):
        super().__init__(level)
        self.events = []

    def emit(self, record: logging.LogRecord) -> None:
        self.events.append(
            {"level": record.levelname, "component": record.module, "message": record.getMessage()}
        )

    def __enter__(self) -> "EventCollector":
        logging.getLogger().addHandler(self)
        return self

    def __exit__(self, *exc_info) -> None:
        logging.getLogger().removeHandler(self)


def jsonable(value):
    """Convert results into JSON-ready values; fractions print as `a/b`."""
    if isinstance(value, Fraction):
        return str(value) if value.denominator != 1 else value.numerator
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set, frozenset)):
        items = sorted(value) if isinstance(value, (set, frozenset)) else value
        return [jsonable(v) for v in items]
    return value


def build_report(
    command: str,
    instance: dict,
    results: dict,
    description: Optional[ReturnSetDesc],
    events: list,
    parameters: dict,
    wall_time: float,
) -> dict:
    """
    Assemble the report document.

    Everything outside `metadata` is a function of the inputs alone.
    """
    return {
        "command": command,
        "instance": jsonable(instance),
        "parameters": jsonable(parameters),
        "results": jsonable(results),
        "description": desc_to_document(description) if description is not None else None,
        "events": list(events),
        "metadata": {
            "timestamp": utc_now().isoformat(),
            "wall_time": round(wall_time, 6),
            "python": python_version(),
        },
    }


def comparable(report: dict) -> dict:
    """The report without its metadata section."""
    return {key: value for key, value in report.items() if key != "metadata"}


def write_report(report: dict, out_path: Optional[str]) -> None:
    text = dump_document(report)
    if out_path is None:
        sys.stdout.write(text)
        return
    try:
        with open(out_path, "w", encoding="utf-8") as handle:
            handle.write(text)
        logging.info(f"Report written to {out_path}.")
    except OSError as exc:
        logging.error(f"Failed to write report to {out_path}: {exc}")
        raise
