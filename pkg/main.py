import sys
import logging

from backend_operations.utils import load_settings
from cli_operations.commands import EXIT_VALIDATION, run


def configure_logging(level_name: str) -> None:
    level = getattr(logging, level_name.upper(), None)
    if not isinstance(level, int):
        raise ValueError(f"Unknown log level '{level_name}'.")
    logging.basicConfig(level=level, format="%(asctime)s - %(levelname)s - %(message)s", stream=sys.stderr)


if __name__ == "__main__":
    try:
        settings = load_settings()
        configure_logging(settings.log_level)
    except ValueError as error:
        logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")
        logging.error(f"Configuration failed: {error}")
        sys.exit(EXIT_VALIDATION)

    sys.exit(run(sys.argv[1:], settings))
