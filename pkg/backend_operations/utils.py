import os
import sys
import pytz
from datetime import datetime
from dataclasses import dataclass
from dotenv import load_dotenv


@dataclass(frozen=True)
class Settings:
    """Run-wide defaults; command-line flags override them."""

    n_max: int = 1000
    bound: int = 1000
    degree_cap: int = 10**6
    cyclotomic_bound: int = 64
    period_cap: int = 360
    r_max: int = 12
    s_max: int = 24
    run_ledger: str = ""
    log_level: str = "INFO"


_INTEGER_SETTINGS = {
    "DML_NMAX": "n_max",
    "DML_BOUND": "bound",
    "DML_DEGREE_CAP": "degree_cap",
    "DML_CYCLOTOMIC_BOUND": "cyclotomic_bound",
    "DML_PERIOD_CAP": "period_cap",
    "DML_RMAX": "r_max",
    "DML_SMAX": "s_max",
}


def resource_path(relative_path: str) -> str:
    """Absolute path of a file relative to the project root."""
    try:
        base_path = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
        return os.path.join(base_path, relative_path)
    except Exception as exc:
        raise RuntimeError(f"Failed to resolve resource path for {relative_path}. Error: {exc}")


def load_environment_variables(env_path: str = None) -> None:
    """
    Load variables from a `.env` file into the environment, if the file exists.

    Variables already set in the environment win over the file.
    """
    path = env_path or resource_path(".env")
    if os.path.exists(path):
        load_dotenv(path, override=False)


def get_env_variable(var_name: str, default_value=None):
    """Get an environment variable, or raise an exception if it is missing."""
    value = os.getenv(var_name)
    if value is None:
        if default_value is None:
            raise ValueError(f"Environment variable '{var_name}' is not set and has no default value.")
        return default_value
    return value


def load_settings() -> Settings:
    """Build Settings from the environment (and `.env`), falling back to the documented defaults."""
    load_environment_variables()
    defaults = Settings()
    values = {}
    for var_name, field_name in _INTEGER_SETTINGS.items():
        raw = get_env_variable(var_name, str(getattr(defaults, field_name)))
        try:
            values[field_name] = int(raw)
        except ValueError:
            raise ValueError(f"Environment variable '{var_name}' must be an integer, got '{raw}'.")
        if values[field_name] < 0:
            raise ValueError(f"Environment variable '{var_name}' must be non-negative, got {raw}.")
    values["run_ledger"] = get_env_variable("DML_RUN_LEDGER", defaults.run_ledger)
    values["log_level"] = get_env_variable("DML_LOG_LEVEL", defaults.log_level).upper()
    return Settings(**values)


def utc_now() -> datetime:
    return datetime.now(pytz.utc)


def python_version() -> str:
    return sys.version.split()[0]
