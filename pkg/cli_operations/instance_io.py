import json
import logging
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Optional

from backend_operations.errors import DmlError, DomainError, ParseError, UsageError, ValidationError
from backend_operations.exact_arith import PrimeModulus
from backend_operations.lrs import Lrs, format_lrs, parse_lrs
from backend_operations.pexp import PexpInstance
from backend_operations.psets import ArithProg, PSet, format_pset, parse_pset
from backend_operations.torus import TorusInstance


def read_document(path: str) -> dict:
    """
    Load a JSON instance file.

    :param path: path of the instance file
    :return: the decoded top-level object
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            document = json.load(handle)
    except OSError as exc:
        raise ParseError(f"Cannot read instance file {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ParseError(f"Instance file {path} is not valid JSON: {exc}")
    if not isinstance(document, dict):
        raise ParseError(f"Instance file {path} must hold a JSON object.")
    logging.debug(f"Read instance document from {path} with keys {sorted(document)}.")
    return document


def dump_document(document: dict) -> str:
    return json.dumps(document, sort_keys=True, indent=2) + "\n"


@contextmanager
def _instance_errors(kind: str):
    """Map field access failures to ParseError and mathematical rejections to ValidationError."""
    try:
        yield
    except ParseError:
        raise
    except (DomainError, UsageError) as exc:
        raise ValidationError(f"Invalid {kind} instance: {exc}")
    except DmlError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ParseError(f"Malformed {kind} instance: {exc!r}")


def _optional_int(document: dict, key: str) -> Optional[int]:
    value = document.get(key)
    return None if value is None else int(value)


def _non_negative(value: Optional[int], name: str) -> Optional[int]:
    if value is not None and value < 0:
        raise ValidationError(f"{name} must be non-negative, got {value}.")
    return value


@dataclass
class PexpFile:
    instance: PexpInstance
    n_max: Optional[int] = None

    def to_document(self) -> dict:
        return {
            "kind": "pexp",
            "p": self.instance.p.p,
            "lrs": format_lrs(self.instance.u),
            "terms": [[c, k] for c, k in self.instance.terms],
            "n_max": self.n_max,
        }


@dataclass
class PsetsFile:
    p: PrimeModulus
    psets: list
    bound: Optional[int] = None

    def to_document(self) -> dict:
        return {"kind": "psets", "p": self.p.p, "psets": [format_pset(s) for s in self.psets], "bound": self.bound}


@dataclass
class ApPsetFile:
    p: PrimeModulus
    ap: ArithProg
    pset: PSet
    bound: Optional[int] = None

    def to_document(self) -> dict:
        return {
            "kind": "ap-pset",
            "p": self.p.p,
            "ap": [self.ap.modulus, self.ap.offset],
            "pset": format_pset(self.pset),
            "bound": self.bound,
        }


@dataclass
class PsetVarietyFile:
    p: PrimeModulus
    c: tuple
    bound: Optional[int] = None

    def to_document(self) -> dict:
        return {"kind": "pset-variety", "p": self.p.p, "c": list(self.c), "bound": self.bound}


@dataclass
class MatrixFile:
    p: PrimeModulus
    matrix: tuple
    r_max: Optional[int] = None
    s_max: Optional[int] = None

    def to_document(self) -> dict:
        return {
            "kind": "matrix",
            "p": self.p.p,
            "matrix": [list(row) for row in self.matrix],
            "r_max": self.r_max,
            "s_max": self.s_max,
        }


@dataclass
class DmlFile:
    p: PrimeModulus
    c: tuple
    u: Lrs
    n_max: Optional[int] = None

    def to_document(self) -> dict:
        return {"kind": "dml", "p": self.p.p, "c": list(self.c), "lrs": format_lrs(self.u), "n_max": self.n_max}


def parse_pexp_file(document: dict) -> PexpFile:
    with _instance_errors("pexp"):
        p = PrimeModulus(int(document["p"]))
        u = parse_lrs(document["lrs"])
        terms = tuple((int(c), int(k)) for c, k in document.get("terms", []))
        n_max = _non_negative(_optional_int(document, "n_max"), "n_max")
        return PexpFile(PexpInstance(u, p, terms), n_max)


def parse_psets_file(document: dict) -> PsetsFile:
    with _instance_errors("psets"):
        p = PrimeModulus(int(document["p"]))
        psets = [parse_pset(text) for text in document["psets"]]
        bound = _non_negative(_optional_int(document, "bound"), "bound")
    if len(psets) != 2:
        raise ValidationError(f"Intersection takes exactly two p-sets, got {len(psets)}.")
    return PsetsFile(p, psets, bound)


def parse_ap_pset_file(document: dict) -> ApPsetFile:
    with _instance_errors("ap-pset"):
        p = PrimeModulus(int(document["p"]))
        modulus, offset = (int(v) for v in document["ap"])
        ap = ArithProg(modulus, offset)
        pset = parse_pset(document["pset"])
        bound = _non_negative(_optional_int(document, "bound"), "bound")
    return ApPsetFile(p, ap, pset, bound)


def parse_pset_variety_file(document: dict) -> PsetVarietyFile:
    with _instance_errors("pset-variety"):
        p = PrimeModulus(int(document["p"]))
        c = tuple(int(cj) for cj in document["c"])
        bound = _non_negative(_optional_int(document, "bound"), "bound")
    if not c:
        raise ValidationError("A p-set variety needs at least one multiplicity.")
    return PsetVarietyFile(p, c, bound)


def parse_matrix_file(document: dict) -> MatrixFile:
    with _instance_errors("matrix"):
        p = PrimeModulus(int(document["p"]))
        matrix = tuple(tuple(int(v) for v in row) for row in document["matrix"])
        r_max = _optional_int(document, "r_max")
        s_max = _optional_int(document, "s_max")
    if not matrix or any(len(row) != len(matrix) for row in matrix):
        raise ValidationError("The obstruction matrix must be square and non-empty.")
    return MatrixFile(p, matrix, r_max, s_max)


def parse_dml_file(document: dict) -> DmlFile:
    with _instance_errors("dml"):
        p = PrimeModulus(int(document["p"]))
        c = tuple(int(cj) for cj in document["c"])
        u = parse_lrs(document["lrs"])
        n_max = _non_negative(_optional_int(document, "n_max"), "n_max")
    return DmlFile(p, c, u, n_max)


def parse_torus_file(document: dict) -> TorusInstance:
    """A torus instance; an empty equation list is rejected since every orbit point would return."""
    with _instance_errors("torus"):
        instance = TorusInstance.from_document(document)
    if not instance.variety.equations:
        raise ValidationError("The torus instance lists no variety equations.")
    return instance
