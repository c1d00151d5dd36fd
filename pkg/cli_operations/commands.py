import time
import hashlib
import logging
import argparse
from dataclasses import dataclass, field
from typing import Callable, Optional

from backend_operations.constructions import build_pset_variety, dml_instance, exponent_set
from backend_operations.errors import (
    ConstructionError,
    DmlError,
    DomainError,
    InvariantError,
    ParseError,
    ResourceCapError,
    UnsupportedError,
    UsageError,
    ValidationError,
)
from backend_operations.exact_arith import get_degree_cap, set_degree_cap
from backend_operations.log_utils import finish_run, log_event, start_run
from backend_operations.lrs import format_lrs
from backend_operations.pexp import format_witness_table, pexp_classify, pexp_solve
from backend_operations.psets import PSet, ReturnSetDesc, ap_intersect_pset, format_pset, pset_enumerate
from backend_operations.psets import pset_intersect_bounded
from backend_operations.torus import frobenius_obstruction, full_pipeline, reduction_decompose, verify_reduction
from backend_operations.utils import Settings, load_settings
from cli_operations import instance_io
from cli_operations.report import EventCollector, build_report, write_report
from db.sql_db import dispose_engine, init_engine

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_RESOURCE_CAP = 4
EXIT_INVARIANT = 5

# most specific first
_EXIT_CODES = (
    (ParseError, EXIT_PARSE),
    (ValidationError, EXIT_VALIDATION),
    (DomainError, EXIT_VALIDATION),
    (UsageError, EXIT_VALIDATION),
    (UnsupportedError, EXIT_VALIDATION),
    (ResourceCapError, EXIT_RESOURCE_CAP),
    (InvariantError, EXIT_INVARIANT),
    (ConstructionError, EXIT_INVARIANT),
)


def exit_code_for(exc: BaseException) -> int:
    for error_type, code in _EXIT_CODES:
        if isinstance(exc, error_type):
            return code
    return EXIT_UNEXPECTED


@dataclass
class RunParameters:
    """
    Effective bounds of one run: a command-line flag wins over the instance file,
    which wins over the settings.
    """

    settings: Settings
    flags: dict
    used: dict = field(default_factory=dict)

    def resolve(self, name: str, file_value: Optional[int] = None) -> int:
        if self.flags.get(name) is not None:
            value = self.flags[name]
        elif file_value is not None:
            value = file_value
        else:
            value = getattr(self.settings, name)
        if value < 0:
            raise ValidationError(f"{name} must be non-negative, got {value}.")
        self.used[name] = value
        return value


@dataclass
class CommandOutcome:
    instance: dict
    results: dict
    description: Optional[ReturnSetDesc] = None


def run_return_set(document: dict, params: RunParameters) -> CommandOutcome:
    instance = instance_io.parse_torus_file(document)
    n_max = params.resolve("n_max", instance.n_max)
    desc = full_pipeline(
        instance.selfmap,
        instance.alpha,
        instance.variety,
        n_max,
        declared_dim=instance.declared_dim,
        period_cap=params.resolve("period_cap"),
        r_max=params.resolve("r_max"),
        s_max=params.resolve("s_max"),
    )
    return CommandOutcome(instance.to_document(), {"hits": sorted(desc.enumerate(n_max))}, desc)


def run_solve_pexp(document: dict, params: RunParameters) -> CommandOutcome:
    parsed = instance_io.parse_pexp_file(document)
    n_max = params.resolve("n_max", parsed.n_max)
    solutions = pexp_solve(parsed.instance, n_max)
    results = {
        "solutions": [[n, list(witness)] for n, witness in solutions],
        "table": format_witness_table(solutions),
    }
    return CommandOutcome(parsed.to_document(), results)


def run_classify_pexp(document: dict, params: RunParameters) -> CommandOutcome:
    parsed = instance_io.parse_pexp_file(document)
    n_max = params.resolve("n_max", parsed.n_max)
    desc = pexp_classify(
        parsed.instance,
        n_max,
        cyclotomic_bound=params.resolve("cyclotomic_bound"),
        period_cap=params.resolve("period_cap"),
    )
    results = {"solutions": sorted(desc.enumerate(n_max)), "nontrivial_pset": desc.has_nontrivial_pset()}
    return CommandOutcome(parsed.to_document(), results, desc)


def run_intersect_psets(document: dict, params: RunParameters) -> CommandOutcome:
    parsed = instance_io.parse_psets_file(document)
    bound = params.resolve("bound", parsed.bound)
    first, second = parsed.psets
    elements, option = pset_intersect_bounded(first, second, parsed.p, bound)
    results = {
        "elements": elements,
        "psets": None if option is None else [format_pset(s) for s in option],
        "described": option is not None,
    }
    return CommandOutcome(parsed.to_document(), results)


def run_ap_cap_pset(document: dict, params: RunParameters) -> CommandOutcome:
    parsed = instance_io.parse_ap_pset_file(document)
    bound = params.resolve("bound", parsed.bound)
    pieces = ap_intersect_pset(parsed.ap, parsed.pset, parsed.p)
    elements = set()
    for piece in pieces:
        elements.update(pset_enumerate(piece, parsed.p, bound))
    results = {"psets": [format_pset(s) for s in pieces], "elements": sorted(elements)}
    return CommandOutcome(parsed.to_document(), results)


def run_verify_reduction(document: dict, params: RunParameters) -> CommandOutcome:
    instance = instance_io.parse_torus_file(document)
    n_max = params.resolve("n_max", instance.n_max)
    rd = reduction_decompose(instance.selfmap, instance.alpha)
    if not verify_reduction(rd, instance.selfmap, instance.alpha, n_max):
        raise InvariantError(f"Orbit decomposition disagrees with direct iteration within n <= {n_max}.")
    results = {
        "minpoly": list(rd.minpoly),
        "u_seqs": [format_lrs(u) for u in rd.u_seqs],
        "v_seqs": [format_lrs(v) for v in rd.v_seqs],
        "verified_to": n_max,
    }
    return CommandOutcome(instance.to_document(), results)


def run_gen_instance(document: dict, params: RunParameters) -> CommandOutcome:
    parsed = instance_io.parse_dml_file(document)
    n_max = params.resolve("n_max", parsed.n_max)
    generated = dml_instance(parsed.u, parsed.p, parsed.c)
    torus_document = generated.to_torus_instance(n_max).to_document()
    results = {
        "torus_instance": torus_document,
        "dimension": generated.selfmap.dimension,
        "convention": generated.pset_variety.convention,
        "pset": format_pset(PSet(generated.pset_variety.pset_terms())),
    }
    return CommandOutcome(parsed.to_document(), results)


def run_exponent_set(document: dict, params: RunParameters) -> CommandOutcome:
    parsed = instance_io.parse_pset_variety_file(document)
    bound = params.resolve("bound", parsed.bound)
    pv = build_pset_variety(parsed.p, parsed.c)
    elements = exponent_set(pv, bound)
    expected = pset_enumerate(PSet(pv.pset_terms()), parsed.p, bound)
    if elements != expected:
        raise InvariantError(f"Exponent set of the constructed variety differs from the p-set within {bound}.")
    results = {
        "elements": elements,
        "equations": len(pv.variety.equations),
        "convention": pv.convention,
        "pset": format_pset(PSet(pv.pset_terms())),
    }
    return CommandOutcome(parsed.to_document(), results)


def run_obstruction(document: dict, params: RunParameters) -> CommandOutcome:
    parsed = instance_io.parse_matrix_file(document)
    verdict = frobenius_obstruction(
        parsed.matrix, parsed.p, params.resolve("r_max", parsed.r_max), params.resolve("s_max", parsed.s_max)
    )
    results = {"verdict": str(verdict), "status": verdict.status, "r": verdict.r, "s": verdict.s}
    return CommandOutcome(parsed.to_document(), results)


COMMANDS: dict[str, Callable[[dict, RunParameters], CommandOutcome]] = {
    "return-set": run_return_set,
    "solve-pexp": run_solve_pexp,
    "classify-pexp": run_classify_pexp,
    "intersect-psets": run_intersect_psets,
    "ap-cap-pset": run_ap_cap_pset,
    "verify-reduction": run_verify_reduction,
    "gen-instance": run_gen_instance,
    "exponent-set": run_exponent_set,
    "obstruction": run_obstruction,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="main.py", description="Bounded, verified return sets of torus self-maps over F_p(t)."
    )
    parser.add_argument("command", choices=sorted(COMMANDS), help="The command to run")
    parser.add_argument("instance", help="Path of the JSON instance file")
    parser.add_argument("--out", default=None, help="Write the report here instead of stdout")
    parser.add_argument("--nmax", dest="n_max", type=int, default=None, help="Iteration bound (default 1000)")
    parser.add_argument("--bound", type=int, default=None, help="Enumeration bound (default 1000)")
    parser.add_argument("--rmax", dest="r_max", type=int, default=None, help="Largest iterate r scanned (default 12)")
    parser.add_argument("--smax", dest="s_max", type=int, default=None, help="Largest p-power s scanned (default 24)")
    parser.add_argument("--degree-cap", dest="degree_cap", type=int, default=None, help="Polynomial degree cap")
    parser.add_argument(
        "--cyclotomic-bound", dest="cyclotomic_bound", type=int, default=None, help="Largest root-of-unity order"
    )
    parser.add_argument("--period-cap", dest="period_cap", type=int, default=None, help="Largest fitted period")
    parser.add_argument("--ledger", default=None, help="SQLAlchemy URL of the run ledger")
    return parser


def _input_digest(path: str) -> str:
    try:
        with open(path, "rb") as handle:
            return hashlib.sha256(handle.read()).hexdigest()
    except OSError:
        return ""


def run(argv: Optional[list] = None, settings: Optional[Settings] = None) -> int:
    """
    Parse arguments, run one command and write its report.

    :return: the process exit status
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    try:
        settings = settings or load_settings()
    except ValueError as exc:
        logging.error(f"Invalid settings: {exc}")
        return EXIT_VALIDATION

    flags = {name: getattr(args, name) for name in ("n_max", "bound", "r_max", "s_max", "cyclotomic_bound", "period_cap")}
    params = RunParameters(settings, flags)
    ledger_url = args.ledger if args.ledger is not None else settings.run_ledger
    if ledger_url:
        try:
            init_engine(ledger_url)
        except Exception as exc:
            logging.error(f"Run ledger unavailable, continuing without it: {exc}")
    run_id = start_run(args.command, _input_digest(args.instance))

    previous_cap = get_degree_cap()
    started = time.perf_counter()
    status, code = "ok", EXIT_OK
    try:
        degree_cap = args.degree_cap if args.degree_cap is not None else settings.degree_cap
        set_degree_cap(degree_cap)
        params.used["degree_cap"] = degree_cap
        with EventCollector() as collector:
            document = instance_io.read_document(args.instance)
            outcome = COMMANDS[args.command](document, params)
        wall_time = time.perf_counter() - started
        for event in collector.events:
            log_event(args.command, event["level"], event["component"], event["message"], run_id)
        report = build_report(
            args.command,
            outcome.instance,
            outcome.results,
            outcome.description,
            collector.events,
            params.used,
            wall_time,
        )
        write_report(report, args.out)
    except DmlError as exc:
        code = exit_code_for(exc)
        status = type(exc).__name__
        logging.error(f"{args.command} failed: {exc}")
        log_event(args.command, "Failure", "cli", str(exc), run_id)
    except Exception as exc:
        code = EXIT_UNEXPECTED
        status = "unexpected"
        logging.error(f"{args.command} failed unexpectedly: {exc!r}")
        log_event(args.command, "Failure", "cli", repr(exc), run_id)
    finally:
        set_degree_cap(previous_cap)
    finish_run(run_id, status, code, time.perf_counter() - started)
    if ledger_url:
        dispose_engine()
    return code
