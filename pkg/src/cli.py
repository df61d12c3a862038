"""
gaussfid command-line front end.

Each subcommand reads one or two state files, runs the matching library
operation and prints a report (human text or json). With --verify the
computation is repeated on truncated Fock density matrices and the
agreement deltas are appended.

Exit codes: 0 success, 1 validation failure, 2 usage error, 3 numerical guard,
4 internal error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from src import __version__
from src.config import ENV_PREFIX, Settings, get_settings
from src.errors import (
    GaussFidError,
    NumericalGuardError,
    ParseError,
    PhysicalityError,
    PreconditionError,
    UsageError,
)
from src.models import FockDensityMatrix, GaussianState, RunConfig, StateFile, StateRecipe
from src.tools.fidelity import (
    bhattacharyya,
    bounds_report,
    chernoff_bound,
    default_schedule,
    fidelity_limit_sweep,
    fidelity_mixed_pure,
    s_overlap,
)
from src.tools.fock import (
    build_fock,
    build_fock_pair,
    chernoff_fock,
    moments_of,
    purity_fock,
    recipe_from_state,
    s_overlap_fock,
    trace_distance,
    uhlmann_fidelity,
)
from src.tools.statefile import load_state_file, to_state
from src.tools.symplectic import is_pure, purity, validate_cm, williamson

logger = logging.getLogger(__name__)

REPORT_SCHEMA = "gaussfid-report/1"

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_INTERNAL = 4

AGREEMENT_TOL = 1e-6
RECIPE_TOL = 1e-8
HUMAN_DIGITS = 12
ORACLE_MAX_MODES = 2

COMMANDS_HELP = {
    "validate": (1, "check symmetry, positivity, the uncertainty principle and purity"),
    "williamson": (1, "Williamson decomposition V = S W S^T"),
    "purity": (1, "purity Tr rho^2 = 1/sqrt(det V)"),
    "overlap": (2, "s-overlap C_s = Tr(rho0^s rho1^(1-s))"),
    "bhattacharyya": (2, "Bhattacharyya coefficient B = C_1/2"),
    "chernoff": (2, "Chernoff term C = inf_s C_s"),
    "fidelity": (2, "closed-form fidelity (one state must be pure)"),
    "limit-sweep": (2, "C_s as s -> 1- against the closed-form fidelity"),
    "bounds": (2, "fidelity, Bhattacharyya, Chernoff and the bounds linking them"),
}


def exit_code_for(error: BaseException) -> int:
    """The single exit code documented for an exception class."""
    if isinstance(error, UsageError):
        return EXIT_USAGE
    # LinAlgError is a ValueError; guard failures take precedence
    if isinstance(error, (NumericalGuardError, np.linalg.LinAlgError, FloatingPointError)):
        return EXIT_NUMERICAL
    if isinstance(error, (GaussFidError, ValidationError, ValueError)):
        return EXIT_VALIDATION
    logger.error("internal error: %s", error, exc_info=error)
    return EXIT_INTERNAL


class _Oracle(NamedTuple):
    densities: List[FockDensityMatrix]
    recipe_deltas: List[float]


Checks = Dict[str, Tuple[float, float]]
CommandFn = Callable[[List[GaussianState], RunConfig, Settings, Optional[_Oracle]], Tuple[Dict[str, Any], Checks]]


def _load(path: str, settings: Settings) -> Tuple[StateFile, GaussianState]:
    doc = load_state_file(path)
    if doc.label is None:
        doc = doc.model_copy(update={"label": Path(path).stem})
    return doc, to_state(doc, settings)


def _recipe_for(doc: StateFile, state: GaussianState) -> Tuple[StateRecipe, float]:
    recipe = doc.recipe if doc.recipe is not None else recipe_from_state(state)
    image = moments_of(recipe)
    delta = float(max(np.max(np.abs(image.mean - state.mean)), np.max(np.abs(image.cov - state.cov))))
    if delta > RECIPE_TOL:
        raise PreconditionError(
            f"recipe for '{state.label}' does not reproduce its moments (max deviation {delta:.3g})"
        )
    return recipe, delta


def _build_oracle(docs: List[StateFile], states: List[GaussianState], settings: Settings) -> _Oracle:
    recipes, deltas = zip(*(_recipe_for(d, s) for d, s in zip(docs, states)))
    if len(recipes) == 1:
        densities = [build_fock(recipes[0], settings=settings)]
    else:
        densities = list(build_fock_pair(*recipes, settings=settings))
    logger.info("Fock oracle built at cutoff %d", densities[0].cutoff)
    return _Oracle(densities=densities, recipe_deltas=list(deltas))


# Subcommands

def _cmd_validate(states, config, settings, oracle):
    report = validate_cm(states[0].cov, settings)
    result = {"accepted": report.accepted, **report.model_dump(mode="json")}
    checks = {}
    if oracle:
        checks["purity"] = (purity(states[0].cov, settings), purity_fock(oracle.densities[0]))
    return result, checks


def _cmd_williamson(states, config, settings, oracle):
    dec = williamson(states[0].cov, settings)
    checks = {}
    if oracle:
        moment_purity = float(np.prod(1.0 / dec.spectrum))
        checks["purity"] = (moment_purity, purity_fock(oracle.densities[0]))
    return dec.model_dump(mode="json"), checks


def _cmd_purity(states, config, settings, oracle):
    value = purity(states[0].cov, settings)
    checks = {"purity": (value, purity_fock(oracle.densities[0]))} if oracle else {}
    return {"purity": value, "pure": is_pure(states[0], settings)}, checks


def _cmd_overlap(states, config, settings, oracle):
    report = s_overlap(states[0], states[1], config.s, settings)
    checks = {}
    if oracle:
        checks["overlap"] = (report.value, s_overlap_fock(*oracle.densities, config.s))
    return report.model_dump(mode="json"), checks


def _cmd_bhattacharyya(states, config, settings, oracle):
    value = bhattacharyya(states[0], states[1], settings)
    checks = {"bhattacharyya": (value, s_overlap_fock(*oracle.densities, 0.5))} if oracle else {}
    return {"bhattacharyya": value}, checks


def _cmd_chernoff(states, config, settings, oracle):
    result = chernoff_bound(states[0], states[1], settings, workers=config.workers)
    checks = {}
    if oracle:
        # With a pure state the infimum is the s -> boundary limit, i.e. the fidelity
        if is_pure(states[0], settings) or is_pure(states[1], settings):
            reference = uhlmann_fidelity(*oracle.densities)
        else:
            reference = chernoff_fock(*oracle.densities).value
        checks["chernoff"] = (result.value, reference)
    return result.model_dump(mode="json"), checks


def _cmd_fidelity(states, config, settings, oracle):
    value = fidelity_mixed_pure(states[0], states[1], settings)
    checks = {"fidelity": (value, uhlmann_fidelity(*oracle.densities))} if oracle else {}
    return {"fidelity": value}, checks


def _cmd_limit_sweep(states, config, settings, oracle):
    result = fidelity_limit_sweep(states[0], states[1], config.schedule, settings)
    checks = {"fidelity": (result.fidelity, uhlmann_fidelity(*oracle.densities))} if oracle else {}
    return result.model_dump(mode="json"), checks


def _cmd_bounds(states, config, settings, oracle):
    oracle_D = trace_distance(*oracle.densities) if oracle else None
    report = bounds_report(states[0], states[1], oracle_D=oracle_D, settings=settings, workers=config.workers)
    checks = {}
    if oracle:
        checks["bhattacharyya"] = (report.bhattacharyya, s_overlap_fock(*oracle.densities, 0.5))
        if report.fidelity is not None:
            checks["fidelity"] = (report.fidelity, uhlmann_fidelity(*oracle.densities))
        else:
            checks["chernoff"] = (report.chernoff, chernoff_fock(*oracle.densities).value)
    return report.model_dump(mode="json"), checks


COMMANDS: Dict[str, CommandFn] = {
    "validate": _cmd_validate,
    "williamson": _cmd_williamson,
    "purity": _cmd_purity,
    "overlap": _cmd_overlap,
    "bhattacharyya": _cmd_bhattacharyya,
    "chernoff": _cmd_chernoff,
    "fidelity": _cmd_fidelity,
    "limit-sweep": _cmd_limit_sweep,
    "bounds": _cmd_bounds,
}


def _verify_section(oracle: _Oracle, checks: Checks, result: Dict[str, Any]) -> Dict[str, Any]:
    deltas = {
        name: {"gaussian": g, "oracle": o, "delta": abs(g - o)}
        for name, (g, o) in checks.items()
    }
    # bounds reports also carry the trace distance inequalities
    agrees = all(d["delta"] <= AGREEMENT_TOL for d in deltas.values())
    agrees = agrees and result.get("trace_consistent") is not False
    if not agrees:
        logger.warning("Fock oracle disagrees beyond %g: %s", AGREEMENT_TOL, deltas)
    return {
        "cutoff": oracle.densities[0].cutoff,
        "trace_deficits": [rho.trace_deficit for rho in oracle.densities],
        "recipe_moment_deltas": oracle.recipe_deltas,
        "checks": deltas,
        "tolerance": AGREEMENT_TOL,
        "agrees": agrees,
    }


def _check_config(config: RunConfig) -> None:
    arity = COMMANDS_HELP[config.command][0]
    if len(config.inputs) != arity:
        raise UsageError(f"'{config.command}' takes {arity} state file(s), got {len(config.inputs)}")
    if config.command == "overlap" and config.s is None:
        raise UsageError("'overlap' requires --s")
    if config.s is not None and not (0.0 < config.s < 1.0):
        raise UsageError(f"--s must lie in the open interval (0, 1), got {config.s!r}")
    if config.schedule is not None:
        if not config.schedule or any(not (0.0 < s < 1.0) for s in config.schedule):
            raise UsageError("schedule values must lie in the open interval (0, 1)")
        if any(b <= a for a, b in zip(config.schedule, config.schedule[1:])):
            raise UsageError("schedule must be strictly increasing")


def _execute(config: RunConfig) -> Tuple[List[str], Dict[str, Any], Optional[Dict[str, Any]]]:
    _check_config(config)
    try:
        settings = get_settings(config.overrides)
    except ValueError as e:
        raise UsageError(str(e))

    loaded = [_load(path, settings) for path in config.inputs]
    docs = [doc for doc, _ in loaded]
    states = [state for _, state in loaded]

    oracle = None
    if config.verify:
        if any(state.n > ORACLE_MAX_MODES for state in states):
            raise UsageError(f"--verify supports states with at most {ORACLE_MAX_MODES} modes")
        oracle = _build_oracle(docs, states, settings)

    logger.debug("running %s on %s", config.command, [s.label for s in states])
    result, checks = COMMANDS[config.command](states, config, settings, oracle)
    verify = _verify_section(oracle, checks, result) if oracle else None
    return [s.label for s in states], result, verify


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return format(value, f".{HUMAN_DIGITS}g")
    if value is None:
        return "n/a"
    if isinstance(value, list):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    return str(value)


def _human_lines(data: Dict[str, Any], indent: int = 0) -> List[str]:
    pad = "  " * indent
    lines = []
    for key, value in data.items():
        if key == "evaluations":
            lines.append(f"{pad}{key}: {len(value)}")
        elif isinstance(value, dict):
            lines.append(f"{pad}{key}:")
            lines.extend(_human_lines(value, indent + 1))
        elif isinstance(value, list) and value and isinstance(value[0], dict):
            headers = list(value[0])
            lines.append(f"{pad}{key}:")
            lines.append(pad + "  " + "  ".join(f"{h:>20}" for h in headers))
            for row in value:
                lines.append(pad + "  " + "  ".join(f"{_fmt(row[h]):>20}" for h in headers))
        elif isinstance(value, list) and value and isinstance(value[0], list):
            lines.append(f"{pad}{key}:")
            for row in value:
                lines.append(pad + "  " + "  ".join(f"{_fmt(x):>20}" for x in row))
        else:
            lines.append(f"{pad}{key}: {_fmt(value)}")
    return lines


def _render(config: RunConfig, payload: Dict[str, Any]) -> str:
    payload = _jsonable(payload)
    if config.output_format == "json":
        document = {"schema": REPORT_SCHEMA, "version": __version__, "command": config.command, **payload}
        return json.dumps(document, sort_keys=True, indent=2)
    header = f"gaussfid {__version__} {config.command}"
    return "\n".join([header] + _human_lines(payload))


def _error_payload(error: BaseException, code: int) -> Dict[str, Any]:
    info: Dict[str, Any] = {"type": type(error).__name__, "message": str(error), "exit_code": code}
    if isinstance(error, ParseError):
        info["line"] = error.line
        info["field"] = error.field
    if isinstance(error, PhysicalityError) and error.report is not None:
        info["validation"] = error.report.model_dump(mode="json")
    return info


def run(config: RunConfig) -> Tuple[int, str]:
    """
    Execute one CLI command.

    Returns:
        (exit code, rendered report); on failure the report describes the error
    """
    try:
        labels, result, verify = _execute(config)
    except Exception as e:
        code = exit_code_for(e)
        logger.debug("%s failed with exit code %d", config.command, code, exc_info=True)
        payload = {"inputs": list(config.inputs), "error": _error_payload(e, code)}
        if config.output_format == "human":
            return code, f"error: {e}"
        return code, _render(config, payload)

    payload: Dict[str, Any] = {"inputs": labels, "result": result}
    if verify is not None:
        payload["verify"] = verify
    return EXIT_OK, _render(config, payload)


def _parse_ks(text: str) -> List[int]:
    lo, sep, hi = text.partition("..")
    try:
        ks = list(range(int(lo), int(hi) + 1)) if sep else [int(lo)]
    except ValueError:
        raise UsageError(f"--ks expects 'a..b' with integers, got {text!r}")
    if not ks or ks[0] < 1:
        raise UsageError(f"--ks must name a non-empty range of positive integers, got {text!r}")
    return ks


def _parse_schedule(text: str) -> List[float]:
    try:
        return [float(tok) for tok in text.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"--schedule expects comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", dest="output_format", choices=["human", "json"], default="human")
    common.add_argument("--verify", action="store_true",
                        help="repeat the computation on truncated Fock density matrices (n <= 2)")
    common.add_argument("--workers", type=int, default=1, help="threads for the Chernoff grid")
    common.add_argument("--log-level", default="warning",
                        choices=["debug", "info", "warning", "error"])
    for name, field in Settings.model_fields.items():
        common.add_argument(
            f"--{name.replace('_', '-')}", dest=name, type=field.annotation, default=None,
            help=f"overrides {ENV_PREFIX}{name.upper()} (default {field.default:g})",
        )

    parser = argparse.ArgumentParser(
        prog="gaussfid",
        description="Fidelity, overlaps and distinguishability bounds for Gaussian states.",
    )
    parser.add_argument("--version", action="version", version=f"gaussfid {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (arity, help_text) in COMMANDS_HELP.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("inputs", nargs=arity, metavar="STATE")
        if name == "overlap":
            p.add_argument("--s", type=float, required=True, help="exponent in (0, 1)")
        if name == "limit-sweep":
            group = p.add_mutually_exclusive_group()
            group.add_argument("--ks", help="s = 1 - 10^-k for k in a..b (default 1..6)")
            group.add_argument("--schedule", help="explicit comma-separated s values")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    schedule = None
    if getattr(args, "schedule", None):
        schedule = _parse_schedule(args.schedule)
    elif getattr(args, "ks", None):
        schedule = default_schedule(_parse_ks(args.ks))
    overrides = {
        name: getattr(args, name) for name in Settings.model_fields if getattr(args, name) is not None
    }
    return RunConfig(
        command=args.command,
        inputs=args.inputs,
        s=getattr(args, "s", None),
        schedule=schedule,
        overrides=overrides,
        verify=args.verify,
        workers=args.workers,
        output_format=args.output_format,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Console entry point; argparse itself exits with code 2 on malformed flags."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper()),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = config_from_args(args)
    except (UsageError, ValidationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE

    code, report = run(config)
    stream = sys.stdout if code == EXIT_OK or config.output_format == "json" else sys.stderr
    print(report, file=stream)
    return code


if __name__ == "__main__":
    sys.exit(main())
