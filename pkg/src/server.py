from fastmcp import FastMCP
from typing import Optional, List, Dict, Any, Annotated
import json
import logging
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError, validate_call

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from src import __version__
from src.config import Settings, get_settings
from src.errors import (
    DimensionError,
    DomainError,
    NumericalGuardError,
    ParseError,
    PhysicalityError,
    PreconditionError,
    TruncationError,
    UsageError,
)
from src.tools.fidelity import (
    bhattacharyya,
    bounds_report,
    chernoff_bound,
    fidelity_limit_sweep,
    fidelity_mixed_pure,
    s_overlap,
)
from src.tools.fock import (
    build_fock_pair,
    purity_fock,
    recipe_from_state,
    trace_distance,
    uhlmann_fidelity,
)
from src.tools.statefile import parse_json, state_from_dict
from src.tools.symplectic import is_pure, purity, validate_cm, williamson
from src.resources import register_resources

logger = logging.getLogger(__name__)


# Initialize MCP server
mcp = FastMCP("Gaussian Fidelity MCP", instructions="""
Gaussian Fidelity MCP Server - Three-Layer Architecture

ALWAYS FOLLOW THIS WORKFLOW:
1. discover_operations() - See what's available
2. get_operation_schema() - Understand requirements
3. execute_operation() - Perform the computation

CONVENTIONS:
- States are json objects {"n", "mean", "cov", "label"?, "recipe"?}
- Quadratures ordered q1, p1, ..., qn, pn; vacuum covariance = identity
- Closed-form fidelity needs at least one pure state; for two mixed states
  use chernoff_bound or bhattacharyya

Quick Start: Read gaussfid://server-info for tolerances and conventions.
""")


# Operations: json parameters in, json-ready dicts out

def _states(rho0: Dict[str, Any], rho1: Dict[str, Any], settings):
    return state_from_dict(rho0, settings), state_from_dict(rho1, settings)


def validate_state(state: Dict[str, Any], settings: Optional[Settings] = None) -> Dict[str, Any]:
    doc = parse_json(json.dumps(state))
    report = validate_cm(doc.cov, settings)
    return {"accepted": report.accepted, "failure": report.failure(), **report.model_dump(mode="json")}


def decompose_state(state: Dict[str, Any], settings: Optional[Settings] = None) -> Dict[str, Any]:
    st = state_from_dict(state, settings)
    return williamson(st.cov, settings).model_dump(mode="json")


def state_purity(state: Dict[str, Any], settings: Optional[Settings] = None) -> Dict[str, Any]:
    st = state_from_dict(state, settings)
    return {"purity": purity(st.cov, settings), "pure": is_pure(st, settings)}


def overlap(
    rho0: Dict[str, Any], rho1: Dict[str, Any], s: float, settings: Optional[Settings] = None
) -> Dict[str, Any]:
    a, b = _states(rho0, rho1, settings)
    return s_overlap(a, b, s, settings).model_dump(mode="json")


def bhattacharyya_coefficient(
    rho0: Dict[str, Any], rho1: Dict[str, Any], settings: Optional[Settings] = None
) -> Dict[str, Any]:
    a, b = _states(rho0, rho1, settings)
    return {"bhattacharyya": bhattacharyya(a, b, settings)}


def chernoff(
    rho0: Dict[str, Any],
    rho1: Dict[str, Any],
    include_trace: bool = False,
    settings: Optional[Settings] = None,
) -> Dict[str, Any]:
    a, b = _states(rho0, rho1, settings)
    result = chernoff_bound(a, b, settings).model_dump(mode="json")
    if not include_trace:
        result["evaluations"] = len(result["evaluations"])
    return result


def fidelity(rho0: Dict[str, Any], rho1: Dict[str, Any], settings: Optional[Settings] = None) -> Dict[str, Any]:
    a, b = _states(rho0, rho1, settings)
    return {"fidelity": fidelity_mixed_pure(a, b, settings)}


def limit_sweep(
    rho0: Dict[str, Any],
    rho1: Dict[str, Any],
    schedule: Optional[List[float]] = None,
    settings: Optional[Settings] = None,
) -> Dict[str, Any]:
    a, b = _states(rho0, rho1, settings)
    return fidelity_limit_sweep(a, b, schedule, settings).model_dump(mode="json")


def bounds(
    rho0: Dict[str, Any],
    rho1: Dict[str, Any],
    oracle_trace_distance: Optional[float] = None,
    settings: Optional[Settings] = None,
) -> Dict[str, Any]:
    a, b = _states(rho0, rho1, settings)
    return bounds_report(a, b, oracle_D=oracle_trace_distance, settings=settings).model_dump(mode="json")


def fock_check(rho0: Dict[str, Any], rho1: Dict[str, Any], settings: Optional[Settings] = None) -> Dict[str, Any]:
    """Matrix-level fidelity, trace distance and purities from truncated Fock density matrices."""
    a, b = _states(rho0, rho1, settings)
    if a.n > 2:
        raise DimensionError(f"Fock oracle supports 1 or 2 modes, states have {a.n}")
    recipes = [
        parse_json(json.dumps(raw)).recipe or recipe_from_state(st)
        for raw, st in ((rho0, a), (rho1, b))
    ]
    densities = build_fock_pair(*recipes, settings=settings)
    cutoff = densities[0].cutoff
    return {
        "cutoff": cutoff,
        "trace_deficits": [d.trace_deficit for d in densities],
        "fidelity": uhlmann_fidelity(*densities),
        "trace_distance": trace_distance(*densities),
        "purities": [purity_fock(d) for d in densities],
    }


# validate_call checks names and types of the json parameters before any numerics run
OPERATIONS = {
    operation_id: validate_call(fn)
    for operation_id, fn in {
        "validate_state": validate_state,
        "williamson": decompose_state,
        "purity": state_purity,
        "s_overlap": overlap,
        "bhattacharyya": bhattacharyya_coefficient,
        "chernoff_bound": chernoff,
        "fidelity": fidelity,
        "limit_sweep": limit_sweep,
        "bounds_report": bounds,
        "fock_check": fock_check,
    }.items()
}


_STATE_PARAM = {
    "type": "object",
    "required": True,
    "description": "Gaussian state {n, mean[2n], cov[2n][2n], label?, recipe?}",
    "tip": "Shot-noise units: the vacuum has cov = identity",
}
_SETTINGS_PARAM = {
    "type": "object",
    "required": False,
    "description": "Tolerance overrides, e.g. {\"tolerance_pure\": 1e-8}",
}

_VACUUM = {"n": 1, "mean": [0.0, 0.0], "cov": [[1.0, 0.0], [0.0, 1.0]], "label": "vacuum"}
_THERMAL1 = {"n": 1, "mean": [0.0, 0.0], "cov": [[3.0, 0.0], [0.0, 3.0]], "label": "thermal1"}
_COHERENT1 = {"n": 1, "mean": [2.0, 0.0], "cov": [[1.0, 0.0], [0.0, 1.0]], "label": "coherent1"}


# Three-Layer Architecture Implementation

def discover_operations() -> Dict[str, Any]:
    """
    LAYER 1: Discover what operations this MCP server provides.
    Start here to understand available capabilities.
    """
    return {
        "operations": {
            "validate_state": "Check symmetry, positivity, uncertainty principle and purity of a state",
            "williamson": "Williamson decomposition V = S W S^T and the symplectic spectrum",
            "purity": "Purity Tr rho^2 = 1/sqrt(det V)",
            "s_overlap": "Overlap C_s = Tr(rho0^s rho1^(1-s)) with its ingredients",
            "bhattacharyya": "Bhattacharyya coefficient B = C_1/2",
            "chernoff_bound": "Chernoff term C = inf_s C_s",
            "fidelity": "Closed-form fidelity when at least one state is pure",
            "limit_sweep": "C_s as s -> 1- compared with the closed-form fidelity",
            "bounds_report": "All measures plus the inequality chain and error-probability bounds",
            "fock_check": "Brute-force cross-check on truncated Fock density matrices (n <= 2)"
        },
        "recommended_workflows": {
            "distinguishability": [
                "validate_state → bounds_report",
                "Best for: How well can two states be told apart?"
            ],
            "cross_check": [
                "fidelity → fock_check → bounds_report(oracle_trace_distance)",
                "Best for: Independent verification of small states"
            ]
        },
        "next_step": "Use get_operation_schema() to understand requirements"
    }


def get_operation_schema(
    operation_id: Annotated[str, "Operation ID from discover_operations"],
    include_examples: Annotated[bool, "Include example parameter values"] = True
) -> Dict[str, Any]:
    """
    LAYER 2: Get parameter requirements for an operation.
    Use after discover_operations to understand how to call operations.
    """
    one_state = {"state": _STATE_PARAM, "settings": _SETTINGS_PARAM}
    two_states = {"rho0": _STATE_PARAM, "rho1": _STATE_PARAM, "settings": _SETTINGS_PARAM}

    schemas = {
        "validate_state": {
            "description": "Validate a covariance matrix without rejecting it",
            "parameters": one_state,
            "returns": {"accepted": "True when usable downstream", "failure": "First violated invariant"},
            "examples": [] if not include_examples else [{"state": _VACUUM}]
        },
        "williamson": {
            "description": "Symplectic S and spectrum with V = S diag(nu) S^T",
            "parameters": one_state,
            "examples": [] if not include_examples else [{"state": _THERMAL1}]
        },
        "purity": {
            "description": "Purity of a single state",
            "parameters": one_state,
            "examples": [] if not include_examples else [{"state": _THERMAL1}]
        },
        "s_overlap": {
            "description": "Gaussian s-overlap with diagnostic ingredients",
            "parameters": {
                **two_states,
                "s": {
                    "type": "number",
                    "required": True,
                    "range": "open interval (0, 1)",
                    "description": "Exponent on rho0"
                }
            },
            "examples": [] if not include_examples else [
                {"rho0": _THERMAL1, "rho1": _VACUUM, "s": 0.5}
            ]
        },
        "bhattacharyya": {
            "description": "C_s at s = 1/2",
            "parameters": two_states,
            "examples": [] if not include_examples else [{"rho0": _THERMAL1, "rho1": _COHERENT1}]
        },
        "chernoff_bound": {
            "description": "Infimum of C_s; boundary limits are named when a state is pure",
            "parameters": {
                **two_states,
                "include_trace": {
                    "type": "boolean",
                    "required": False,
                    "default": False,
                    "description": "Return every (s, C_s) evaluation instead of the count"
                }
            },
            "examples": [] if not include_examples else [{"rho0": _THERMAL1, "rho1": _VACUUM}]
        },
        "fidelity": {
            "description": "F = 2^n det(V0+V1)^(-1/2) exp(-d^T (V0+V1)^-1 d / 2)",
            "parameters": two_states,
            "requirements": "At least one state must be pure",
            "examples": [] if not include_examples else [{"rho0": _THERMAL1, "rho1": _VACUUM}]
        },
        "limit_sweep": {
            "description": "C_s along s -> 1- against the closed-form fidelity",
            "parameters": {
                **two_states,
                "schedule": {
                    "type": "array[number]",
                    "required": False,
                    "default": "1 - 10^-k for k = 1..6",
                    "description": "Strictly increasing s values in (0, 1)"
                }
            },
            "requirements": "rho1 must be pure",
            "examples": [] if not include_examples else [{"rho0": _THERMAL1, "rho1": _VACUUM}]
        },
        "bounds_report": {
            "description": "F, B, C, Helstrom bounds and the chain C <= B <= sqrt(F)",
            "parameters": {
                **two_states,
                "oracle_trace_distance": {
                    "type": "number",
                    "required": False,
                    "range": [0, 1],
                    "description": "Trace distance from fock_check, enables Fuchs-van de Graaf checks"
                }
            },
            "examples": [] if not include_examples else [{"rho0": _THERMAL1, "rho1": _VACUUM}]
        },
        "fock_check": {
            "description": "Uhlmann fidelity, trace distance and purities from Fock density matrices",
            "parameters": two_states,
            "requirements": "n <= 2; correlated two-mode states need a recipe",
            "examples": [] if not include_examples else [{"rho0": _THERMAL1, "rho1": _COHERENT1}]
        }
    }

    if operation_id not in schemas:
        return {
            "error": f"Unknown operation: {operation_id}",
            "available": list(schemas.keys()),
            "hint": "Use discover_operations() first"
        }

    return schemas[operation_id]


def execute_operation(
    operation_id: Annotated[str, "Operation to execute"],
    parameters: Annotated[Dict[str, Any], "Parameters matching the schema"]
) -> Dict[str, Any]:
    """
    LAYER 3: Execute a gaussfid operation.
    Only use after getting schema from get_operation_schema.
    """
    if operation_id not in OPERATIONS:
        return {
            "success": False,
            "error": f"Unknown operation: {operation_id}",
            "available_operations": list(OPERATIONS.keys())
        }

    try:
        params = dict(parameters)
        overrides = params.pop("settings", None)
        try:
            settings = get_settings(overrides)
        except ValueError as e:
            raise UsageError(str(e))
        result = OPERATIONS[operation_id](**params, settings=settings)

        return {
            "success": True,
            "data": result
        }

    except ValidationError as e:
        logger.info("bad parameters for %s: %s", operation_id, e)
        return {
            "success": False,
            "error": str(e),
            "recovery": suggest_recovery(operation_id, UsageError(str(e)))
        }
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
        logger.info("%s failed: %s", operation_id, e)
        response = {
            "success": False,
            "error": str(e),
            "recovery": suggest_recovery(operation_id, e)
        }
        if isinstance(e, PhysicalityError) and e.report is not None:
            response["validation"] = e.report.model_dump(mode="json")
        return response
    except Exception as e:
        logger.exception("internal error in %s", operation_id)
        return {
            "success": False,
            "error": f"Internal error: {type(e).__name__}: {e}",
            "recovery": "Internal error - not caused by the parameters; please report it with the request"
        }


def suggest_recovery(operation_id: str, error: Exception) -> str:
    """Helper to suggest recovery actions based on error type."""
    if isinstance(error, PhysicalityError):
        return "State is unphysical - run validate_state and check the covariance matrix"
    elif isinstance(error, ParseError):
        return "State object is malformed - mean needs 2n values and cov must be 2n x 2n"
    elif isinstance(error, PreconditionError):
        if operation_id in ("fidelity", "limit_sweep"):
            return "Needs a pure state - use chernoff_bound or bhattacharyya for two mixed states"
        return "Provide a recipe in the state object for correlated two-mode states"
    elif isinstance(error, TruncationError):
        return "Fock cutoff cap reached - use lower energy states or raise cutoff_cap in settings"
    elif isinstance(error, NumericalGuardError):
        return "Numerical guard tripped - the states are nearly orthogonal or ill-conditioned"
    elif isinstance(error, (DimensionError, DomainError)):
        return "Check mode counts and parameter ranges in get_operation_schema"
    else:
        return "Check parameters match schema from get_operation_schema"


DISTINGUISHABILITY_PROMPT = """
You are analysing how distinguishable two Gaussian states are: "{question}"

1. Call execute_operation("validate_state", {{"state": ...}}) for each state.
2. Call execute_operation("bounds_report", {{"rho0": ..., "rho1": ...}}).
3. If both states have at most two modes, call execute_operation("fock_check", ...)
   and rerun bounds_report with oracle_trace_distance set to its trace_distance.
4. Report F (when available), B, C, the Helstrom error bounds C/2 and B/2,
   and whether the chain C <= B <= sqrt(F) holds.
"""


def distinguishability_analysis(question: str) -> str:
    """Guide an analysis of two Gaussian states through the three layers."""
    return DISTINGUISHABILITY_PROMPT.format(question=question)


mcp.tool(
    description="Discover available gaussfid operations and recommended workflows",
    annotations={"readOnlyHint": True}
)(discover_operations)
mcp.tool(
    description="Get detailed requirements and parameters for a gaussfid operation",
    annotations={"readOnlyHint": True}
)(get_operation_schema)
mcp.tool(
    description="Execute a gaussfid operation with validated parameters",
    annotations={"readOnlyHint": True}
)(execute_operation)
mcp.prompt(
    name="distinguishability_analysis",
    description="Compare two Gaussian states with every available measure",
    tags={"analysis"}
)(distinguishability_analysis)
register_resources(mcp, list(OPERATIONS))


def main():
    """Main entry point for the server."""
    logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    logger.info("gaussfid MCP server %s starting", __version__)
    get_settings()
    mcp.run()


if __name__ == "__main__":
    main()
