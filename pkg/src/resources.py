"""gaussfid MCP Resources - Server information endpoint."""

from typing import Any, Dict, List

from src import __version__
from src.config import ENV_PREFIX, get_settings

SERVER_INFO_URI = "gaussfid://server-info"


def server_info(operations: List[str]) -> Dict[str, Any]:
    """
    Version, conventions, tolerances in force and the operation catalogue.

    Tolerances are read on every call so environment changes show up.
    """
    settings = get_settings()
    return {
        "name": "Gaussian Fidelity MCP Server",
        "version": __version__,
        "description": "Fidelity, overlaps, Chernoff and Bhattacharyya bounds between multimode Gaussian states",
        "conventions": {
            "units": "shot-noise units, vacuum covariance matrix = identity",
            "ordering": "q1, p1, ..., qn, pn",
            "symplectic_form": "direct sum of [[0, 1], [-1, 0]]",
            "coherent_state_mean": "alpha -> (2 Re alpha, 2 Im alpha)",
        },
        "tolerances": settings.model_dump(),
        "configuration": {
            "environment_prefix": ENV_PREFIX,
            "precedence": "parameters > environment > .env file > defaults",
        },
        "architecture": {
            "type": "Three-Layer Architecture",
            "workflow": [
                "Layer 1: discover_operations() - See available operations",
                "Layer 2: get_operation_schema(operation_id) - Get requirements",
                "Layer 3: execute_operation(operation_id, parameters) - Execute"
            ],
        },
        "available_operations": operations,
        "prompts": ["distinguishability_analysis"],
        "resources": [
            {
                "uri": SERVER_INFO_URI,
                "description": "Server capabilities, version, conventions and tolerances",
                "cacheable": False,
            }
        ],
    }


def register_resources(mcp, operations: List[str]) -> None:
    """Register server info resource with the MCP server."""

    @mcp.resource(SERVER_INFO_URI)
    def get_server_info() -> Dict[str, Any]:
        """Get information about the gaussfid MCP server's capabilities and settings."""
        return server_info(operations)
