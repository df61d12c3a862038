import os
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict

ENV_PREFIX = "GAUSSFID_"


class Settings(BaseModel):
    """Numerical tolerances and caps shared by every operation."""
    model_config = ConfigDict(frozen=True)

    tolerance_symp: float = 1e-8
    tolerance_recon: float = 1e-8
    tolerance_heis: float = 1e-9
    tolerance_pure: float = 1e-9
    tolerance_trunc: float = 1e-10
    symmetry_repair: float = 1e-10
    condition_max: float = 1e12
    underflow_quad: float = 1400.0
    cutoff_cap: int = 512
    cutoff_cap_two_mode: int = 64
    top_level_max: float = 1e-12


def _read_environment() -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for name, field in Settings.model_fields.items():
        raw = os.environ.get(ENV_PREFIX + name.upper())
        if raw is None or raw.strip() == "":
            continue
        try:
            values[name] = field.annotation(raw.strip())
        except ValueError:
            raise ValueError(
                f"{ENV_PREFIX}{name.upper()}={raw!r} is not a valid {field.annotation.__name__}"
            )
    return values


def get_settings(overrides: Optional[Dict[str, Any]] = None) -> Settings:
    """
    Build the settings in force.

    Precedence is overrides > OS environment > .env file > defaults. The .env
    file at the project root only fills variables the OS environment lacks.

    Args:
        overrides: Explicit values (CLI flags, MCP parameters); None entries are ignored

    Returns:
        Frozen Settings instance
    """
    # Method 1: OS environment; Method 2: .env file (local development)
    env_path = Path(__file__).parent.parent / '.env'
    if env_path.exists():
        load_dotenv(env_path, override=False)

    values = _read_environment()
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})

    unknown = set(values) - set(Settings.model_fields)
    if unknown:
        raise ValueError(f"Unknown settings: {', '.join(sorted(unknown))}")

    return Settings(**values)
