import sys
import os
from pathlib import Path

import numpy as np
import pytest

# Add project root to Python path so relative imports work
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.config import get_settings
from src.models import GaussianState, StateRecipe
from src.tools.symplectic import beam_splitter, embed, rotation, squeezer

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


def make_symplectic(rng: np.random.Generator, n: int, max_r: float = 0.5, layers: int = 2) -> np.ndarray:
    """Random symplectic from rotations, squeezers and beam splitters."""
    S = np.eye(2 * n)
    for _ in range(layers):
        for k in range(n):
            local = rotation(rng.uniform(0, 2 * np.pi)) @ squeezer(rng.uniform(0, max_r), rng.uniform(0, 2 * np.pi))
            S = embed(local, [k], n) @ S
        for k in range(n - 1):
            S = embed(beam_splitter(rng.uniform(0, np.pi)), [k, k + 1], n) @ S
    return S


def make_state(
    rng: np.random.Generator,
    n: int,
    pure: bool = False,
    max_r: float = 0.5,
    max_nu: float = 3.0,
    max_mean: float = 1.0,
) -> GaussianState:
    """Random physical state S W S^T + x with distinct symplectic eigenvalues when mixed."""
    S = make_symplectic(rng, n, max_r)
    nus = np.ones(n) if pure else np.sort(rng.uniform(1.05, max_nu, size=n))[::-1]
    cov = S @ np.diag(np.repeat(nus, 2)) @ S.T
    return GaussianState(n=n, mean=rng.uniform(-max_mean, max_mean, 2 * n), cov=(cov + cov.T) / 2)


# two-mode recipes in this range converge at 32 Fock levels per mode
TWO_MODE_RANGE = {"max_nbar": 0.2, "max_r": 0.15, "max_alpha": 0.4}


def make_recipe(
    rng: np.random.Generator,
    modes: int,
    pure: bool = False,
    max_nbar: float = 2.0,
    max_r: float = 0.8,
    max_alpha: float = 1.5,
) -> StateRecipe:
    """Random bounded-energy recipe; the defaults span the whole one-mode oracle range."""
    thermal = [0.0 if pure else float(rng.uniform(0, max_nbar)) for _ in range(modes)]
    squeezing = [(float(rng.uniform(0, max_r)), float(rng.uniform(0, 2 * np.pi))) for _ in range(modes)]
    displacement = [
        complex(max_alpha * rng.uniform(0, 1) * np.exp(1j * rng.uniform(0, 2 * np.pi))) for _ in range(modes)
    ]
    bs = float(rng.uniform(0, np.pi / 2)) if modes == 2 else None
    return StateRecipe(thermal=thermal, squeezing=squeezing, displacement=displacement, beam_splitter=bs)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def settings():
    return get_settings()


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    """Keep GAUSSFID_* variables from the developer's shell out of the tests."""
    for key in list(os.environ):
        if key.startswith("GAUSSFID_"):
            monkeypatch.delenv(key, raising=False)


@pytest.fixture
def fixture_path():
    return lambda name: str(FIXTURES / name)
