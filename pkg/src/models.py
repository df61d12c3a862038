from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PlainSerializer,
    model_validator,
)


def _real_array(value: Any) -> np.ndarray:
    return np.array(value, dtype=np.float64)


def _complex_array(value: Any) -> np.ndarray:
    return np.array(value, dtype=np.complex128)


def _real_list(value: np.ndarray) -> list:
    return np.asarray(value, dtype=np.float64).tolist()


def _complex_list(value: np.ndarray) -> list:
    arr = np.asarray(value, dtype=np.complex128)
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


RealArray = Annotated[
    np.ndarray,
    BeforeValidator(_real_array),
    PlainSerializer(_real_list, return_type=list),
]
ComplexArray = Annotated[
    np.ndarray,
    BeforeValidator(_complex_array),
    PlainSerializer(_complex_list, return_type=list),
]

S_LIMIT_UPPER = "limit at s->1-"
S_LIMIT_LOWER = "limit at s->0+"


class SymplecticForm(BaseModel):
    """Block direct sum of n copies of [[0, 1], [-1, 0]]."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    n: int
    matrix: RealArray


class SymplecticCheck(BaseModel):
    """Outcome of a symplecticity test."""
    is_symplectic: bool
    residual: float


class GaussianState(BaseModel):
    """
    Moment-level Gaussian state in shot-noise units (vacuum CM = identity).

    Quadratures are ordered q1, p1, ..., qn, pn.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    n: int = Field(ge=1)
    mean: RealArray
    cov: RealArray
    label: Optional[str] = None

    @model_validator(mode="after")
    def _check_shapes(self) -> "GaussianState":
        if self.mean.shape != (2 * self.n,):
            raise ValueError(f"mean must have length {2 * self.n}, got shape {self.mean.shape}")
        if self.cov.shape != (2 * self.n, 2 * self.n):
            raise ValueError(f"cov must be {2 * self.n}x{2 * self.n}, got shape {self.cov.shape}")
        return self


class WilliamsonDecomposition(BaseModel):
    """V = S W S^T with S symplectic and W = diag(nu_1, nu_1, ..., nu_n, nu_n)."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    S: RealArray
    spectrum: RealArray
    williamson_form: RealArray
    symplectic_residual: float
    reconstruction_residual: float


class ValidationReport(BaseModel):
    """Symmetry, positivity, physicality and purity of a covariance matrix."""
    symmetric: bool
    max_asymmetry: float
    repaired: bool = False
    positive_definite: bool
    min_eigenvalue: float
    physical: bool
    min_symplectic_eigenvalue: Optional[float] = None
    pure: bool
    purity_margin: Optional[float] = None

    @property
    def accepted(self) -> bool:
        return self.symmetric and self.positive_definite and self.physical

    def failure(self) -> Optional[str]:
        """First violated invariant as a message, None when accepted."""
        if not self.symmetric:
            return f"covariance matrix not symmetric (max asymmetry {self.max_asymmetry:.3g})"
        if not self.positive_definite:
            return f"covariance matrix not positive definite (min eigenvalue {self.min_eigenvalue:.6g})"
        if not self.physical:
            return f"symplectic eigenvalue {self.min_symplectic_eigenvalue:.6g} < 1"
        return None


class OverlapReport(BaseModel):
    """s-overlap C_s together with the ingredients of its Gaussian formula."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    s: float
    value: float
    pi_term: float
    sigma_det: float
    quad_form: float
    d: RealArray
    underflow: bool = False
    pure0: bool = False
    pure1: bool = False


class ChernoffResult(BaseModel):
    """Infimum of C_s over s with the search trace."""
    value: float
    s_star: Union[float, Literal["limit at s->1-", "limit at s->0+"]]
    boundary: bool = False
    evaluations: List[Tuple[float, float]] = Field(default_factory=list)


class LimitSweepPoint(BaseModel):
    s: float
    value: float
    deviation: float


class LimitSweepResult(BaseModel):
    """C_s along a schedule approaching s = 1 from below, against the closed-form fidelity."""
    fidelity: float
    points: List[LimitSweepPoint]
    last_value: float
    extrapolated: float
    extrapolation_error: Optional[float] = None
    monotone_deviation: bool
    non_increasing: bool
    rates: List[float] = Field(default_factory=list)


class TraceDistanceBounds(BaseModel):
    """Interval for the trace distance implied by a fidelity value."""
    d_lower: float
    d_upper: float
    equality: bool = False


class FidelityBounds(BaseModel):
    """Interval for the fidelity implied by a trace distance value."""
    f_lower: float
    f_upper: float
    equality: bool = False


class BoundsReport(BaseModel):
    """Aggregate of the similarity measures and the inequalities linking them."""
    fidelity: Optional[float] = None
    fidelity_available: bool = False
    bhattacharyya: float
    chernoff: float
    chernoff_s_star: Union[float, str]
    helstrom_upper_chernoff: float
    helstrom_upper_bhattacharyya: float
    bures_distance: Optional[float] = None
    angular_distance: Optional[float] = None
    trace_distance_bounds: Optional[TraceDistanceBounds] = None
    chain_margin_bc: float
    chain_margin_fb: Optional[float] = None
    chain_holds: bool
    oracle_trace_distance: Optional[float] = None
    helstrom_error: Optional[float] = None
    fvg_lower: Optional[float] = None
    fvg_upper: Optional[float] = None
    fvg_consistent: Optional[bool] = None
    # 1 - D <= C and D <= sqrt(1 - B^2); hold for mixed pairs too
    trace_margin_chernoff: Optional[float] = None
    trace_margin_bhattacharyya: Optional[float] = None
    trace_consistent: Optional[bool] = None


class StateRecipe(BaseModel):
    """
    Preparation recipe shared by the Fock and the moment representations.

    Per mode: thermal occupation, then squeezing (r, theta), then an optional
    two-mode beam splitter, then displacement alpha.
    """
    thermal: List[float]
    squeezing: Optional[List[Tuple[float, float]]] = None
    displacement: Optional[List[complex]] = None
    beam_splitter: Optional[float] = None

    @property
    def modes(self) -> int:
        return len(self.thermal)

    @model_validator(mode="after")
    def _check_recipe(self) -> "StateRecipe":
        n = len(self.thermal)
        if n < 1:
            raise ValueError("recipe needs at least one mode")
        if any(nbar < 0 for nbar in self.thermal):
            raise ValueError("thermal occupations must be non-negative")
        if self.squeezing is not None:
            if len(self.squeezing) != n:
                raise ValueError(f"squeezing must list {n} (r, theta) pairs")
            if any(r < 0 for r, _ in self.squeezing):
                raise ValueError("squeezing magnitudes must be non-negative")
        if self.displacement is not None and len(self.displacement) != n:
            raise ValueError(f"displacement must list {n} amplitudes")
        if self.beam_splitter is not None and n != 2:
            raise ValueError("beam splitter requires exactly two modes")
        return self

    def squeezing_or_zero(self) -> List[Tuple[float, float]]:
        return list(self.squeezing) if self.squeezing is not None else [(0.0, 0.0)] * self.modes

    def displacement_or_zero(self) -> List[complex]:
        return list(self.displacement) if self.displacement is not None else [0j] * self.modes


class FockDensityMatrix(BaseModel):
    """Truncated number-basis density matrix; the trace deficit is reported, never renormalized."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    modes: int
    cutoff: int
    matrix: ComplexArray
    trace_deficit: float
    top_level_population: float = 0.0
    # FockPreparation from build_fock; enables exact fractional powers
    preparation: Optional[Any] = Field(default=None, exclude=True, repr=False)


class StateFile(BaseModel):
    """On-disk state: moments plus optional label and preparation recipe."""
    n: int = Field(ge=1)
    mean: List[float]
    cov: List[List[float]]
    label: Optional[str] = None
    recipe: Optional[StateRecipe] = None


Command = Literal[
    "validate", "williamson", "purity", "overlap", "bhattacharyya",
    "chernoff", "fidelity", "limit-sweep", "bounds",
]


class RunConfig(BaseModel):
    """Everything a CLI invocation needs, after flag parsing."""
    command: Command
    inputs: List[str]
    s: Optional[float] = None
    schedule: Optional[List[float]] = None
    overrides: Dict[str, float] = Field(default_factory=dict)
    verify: bool = False
    workers: int = Field(default=1, ge=1)
    output_format: Literal["human", "json"] = "human"
