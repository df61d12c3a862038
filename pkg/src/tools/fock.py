"""
Brute-force verifier: truncated number-basis density matrices for one- and
two-mode Gaussian states, and the measures computed directly from them.

Preparation order is fixed and shared with `moments_of`: thermal core,
single-mode squeezing, optional beam splitter, displacement. Single-mode
operators act on a working space twice the cutoff and the result is projected
onto the cutoff, so the reported trace deficit measures real leakage. The
displacement is moved ahead of the beam splitter by transforming the
amplitudes, which keeps it in the padded single-mode stage.

A built matrix keeps its preparation: the unitaries and the thermal
populations. Fractional powers rho^p are then U diag(p_k^p) U^dag, exact in
the populations, instead of an eigendecomposition of the truncated matrix
whose smallest eigenvalues are roundoff.
"""

import logging
from typing import Callable, List, NamedTuple, Optional, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.optimize import minimize_scalar

from ..config import Settings, get_settings
from ..errors import (
    DataError,
    DimensionError,
    DomainError,
    NumericalGuardError,
    PreconditionError,
    TruncationError,
)
from ..models import ChernoffResult, FockDensityMatrix, GaussianState, StateRecipe
from .fidelity import CHERNOFF_XATOL, chebyshev_grid
from .symplectic import beam_splitter, direct_sum, squeezer

logger = logging.getLogger(__name__)

MIN_CUTOFF = 4
HERMITIAN_TOL = 1e-12
NEGATIVITY_TOL = 1e-10
PRODUCT_TOL = 1e-12
NOISE_FLOOR = 1e-14

Density = Union[FockDensityMatrix, np.ndarray]


def _annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=np.float64)), k=1).astype(np.complex128)


def _thermal_populations(nbar: float, dim: int) -> np.ndarray:
    pops = np.zeros(dim)
    if nbar == 0:
        pops[0] = 1.0
        return pops
    q = nbar / (nbar + 1.0)
    return q ** np.arange(dim) / (nbar + 1.0)


def _single_mode_unitary(r: float, theta: float, alpha: complex, cutoff: int) -> np.ndarray:
    """D(alpha) S(r, theta) on the padded space of 2 * cutoff levels."""
    dim = 2 * cutoff
    a = _annihilation(dim)
    ad = a.conj().T
    U = np.eye(dim, dtype=np.complex128)
    if r != 0:
        xi = r * np.exp(1j * theta)
        U = scipy.linalg.expm((xi * ad @ ad - np.conj(xi) * a @ a) / 2)
    if alpha != 0:
        U = scipy.linalg.expm(alpha * ad - np.conj(alpha) * a) @ U
    return U


class FockPreparation(NamedTuple):
    """Unitaries and thermal populations a truncated state is built from."""
    cutoff: int
    unitaries: List[np.ndarray]
    populations: List[np.ndarray]
    mixer: Optional[np.ndarray] = None

    def power(self, p: float) -> np.ndarray:
        """Truncated rho^p for p > 0; p = 1 is the density matrix itself."""
        c = self.cutoff
        blocks = [
            ((U * pops ** p) @ U.conj().T)[:c, :c]
            for U, pops in zip(self.unitaries, self.populations)
        ]
        if len(blocks) == 1:
            rho = blocks[0]
        else:
            rho = np.kron(blocks[0], blocks[1])
            if self.mixer is not None:
                rho = self.mixer @ rho @ self.mixer.conj().T
        return (rho + rho.conj().T) / 2


def _prepare(recipe: StateRecipe, cutoff: int) -> FockPreparation:
    squeeze = recipe.squeezing_or_zero()
    alphas = recipe.displacement_or_zero()
    phi = recipe.beam_splitter

    if phi is not None and phi != 0:
        # D(alpha) B = B D(alpha'') with alpha'' = B^T alpha
        c, s = np.cos(phi), np.sin(phi)
        alphas = [c * alphas[0] - s * alphas[1], s * alphas[0] + c * alphas[1]]

    unitaries = [
        _single_mode_unitary(r, theta, complex(alpha), cutoff)
        for (r, theta), alpha in zip(squeeze, alphas)
    ]
    populations = [_thermal_populations(nbar, 2 * cutoff) for nbar in recipe.thermal]

    mixer = None
    if recipe.modes == 2 and phi is not None and phi != 0:
        # the generator is real antisymmetric
        a = np.real(_annihilation(cutoff))
        eye = np.eye(cutoff)
        a1, a2 = np.kron(a, eye), np.kron(eye, a)
        mixer = scipy.linalg.expm(phi * (a1.T @ a2 - a1 @ a2.T))
    return FockPreparation(cutoff=cutoff, unitaries=unitaries, populations=populations, mixer=mixer)


def _top_level_population(rho: np.ndarray, modes: int, cutoff: int) -> float:
    pops = np.real(np.diag(rho))
    if modes == 1:
        return float(pops[-1])
    grid = pops.reshape(cutoff, cutoff)
    return float(grid[-1, :].sum() + grid[:, -1].sum())


def build_fock(
    recipe: StateRecipe,
    cutoff: int = 16,
    eps_trunc: Optional[float] = None,
    settings: Optional[Settings] = None,
) -> FockDensityMatrix:
    """
    Truncated Fock density matrix for a recipe, growing the cutoff until converged.

    The cutoff doubles until the trace deficit is at most eps_trunc and the
    top-level population is below settings.top_level_max. The matrix is not
    renormalized.

    Args:
        recipe: One- or two-mode preparation recipe
        cutoff: Initial number of Fock levels per mode (>= 4)
        eps_trunc: Trace-deficit target; defaults to settings.tolerance_trunc

    Returns:
        FockDensityMatrix with the cutoff actually used

    Raises:
        TruncationError: when the cap is reached before convergence
    """
    settings = settings or get_settings()
    eps = settings.tolerance_trunc if eps_trunc is None else eps_trunc
    if recipe.modes > 2:
        raise DimensionError(f"Fock oracle supports 1 or 2 modes, recipe has {recipe.modes}")
    if cutoff < MIN_CUTOFF:
        raise DomainError(f"cutoff must be at least {MIN_CUTOFF}, got {cutoff}")
    cap = settings.cutoff_cap if recipe.modes == 1 else settings.cutoff_cap_two_mode

    deficit, top = float("nan"), float("nan")
    while cutoff <= cap:
        preparation = _prepare(recipe, cutoff)
        rho = preparation.power(1.0)
        deficit = float(1.0 - np.real(np.trace(rho)))
        top = _top_level_population(rho, recipe.modes, cutoff)
        if deficit <= eps and top < settings.top_level_max:
            return FockDensityMatrix(
                modes=recipe.modes,
                cutoff=cutoff,
                matrix=rho,
                trace_deficit=max(deficit, 0.0),
                top_level_population=top,
                preparation=preparation,
            )
        logger.debug("cutoff %d: trace deficit %.3g, top level %.3g; growing", cutoff, deficit, top)
        cutoff *= 2

    raise TruncationError(
        f"Fock cutoff cap {cap} reached (trace deficit {deficit:.3g}, top-level population {top:.3g}); "
        "use smaller thermal occupation, squeezing or displacement"
    )


def build_fock_pair(
    recipe0: StateRecipe,
    recipe1: StateRecipe,
    eps_trunc: Optional[float] = None,
    settings: Optional[Settings] = None,
) -> Tuple[FockDensityMatrix, FockDensityMatrix]:
    """Both density matrices at the larger of their converged cutoffs, ready for comparison."""
    if recipe0.modes != recipe1.modes:
        raise DimensionError(f"mode count mismatch: {recipe0.modes} vs {recipe1.modes}")
    rho0 = build_fock(recipe0, eps_trunc=eps_trunc, settings=settings)
    rho1 = build_fock(recipe1, eps_trunc=eps_trunc, settings=settings)
    # a converged build stays converged when the cutoff is enlarged
    if rho0.cutoff < rho1.cutoff:
        rho0 = build_fock(recipe0, cutoff=rho1.cutoff, eps_trunc=eps_trunc, settings=settings)
    elif rho1.cutoff < rho0.cutoff:
        rho1 = build_fock(recipe1, cutoff=rho0.cutoff, eps_trunc=eps_trunc, settings=settings)
    return rho0, rho1


def moments_of(recipe: StateRecipe) -> GaussianState:
    """Moment-level image of a recipe, with the same operation order as build_fock."""
    n = recipe.modes
    M = direct_sum(*[squeezer(r, theta) for r, theta in recipe.squeezing_or_zero()])
    if recipe.beam_splitter is not None:
        M = beam_splitter(recipe.beam_splitter) @ M
    core = np.diag(np.repeat([2 * nbar + 1 for nbar in recipe.thermal], 2))
    cov = M @ core @ M.T
    mean = np.ravel([[2 * a.real, 2 * a.imag] for a in recipe.displacement_or_zero()])
    return GaussianState(n=n, mean=mean, cov=(cov + cov.T) / 2)


def _single_mode_recipe(mean: np.ndarray, cov: np.ndarray) -> Tuple[float, Tuple[float, float], complex]:
    evals, evecs = np.linalg.eigh(cov)
    nu = float(np.sqrt(evals[0] * evals[1]))
    nbar = max(0.0, (nu - 1.0) / 2.0)
    r = float(np.log(evals[1] / evals[0]) / 4.0)
    theta = float(2.0 * np.arctan2(evecs[1, 1], evecs[0, 1])) if r > 0 else 0.0
    return nbar, (r, theta), complex(mean[0] / 2.0, mean[1] / 2.0)


def recipe_from_state(state: GaussianState) -> StateRecipe:
    """
    Recipe reproducing a state's moments.

    Supported for one-mode states and for two-mode product states
    (block-diagonal CM). Other two-mode states need an explicit recipe.
    """
    if state.n > 2:
        raise DimensionError(f"Fock oracle supports 1 or 2 modes, state has {state.n}")
    if state.n == 2 and np.max(np.abs(state.cov[:2, 2:])) > PRODUCT_TOL:
        raise PreconditionError(
            "two-mode state is correlated; provide a preparation recipe in its json state file"
        )
    parts = [_single_mode_recipe(state.mean[2 * k:2 * k + 2], state.cov[2 * k:2 * k + 2, 2 * k:2 * k + 2])
             for k in range(state.n)]
    return StateRecipe(
        thermal=[p[0] for p in parts],
        squeezing=[p[1] for p in parts],
        displacement=[p[2] for p in parts],
    )


def _as_matrix(rho: Density) -> np.ndarray:
    return rho.matrix if isinstance(rho, FockDensityMatrix) else np.asarray(rho, dtype=np.complex128)


def _pair(rho: Density, sigma: Density) -> Tuple[np.ndarray, np.ndarray]:
    a, b = _as_matrix(rho), _as_matrix(sigma)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"density matrices must be square and equal in shape, got {a.shape} and {b.shape}")
    return a, b


def _spectrum(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigendecomposition of a bare density matrix prepared for fractional powers.

    Eigenvalues in [-NEGATIVITY_TOL, 0) are clipped to 0. Positive eigenvalues
    below the roundoff level of the decomposition (relative to the largest) are
    zeroed too.
    """
    if np.max(np.abs(matrix - matrix.conj().T)) > HERMITIAN_TOL:
        raise DataError("density matrix is not Hermitian")
    w, v = np.linalg.eigh((matrix + matrix.conj().T) / 2)
    if w[0] < -NEGATIVITY_TOL:
        raise NumericalGuardError(
            f"density matrix eigenvalue {w[0]:.3g} below -{NEGATIVITY_TOL:g}; the cutoff is inadequate"
        )
    floor = max(NOISE_FLOOR, len(w) * np.finfo(np.float64).eps) * max(w[-1], 0.0)
    w = np.where(w > floor, w, 0.0)
    return w, v


def _powers(rho: Density) -> Callable[[float], np.ndarray]:
    """p -> rho^p, from the preparation when there is one, else from the spectrum."""
    if isinstance(rho, FockDensityMatrix) and rho.preparation is not None:
        return rho.preparation.power
    w, v = _spectrum(_as_matrix(rho))
    return lambda p: (v * w ** p) @ v.conj().T


def _trace_product(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.real(np.sum(a * b.T)))


def uhlmann_fidelity(rho: Density, sigma: Density) -> float:
    """
    F = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.

    Evaluated as the squared nuclear norm of sqrt(rho) sqrt(sigma), whose
    singular values carry absolute rather than square-root roundoff.
    """
    _pair(rho, sigma)
    root_a = _powers(rho)(0.5)
    root_b = _powers(sigma)(0.5)
    singular = np.linalg.svd(root_a @ root_b, compute_uv=False)
    return float(np.sum(singular) ** 2)


def s_overlap_fock(rho: Density, sigma: Density, s: float) -> float:
    """Tr(rho^s sigma^(1-s)) for 0 < s < 1."""
    if not (0.0 < s < 1.0):
        raise DomainError(f"s must lie in the open interval (0, 1), got {s!r}")
    _pair(rho, sigma)
    return _trace_product(_powers(rho)(s), _powers(sigma)(1.0 - s))


def chernoff_fock(rho: Density, sigma: Density, grid_points: int = 33) -> ChernoffResult:
    """Matrix-level inf_s Tr(rho^s sigma^(1-s)) on a Chebyshev grid refined around the best node."""
    _pair(rho, sigma)
    power_a, power_b = _powers(rho), _powers(sigma)

    def overlap(s: float) -> float:
        return _trace_product(power_a(s), power_b(1.0 - s))

    grid = chebyshev_grid(grid_points)
    trace: List[Tuple[float, float]] = [(float(s), overlap(float(s))) for s in grid]
    best = int(np.argmin([value for _, value in trace]))
    if best == 0 or best == len(grid) - 1:
        s_star, value = trace[best]
        return ChernoffResult(value=value, s_star=s_star, boundary=True, evaluations=trace)

    def objective(s: float) -> float:
        value = overlap(s)
        trace.append((float(s), value))
        return value

    minimize_scalar(objective, bounds=(float(grid[best - 1]), float(grid[best + 1])),
                    method="bounded", options={"xatol": CHERNOFF_XATOL})
    s_star, value = min(trace, key=lambda item: (item[1], item[0]))
    return ChernoffResult(value=value, s_star=s_star, evaluations=trace)


def trace_distance(rho: Density, sigma: Density) -> float:
    """D = ||rho - sigma||_1 / 2."""
    a, b = _pair(rho, sigma)
    for m in (a, b):
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise DataError("density matrix is not Hermitian")
    diff = a - b
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2))))


def purity_fock(rho: Density) -> float:
    """Tr(rho^2)."""
    a = _as_matrix(rho)
    return float(np.real(np.vdot(a, a)))
