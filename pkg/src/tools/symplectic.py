"""
Symplectic linear algebra on covariance matrices.

Units follow the shot-noise convention: vacuum CM = identity and
[x, x^T] = 2i*Omega. Rival conventions (hbar = 1, vacuum = I/2) rescale every
covariance matrix by 1/2 and change every determinant, so inputs must already be
expressed in shot-noise units. Quadratures are ordered q1, p1, ..., qn, pn.
"""

import logging
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from ..config import Settings, get_settings
from ..errors import (
    DataError,
    DecompositionError,
    DimensionError,
    EvaluationError,
    PhysicalityError,
)
from ..models import (
    GaussianState,
    SymplecticCheck,
    SymplecticForm,
    ValidationReport,
    WilliamsonDecomposition,
)

logger = logging.getLogger(__name__)

_J = np.array([[0.0, 1.0], [-1.0, 0.0]])


@lru_cache(maxsize=16)
def _omega_matrix(n: int) -> np.ndarray:
    omg = np.kron(np.eye(n), _J)
    omg.setflags(write=False)
    return omg


def omega(n: int) -> SymplecticForm:
    """Symplectic form for n modes: the direct sum of n blocks [[0, 1], [-1, 0]]."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise DimensionError(f"Invalid mode count: {n!r} (must be a positive integer)")
    return SymplecticForm(n=int(n), matrix=_omega_matrix(int(n)).copy())


def _as_even_square(matrix: object, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[0] % 2:
        raise DimensionError(f"{name} must have even, non-zero dimension, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains NaN or Inf entries")
    return arr


def _repair_symmetry(V: np.ndarray, settings: Settings) -> Tuple[np.ndarray, float, bool]:
    """Symmetrize V when its asymmetry is within the repair tolerance."""
    asymmetry = float(np.max(np.abs(V - V.T)))
    if asymmetry == 0.0:
        return V, 0.0, True
    sym = (V + V.T) / 2
    ok = asymmetry <= settings.symmetry_repair
    if ok:
        logger.debug("Symmetrized covariance matrix (max asymmetry %.3g)", asymmetry)
    return sym, asymmetry, ok


def _checked_cov(V: object, settings: Settings) -> np.ndarray:
    arr = _as_even_square(V, "covariance matrix")
    sym, asymmetry, ok = _repair_symmetry(arr, settings)
    if not ok:
        raise PhysicalityError(
            f"covariance matrix not symmetric (max asymmetry {asymmetry:.3g})"
        )
    return sym


def is_symplectic(S: object, tol: Optional[float] = None, settings: Optional[Settings] = None) -> SymplecticCheck:
    """
    Test S Omega S^T = Omega.

    Args:
        S: Square real matrix of even dimension
        tol: Max-norm tolerance; defaults to the configured tolerance_symp

    Returns:
        SymplecticCheck with the flag and the max-norm residual
    """
    settings = settings or get_settings()
    tol = settings.tolerance_symp if tol is None else tol
    if tol < 0:
        raise ValueError("tolerance must be non-negative")
    arr = _as_even_square(S, "S")
    omg = _omega_matrix(arr.shape[0] // 2)
    residual = float(np.max(np.abs(arr @ omg @ arr.T - omg)))
    return SymplecticCheck(is_symplectic=residual <= tol, residual=residual)


def _raw_spectrum(V: np.ndarray) -> np.ndarray:
    """Symplectic eigenvalues of a symmetric positive-definite V, descending, unsnapped."""
    n = V.shape[0] // 2
    L = np.linalg.cholesky(V)
    # L^T Omega L is similar to V Omega, whose eigenvalues are +-i*nu
    herm = 1j * (L.T @ _omega_matrix(n) @ L)
    eig = np.linalg.eigvalsh(herm)
    return np.sort(eig[n:])[::-1].copy()


def _snap(spectrum: np.ndarray, settings: Settings) -> np.ndarray:
    snapped = spectrum.copy()
    near_one = np.abs(snapped - 1.0) <= settings.tolerance_pure
    below = (snapped < 1.0) & (snapped >= 1.0 - settings.tolerance_heis)
    snapped[near_one | below] = 1.0
    return snapped


def _min_eigenvalue(V: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(V)[0])


def validate_cm(V: object, settings: Optional[Settings] = None) -> ValidationReport:
    """
    Check symmetry, positive definiteness, the uncertainty principle and purity.

    A state is accepted downstream only when it is symmetric (after repair),
    V > 0 and every symplectic eigenvalue is at least 1 - tolerance_heis.
    """
    settings = settings or get_settings()
    arr = _as_even_square(V, "covariance matrix")
    sym, asymmetry, symmetric = _repair_symmetry(arr, settings)
    min_eig = _min_eigenvalue(sym)
    positive = min_eig > 0

    min_nu = None
    physical = False
    pure = False
    margin = None
    if positive:
        raw = _raw_spectrum(sym)
        min_nu = float(raw[-1])
        physical = min_nu >= 1.0 - settings.tolerance_heis
        pure = bool(np.all(np.abs(raw - 1.0) <= settings.tolerance_pure))
        sign, logdet = np.linalg.slogdet(sym)
        margin = float(abs(np.exp(logdet / 2) - 1.0))

    return ValidationReport(
        symmetric=symmetric,
        max_asymmetry=asymmetry,
        repaired=symmetric and asymmetry > 0,
        positive_definite=positive,
        min_eigenvalue=min_eig,
        physical=physical,
        min_symplectic_eigenvalue=min_nu,
        pure=physical and pure,
        purity_margin=margin,
    )


def _require_positive(V: np.ndarray, settings: Settings) -> None:
    min_eig = _min_eigenvalue(V)
    if min_eig <= 0:
        report = validate_cm(V, settings)
        raise PhysicalityError(report.failure(), report)


def symplectic_spectrum(V: object, settings: Optional[Settings] = None) -> np.ndarray:
    """Symplectic eigenvalues nu_i (eigenvalues of i*Omega*V are +-nu_i), sorted descending."""
    settings = settings or get_settings()
    sym = _checked_cov(V, settings)
    _require_positive(sym, settings)
    return _snap(_raw_spectrum(sym), settings)


def williamson(V: object, settings: Optional[Settings] = None) -> WilliamsonDecomposition:
    """
    Williamson decomposition V = S W S^T.

    Builds A = V^(1/2) Omega V^(1/2), brings it to the real Schur form
    O^T A O = (+) nu_i J with an orthogonal O and sets
    S = V^(1/2) O W^(-1/2). Blocks are ordered by descending nu_i; ties keep
    the Schur order. For degenerate spectra S is not unique.

    Args:
        V: Symmetric positive-definite 2n x 2n matrix

    Returns:
        WilliamsonDecomposition with residuals of both defining identities
    """
    settings = settings or get_settings()
    sym = _checked_cov(V, settings)
    n = sym.shape[0] // 2

    evals, evecs = np.linalg.eigh(sym)
    if evals[0] <= 0:
        raise DecompositionError(
            f"covariance matrix is not positive definite (eigenvalue {evals[0]:.6g})",
            eigenvalue=float(evals[0]),
        )
    sqrt_v = (evecs * np.sqrt(evals)) @ evecs.T
    omg = _omega_matrix(n)
    A = sqrt_v @ omg @ sqrt_v
    A = (A - A.T) / 2

    T, O = scipy.linalg.schur(A, output="real")
    nus = np.empty(n)
    for k in range(n):
        i, j = 2 * k, 2 * k + 1
        nus[k] = np.sqrt(abs(T[i, j] * T[j, i]))
        if T[i, j] < 0:
            O[:, [i, j]] = O[:, [j, i]]

    order = np.argsort(-nus, kind="stable")
    cols = np.ravel([[2 * k, 2 * k + 1] for k in order])
    O = O[:, cols]
    nus = nus[order]

    S = sqrt_v @ O @ np.diag(np.repeat(nus ** -0.5, 2))
    spectrum = _snap(nus, settings)
    W = np.diag(np.repeat(spectrum, 2))

    symp_res = float(np.max(np.abs(S @ omg @ S.T - omg)))
    recon_res = float(np.max(np.abs(S @ W @ S.T - sym)))
    if symp_res > settings.tolerance_symp or recon_res > settings.tolerance_recon:
        logger.warning(
            "Williamson residuals above tolerance (symplectic %.3g, reconstruction %.3g)",
            symp_res, recon_res,
        )

    return WilliamsonDecomposition(
        S=S,
        spectrum=spectrum,
        williamson_form=W,
        symplectic_residual=symp_res,
        reconstruction_residual=recon_res,
    )


def symplectic_action(
    f: Callable[[float], float],
    V: object,
    settings: Optional[Settings] = None,
    decomposition: Optional[WilliamsonDecomposition] = None,
) -> np.ndarray:
    """
    Symplectic action f(V)_* = S [(+) f(nu_i) I] S^T.

    Differs from the ordinary matrix function f(V) unless S is orthogonal.
    Covariant under symplectic congruence: f(R V R^T)_* = R f(V)_* R^T.

    Args:
        f: Scalar function finite on the symplectic spectrum
        V: Physical covariance matrix
        decomposition: Precomputed williamson(V), reused when given

    Returns:
        Symmetric 2n x 2n matrix
    """
    dec = decomposition if decomposition is not None else williamson(V, settings)
    values = np.empty(len(dec.spectrum))
    for k, nu in enumerate(dec.spectrum):
        try:
            value = float(f(float(nu)))
        except (ValueError, ArithmeticError) as e:
            raise EvaluationError(f"function failed at symplectic eigenvalue {nu:.12g}: {e}", eigenvalue=float(nu))
        if not np.isfinite(value):
            raise EvaluationError(f"function not finite at symplectic eigenvalue {nu:.12g}", eigenvalue=float(nu))
        values[k] = value
    out = dec.S @ np.diag(np.repeat(values, 2)) @ dec.S.T
    return (out + out.T) / 2


def purity(V: object, settings: Optional[Settings] = None) -> float:
    """Tr rho^2 = 1/sqrt(det V), in (0, 1]."""
    settings = settings or get_settings()
    sym = _checked_cov(V, settings)
    report = validate_cm(sym, settings)
    if not report.accepted:
        raise PhysicalityError(report.failure(), report)
    L = np.linalg.cholesky(sym)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return float(min(1.0, np.exp(-logdet / 2)))


def gaussian_state(
    mean: object,
    cov: object,
    label: Optional[str] = None,
    settings: Optional[Settings] = None,
) -> GaussianState:
    """
    Build a validated GaussianState.

    Covariance matrices with asymmetry up to settings.symmetry_repair are
    symmetrized; anything unphysical raises PhysicalityError carrying the
    ValidationReport.
    """
    settings = settings or get_settings()
    arr = _as_even_square(cov, "covariance matrix")
    x = np.asarray(mean, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != arr.shape[0]:
        raise DimensionError(f"mean must have length {arr.shape[0]}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("mean contains NaN or Inf entries")

    report = validate_cm(arr, settings)
    if not report.accepted:
        raise PhysicalityError(report.failure(), report)
    sym, _, _ = _repair_symmetry(arr, settings)
    return GaussianState(n=arr.shape[0] // 2, mean=x, cov=sym, label=label)


def is_pure(state: object, settings: Optional[Settings] = None) -> bool:
    """True when every symplectic eigenvalue is within tolerance_pure of 1."""
    settings = settings or get_settings()
    V = state.cov if isinstance(state, GaussianState) else state
    sym = _checked_cov(V, settings)
    _require_positive(sym, settings)
    return bool(np.all(np.abs(_raw_spectrum(sym) - 1.0) <= settings.tolerance_pure))


# Symplectic images of elementary operations, acting on (q, p) as x -> M x.

def rotation(phi: float) -> np.ndarray:
    """Phase rotation a -> a exp(-i phi)."""
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, s], [-s, c]])


def squeezer(r: float, theta: float = 0.0) -> np.ndarray:
    """Single-mode squeezer; theta = 0 stretches q by e^r and compresses p by e^-r."""
    c, s = np.cos(theta), np.sin(theta)
    return np.cosh(r) * np.eye(2) + np.sinh(r) * np.array([[c, s], [s, -c]])


def beam_splitter(phi: float) -> np.ndarray:
    """Two-mode beam splitter a1 -> a1 cos(phi) + a2 sin(phi), a2 -> a2 cos(phi) - a1 sin(phi)."""
    c, s = np.cos(phi), np.sin(phi)
    eye = np.eye(2)
    return np.block([[c * eye, s * eye], [-s * eye, c * eye]])


def direct_sum(*blocks: np.ndarray) -> np.ndarray:
    return scipy.linalg.block_diag(*blocks)


def embed(block: np.ndarray, modes: Sequence[int], n: int) -> np.ndarray:
    """Place a 2k x 2k symplectic acting on `modes` into the 2n-dimensional identity."""
    block = np.asarray(block, dtype=np.float64)
    if block.shape != (2 * len(modes), 2 * len(modes)):
        raise DimensionError(f"block shape {block.shape} does not match {len(modes)} modes")
    if len(set(modes)) != len(modes) or any(m < 0 or m >= n for m in modes):
        raise DimensionError(f"invalid mode indices {list(modes)} for {n} modes")
    idx = np.ravel([[2 * m, 2 * m + 1] for m in modes])
    out = np.eye(2 * n)
    out[np.ix_(idx, idx)] = block
    return out


def vacuum(n: int = 1) -> GaussianState:
    return GaussianState(n=n, mean=np.zeros(2 * n), cov=np.eye(2 * n), label="vacuum")


def thermal(nbar: float) -> GaussianState:
    if nbar < 0:
        raise ValueError("thermal occupation must be non-negative")
    return GaussianState(n=1, mean=np.zeros(2), cov=(2 * nbar + 1) * np.eye(2), label=f"thermal({nbar:g})")


def coherent(alpha: complex) -> GaussianState:
    alpha = complex(alpha)
    return GaussianState(
        n=1, mean=np.array([2 * alpha.real, 2 * alpha.imag]), cov=np.eye(2), label=f"coherent({alpha:g})"
    )


def squeezed_vacuum(r: float, theta: float = 0.0) -> GaussianState:
    S = squeezer(r, theta)
    return GaussianState(n=1, mean=np.zeros(2), cov=S @ S.T, label=f"squeezed({r:g},{theta:g})")
