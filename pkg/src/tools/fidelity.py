"""
Similarity and distinguishability measures between Gaussian states, computed
from first and second moments.

The s-overlap C_s = Tr(rho0^s rho1^(1-s)) of two Gaussian states is
Pi_s * det(Sigma_s)^(-1/2) * exp(-d^T Sigma_s^-1 d / 2) with
Sigma_s = Lambda_s(V0)_* + Lambda_{1-s}(V1)_* and
Pi_s = 2^n prod_i G_s(nu_i^0) G_{1-s}(nu_i^1). When one state is pure, C_s
tends to the fidelity as s approaches the pure state's side, which gives the
closed form 2^n det(V0 + V1)^(-1/2) exp(-d^T (V0 + V1)^-1 d / 2).
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.interpolate import barycentric_interpolate
from scipy.optimize import minimize_scalar

from ..config import Settings, get_settings
from ..errors import DimensionError, DomainError, NumericalGuardError, PhysicalityError, PreconditionError
from ..models import (
    S_LIMIT_LOWER,
    S_LIMIT_UPPER,
    BoundsReport,
    ChernoffResult,
    FidelityBounds,
    GaussianState,
    LimitSweepPoint,
    LimitSweepResult,
    OverlapReport,
    TraceDistanceBounds,
    WilliamsonDecomposition,
)
from .symplectic import symplectic_action, validate_cm, williamson

logger = logging.getLogger(__name__)

CHERNOFF_GRID_POINTS = 33
CHERNOFF_S_MIN = 1e-4
CHERNOFF_XATOL = 1e-6
CHAIN_SLACK = 1e-10
FVG_SLACK = 1e-8
RANGE_SLACK = 1e-12
DEFAULT_KS = (1, 2, 3, 4, 5, 6)
EXTRAPOLATION_POINTS = 3


def _check_gp_domain(x: float, p: float) -> None:
    if not (np.isfinite(x) and x >= 1.0):
        raise DomainError(f"x must be >= 1, got {x!r}")
    if not (np.isfinite(p) and p > 0.0):
        raise DomainError(f"p must be > 0, got {p!r}")


def g_p(x: float, p: float) -> float:
    """G_p(x) = 2^p / ((x+1)^p - (x-1)^p); exactly 1 at x = 1 and at p = 1."""
    _check_gp_domain(x, p)
    if x == 1.0 or p == 1.0:
        return 1.0
    # rewritten as (2/(x+1))^p / (1 - t) with t = ((x-1)/(x+1))^p
    log_t = p * np.log((x - 1.0) / (x + 1.0))
    return float(np.exp(p * np.log(2.0 / (x + 1.0))) / -np.expm1(log_t))


def lambda_p(x: float, p: float) -> float:
    """Lambda_p(x) = ((x+1)^p + (x-1)^p) / ((x+1)^p - (x-1)^p); 1 at x = 1, x at p = 1."""
    _check_gp_domain(x, p)
    if x == 1.0:
        return 1.0
    if p == 1.0:
        return float(x)
    log_t = p * np.log((x - 1.0) / (x + 1.0))
    return float((1.0 + np.exp(log_t)) / -np.expm1(log_t))


class _Prepared(NamedTuple):
    state: GaussianState
    pure: bool
    decomposition: Optional[WilliamsonDecomposition]


def _prepare(state: GaussianState, settings: Settings) -> _Prepared:
    report = validate_cm(state.cov, settings)
    if not report.accepted:
        raise PhysicalityError(f"{state.label or 'state'}: {report.failure()}", report)
    if report.pure:
        return _Prepared(state, True, None)
    return _Prepared(state, False, williamson(state.cov, settings))


def _check_pair(rho0: GaussianState, rho1: GaussianState) -> None:
    if rho0.n != rho1.n:
        raise DimensionError(f"mode count mismatch: {rho0.n} vs {rho1.n}")


def _check_s(s: float) -> None:
    if not (np.isfinite(s) and 0.0 < s < 1.0):
        raise DomainError(f"s must lie in the open interval (0, 1), got {s!r}")


def _lambda_action(prep: _Prepared, p: float) -> np.ndarray:
    if prep.pure:
        return prep.state.cov
    return symplectic_action(lambda x: lambda_p(x, p), prep.state.cov, decomposition=prep.decomposition)


def _g_product(prep: _Prepared, p: float) -> float:
    if prep.pure:
        return 1.0
    return float(np.prod([g_p(float(nu), p) for nu in prep.decomposition.spectrum]))


def _gaussian_kernel(
    sigma: np.ndarray, d: np.ndarray, prefactor: float, settings: Settings
) -> Tuple[float, float, float, bool]:
    """prefactor * det(sigma)^(-1/2) * exp(-d^T sigma^-1 d / 2) via a Cholesky factorization."""
    evals = np.linalg.eigvalsh(sigma)
    if evals[0] <= 0 or evals[-1] / evals[0] > settings.condition_max:
        raise NumericalGuardError(
            f"Sigma is ill-conditioned (eigenvalues {evals[0]:.3g} .. {evals[-1]:.3g}); "
            "check that both states are physical"
        )
    factor = scipy.linalg.cho_factor(sigma)
    logdet = 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
    quad = float(d @ scipy.linalg.cho_solve(factor, d))
    if quad > settings.underflow_quad:
        return 0.0, float(np.exp(logdet)), quad, True
    value = prefactor * float(np.exp(-logdet / 2 - quad / 2))
    return value, float(np.exp(logdet)), quad, False


def _overlap(p0: _Prepared, p1: _Prepared, s: float, settings: Settings) -> OverlapReport:
    n = p0.state.n
    sigma = _lambda_action(p0, s) + _lambda_action(p1, 1.0 - s)
    sigma = (sigma + sigma.T) / 2
    pi_term = 2.0 ** n * _g_product(p0, s) * _g_product(p1, 1.0 - s)
    d = p0.state.mean - p1.state.mean
    value, det, quad, underflow = _gaussian_kernel(sigma, d, pi_term, settings)
    return OverlapReport(
        s=s, value=value, pi_term=pi_term, sigma_det=det, quad_form=quad, d=d,
        underflow=underflow, pure0=p0.pure, pure1=p1.pure,
    )


def s_overlap(
    rho0: GaussianState, rho1: GaussianState, s: float, settings: Optional[Settings] = None
) -> OverlapReport:
    """
    Gaussian s-overlap C_s(rho0, rho1) for 0 < s < 1.

    Pure states skip their Lambda/G factors (Lambda_p(V)_* = V, G_p(1) = 1).

    Args:
        rho0: First state (exponent s)
        rho1: Second state (exponent 1 - s)
        s: Exponent in the open interval (0, 1)

    Returns:
        OverlapReport with C_s and its ingredients
    """
    settings = settings or get_settings()
    _check_pair(rho0, rho1)
    _check_s(s)
    return _overlap(_prepare(rho0, settings), _prepare(rho1, settings), s, settings)


def bhattacharyya(rho0: GaussianState, rho1: GaussianState, settings: Optional[Settings] = None) -> float:
    """B = C_{1/2}."""
    return s_overlap(rho0, rho1, 0.5, settings).value


def _closed_form(p0: _Prepared, p1: _Prepared, settings: Settings) -> float:
    n = p0.state.n
    sigma = p0.state.cov + p1.state.cov
    d = p0.state.mean - p1.state.mean
    value, _, _, _ = _gaussian_kernel(sigma, d, 2.0 ** n, settings)
    return value


def fidelity_mixed_pure(
    rho0: GaussianState, rho1: GaussianState, settings: Optional[Settings] = None
) -> float:
    """
    Fidelity between a (generally mixed) Gaussian state and a pure one.

    F = 2^n / sqrt(det(V0 + V1)) * exp(-d^T (V0 + V1)^-1 d / 2), symmetric in
    its arguments; either argument may be the pure one.

    Raises:
        PreconditionError: when neither state is pure
    """
    settings = settings or get_settings()
    _check_pair(rho0, rho1)
    p0, p1 = _prepare(rho0, settings), _prepare(rho1, settings)
    if not (p0.pure or p1.pure):
        raise PreconditionError(
            "closed-form Gaussian fidelity requires at least one pure state; "
            "use chernoff_bound or bhattacharyya for two mixed states"
        )
    return _closed_form(p0, p1, settings)


def chebyshev_grid(points: int = CHERNOFF_GRID_POINTS, lo: float = CHERNOFF_S_MIN) -> np.ndarray:
    hi = 1.0 - lo
    k = np.arange(points)
    return lo + (hi - lo) * (1.0 - np.cos(np.pi * k / (points - 1))) / 2.0


def chernoff_bound(
    rho0: GaussianState,
    rho1: GaussianState,
    settings: Optional[Settings] = None,
    workers: int = 1,
) -> ChernoffResult:
    """
    Chernoff term C = inf_{0<s<1} C_s.

    With exactly one pure state, C_s is monotone and the infimum is the
    fidelity, reached as s approaches the pure state's side. For two mixed
    states, C_s is evaluated on a Chebyshev-spaced grid and refined around the
    best node with a bounded scalar minimizer; the full trace is returned.

    Args:
        workers: Thread count for the grid evaluation; the reduction is
            deterministic (min by value, ties to smaller s)
    """
    settings = settings or get_settings()
    _check_pair(rho0, rho1)
    p0, p1 = _prepare(rho0, settings), _prepare(rho1, settings)

    if p0.pure and p1.pure:
        value = _closed_form(p0, p1, settings)
        return ChernoffResult(value=value, s_star=0.5, evaluations=[(0.5, value)])
    if p1.pure:
        return ChernoffResult(value=_closed_form(p0, p1, settings), s_star=S_LIMIT_UPPER, boundary=True)
    if p0.pure:
        return ChernoffResult(value=_closed_form(p0, p1, settings), s_star=S_LIMIT_LOWER, boundary=True)

    def evaluate(s: float) -> float:
        return _overlap(p0, p1, float(s), settings).value

    grid = chebyshev_grid()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(evaluate, grid))
    else:
        values = [evaluate(s) for s in grid]
    trace: List[Tuple[float, float]] = [(float(s), float(v)) for s, v in zip(grid, values)]

    best = int(np.argmin(values))
    if best == 0 or best == len(grid) - 1:
        logger.debug("Chernoff minimum at grid endpoint s=%.6g", grid[best])
        return ChernoffResult(value=float(values[best]), s_star=float(grid[best]), boundary=True, evaluations=trace)

    def objective(s: float) -> float:
        v = evaluate(s)
        trace.append((float(s), float(v)))
        return v

    minimize_scalar(
        objective,
        bounds=(float(grid[best - 1]), float(grid[best + 1])),
        method="bounded",
        options={"xatol": CHERNOFF_XATOL},
    )
    s_star, value = min(trace, key=lambda item: (item[1], item[0]))
    logger.debug("Chernoff refinement: s*=%.8f C=%.12g after %d evaluations", s_star, value, len(trace))
    return ChernoffResult(value=value, s_star=s_star, evaluations=trace)


def default_schedule(ks: Sequence[int] = DEFAULT_KS) -> List[float]:
    return [1.0 - 10.0 ** (-k) for k in ks]


def extrapolate_to_one(schedule: Sequence[float], values: Sequence[float]) -> Tuple[float, Optional[float]]:
    """
    Richardson-style estimate of lim C_s as s -> 1-, from the last few points.

    The polynomial through (1 - s, C_s) is evaluated at 1 - s = 0. The error
    estimate is the change from the estimate one order lower, which drops the
    point farthest from s = 1; None when a single point is available.
    """
    h = np.array([1.0 - s for s in schedule[-EXTRAPOLATION_POINTS:]])
    v = np.array([float(x) for x in values[-EXTRAPOLATION_POINTS:]])
    if len(h) == 1:
        return float(v[0]), None
    estimate = float(barycentric_interpolate(h, v, 0.0))
    previous = float(barycentric_interpolate(h[1:], v[1:], 0.0))
    return estimate, abs(estimate - previous)


def fidelity_limit_sweep(
    rho0: GaussianState,
    rho1: GaussianState,
    schedule: Optional[Sequence[float]] = None,
    settings: Optional[Settings] = None,
) -> LimitSweepResult:
    """
    Evaluate C_s along a schedule s -> 1- and compare with the closed-form fidelity.

    Deviations are reported as observed; nothing is corrected.

    Args:
        rho0: Generally mixed state
        rho1: Pure state
        schedule: Strictly increasing s values in (0, 1); defaults to 1 - 10^-k, k = 1..6
    """
    settings = settings or get_settings()
    _check_pair(rho0, rho1)
    schedule = list(schedule) if schedule is not None else default_schedule()
    if not schedule:
        raise DomainError("schedule must not be empty")
    for s in schedule:
        _check_s(s)
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise DomainError("schedule must be strictly increasing")

    p0, p1 = _prepare(rho0, settings), _prepare(rho1, settings)
    if not p1.pure:
        raise PreconditionError("limit sweep requires the second state to be pure")
    fid = _closed_form(p0, p1, settings)

    points = []
    for s in schedule:
        value = _overlap(p0, p1, float(s), settings).value
        points.append(LimitSweepPoint(s=float(s), value=value, deviation=abs(value - fid)))

    devs = [pt.deviation for pt in points]
    vals = [pt.value for pt in points]
    rates = [b / a for a, b in zip(devs, devs[1:]) if a > 0]
    extrapolated, extrapolation_error = extrapolate_to_one([pt.s for pt in points], vals)
    logger.debug("limit sweep: last %.12g, extrapolated %.12g, fidelity %.12g", vals[-1], extrapolated, fid)
    return LimitSweepResult(
        fidelity=fid,
        points=points,
        last_value=vals[-1],
        extrapolated=extrapolated,
        extrapolation_error=extrapolation_error,
        monotone_deviation=all(b <= a + 1e-15 for a, b in zip(devs, devs[1:])),
        non_increasing=all(b <= a + RANGE_SLACK for a, b in zip(vals, vals[1:])),
        rates=rates,
    )


def _unit_interval(value: float, name: str) -> float:
    if not np.isfinite(value) or value < -RANGE_SLACK or value > 1.0 + RANGE_SLACK:
        raise DomainError(f"{name} must lie in [0, 1], got {value!r}")
    return float(min(1.0, max(0.0, value)))


def helstrom_error(D: float) -> float:
    """Minimum error probability (1 - D)/2 for two equiprobable states."""
    D = _unit_interval(D, "trace distance")
    return (1.0 - D) / 2.0


def fidelity_trace_bounds(F: float, pure0: bool = False, pure1: bool = False) -> TraceDistanceBounds:
    """
    Trace-distance interval implied by a fidelity.

    Inverts (1-D)^2 <= F <= 1-D^2; with one pure state 1-D <= F tightens the
    lower end, and with two pure states F = 1-D^2 fixes D.
    """
    F = _unit_interval(F, "fidelity")
    upper = float(np.sqrt(1.0 - F))
    if pure0 and pure1:
        return TraceDistanceBounds(d_lower=upper, d_upper=upper, equality=True)
    lower = 1.0 - F if (pure0 or pure1) else 1.0 - float(np.sqrt(F))
    return TraceDistanceBounds(d_lower=lower, d_upper=upper)


def fidelity_bounds_from_trace(D: float, pure0: bool = False, pure1: bool = False) -> FidelityBounds:
    """Fidelity interval implied by a trace distance."""
    D = _unit_interval(D, "trace distance")
    upper = 1.0 - D * D
    if pure0 and pure1:
        return FidelityBounds(f_lower=upper, f_upper=upper, equality=True)
    lower = 1.0 - D if (pure0 or pure1) else (1.0 - D) ** 2
    return FidelityBounds(f_lower=lower, f_upper=upper)


def bures_distance(F: float) -> float:
    F = _unit_interval(F, "fidelity")
    return float(np.sqrt(max(0.0, 2.0 - 2.0 * np.sqrt(F))))


def angular_distance(F: float) -> float:
    F = _unit_interval(F, "fidelity")
    return float(np.arccos(np.sqrt(F)))


def bounds_report(
    rho0: GaussianState,
    rho1: GaussianState,
    oracle_D: Optional[float] = None,
    settings: Optional[Settings] = None,
    workers: int = 1,
) -> BoundsReport:
    """
    Aggregate F, B, C, the Helstrom upper bounds and the chain C <= B <= sqrt(F).

    F (and the distances derived from it) is only populated when at least one
    state is pure. With an oracle trace distance, the Fuchs-van de Graaf
    interval is checked against F, and for any pair D is checked against
    1 - C <= D <= sqrt(1 - B^2).
    """
    settings = settings or get_settings()
    _check_pair(rho0, rho1)
    p0, p1 = _prepare(rho0, settings), _prepare(rho1, settings)

    fid = _closed_form(p0, p1, settings) if (p0.pure or p1.pure) else None
    b = bhattacharyya(rho0, rho1, settings)
    chern = chernoff_bound(rho0, rho1, settings, workers=workers)
    c = chern.value

    margin_bc = b - c
    margin_fb = float(np.sqrt(max(fid, 0.0))) - b if fid is not None else None
    chain = margin_bc >= -CHAIN_SLACK and (margin_fb is None or margin_fb >= -CHAIN_SLACK)

    report = {
        "fidelity": fid,
        "fidelity_available": fid is not None,
        "bhattacharyya": b,
        "chernoff": c,
        "chernoff_s_star": chern.s_star,
        "helstrom_upper_chernoff": c / 2.0,
        "helstrom_upper_bhattacharyya": b / 2.0,
        "chain_margin_bc": margin_bc,
        "chain_margin_fb": margin_fb,
        "chain_holds": chain,
    }
    if fid is not None:
        report["bures_distance"] = bures_distance(fid)
        report["angular_distance"] = angular_distance(fid)
        report["trace_distance_bounds"] = fidelity_trace_bounds(fid, p0.pure, p1.pure)

    if oracle_D is not None:
        D = _unit_interval(oracle_D, "trace distance")
        fb = fidelity_bounds_from_trace(D, p0.pure, p1.pure)
        report["oracle_trace_distance"] = D
        report["helstrom_error"] = helstrom_error(D)
        report["fvg_lower"] = fb.f_lower
        report["fvg_upper"] = fb.f_upper
        if fid is not None:
            report["fvg_consistent"] = fb.f_lower - FVG_SLACK <= fid <= fb.f_upper + FVG_SLACK
        margin_c = c - (1.0 - D)
        margin_b = float(np.sqrt(max(1.0 - b * b, 0.0))) - D
        report["trace_margin_chernoff"] = margin_c
        report["trace_margin_bhattacharyya"] = margin_b
        report["trace_consistent"] = margin_c >= -FVG_SLACK and margin_b >= -FVG_SLACK
        if not report["trace_consistent"]:
            logger.warning(
                "Trace distance %.6g outside [1 - C, sqrt(1 - B^2)]: margins %.3g, %.3g", D, margin_c, margin_b
            )

    if not chain:
        logger.warning("Inequality chain C <= B <= sqrt(F) violated: margins %.3g, %s", margin_bc, margin_fb)
    return BoundsReport(**report)
