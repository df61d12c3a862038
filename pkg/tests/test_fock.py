import pytest
import sys
import os
from math import factorial

import numpy as np

# Add project root to Python path so relative imports work
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.config import get_settings
from src.errors import DataError, DimensionError, DomainError, NumericalGuardError, PreconditionError, TruncationError
from src.models import StateRecipe
from src.tools.fidelity import bhattacharyya, chernoff_bound, fidelity_mixed_pure, s_overlap
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
from src.tools.symplectic import is_pure, purity, squeezer, thermal
from tests.conftest import TWO_MODE_RANGE, make_recipe, make_state

AGREEMENT = 1e-6


def quadrature_moments(rho: np.ndarray, modes: int, cutoff: int):
    """Mean and symmetrized covariance of q = a + a^dag, p = -i(a - a^dag)."""
    a = np.diag(np.sqrt(np.arange(1, cutoff)), k=1).astype(complex)
    eye = np.eye(cutoff)
    ops = []
    for k in range(modes):
        ak = a if modes == 1 else (np.kron(a, eye) if k == 0 else np.kron(eye, a))
        ops += [ak + ak.conj().T, -1j * (ak - ak.conj().T)]
    applied = [rho @ x for x in ops]
    mean = np.array([np.real(np.trace(rx)) for rx in applied])
    cov = np.empty((2 * modes, 2 * modes))
    for i, (x, rx) in enumerate(zip(ops, applied)):
        for j, (y, ry) in enumerate(zip(ops, applied)):
            # Tr(rho x y) = sum((rho x) * y^T)
            both = np.sum(rx * y.T) + np.sum(ry * x.T)
            cov[i, j] = np.real(both) / 2 - mean[i] * mean[j]
    return mean, cov


class TestBuildFock:
    def test_thermal_populations(self):
        rho = build_fock(StateRecipe(thermal=[1.0]))
        assert rho.cutoff == 64
        pops = np.real(np.diag(rho.matrix))
        assert np.allclose(pops[:10], 0.5 ** np.arange(1, 11), atol=1e-15)
        assert 0.0 <= rho.trace_deficit <= 1e-10
        assert rho.top_level_population < 1e-12

    def test_coherent_populations(self):
        alpha = 1.0
        rho = build_fock(StateRecipe(thermal=[0.0], displacement=[alpha]))
        pops = np.real(np.diag(rho.matrix))
        poisson = [np.exp(-alpha ** 2) * alpha ** (2 * k) / factorial(k) for k in range(8)]
        assert np.allclose(pops[:8], poisson, atol=1e-12)

    def test_squeezed_vacuum(self):
        r = 0.5
        rho = build_fock(StateRecipe(thermal=[0.0], squeezing=[(r, 0.0)]))
        pops = np.real(np.diag(rho.matrix))
        assert pops[0] == pytest.approx(1 / np.cosh(r), abs=1e-12)
        assert np.allclose(pops[1::2], 0.0, atol=1e-14)

    def test_hermitian_and_unnormalized(self):
        rho = build_fock(StateRecipe(thermal=[0.3], squeezing=[(0.2, 1.0)], displacement=[0.4 - 0.2j]))
        assert np.allclose(rho.matrix, rho.matrix.conj().T, atol=1e-12)
        assert np.real(np.trace(rho.matrix)) == pytest.approx(1.0 - rho.trace_deficit, abs=1e-15)

    def test_single_mode_moments_follow_recipe(self, rng):
        for _ in range(5):
            recipe = make_recipe(rng, 1, max_nbar=1.0, max_r=0.5, max_alpha=1.0)
            rho = build_fock(recipe)
            mean, cov = quadrature_moments(rho.matrix, 1, rho.cutoff)
            expected = moments_of(recipe)
            assert np.allclose(mean, expected.mean, atol=1e-8)
            assert np.allclose(cov, expected.cov, atol=1e-8)

    def test_beam_splitter_moments_follow_recipe(self):
        recipe = StateRecipe(thermal=[0.5, 0.0], displacement=[0.5, 0.0], beam_splitter=np.pi / 4)
        rho = build_fock(recipe)
        mean, cov = quadrature_moments(rho.matrix, 2, rho.cutoff)
        expected = moments_of(recipe)
        assert np.allclose(mean, [1.0, 0.0, 0.0, 0.0], atol=1e-8)
        assert np.allclose(cov, expected.cov, atol=1e-8)
        assert np.allclose(expected.cov[:2, 2:], -0.5 * np.eye(2))

    def test_too_many_modes(self):
        with pytest.raises(DimensionError):
            build_fock(StateRecipe(thermal=[0.0, 0.0, 0.0]))

    def test_cutoff_too_small(self):
        with pytest.raises(DomainError):
            build_fock(StateRecipe(thermal=[0.0]), cutoff=2)

    def test_cap_reached(self):
        tight = get_settings({"cutoff_cap": 32})
        with pytest.raises(TruncationError):
            build_fock(StateRecipe(thermal=[5.0]), settings=tight)

    def test_pair_shares_cutoff(self):
        rho, sigma = build_fock_pair(StateRecipe(thermal=[1.0]), StateRecipe(thermal=[0.0]))
        assert rho.cutoff == sigma.cutoff == 64

    def test_pair_mode_mismatch(self):
        with pytest.raises(DimensionError):
            build_fock_pair(StateRecipe(thermal=[1.0]), StateRecipe(thermal=[0.0, 0.0]))


class TestRecipes:
    def test_moments_of_squeezer(self):
        state = moments_of(StateRecipe(thermal=[1.0], squeezing=[(0.3, 0.7)], displacement=[0.5j]))
        S = squeezer(0.3, 0.7)
        assert np.allclose(state.cov, 3 * S @ S.T)
        assert np.allclose(state.mean, [0.0, 1.0])

    def test_recipe_from_state_round_trip(self, rng):
        for _ in range(10):
            state = make_state(rng, 1)
            image = moments_of(recipe_from_state(state))
            assert np.allclose(image.cov, state.cov, atol=1e-9)
            assert np.allclose(image.mean, state.mean, atol=1e-12)

    def test_recipe_from_product_state(self, rng):
        a, b = make_state(rng, 1), make_state(rng, 1, pure=True)
        cov = np.zeros((4, 4))
        cov[:2, :2], cov[2:, 2:] = a.cov, b.cov
        product = moments_of(StateRecipe(thermal=[0.0, 0.0]))
        product = product.model_copy(update={"cov": cov, "mean": np.concatenate([a.mean, b.mean])})
        recipe = recipe_from_state(product)
        assert recipe.beam_splitter is None
        assert np.allclose(moments_of(recipe).cov, cov, atol=1e-9)

    def test_correlated_state_needs_explicit_recipe(self):
        state = moments_of(StateRecipe(thermal=[0.5, 0.0], beam_splitter=0.3))
        with pytest.raises(PreconditionError):
            recipe_from_state(state)

    def test_recipe_validation(self):
        with pytest.raises(ValueError):
            StateRecipe(thermal=[0.1], beam_splitter=0.2)
        with pytest.raises(ValueError):
            StateRecipe(thermal=[-0.1])
        with pytest.raises(ValueError):
            StateRecipe(thermal=[0.1, 0.1], displacement=[0.5])


class TestMatrixMeasures:
    def test_thermal_vacuum(self):
        rho, vac = build_fock_pair(StateRecipe(thermal=[1.0]), StateRecipe(thermal=[0.0]))
        assert uhlmann_fidelity(rho, vac) == pytest.approx(0.5, abs=1e-12)
        assert trace_distance(rho, vac) == pytest.approx(0.5, abs=1e-12)
        assert s_overlap_fock(rho, vac, 0.3) == pytest.approx(2 ** -0.3, abs=1e-10)
        assert purity_fock(rho) == pytest.approx(1 / 3, abs=1e-12)

    def test_fidelity_is_symmetric(self):
        rho, sigma = build_fock_pair(
            StateRecipe(thermal=[0.4], squeezing=[(0.3, 0.2)]),
            StateRecipe(thermal=[0.2], displacement=[0.5]),
        )
        assert uhlmann_fidelity(rho, sigma) == pytest.approx(uhlmann_fidelity(sigma, rho), abs=1e-10)

    def test_chernoff_fock_of_commuting_states(self):
        rho, sigma = build_fock_pair(StateRecipe(thermal=[1.0]), StateRecipe(thermal=[0.5]))
        expected = chernoff_bound(thermal(1.0), thermal(0.5))
        result = chernoff_fock(rho, sigma)
        assert result.value == pytest.approx(expected.value, abs=1e-8)
        assert result.s_star == pytest.approx(expected.s_star, abs=1e-3)

    def test_accepts_plain_arrays(self):
        rho = np.diag([0.5, 0.5, 0.0, 0.0]).astype(complex)
        sigma = np.diag([1.0, 0.0, 0.0, 0.0]).astype(complex)
        assert uhlmann_fidelity(rho, sigma) == pytest.approx(0.5)
        assert trace_distance(rho, sigma) == pytest.approx(0.5)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            uhlmann_fidelity(np.eye(2) / 2, np.eye(3) / 3)

    def test_not_hermitian(self):
        bad = np.array([[0.5, 0.1], [0.0, 0.5]], dtype=complex)
        with pytest.raises(DataError):
            uhlmann_fidelity(bad, np.eye(2) / 2)

    def test_large_negativity_is_an_error(self):
        bad = np.diag([1.1, -0.1]).astype(complex)
        with pytest.raises(NumericalGuardError):
            s_overlap_fock(bad, np.eye(2) / 2, 0.5)

    def test_small_negativity_is_clipped(self):
        rho = np.diag([1.0 + 1e-11, -1e-11]).astype(complex)
        assert s_overlap_fock(rho, np.eye(2) / 2, 0.5) == pytest.approx(np.sqrt(0.5), abs=1e-9)

    def test_s_domain(self):
        with pytest.raises(DomainError):
            s_overlap_fock(np.eye(2) / 2, np.eye(2) / 2, 1.0)


def _oracle_check(recipe0: StateRecipe, recipe1: StateRecipe) -> None:
    """Gaussian formulas against the Fock matrices, plus the bound chain and Fuchs-van de Graaf."""
    g0, g1 = moments_of(recipe0), moments_of(recipe1)
    rho, sigma = build_fock_pair(recipe0, recipe1)
    pure0, pure1 = is_pure(g0), is_pure(g1)

    for rho_k in (rho, sigma):
        assert np.real(np.trace(rho_k.matrix)) == pytest.approx(1.0, abs=1e-10)

    for s in (0.2, 0.5, 0.8):
        assert s_overlap(g0, g1, s).value == pytest.approx(s_overlap_fock(rho, sigma, s), abs=AGREEMENT)
    assert purity(g0.cov) == pytest.approx(purity_fock(rho), abs=AGREEMENT)

    if pure0 or pure1:
        F = fidelity_mixed_pure(g0, g1)
        assert F == pytest.approx(uhlmann_fidelity(rho, sigma), abs=AGREEMENT)
    else:
        F = uhlmann_fidelity(rho, sigma)

    C = chernoff_bound(g0, g1).value
    B = bhattacharyya(g0, g1)
    assert C <= B + 1e-10
    # F from the matrices carries square-root roundoff when both states are mixed
    assert B <= np.sqrt(F) + (1e-10 if pure0 or pure1 else 1e-8)

    D = trace_distance(rho, sigma)
    assert (1 - D) ** 2 - 1e-8 <= F <= 1 - D ** 2 + 1e-8
    if pure0 or pure1:
        assert 1 - D <= F + 1e-8
    if pure0 and pure1:
        assert abs(F - (1 - D ** 2)) <= 1e-8


class TestOracleEquivalence:
    def test_single_mode_recipes(self, rng):
        for trial in range(50):
            recipe0 = make_recipe(rng, 1, pure=trial % 3 == 0)
            recipe1 = make_recipe(rng, 1, pure=trial % 2 == 0)
            _oracle_check(recipe0, recipe1)

    def test_two_mode_recipes(self, rng):
        for trial in range(20):
            recipe0 = make_recipe(rng, 2, pure=trial % 3 == 0, **TWO_MODE_RANGE)
            recipe1 = make_recipe(rng, 2, pure=trial % 2 == 0, **TWO_MODE_RANGE)
            _oracle_check(recipe0, recipe1)


class TestPreparedPowers:
    def test_power_one_is_the_matrix(self):
        rho = build_fock(StateRecipe(thermal=[0.6], squeezing=[(0.4, 0.9)], displacement=[0.3 + 0.5j]))
        assert np.allclose(rho.preparation.power(1.0), rho.matrix, atol=1e-15)

    def test_thermal_power_is_exact(self):
        rho = build_fock(StateRecipe(thermal=[1.0]))
        diag = np.real(np.diag(rho.preparation.power(0.2)))
        assert np.allclose(diag, 0.5 ** (0.2 * np.arange(1, rho.cutoff + 1)), rtol=1e-13, atol=0.0)

    def test_pure_state_power_is_the_state(self):
        rho = build_fock(StateRecipe(thermal=[0.0], squeezing=[(0.5, 0.2)], displacement=[0.7]))
        assert np.allclose(rho.preparation.power(0.3), rho.matrix, atol=1e-14)

    def test_strong_mixed_pair_at_small_powers(self):
        # large occupations make rho^0.2 weigh levels whose eigenvalues are below roundoff
        recipe0 = StateRecipe(thermal=[1.8], squeezing=[(0.7, 0.4)], displacement=[1.2 + 0.5j])
        recipe1 = StateRecipe(thermal=[1.5], squeezing=[(0.6, 2.0)], displacement=[-0.8j])
        rho, sigma = build_fock_pair(recipe0, recipe1)
        g0, g1 = moments_of(recipe0), moments_of(recipe1)
        for s in (0.2, 0.5, 0.8):
            assert s_overlap_fock(rho, sigma, s) == pytest.approx(s_overlap(g0, g1, s).value, abs=AGREEMENT)

    def test_bare_matrices_keep_the_spectral_path(self):
        rho, vac = build_fock_pair(StateRecipe(thermal=[1.0]), StateRecipe(thermal=[0.0]))
        assert s_overlap_fock(rho.matrix, vac.matrix, 0.3) == pytest.approx(2 ** -0.3, abs=1e-10)


class TestMatrixLimit:
    def test_overlap_approaches_uhlmann_fidelity(self):
        recipe0 = StateRecipe(thermal=[0.8], squeezing=[(0.5, 0.3)], displacement=[0.6])
        recipe1 = StateRecipe(thermal=[0.0], squeezing=[(0.4, 1.1)], displacement=[-0.5 + 0.3j])
        rho, sigma = build_fock_pair(recipe0, recipe1)
        F = uhlmann_fidelity(rho, sigma)
        assert F == pytest.approx(fidelity_mixed_pure(moments_of(recipe0), moments_of(recipe1)), abs=AGREEMENT)

        deviations = [s_overlap_fock(rho, sigma, 1 - 10.0 ** -k) - F for k in range(3, 7)]
        assert all(b < a for a, b in zip(deviations, deviations[1:]))
        for k, deviation in zip(range(3, 7), deviations):
            # |d/ds <psi|rho^s|psi>| <= 1/(e s) for a pure sigma
            assert -1e-10 <= deviation <= 0.5 * 10.0 ** -k


class TestCutoffCalibration:
    def test_one_mode_range_corner(self):
        corner = StateRecipe(thermal=[2.0], squeezing=[(0.8, 0.0)], displacement=[1.5])
        partner = StateRecipe(thermal=[1.0])
        rho, sigma = build_fock_pair(corner, partner)
        assert rho.cutoff == sigma.cutoff == 512
        g0, g1 = moments_of(corner), moments_of(partner)
        for s in (0.2, 0.8):
            assert s_overlap_fock(rho, sigma, s) == pytest.approx(s_overlap(g0, g1, s).value, abs=AGREEMENT)

    def test_two_mode_range_corner(self):
        corner = StateRecipe(
            thermal=[TWO_MODE_RANGE["max_nbar"]] * 2,
            squeezing=[(TWO_MODE_RANGE["max_r"], 0.0), (TWO_MODE_RANGE["max_r"], 1.3)],
            displacement=[TWO_MODE_RANGE["max_alpha"], -TWO_MODE_RANGE["max_alpha"]],
            beam_splitter=np.pi / 4,
        )
        rho = build_fock(corner)
        assert rho.cutoff == 32
        assert rho.top_level_population < 1e-12

    def test_two_mode_cap(self):
        with pytest.raises(TruncationError):
            build_fock(StateRecipe(thermal=[2.0, 0.0]), cutoff=32, settings=get_settings({"cutoff_cap_two_mode": 32}))
