import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import random_real_coeffs
from errors import InvalidParameterError
from integrator import galerkin_oracle_rhs
from model import ModelParams, rhs
from spectral import DomainSpec, from_real_basis, real_basis_modes, to_real_basis


def _pseudo_spectral(c, params, n_small, points):
    d = DomainSpec(dimension=len(params.beta), points_per_axis=points)
    return to_real_basis(rhs(from_real_basis(c, d, n_small), params), n_small)


def test_constant_state_has_zero_rhs(double_well):
    c = np.zeros(len(real_basis_modes(1, 4)))
    c[0] = 0.7
    assert_allclose(galerkin_oracle_rhs(c, double_well, 4), 0.0, atol=1e-12)
    assert_allclose(galerkin_oracle_rhs(c, double_well, 4, form="strong"), 0.0, atol=1e-12)


def test_linear_case_is_diagonal(unchecked):
    # φ(u) = 2u, M_θ ≡ 1 while |u| < 1: dc_j/dt = −|ξ_j|²(γ|ξ_j|² + 2) c_j
    p = unchecked(gamma=0.1, phi_coeffs=(2.0, 0.0, 0.0))
    modes = real_basis_modes(1, 5)
    rng = np.random.default_rng(2)
    c = random_real_coeffs(rng, len(modes), 1, mean=0.0, spread=0.5)
    xi2 = np.array([sum(k * k for k in xi) for xi, _ in modes], dtype=float)
    expect = -xi2 * (0.1 * xi2 + 2.0) * c
    for form in ("weak", "strong"):
        assert_allclose(galerkin_oracle_rhs(c, p, 5, form=form), expect, atol=1e-11)


def test_forms_agree_when_phi_is_linear(unchecked):
    p = unchecked(gamma=0.05, m=1.0, theta=1e-2, beta=(0.7,), phi_coeffs=(1.0, 0.0, 0.0),
                  psi_coeffs=(0.2, 0.5))
    rng = np.random.default_rng(9)
    c = random_real_coeffs(rng, len(real_basis_modes(1, 6)), 1, mean=1.2, spread=0.4)
    weak = galerkin_oracle_rhs(c, p, 6, form="weak")
    strong = galerkin_oracle_rhs(c, p, 6, form="strong")
    assert_allclose(strong, weak, atol=1e-10 * max(1.0, float(np.max(np.abs(weak)))))


@pytest.mark.parametrize("seed", range(20))
def test_pseudo_spectral_matches_oracle_1d(double_well, seed):
    n_small = 8
    rng = np.random.default_rng(seed)
    c = random_real_coeffs(rng, len(real_basis_modes(1, n_small)), 1, mean=1.5, spread=0.3)
    ref = galerkin_oracle_rhs(c, double_well, n_small)
    got = _pseudo_spectral(c, double_well, n_small, 128)
    assert np.max(np.abs(got - ref)) <= 1e-8 * max(1.0, float(np.max(np.abs(ref))))


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(20))
def test_pseudo_spectral_matches_oracle_2d(double_well, seed):
    n_small = 8
    p = double_well.model_copy(update={"beta": (1.0, -0.5)})
    rng = np.random.default_rng(100 + seed)
    c = random_real_coeffs(rng, len(real_basis_modes(2, n_small)), 2, mean=1.5, spread=0.3)
    ref = galerkin_oracle_rhs(c, p, n_small)
    got = _pseudo_spectral(c, p, n_small, 128)
    assert np.max(np.abs(got - ref)) <= 1e-8 * max(1.0, float(np.max(np.abs(ref))))


def test_oracle_2d_small(double_well):
    p = double_well.model_copy(update={"beta": (0.3, 0.8)})
    rng = np.random.default_rng(4)
    c = random_real_coeffs(rng, len(real_basis_modes(2, 2)), 2, mean=1.5, spread=0.3)
    ref = galerkin_oracle_rhs(c, p, 2)
    got = _pseudo_spectral(c, p, 2, 64)
    assert np.max(np.abs(got - ref)) <= 1e-9 * max(1.0, float(np.max(np.abs(ref))))


def test_oracle_guards(double_well):
    with pytest.raises(InvalidParameterError):
        galerkin_oracle_rhs(np.zeros(19), double_well, 9)
    with pytest.raises(InvalidParameterError):
        galerkin_oracle_rhs(np.zeros(5), double_well, 2, form="mixed")
    with pytest.raises(InvalidParameterError):
        galerkin_oracle_rhs(np.zeros(4), double_well, 2)


def test_strong_form_needs_m_at_least_one():
    p = ModelParams(m=0.5, signed_power=True)
    c = np.zeros(len(real_basis_modes(1, 2)))
    with pytest.raises(InvalidParameterError):
        galerkin_oracle_rhs(c, p, 2, form="strong")
    assert np.all(np.isfinite(galerkin_oracle_rhs(c, p, 2)))
