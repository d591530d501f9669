import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError

from errors import NonFiniteFieldError, SymmetryError
from spectral import (
    DomainSpec,
    PhysicalField,
    SpectralField,
    bilaplacian,
    constant,
    dealias,
    divergence,
    forward,
    from_real_basis,
    gradient,
    inverse,
    l2_norm,
    laplacian,
    project,
    quadrature,
    real_basis_modes,
    resample,
    sample,
    to_real_basis,
)


@pytest.mark.parametrize("bad", [
    {"dimension": 3},
    {"points_per_axis": 48},
    {"points_per_axis": 4},
    {"dealias_fraction": 0.0},
    {"dealias_fraction": "3/2"},
])
def test_domain_rejects(bad):
    with pytest.raises(ValidationError):
        DomainSpec(**bad)


def test_domain_cutoff_and_geometry():
    d = DomainSpec(dimension=2, points_per_axis=128, dealias_fraction="2/3")
    assert d.dealias_cutoff == 42
    assert d.shape == (128, 128)
    assert d.volume == pytest.approx(4 * math.pi ** 2)
    assert DomainSpec(points_per_axis=64, dealias_fraction=1.0).dealias_cutoff == 32


def test_constant_has_only_mean_mode(domain1d):
    F = forward(sample(domain1d, lambda x: np.full_like(x, 0.7)))
    assert F.mean == pytest.approx(0.7)
    assert_allclose(np.abs(F.coeffs[1:]), 0.0, atol=1e-15)


@pytest.mark.parametrize("dim", [1, 2])
def test_transform_roundtrip(dim):
    d = DomainSpec(dimension=dim, points_per_axis=32)
    rng = np.random.default_rng(3)
    f = PhysicalField(d, rng.standard_normal(d.shape))
    assert_allclose(inverse(forward(f)).values, f.values, atol=1e-13)


def test_derivatives_of_trig(domain1d):
    u = forward(sample(domain1d, np.sin))
    (du,) = gradient(u)
    assert_allclose(inverse(du).values, sample(domain1d, np.cos).values, atol=1e-12)
    # band-limit first: FFT roundoff in high modes is amplified by |ξ|⁴
    v = project(forward(sample(domain1d, lambda x: np.cos(2 * x))), 2)
    assert_allclose(laplacian(v).coeffs, -4 * v.coeffs, atol=1e-14)
    assert_allclose(bilaplacian(v).coeffs, 16 * v.coeffs, atol=1e-13)


def test_mixed_partial_2d(domain2d):
    u = forward(sample(domain2d, lambda x, y: np.sin(x) * np.cos(3 * y)))
    gx, gy = gradient(u)
    expect_x = sample(domain2d, lambda x, y: np.cos(x) * np.cos(3 * y)).values
    expect_y = sample(domain2d, lambda x, y: -3 * np.sin(x) * np.sin(3 * y)).values
    assert_allclose(inverse(gx).values, expect_x, atol=1e-12)
    assert_allclose(inverse(gy).values, expect_y, atol=1e-12)


@pytest.mark.parametrize("dim", [1, 2])
def test_divergence_of_gradient_is_laplacian(dim):
    d = DomainSpec(dimension=dim, points_per_axis=16)
    rng = np.random.default_rng(11)
    u = forward(PhysicalField(d, rng.standard_normal(d.shape)))
    assert_allclose(divergence(gradient(u)).coeffs, laplacian(u).coeffs, rtol=1e-14, atol=1e-15)


def test_nyquist_mode_has_no_derivative():
    d = DomainSpec(points_per_axis=16)
    u = forward(sample(d, lambda x: np.cos(8 * x)))
    (du,) = gradient(u)
    assert_allclose(du.coeffs, 0.0, atol=1e-14)
    assert_allclose(laplacian(u).coeffs, 0.0, atol=1e-13)


def test_inverse_rejects_asymmetric_and_nonfinite(domain1d):
    c = np.zeros(domain1d.shape, dtype=complex)
    c[3] = 1.0
    with pytest.raises(SymmetryError):
        inverse(SpectralField(domain1d, c))
    c[3] = np.nan
    with pytest.raises(NonFiniteFieldError):
        inverse(SpectralField(domain1d, c))
    with pytest.raises(NonFiniteFieldError):
        PhysicalField(domain1d, np.full(domain1d.shape, np.inf))


def test_project_drops_high_modes(domain1d):
    u = forward(sample(domain1d, lambda x: np.cos(x) + np.cos(3 * x)))
    p = project(u, 2)
    assert_allclose(inverse(p).values, sample(domain1d, np.cos).values, atol=1e-13)
    assert np.all(project(constant(domain1d, 2.0), 0).coeffs == constant(domain1d, 2.0).coeffs)


def test_resample_up_and_down(domain1d):
    fine = DomainSpec(points_per_axis=256)
    u = forward(sample(domain1d, lambda x: 0.3 + np.sin(2 * x) - 0.2 * np.cos(5 * x)))
    up = resample(u, fine)
    assert_allclose(inverse(up).values,
                    sample(fine, lambda x: 0.3 + np.sin(2 * x) - 0.2 * np.cos(5 * x)).values,
                    atol=1e-13)
    assert_allclose(resample(up, domain1d).coeffs, u.coeffs, atol=1e-15)


def test_l2_norm_and_quadrature(domain1d):
    u = forward(sample(domain1d, np.sin))
    assert l2_norm(u) == pytest.approx(math.sqrt(math.pi), rel=1e-13)
    assert quadrature(sample(domain1d, lambda x: np.sin(x) ** 2)) == pytest.approx(math.pi, rel=1e-13)


@pytest.mark.parametrize("dim,cutoff,count", [(1, 4, 9), (2, 2, 25), (2, 8, 289)])
def test_real_basis_size(dim, cutoff, count):
    modes = real_basis_modes(dim, cutoff)
    assert len(modes) == count
    assert modes[0][1] == "const"


@pytest.mark.parametrize("dim", [1, 2])
def test_real_basis_is_orthonormal_coordinates(dim):
    d = DomainSpec(dimension=dim, points_per_axis=32)
    cutoff = 5
    rng = np.random.default_rng(5)
    c = rng.standard_normal(len(real_basis_modes(dim, cutoff)))
    U = from_real_basis(c, d, cutoff)
    assert U.symmetry_defect() == 0.0
    assert_allclose(to_real_basis(U, cutoff), c, atol=1e-14)
    # Parseval: Σ c_j² = ‖u‖²
    assert l2_norm(U) ** 2 == pytest.approx(float(np.sum(c * c)), rel=1e-12)


def test_real_basis_of_sine():
    d = DomainSpec(points_per_axis=16)
    c = to_real_basis(forward(sample(d, np.sin)), 3)
    expect = np.zeros(7)
    expect[2] = math.sqrt(math.pi)  # sin x = √π · (sin x / √π)
    assert_allclose(c, expect, atol=1e-14)


def test_forward_of_cosine_has_two_modes():
    d = DomainSpec(points_per_axis=16)
    c = forward(sample(d, np.cos)).coeffs
    assert c[1] == pytest.approx(0.5) and c[15] == pytest.approx(0.5)
    others = np.delete(c, [1, 15])
    assert np.max(np.abs(others)) < 1e-13


def test_project_idempotent_and_cutoff_zero(domain1d):
    rng = np.random.default_rng(8)
    f = PhysicalField(domain1d, rng.standard_normal(domain1d.shape))
    F = forward(f)
    once = project(F, 7)
    assert np.array_equal(project(once, 7).coeffs, once.coeffs)
    mean_only = project(F, 0)
    assert mean_only.mean == pytest.approx(float(np.mean(f.values)))
    assert np.count_nonzero(mean_only.coeffs) == 1


def test_dealias_removes_aliased_square():
    # cos(10x)² = ½ + ½cos(20x); on 32 points the 20-mode folds onto 12
    d = DomainSpec(points_per_axis=32)
    sq = forward(sample(d, lambda x: np.cos(10 * x) ** 2))
    assert abs(sq.coeffs[12]) == pytest.approx(0.25)
    assert_allclose(dealias(sq).coeffs, constant(d, 0.5).coeffs, atol=1e-15)
