"""
Periodic tensor grid on [0, 2π]^n and the trigonometric Galerkin space.

Fields live in two representations:

* `PhysicalField`: samples on the uniform grid x_j = 2πj/N, row-major
  (axis 0 is x, axis 1 is y).
* `SpectralField`: complex coefficients ĉ_ξ in FFT order with the forward
  transform normalized by 1/N^n, so ĉ_0 is the field mean and
  u(x) = Σ ĉ_ξ e^{iξ·x}. Real fields have ĉ_{−ξ} = conj(ĉ_ξ).

The real orthonormal basis used by the Galerkin construction is reachable
through `to_real_basis` / `from_real_basis`: for ξ on the half lattice

    ĉ_ξ e^{iξx} + ĉ_{−ξ} e^{−iξx} = 2 Re ĉ_ξ cos(ξx) − 2 Im ĉ_ξ sin(ξx),

so with ρ = α cos(ξx), α sin(ξx), α = √2 (2π)^{−n/2}, the real coefficients
are 2 Re ĉ_ξ / α and −2 Im ĉ_ξ / α, and the constant ρ_1 = (2π)^{−n/2}
carries ĉ_0 (2π)^{n/2}. Σ c_j² is then the L² norm squared.

First-derivative multipliers zero the Nyquist mode (iξ at ξ = −N/2 would
break conjugate symmetry); laplacian and bilaplacian are built from the same
multipliers so divergence∘gradient == laplacian holds exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from errors import InvalidParameterError, NonFiniteFieldError, SymmetryError

PERIOD = 2.0 * math.pi
SYMMETRY_TOL = 1e-10


# ---------------- domain ----------------
class DomainSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    dimension: int = 1
    points_per_axis: int = 128
    dealias_fraction: float = 2.0 / 3.0

    @field_validator("dimension")
    @classmethod
    def _check_dimension(cls, v: int) -> int:
        if v not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        return v

    @field_validator("points_per_axis")
    @classmethod
    def _check_points(cls, v: int) -> int:
        if v < 8 or v & (v - 1):
            raise ValueError("points_per_axis must be a power of two and >= 8")
        return v

    @field_validator("dealias_fraction", mode="before")
    @classmethod
    def _parse_fraction(cls, v):
        if isinstance(v, str):
            try:
                v = float(Fraction(v.strip()))
            except (ValueError, ZeroDivisionError) as e:
                raise ValueError(f"not a rational number: {v!r}") from e
        if not (0.0 < float(v) <= 1.0):
            raise ValueError("dealias_fraction must lie in (0, 1]")
        return float(v)

    @property
    def period(self) -> float:
        return PERIOD

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.points_per_axis,) * self.dimension

    @property
    def size(self) -> int:
        return self.points_per_axis ** self.dimension

    @property
    def volume(self) -> float:
        """|Ω| = (2π)^n."""
        return PERIOD ** self.dimension

    @property
    def dx(self) -> float:
        return PERIOD / self.points_per_axis

    @property
    def dealias_cutoff(self) -> int:
        frac = Fraction(self.dealias_fraction).limit_denominator(1000)
        return math.floor(frac * self.points_per_axis / 2)


@lru_cache(maxsize=None)
def _wavevectors(dimension: int, n: int) -> Tuple[np.ndarray, ...]:
    k = np.fft.fftfreq(n, 1.0 / n).round().astype(np.int64)
    grids = np.meshgrid(*([k] * dimension), indexing="ij")
    out = []
    for g in grids:
        g = np.ascontiguousarray(g)
        g.setflags(write=False)
        out.append(g)
    return tuple(out)


@lru_cache(maxsize=None)
def _derivative_wavevectors(dimension: int, n: int) -> Tuple[np.ndarray, ...]:
    out = []
    for g in _wavevectors(dimension, n):
        d = g.astype(float)
        d[g == -(n // 2)] = 0.0
        d.setflags(write=False)
        out.append(d)
    return tuple(out)


@lru_cache(maxsize=None)
def _k2(dimension: int, n: int) -> np.ndarray:
    k2 = sum(d * d for d in _derivative_wavevectors(dimension, n))
    k2 = np.asarray(k2, dtype=float)
    k2.setflags(write=False)
    return k2


def wavevectors(domain: DomainSpec) -> Tuple[np.ndarray, ...]:
    """Integer wavevector components per axis in FFT order (Nyquist as −N/2)."""
    return _wavevectors(domain.dimension, domain.points_per_axis)


def k_squared(domain: DomainSpec) -> np.ndarray:
    return _k2(domain.dimension, domain.points_per_axis)


# ---------------- fields ----------------
@dataclass(frozen=True, eq=False)
class PhysicalField:
    domain: DomainSpec
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float, copy=True)
        if arr.size != self.domain.size:
            raise InvalidParameterError(
                f"expected {self.domain.size} values for {self.domain.shape}, got {arr.size}")
        arr = arr.reshape(self.domain.shape)
        if not np.all(np.isfinite(arr)):
            bad = int(np.count_nonzero(~np.isfinite(arr)))
            raise NonFiniteFieldError(f"{bad} non-finite value(s) in physical field")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True, eq=False)
class SpectralField:
    domain: DomainSpec
    coeffs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.coeffs, dtype=complex, copy=True)
        if arr.shape != self.domain.shape:
            raise InvalidParameterError(
                f"coefficient shape {arr.shape} does not match domain {self.domain.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @property
    def mean(self) -> float:
        return float(self.coeffs[(0,) * self.domain.dimension].real)

    def symmetry_defect(self) -> float:
        """max |ĉ_ξ − conj(ĉ_{−ξ})|; zero for the transform of a real field."""
        return float(np.max(np.abs(self.coeffs - np.conj(_reflect(self.coeffs)))))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.coeffs)))

    def _check(self, other: "SpectralField") -> None:
        if other.domain != self.domain:
            raise InvalidParameterError("fields live on different domains")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.domain, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.domain, self.coeffs - other.coeffs)

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.domain, -self.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.domain, self.coeffs * float(scalar))

    __rmul__ = __mul__


def _reflect(c: np.ndarray) -> np.ndarray:
    # index ξ -> −ξ (mod N) on every axis
    out = c
    for axis in range(c.ndim):
        out = np.roll(np.flip(out, axis=axis), 1, axis=axis)
    return out


def zeros(domain: DomainSpec) -> SpectralField:
    return SpectralField(domain, np.zeros(domain.shape, dtype=complex))


def constant(domain: DomainSpec, value: float) -> SpectralField:
    c = np.zeros(domain.shape, dtype=complex)
    c[(0,) * domain.dimension] = value
    return SpectralField(domain, c)


def grid_points(domain: DomainSpec) -> Tuple[np.ndarray, ...]:
    x = np.arange(domain.points_per_axis) * domain.dx
    return tuple(np.meshgrid(*([x] * domain.dimension), indexing="ij"))


def sample(domain: DomainSpec, func: Callable[..., np.ndarray]) -> PhysicalField:
    """Evaluate `func(x)` (1D) or `func(x, y)` (2D) on the grid."""
    values = func(*grid_points(domain))
    return PhysicalField(domain, np.broadcast_to(values, domain.shape))


# ---------------- transforms ----------------
def forward(f: PhysicalField) -> SpectralField:
    if not np.all(np.isfinite(f.values)):
        raise NonFiniteFieldError("non-finite physical field")
    return SpectralField(f.domain, np.fft.fftn(f.values, norm="forward"))


def inverse(F: SpectralField) -> PhysicalField:
    if not F.is_finite():
        raise NonFiniteFieldError("non-finite spectral coefficients")
    scale = max(1.0, float(np.max(np.abs(F.coeffs))))
    defect = F.symmetry_defect()
    if not defect <= SYMMETRY_TOL * scale:
        raise SymmetryError(f"coefficients are not conjugate-symmetric (defect {defect:.3e})")
    return PhysicalField(F.domain, np.fft.ifftn(F.coeffs, norm="forward").real)


# ---------------- differentiation ----------------
def gradient(F: SpectralField) -> Tuple[SpectralField, ...]:
    d = F.domain
    return tuple(SpectralField(d, 1j * k * F.coeffs)
                 for k in _derivative_wavevectors(d.dimension, d.points_per_axis))


def laplacian(F: SpectralField) -> SpectralField:
    return SpectralField(F.domain, -k_squared(F.domain) * F.coeffs)


def bilaplacian(F: SpectralField) -> SpectralField:
    k2 = k_squared(F.domain)
    return SpectralField(F.domain, k2 * k2 * F.coeffs)


def divergence(V: Sequence[SpectralField]) -> SpectralField:
    if not V:
        raise InvalidParameterError("divergence of an empty vector field")
    d = V[0].domain
    if len(V) != d.dimension:
        raise InvalidParameterError(f"expected {d.dimension} components, got {len(V)}")
    ks = _derivative_wavevectors(d.dimension, d.points_per_axis)
    acc = np.zeros(d.shape, dtype=complex)
    for comp, k in zip(V, ks):
        acc += 1j * k * comp.coeffs
    return SpectralField(d, acc)


# ---------------- projection ----------------
def project(F: SpectralField, cutoff: int) -> SpectralField:
    """Π_N: keep modes with every |ξ_d| <= cutoff."""
    if cutoff < 0:
        raise InvalidParameterError("cutoff must be >= 0")
    mask = np.ones(F.domain.shape, dtype=bool)
    for k in wavevectors(F.domain):
        mask &= np.abs(k) <= cutoff
    return SpectralField(F.domain, np.where(mask, F.coeffs, 0.0))


def dealias(F: SpectralField) -> SpectralField:
    return project(F, F.domain.dealias_cutoff)


def resample(F: SpectralField, domain: DomainSpec) -> SpectralField:
    """Spectral interpolation onto another resolution (modes below both Nyquists)."""
    if domain.dimension != F.domain.dimension:
        raise InvalidParameterError("cannot resample across dimensions")
    n_src = F.domain.points_per_axis
    limit = min(n_src, domain.points_per_axis) // 2
    ks = wavevectors(domain)
    mask = np.ones(domain.shape, dtype=bool)
    for k in ks:
        mask &= np.abs(k) < limit
    out = np.zeros(domain.shape, dtype=complex)
    src_idx = tuple(np.mod(k[mask], n_src) for k in ks)
    out[mask] = F.coeffs[src_idx]
    return SpectralField(domain, out)


# ---------------- norms / quadrature ----------------
def quadrature(f: PhysicalField) -> float:
    """Periodic trapezoid rule: |Ω| × grid mean."""
    return f.domain.volume * float(np.mean(f.values))


def l2_norm(F: SpectralField) -> float:
    return math.sqrt(F.domain.volume * float(np.sum(np.abs(F.coeffs) ** 2)))


# ---------------- real orthonormal basis ----------------
@lru_cache(maxsize=None)
def real_basis_modes(dimension: int, cutoff: int) -> Tuple[Tuple[Tuple[int, ...], str], ...]:
    """ρ_1 = const, then (cos, sin) pairs over the half lattice with |ξ|∞ <= cutoff."""
    modes: list = [((0,) * dimension, "const")]
    rng = range(-cutoff, cutoff + 1)
    if dimension == 1:
        lattice = [(k,) for k in range(1, cutoff + 1)]
    else:
        lattice = [(a, b) for a in rng for b in rng if a > 0 or (a == 0 and b > 0)]
    for xi in sorted(lattice):
        modes.append((xi, "cos"))
        modes.append((xi, "sin"))
    return tuple(modes)


def _basis_norms(dimension: int) -> Tuple[float, float]:
    const = (2.0 * math.pi) ** (-dimension / 2.0)
    return const, math.sqrt(2.0) * const


def _check_basis_cutoff(domain: DomainSpec, cutoff: int) -> None:
    if cutoff < 0 or 2 * cutoff >= domain.points_per_axis:
        raise InvalidParameterError(
            f"basis cutoff {cutoff} must satisfy 0 <= cutoff < N/2 = {domain.points_per_axis // 2}")


def to_real_basis(F: SpectralField, cutoff: int) -> np.ndarray:
    """Coefficients c_j of Π_cutoff u in the real orthonormal basis."""
    d = F.domain
    _check_basis_cutoff(d, cutoff)
    const, alpha = _basis_norms(d.dimension)
    n = d.points_per_axis
    out = []
    for xi, kind in real_basis_modes(d.dimension, cutoff):
        c = F.coeffs[tuple(k % n for k in xi)]
        if kind == "const":
            out.append(c.real / const)
        elif kind == "cos":
            out.append(2.0 * c.real / alpha)
        else:
            out.append(-2.0 * c.imag / alpha)
    return np.asarray(out, dtype=float)


def from_real_basis(c: Sequence[float], domain: DomainSpec, cutoff: int) -> SpectralField:
    _check_basis_cutoff(domain, cutoff)
    modes = real_basis_modes(domain.dimension, cutoff)
    c = np.asarray(c, dtype=float)
    if c.shape != (len(modes),):
        raise InvalidParameterError(f"expected {len(modes)} real coefficients, got {c.shape}")
    const, alpha = _basis_norms(domain.dimension)
    n = domain.points_per_axis
    out = np.zeros(domain.shape, dtype=complex)
    zero = (0,) * domain.dimension
    out[zero] = c[0] * const
    for j in range(1, len(modes), 2):
        xi, _ = modes[j]
        z = alpha * (c[j] - 1j * c[j + 1]) / 2.0
        out[tuple(k % n for k in xi)] = z
        out[tuple(-k % n for k in xi)] = np.conj(z)
    return SpectralField(domain, out)
