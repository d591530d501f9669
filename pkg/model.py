"""
Continuous model: ∂t u = ∇·(M(u)∇μ) + β·∇ψ(u),  μ = −γΔu + φ(u).

    M(u)   = |u|^{2m}                      degenerate mobility
    M_θ(u) = |u|^{2m} if |u|² > θ else θ^m  regularized mobility, >= θ^m
    φ(u)   = Σ_{i=1}^{2k+1} a_i u^i        a_{2k+1} > 0
    ψ(u)   = Σ_{i=0}^{k} b_i u^{i+m}       same k as φ

Scalar operations accept floats or numpy arrays and evaluate pointwise.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationInfo, field_validator

from errors import BlowUpError, InvalidParameterError, NonFiniteFieldError, PsiDomainError
from spectral import (
    PhysicalField,
    SpectralField,
    dealias,
    divergence,
    forward,
    gradient,
    inverse,
    laplacian,
)

log = logging.getLogger("model")

ArrayLike = Union[float, np.ndarray]

COMPENSATED_THRESHOLD = 10.0


class ModelParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    gamma: float = Field(0.05, gt=0)
    m: float = Field(1.0, gt=0)
    beta: Tuple[float, ...] = (0.0,)
    phi_coeffs: Tuple[float, ...] = (-1.0, 0.0, 1.0)
    psi_coeffs: Tuple[float, ...] = (0.0, 0.5)
    theta: float = Field(1e-2, ge=0)
    signed_power: bool = False

    @field_validator("beta")
    @classmethod
    def _check_beta(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if not v:
            raise ValueError("beta needs one component per dimension")
        return v

    @field_validator("phi_coeffs")
    @classmethod
    def _check_phi(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if len(v) < 3 or len(v) % 2 == 0:
            raise ValueError("phi_coeffs must list a_1..a_{2k+1} with k >= 1 (odd length >= 3)")
        if not v[-1] > 0:
            raise ValueError("leading coefficient a_{2k+1} must be > 0")
        return v

    @field_validator("psi_coeffs")
    @classmethod
    def _check_psi(cls, v: Tuple[float, ...], info: ValidationInfo) -> Tuple[float, ...]:
        phi_coeffs = info.data.get("phi_coeffs")
        if phi_coeffs is None:
            return v
        k = (len(phi_coeffs) - 1) // 2
        if len(v) != k + 1:
            raise ValueError(f"psi_coeffs must list b_0..b_k with k = {k} (length {k + 1})")
        return v

    @property
    def k(self) -> int:
        return (len(self.phi_coeffs) - 1) // 2

    @property
    def beta_norm2(self) -> float:
        return float(sum(b * b for b in self.beta))

    @property
    def integer_m(self) -> bool:
        return float(self.m).is_integer()

    def check_dimension(self, dimension: int) -> None:
        if len(self.beta) != dimension:
            raise InvalidParameterError(
                f"beta has {len(self.beta)} components for a {dimension}D domain")


# ---------------- polynomial evaluation ----------------
def _as_array(u: ArrayLike) -> np.ndarray:
    return np.asarray(u, dtype=float)


def _out(a: np.ndarray) -> ArrayLike:
    return float(a) if a.ndim == 0 else a


def _horner(coeffs: Sequence[float], x: np.ndarray) -> np.ndarray:
    acc = np.full_like(x, coeffs[-1], dtype=float)
    for a in coeffs[-2::-1]:
        acc = acc * x + a
    return acc


def _two_sum(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    s = a + b
    z = s - a
    return s, (a - (s - z)) + (b - z)


def _split(a: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    c = 134217729.0 * a  # 2**27 + 1
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, al * bl - (((p - ah * bh) - al * bh) - ah * bl)


def compensated_horner(coeffs: Sequence[float], x: np.ndarray) -> np.ndarray:
    """Horner with error-free transformations; about twice working precision."""
    s = np.full_like(x, coeffs[-1], dtype=float)
    c = np.zeros_like(s)
    for a in coeffs[-2::-1]:
        p, pi = _two_prod(s, x)
        s, sigma = _two_sum(p, np.full_like(p, a))
        c = c * x + (pi + sigma)
    return s + c


def polyval(coeffs: Sequence[float], u: ArrayLike) -> ArrayLike:
    """Σ coeffs[i] u^i (ascending); compensated once |u|max exceeds 10."""
    x = _as_array(u)
    with np.errstate(over="ignore", invalid="ignore"):
        if x.size and float(np.max(np.abs(x))) > COMPENSATED_THRESHOLD:
            return _out(compensated_horner(coeffs, x))
        return _out(_horner(coeffs, x))


def _phi_asc(params: ModelParams) -> Tuple[float, ...]:
    return (0.0, *params.phi_coeffs)


def _derivative(coeffs: Sequence[float]) -> Tuple[float, ...]:
    return tuple(i * a for i, a in enumerate(coeffs))[1:] or (0.0,)


def _antiderivative(coeffs: Sequence[float]) -> Tuple[float, ...]:
    return (0.0, *(a / (i + 1) for i, a in enumerate(coeffs)))


# ---------------- mobility ----------------
def mobility(u: ArrayLike, params: ModelParams) -> ArrayLike:
    x = _as_array(u)
    return _out(np.abs(x) ** (2.0 * params.m))


def mobility_reg(u: ArrayLike, params: ModelParams) -> ArrayLike:
    if not params.theta > 0:
        raise InvalidParameterError("mobility_reg needs theta > 0; use mobility for theta = 0")
    x = _as_array(u)
    floor = params.theta ** params.m
    return _out(np.where(x * x > params.theta, np.abs(x) ** (2.0 * params.m), floor))


def effective_mobility(u: ArrayLike, params: ModelParams) -> ArrayLike:
    """M_θ for regularized runs, the raw degenerate M when theta == 0."""
    if params.theta > 0:
        return mobility_reg(u, params)
    return mobility(u, params)


def mobility_prime(u: ArrayLike, params: ModelParams) -> ArrayLike:
    """d/du of `effective_mobility`; zero on the floor branch of M_θ."""
    x = _as_array(u)
    m = params.m
    with np.errstate(divide="ignore", invalid="ignore"):
        d = 2.0 * m * np.sign(x) * np.abs(x) ** (2.0 * m - 1.0)
        if m > 0.5:
            d = np.where(x == 0, 0.0, d)
    if params.theta > 0:
        d = np.where(x * x > params.theta, d, 0.0)
    return _out(d)


# ---------------- nonlinearities ----------------
def phi(u: ArrayLike, params: ModelParams) -> ArrayLike:
    return polyval(_phi_asc(params), u)


def phi_prime(u: ArrayLike, params: ModelParams) -> ArrayLike:
    return polyval(_derivative(_phi_asc(params)), u)


def phi_second(u: ArrayLike, params: ModelParams) -> ArrayLike:
    return polyval(_derivative(_derivative(_phi_asc(params))), u)


def Phi(u: ArrayLike, params: ModelParams) -> ArrayLike:
    return polyval(_antiderivative(_phi_asc(params)), u)


def _psi_base(x: np.ndarray, params: ModelParams) -> np.ndarray:
    m = params.m
    if params.integer_m:
        return x ** int(m)
    if params.signed_power:
        return np.abs(x) ** m
    if np.any(x < 0):
        raise PsiDomainError(
            f"psi with non-integer m={m} is undefined for u < 0 (enable signed_power)")
    return x ** m


def psi(u: ArrayLike, params: ModelParams) -> ArrayLike:
    # signed power: Σ b_i sign(u)^i |u|^{i+m} = |u|^m Σ b_i u^i
    x = _as_array(u)
    with np.errstate(over="ignore", invalid="ignore"):
        return _out(_psi_base(x, params) * _as_array(polyval(params.psi_coeffs, x)))


def psi_prime(u: ArrayLike, params: ModelParams) -> ArrayLike:
    """dψ/du; for non-integer m < 1 this is infinite at u = 0."""
    x = _as_array(u)
    m = params.m
    poly = _as_array(polyval(params.psi_coeffs, x))
    dpoly = _as_array(polyval(_derivative(params.psi_coeffs), x))
    base = _psi_base(x, params)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if params.integer_m:
            dbase = m * x ** (int(m) - 1)
        elif params.signed_power:
            dbase = m * np.sign(x) * np.abs(x) ** (m - 1.0)
        else:
            dbase = m * x ** (m - 1.0)
        if m > 1:
            dbase = np.where(x == 0, 0.0, dbase)
        return _out(dbase * poly + base * dpoly)


@dataclass(frozen=True)
class EnergySpec:
    """Bulk free-energy density Φ(u) = ∫_0^u φ(s) ds."""

    params: ModelParams

    def density(self, u: ArrayLike) -> ArrayLike:
        return Phi(u, self.params)

    def antiderivative_error(self, points: Sequence[float], step: float = 1e-6) -> float:
        """Worst relative error of the central difference of Φ against φ."""
        worst = 0.0
        for p in points:
            fd = (float(Phi(p + step, self.params)) - float(Phi(p - step, self.params))) / (2 * step)
            exact = float(phi(p, self.params))
            worst = max(worst, abs(fd - exact) / max(1.0, abs(exact)))
        return worst


# ---------------- spectral assembly ----------------
def _physical(F: SpectralField, values: np.ndarray) -> PhysicalField:
    try:
        return PhysicalField(F.domain, values)
    except NonFiniteFieldError as e:
        raise BlowUpError(f"non-finite nonlinear term: {e}") from e


def chemical_potential(u: SpectralField, params: ModelParams) -> SpectralField:
    up = inverse(u).values
    nl = forward(_physical(u, phi(up, params)))
    return dealias(nl + (-params.gamma) * laplacian(u))


def convective_term(u: SpectralField, params: ModelParams) -> SpectralField:
    """β·∇ψ(u), ψ formed pointwise and dealiased."""
    up = inverse(u).values
    psi_hat = dealias(forward(_physical(u, psi(up, params))))
    acc = np.zeros(u.domain.shape, dtype=complex)
    for b, g in zip(params.beta, gradient(psi_hat)):
        if b:
            acc += b * g.coeffs
    return SpectralField(u.domain, acc)


def rhs(u: SpectralField, params: ModelParams) -> SpectralField:
    d = u.domain
    params.check_dimension(d.dimension)
    up = inverse(u).values
    mu = chemical_potential(u, params)
    with np.errstate(over="ignore", invalid="ignore"):
        mob = np.asarray(effective_mobility(up, params))
        flux = tuple(dealias(forward(_physical(u, mob * inverse(g).values)))
                     for g in gradient(mu))
    out = divergence(flux)
    if any(params.beta):
        out = out + convective_term(u, params)
    c = np.array(out.coeffs)
    c[(0,) * d.dimension] = 0.0
    if not np.all(np.isfinite(c)):
        raise BlowUpError("non-finite right-hand side")
    return SpectralField(d, c)


def max_mobility(u: SpectralField, params: ModelParams) -> float:
    return float(np.max(effective_mobility(inverse(u).values, params)))


def regularization_gap(params: ModelParams) -> float:
    """sup_u |M_θ(u) − M(u)| = θ^m, attained at u = 0."""
    return math.pow(params.theta, params.m)
