"""
A priori quantities of the regularized problem, evaluated on Galerkin states.

Every integral is a grid quadrature (periodic trapezoid, spectrally exact for
band-limited integrands); gradient energies use Parseval on the coefficients.
The chemical-potential gradient is formed as −γ∇Δu + φ'(u)∇u; only its square
enters the dissipation, so the overall sign convention does not matter.
"""
from __future__ import annotations

import logging
import math
from dataclasses import astuple, dataclass, fields, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import InvalidParameterError, InvariantViolation
from model import ModelParams, Phi, effective_mobility, mobility_reg, phi, phi_prime, psi
from spectral import PhysicalField, SpectralField, gradient, inverse, k_squared, laplacian, quadrature

log = logging.getLogger("diagnostics")

DEFAULT_EPS_DEG = 1e-3
MASS_DRIFT_TOL = 1e-10
MONOTONE_TOL = 1e-12


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: float
    energy: float
    dissipation: float
    source_bound: float
    ineq_residual: float
    l2: float
    h1: float
    max_abs: float
    min_abs: float
    degeneracy_measure: float

    @classmethod
    def columns(cls) -> Tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def as_row(self) -> Tuple[float, ...]:
        return astuple(self)


# ---------------- conserved / dissipated quantities ----------------
def mass(u: SpectralField) -> float:
    return u.domain.volume * u.mean


def _parseval(u: SpectralField, weight: np.ndarray) -> float:
    return u.domain.volume * float(np.sum(weight * np.abs(u.coeffs) ** 2))


def energy(u: SpectralField, params: ModelParams) -> float:
    """∫ γ/2 |∇u|² + Φ(u)."""
    grad2 = _parseval(u, k_squared(u.domain))
    bulk = quadrature(PhysicalField(u.domain, Phi(inverse(u).values, params)))
    return 0.5 * params.gamma * grad2 + bulk


def grad_mu(u: SpectralField, params: ModelParams) -> Tuple[np.ndarray, ...]:
    up = inverse(u).values
    dphi = np.asarray(phi_prime(up, params))
    out = []
    for g3, g1 in zip(gradient(laplacian(u)), gradient(u)):
        out.append(-params.gamma * inverse(g3).values + dphi * inverse(g1).values)
    return tuple(out)


def dissipation(u: SpectralField, params: ModelParams) -> float:
    """∫ M_θ(u)|∇μ|²."""
    up = inverse(u).values
    mob = np.asarray(effective_mobility(up, params))
    sq = sum(g * g for g in grad_mu(u, params))
    return quadrature(PhysicalField(u.domain, mob * sq))


def source_bound(u: SpectralField, params: ModelParams) -> float:
    """(|β|²/2) ∫ ψ(u)²/M_θ(u)."""
    if not params.theta > 0:
        raise InvalidParameterError("source_bound needs theta > 0 (M_θ >= θ^m in the denominator)")
    if params.beta_norm2 == 0.0:
        return 0.0
    up = inverse(u).values
    ratio = np.asarray(psi(up, params)) ** 2 / np.asarray(mobility_reg(up, params))
    return 0.5 * params.beta_norm2 * quadrature(PhysicalField(u.domain, ratio))


def inequality_tolerance(energy_prev: float, tol_ineq: Optional[float] = None) -> float:
    return 1e-3 * (1.0 + abs(energy_prev)) if tol_ineq is None else tol_ineq


def check_energy_inequality(rec_prev: DiagnosticsRecord, rec_next: DiagnosticsRecord) -> float:
    """(E_next − E_prev)/Δt + ½D_next − S_next; the discrete inequality holds when <= tol."""
    dt = rec_next.t - rec_prev.t
    if not dt > 0:
        raise InvalidParameterError(f"records not ordered in time ({rec_prev.t} -> {rec_next.t})")
    return (rec_next.energy - rec_prev.energy) / dt + 0.5 * rec_next.dissipation - rec_next.source_bound


def gronwall_envelope(records: Sequence[DiagnosticsRecord], C1: float, C3: float,
                      beta: Sequence[float]) -> float:
    """max_t E(t) − e^{C1|β|²t/2}(E(0)+C3); nonpositive when the envelope holds."""
    if not records:
        raise InvalidParameterError("gronwall_envelope needs at least one record")
    b2 = float(sum(b * b for b in beta))
    t0, e0 = records[0].t, records[0].energy
    return max(r.energy - math.exp(0.5 * C1 * b2 * (r.t - t0)) * (e0 + C3) for r in records)


# ---------------- norms ----------------
def norms(u: SpectralField) -> Dict[str, float]:
    """L² norm, H¹ and H³ seminorms (Parseval) and pointwise extremes of |u|."""
    k2 = k_squared(u.domain)
    absu = np.abs(inverse(u).values)
    return {
        "l2": math.sqrt(_parseval(u, np.ones_like(k2))),
        "h1": math.sqrt(_parseval(u, k2)),
        "h3": math.sqrt(_parseval(u, k2 ** 3)),
        "max_abs": float(np.max(absu)),
        "min_abs": float(np.min(absu)),
    }


def degeneracy_measure(u: SpectralField, eps_deg: float = DEFAULT_EPS_DEG) -> float:
    """Fraction of grid nodes with |u| <= eps_deg (proxy for where M(u) degenerates)."""
    if not eps_deg > 0:
        raise InvalidParameterError("eps_deg must be > 0")
    absu = np.abs(inverse(u).values)
    return float(np.count_nonzero(absu <= eps_deg)) / absu.size


def bound_sample(u: SpectralField, params: ModelParams) -> Dict[str, float]:
    up = inverse(u).values
    d = u.domain

    def l2(values: np.ndarray) -> float:
        return math.sqrt(quadrature(PhysicalField(d, values * values)))

    n = norms(u)
    return {
        "phi_l2": l2(np.asarray(phi(up, params))),
        "psi_l2": l2(np.asarray(psi(up, params))),
        "mobility_l1": quadrature(PhysicalField(d, np.asarray(effective_mobility(up, params)))),
        "h1_full": math.hypot(n["l2"], n["h1"]),
    }


# ---------------- records ----------------
def make_record(u: SpectralField, t: float, params: ModelParams, *,
                eps_deg: float = DEFAULT_EPS_DEG, with_source: bool = True,
                prev: Optional[DiagnosticsRecord] = None) -> DiagnosticsRecord:
    if params.beta_norm2 == 0.0:
        src = 0.0
    elif with_source and params.theta > 0:
        src = source_bound(u, params)
    else:
        src = math.nan
    n = norms(u)
    rec = DiagnosticsRecord(
        t=float(t), mass=mass(u), energy=energy(u, params), dissipation=dissipation(u, params),
        source_bound=src, ineq_residual=math.nan, l2=n["l2"], h1=n["h1"],
        max_abs=n["max_abs"], min_abs=n["min_abs"],
        degeneracy_measure=degeneracy_measure(u, eps_deg),
    )
    if prev is not None:
        rec = replace(rec, ineq_residual=check_energy_inequality(prev, rec))
    return rec


def dissipation_budget(records: Sequence[DiagnosticsRecord]) -> Dict[str, float]:
    """
    Time-integrated energy balance by the trapezoid rule:
    margin = ΔE + ½∫D − ∫S, nonpositive when the integrated inequality holds.
    """
    if len(records) < 2:
        return {"total_dissipation": 0.0, "total_source": 0.0, "energy_change": 0.0, "margin": 0.0}
    t = np.array([r.t for r in records])
    h = np.diff(t)
    D = np.array([r.dissipation for r in records])
    S = np.array([r.source_bound for r in records])
    total_d = float(np.sum(0.5 * h * (D[1:] + D[:-1])))
    total_s = float(np.sum(0.5 * h * (S[1:] + S[:-1])))
    de = records[-1].energy - records[0].energy
    return {"total_dissipation": total_d, "total_source": total_s,
            "energy_change": de, "margin": de + 0.5 * total_d - total_s}


def mass_drift_violations(records: Sequence[DiagnosticsRecord],
                          tol: float = MASS_DRIFT_TOL) -> List[str]:
    if not records:
        return []
    m0 = records[0].mass
    bound = tol * (1.0 + abs(m0))
    return [f"mass drift {r.mass - m0:.3e} at t={r.t:.6g}" for r in records
            if abs(r.mass - m0) > bound]


def energy_increase_violations(records: Sequence[DiagnosticsRecord],
                               tol: float = MONOTONE_TOL) -> List[str]:
    out = []
    for a, b in zip(records, records[1:]):
        if b.energy - a.energy > tol * (1.0 + abs(a.energy)):
            out.append(f"energy increased by {b.energy - a.energy:.3e} at t={b.t:.6g}")
    return out


class EnergyMonitor:
    """
    Run callback: one DiagnosticsRecord per invocation, residual taken
    against the previous record. Violations are logged and kept as events;
    in strict mode the first one raises InvariantViolation.
    """

    def __init__(self, params: ModelParams, *, eps_deg: float = DEFAULT_EPS_DEG,
                 tol_ineq: Optional[float] = None, strict: bool = False,
                 with_source: bool = True):
        self.params = params
        self.eps_deg = eps_deg
        self.tol_ineq = tol_ineq
        self.strict = strict
        self.with_source = with_source
        self.prev: Optional[DiagnosticsRecord] = None
        self.violations: List[str] = []
        self.records: List[DiagnosticsRecord] = []

    def __call__(self, state) -> Optional[DiagnosticsRecord]:
        if self.prev is not None and state.t <= self.prev.t:
            return None
        rec = make_record(state.u, state.t, self.params, eps_deg=self.eps_deg,
                          with_source=self.with_source, prev=self.prev)
        self.records.append(rec)
        if self.prev is not None and not math.isnan(rec.ineq_residual):
            tol = inequality_tolerance(self.prev.energy, self.tol_ineq)
            if rec.ineq_residual > tol:
                msg = (f"energy inequality violated at t={rec.t:.6g}: "
                       f"residual {rec.ineq_residual:.3e} > {tol:.3e}")
                self.violations.append(msg)
                log.warning(msg)
                if self.strict:
                    raise InvariantViolation([msg])
        self.prev = rec
        return rec
