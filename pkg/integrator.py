"""
Time integration of the Galerkin system in coefficient space.

Stabilized IMEX: the stiff part is replaced by the constant-coefficient
hyperdiffusion −γA Δ², treated implicitly (diagonal per mode), and
everything else, including the compensating +γA Δ² u, explicitly:

    IMEX_BE    u⁺ = u + h·r(u) / (1 + hγA|ξ|⁴)
    IMEX_BDF2  variable-step SBDF2 with ratio ω = h / h_prev,
               bootstrapped by one IMEX_BE step

A is picked every step as max(stabilization, max_x M_θ(u)). Written in
increment form both schemes leave constant states and the mean mode
untouched bit-for-bit.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationInfo, field_validator

from errors import BlowUpError, InvalidParameterError, NonFiniteFieldError
from model import (
    ModelParams,
    effective_mobility,
    max_mobility,
    phi,
    phi_prime,
    psi,
    psi_prime,
    rhs,
)
from spectral import (
    PhysicalField,
    SpectralField,
    dealias,
    forward,
    inverse,
    k_squared,
    l2_norm,
    project,
    real_basis_modes,
)

log = logging.getLogger("integrator")

Forcing = Callable[[float], SpectralField]
Callback = Callable[["SolverState"], Any]

MAX_ORACLE_CUTOFF = 8


class Scheme(str, Enum):
    IMEX_BE = "IMEX_BE"
    IMEX_BDF2 = "IMEX_BDF2"


class StepperConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    scheme: Scheme = Scheme.IMEX_BE
    stabilization: float = Field(1.0, gt=0)
    dt_min: float = Field(1e-8, gt=0)
    dt_max: float = Field(1e-1, gt=0)
    dt_init: Optional[float] = Field(None, gt=0)
    safety: float = Field(0.9, gt=0, le=1)
    error_tol: float = Field(1e-6, gt=0)
    adaptive: bool = False
    blowup_threshold: float = Field(1e6, gt=0)

    @field_validator("dt_max")
    @classmethod
    def _check_dt_max(cls, v: float, info: ValidationInfo) -> float:
        dt_min = info.data.get("dt_min")
        if dt_min is not None and dt_min > v:
            raise ValueError(f"dt_max must be >= dt_min ({dt_min})")
        return v

    @field_validator("dt_init")
    @classmethod
    def _check_dt_init(cls, v: Optional[float], info: ValidationInfo) -> Optional[float]:
        lo, hi = info.data.get("dt_min"), info.data.get("dt_max")
        if v is not None and lo is not None and hi is not None and not lo <= v <= hi:
            raise ValueError(f"dt_init must lie in [dt_min, dt_max] = [{lo}, {hi}]")
        return v

    @property
    def order(self) -> int:
        return 2 if self.scheme is Scheme.IMEX_BDF2 else 1


@dataclass(frozen=True, eq=False)
class SolverState:
    t: float
    u: SpectralField
    dt: float
    step_count: int = 0
    # one step of history for IMEX_BDF2
    prev_u: Optional[SpectralField] = None
    prev_rhs: Optional[SpectralField] = None
    prev_dt: Optional[float] = None


@dataclass
class RunResult:
    state: SolverState
    records: List[Any] = field(default_factory=list)
    snapshots: List[Tuple[float, SpectralField]] = field(default_factory=list)
    events: List[str] = field(default_factory=list)


# ---------------- setup ----------------
def initial_state(u0: PhysicalField, cutoff: int, dt: float = 1e-3) -> SolverState:
    """u^N(x, 0) = Π_N u0."""
    return SolverState(t=0.0, u=project(forward(u0), cutoff), dt=dt)


def stabilization_level(u: SpectralField, params: ModelParams, config: StepperConfig) -> float:
    return max(config.stabilization, max_mobility(u, params))


def default_dt(u: SpectralField, params: ModelParams, config: StepperConfig) -> float:
    """config.dt_init, else 0.1·Δx²/(γA), clamped to [dt_min, dt_max]."""
    if config.dt_init is not None:
        return config.dt_init
    a = stabilization_level(u, params, config)
    dt = 0.1 * u.domain.dx ** 2 / (params.gamma * a)
    return min(max(dt, config.dt_min), config.dt_max)


def _check_blowup(state: SolverState, coeffs: np.ndarray) -> None:
    if not np.all(np.isfinite(coeffs)):
        raise BlowUpError(f"non-finite coefficients after step {state.step_count + 1}",
                          snapshot=state)


# ---------------- stepping ----------------
def step(state: SolverState, params: ModelParams, config: StepperConfig,
         forcing: Optional[Forcing] = None, dt: Optional[float] = None) -> SolverState:
    h = state.dt if dt is None else dt
    if not h > 0:
        raise InvalidParameterError(f"step size must be positive, got {h}")
    u = state.u
    k2 = k_squared(u.domain)
    try:
        s = params.gamma * stabilization_level(u, params, config) * k2 * k2
        r = rhs(u, params)
        if forcing is not None:
            r = r + forcing(state.t)
    except (BlowUpError, NonFiniteFieldError) as e:
        raise BlowUpError(str(e), snapshot=state) from e

    if config.scheme is Scheme.IMEX_BE or state.prev_u is None:
        delta = h * r.coeffs / (1.0 + h * s)
    else:
        w = h / state.prev_dt
        a0 = (1.0 + 2.0 * w) / (1.0 + w)
        a2 = w * w / (1.0 + w)
        assert state.prev_rhs is not None
        diff = u.coeffs - state.prev_u.coeffs
        explicit = (1.0 + w) * r.coeffs - w * state.prev_rhs.coeffs
        delta = ((a2 + h * s * w) * diff + h * explicit) / (a0 + h * s)

    new = u.coeffs + delta
    _check_blowup(state, new)
    u_new = dealias(SpectralField(u.domain, new))
    try:
        peak = inverse(u_new).max_abs()
    except NonFiniteFieldError as e:
        raise BlowUpError(str(e), snapshot=state) from e
    if peak > config.blowup_threshold:
        raise BlowUpError(f"|u|max = {peak:.3e} exceeds {config.blowup_threshold:.1e}",
                          snapshot=state)
    return SolverState(t=state.t + h, u=u_new, dt=state.dt, step_count=state.step_count + 1,
                       prev_u=u, prev_rhs=r, prev_dt=h)


def adapt_dt(state: SolverState, error_estimate: float, config: StepperConfig,
             events: Optional[List[str]] = None) -> float:
    if not math.isfinite(error_estimate):
        msg = f"t={state.t:.6g}: non-finite error estimate, dt -> dt_min"
        log.warning(msg)
        if events is not None:
            events.append(msg)
        return config.dt_min
    if error_estimate <= 0.0:
        return config.dt_max
    factor = (config.error_tol / error_estimate) ** (1.0 / (config.order + 1))
    dt = config.safety * state.dt * factor
    return min(max(dt, config.dt_min), config.dt_max)


def _doubling_step(state: SolverState, params: ModelParams, config: StepperConfig,
                   forcing: Optional[Forcing], h: float, events: List[str]) -> SolverState:
    """Step doubling: accept two half steps once they agree with one full step."""
    while True:
        big = step(state, params, config, forcing, dt=h)
        half = step(state, params, config, forcing, dt=h / 2)
        small = step(half, params, config, forcing, dt=h / 2)
        err = l2_norm(small.u - big.u) / (1.0 + l2_norm(small.u))
        new_dt = adapt_dt(replace(state, dt=h), err, config, events)
        if err <= config.error_tol or h <= config.dt_min:
            return replace(small, dt=new_dt)
        log.debug("t=%.6g rejected h=%.3e (err %.2e) -> %.3e", state.t, h, err, new_dt)
        h = new_dt


def run(state: SolverState, params: ModelParams, config: StepperConfig, t_end: float,
        callbacks: Sequence[Callback] = (), *, cadence: int = 1,
        snapshot_times: Sequence[float] = (), forcing: Optional[Forcing] = None) -> RunResult:
    """
    Advance to `t_end`, landing exactly on `t_end` and on every snapshot time.
    Callbacks fire at the start, every `cadence` steps and at the end; whatever
    they return (if not None) is collected as the record stream.
    """
    if t_end < state.t:
        raise InvalidParameterError(f"t_end={t_end} lies before t={state.t}")
    result = RunResult(state=state)
    if t_end == state.t:
        return result
    if cadence < 1:
        raise InvalidParameterError("cadence must be >= 1")

    eps = 1e-12 * max(1.0, abs(t_end))
    targets = sorted({float(s) for s in snapshot_times if state.t + eps < s < t_end - eps})
    targets.append(float(t_end))
    snap_set = {float(s) for s in snapshot_times}

    def _notify(st: SolverState) -> None:
        for cb in callbacks:
            rec = cb(st)
            if rec is not None:
                result.records.append(rec)

    if any(abs(s - state.t) <= eps for s in snap_set):
        result.snapshots.append((state.t, state.u))
    _notify(state)
    log.info("run: t=%.6g -> %.6g scheme=%s dt=%.3e", state.t, t_end, config.scheme.value, state.dt)

    try:
        for target in targets:
            while target - state.t > eps:
                remaining = target - state.t
                h = min(state.dt, remaining)
                if remaining - h <= eps:
                    h = remaining
                elif remaining < 1.25 * h:
                    # split instead of leaving a sliver; keeps the BDF2 step ratio bounded
                    h = remaining / 2
                if config.adaptive:
                    nxt = _doubling_step(state, params, config, forcing, h, result.events)
                else:
                    nxt = step(state, params, config, forcing, dt=h)
                if target - nxt.t <= eps:
                    nxt = replace(nxt, t=target)
                state = nxt
                result.state = state
                at_end = state.t == t_end
                if at_end or state.step_count % cadence == 0:
                    _notify(state)
                if state.step_count % 500 == 0:
                    log.debug("step %d t=%.6g", state.step_count, state.t)
            if target in snap_set or any(abs(s - target) <= eps for s in snap_set):
                result.snapshots.append((state.t, state.u))
    except BlowUpError as e:
        log.error("blow-up at t=%.6g after %d steps: %s", state.t, state.step_count, e)
        e.partial = result
        if e.snapshot is None:
            e.snapshot = state
        raise
    log.info("run done: t=%.6g steps=%d", state.t, state.step_count)
    return result


# ---------------- dense-quadrature Galerkin oracle ----------------
@lru_cache(maxsize=4)
def _oracle_basis(dimension: int, cutoff: int) -> Tuple[np.ndarray, Tuple[np.ndarray, ...], float]:
    modes = real_basis_modes(dimension, cutoff)
    q = 8 * (2 * cutoff + 1)
    x = 2.0 * math.pi * np.arange(q) / q
    pts = [g.ravel() for g in np.meshgrid(*([x] * dimension), indexing="ij")]
    const = (2.0 * math.pi) ** (-dimension / 2.0)
    alpha = math.sqrt(2.0) * const
    cols = []
    for xi, kind in modes:
        if kind == "const":
            cols.append(np.full(pts[0].shape, const))
            continue
        phase = sum(k * p for k, p in zip(xi, pts))
        cols.append(alpha * (np.cos(phase) if kind == "cos" else np.sin(phase)))
    basis = np.stack(cols, axis=1)
    derivs = []
    for d in range(dimension):
        D = np.zeros((len(modes), len(modes)))
        for j in range(1, len(modes), 2):
            xi_d = modes[j][0][d]
            D[j, j + 1] = xi_d
            D[j + 1, j] = -xi_d
        derivs.append(D)
    weight = (2.0 * math.pi) ** dimension / q ** dimension
    return basis, tuple(derivs), weight


def galerkin_oracle_rhs(c: Sequence[float], params: ModelParams, n_small: int, *,
                        form: str = "weak") -> np.ndarray:
    """
    dc_j/dt of the Galerkin system in the real orthonormal basis, by dense
    quadrature on an oversampled grid (8× the modes per axis).

    form="strong": −∫M_θ∇μ^N·∇ρ_j + β·∫∇ψ(u^N) ρ_j with μ^N = Π_N μ
    form="weak":    ∫M_θ(γ∇Δu^N − ∇φ(u^N))·∇ρ_j − β·∫ψ(u^N)∇ρ_j
    """
    if not 0 <= n_small <= MAX_ORACLE_CUTOFF:
        raise InvalidParameterError(
            f"oracle cutoff {n_small} outside 0..{MAX_ORACLE_CUTOFF} (test-scale only)")
    if form not in ("weak", "strong"):
        raise InvalidParameterError(f"unknown oracle form {form!r}")
    if form == "strong" and params.m < 1:
        raise InvalidParameterError(
            f"strong oracle form needs m >= 1: psi' is unbounded at u = 0 for m = {params.m}")
    dim = len(params.beta)
    B, D, w = _oracle_basis(dim, n_small)
    c = np.asarray(c, dtype=float)
    if c.shape != (B.shape[1],):
        raise InvalidParameterError(f"expected {B.shape[1]} coefficients, got {c.shape}")

    def proj(f: np.ndarray) -> np.ndarray:
        return B.T @ f * w

    u = B @ c
    grad_u = [B @ (Dd @ c) for Dd in D]
    mob = np.asarray(effective_mobility(u, params))
    out = np.zeros_like(c)
    if form == "weak":
        lap_c = sum(Dd @ (Dd @ c) for Dd in D)
        dphi = np.asarray(phi_prime(u, params))
        for Dd, gu in zip(D, grad_u):
            flux = mob * (params.gamma * (B @ (Dd @ lap_c)) - dphi * gu)
            out -= Dd @ proj(flux)
        psi_p = proj(np.asarray(psi(u, params)))
        for b, Dd in zip(params.beta, D):
            out += b * (Dd @ psi_p)
    else:
        mu_c = proj(np.asarray(phi(u, params)))
        mu_c = mu_c - params.gamma * sum(Dd @ (Dd @ c) for Dd in D)
        for Dd in D:
            out += Dd @ proj(mob * (B @ (Dd @ mu_c)))
        dpsi = np.asarray(psi_prime(u, params))
        for b, gu in zip(params.beta, grad_u):
            out += b * proj(dpsi * gu)
    return out
