"""
Run configuration: a YAML document of flat sections.

    domain:      dimension, points_per_axis, dealias_fraction
    model:       gamma, m, beta, phi_coeffs, psi_coeffs, theta, signed_power
    stepper:     scheme, stabilization, dt_min, dt_max, dt_init, safety,
                 error_tol, adaptive, blowup_threshold
    run:         name, t_end, snapshots, snapshot_times, output_dir
    initial:     kind = constant | mode | random | file (+ kind keys)
    diagnostics: eps_deg, tol_ineq, strict_inequality, source_bound, cadence

Every section and key is optional; unknown keys are errors. See
docs/formats.md for the full grammar.
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from errors import ConfigParseError, ConfigValidationError
from integrator import StepperConfig
from model import ModelParams
from spectral import DomainSpec

log = logging.getLogger("config")

_strict = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)


class RunSection(BaseModel):
    model_config = _strict

    name: str = "run"
    t_end: float = Field(1.0, gt=0)
    snapshots: int = Field(50, ge=0)
    snapshot_times: Optional[Tuple[float, ...]] = None
    output_dir: Optional[str] = None

    def times(self) -> Tuple[float, ...]:
        """Explicit snapshot_times win; otherwise `snapshots` points spread over [0, t_end]."""
        if self.snapshot_times is not None:
            return tuple(sorted(t for t in self.snapshot_times if 0.0 <= t <= self.t_end))
        if self.snapshots == 0:
            return ()
        if self.snapshots == 1:
            return (self.t_end,)
        return tuple(float(t) for t in np.linspace(0.0, self.t_end, self.snapshots))


class ConstantInit(BaseModel):
    model_config = _strict

    kind: Literal["constant"] = "constant"
    value: float = 0.5


class ModeInit(BaseModel):
    """mean + amplitude · cos(ξ·x) (or sin)."""

    model_config = _strict

    kind: Literal["mode"] = "mode"
    amplitude: float = 0.1
    wavevector: Tuple[int, ...] = (1,)
    mean: float = 0.0
    phase: Literal["cos", "sin"] = "cos"


class RandomInit(BaseModel):
    """
    Smooth random field: one PCG64(seed) normal draw per real basis
    function with |ξ|∞ <= cutoff, weighted by (1 + |ξ|²)^(−decay/2), then
    rescaled so the RMS of u − mean equals amplitude. The draw does not
    depend on the grid, so every resolution sees the same u0.
    """

    model_config = _strict

    kind: Literal["random"] = "random"
    seed: int = Field(0, ge=0, lt=2 ** 64)
    decay: float = Field(2.0, ge=0)
    amplitude: float = Field(0.1, ge=0)
    mean: float = 0.0
    cutoff: int = Field(8, ge=1)


class FileInit(BaseModel):
    model_config = _strict

    kind: Literal["file"] = "file"
    path: str


InitialSpec = Annotated[Union[ConstantInit, ModeInit, RandomInit, FileInit],
                        Field(discriminator="kind")]


class DiagnosticsSection(BaseModel):
    model_config = _strict

    eps_deg: float = Field(1e-3, gt=0)
    tol_ineq: Optional[float] = Field(None, gt=0)
    strict_inequality: bool = False
    source_bound: bool = True
    cadence: int = Field(1, ge=1)


class RunConfig(BaseModel):
    model_config = _strict

    domain: DomainSpec = DomainSpec()
    model: ModelParams = ModelParams()
    stepper: StepperConfig = StepperConfig()
    run: RunSection = RunSection()
    initial: InitialSpec = RandomInit()
    diagnostics: DiagnosticsSection = DiagnosticsSection()


# ---------------- validation ----------------
def _dotted(loc: Tuple[Any, ...]) -> str:
    parts = [str(p) for p in loc]
    # drop the union tag pydantic inserts after "initial"
    if len(parts) >= 2 and parts[0] == "initial" and parts[1] in ("constant", "mode", "random", "file"):
        parts.pop(1)
    return ".".join(parts) or "<root>"


def cross_field_issues(cfg: RunConfig) -> List[Tuple[str, str]]:
    issues: List[Tuple[str, str]] = []
    dim = cfg.domain.dimension
    if len(cfg.model.beta) != dim:
        issues.append(("model.beta", f"needs {dim} component(s), got {len(cfg.model.beta)}"))
    if cfg.model.theta == 0 and cfg.diagnostics.source_bound:
        issues.append(("model.theta",
                       "theta = 0 is incompatible with diagnostics.source_bound: true"))
    init = cfg.initial
    if isinstance(init, ModeInit):
        if len(init.wavevector) != dim:
            issues.append(("initial.wavevector", f"needs {dim} component(s)"))
        elif max(abs(k) for k in init.wavevector) > cfg.domain.dealias_cutoff:
            issues.append(("initial.wavevector",
                           f"not resolved by the grid (cutoff {cfg.domain.dealias_cutoff})"))
    if isinstance(init, RandomInit) and init.cutoff > cfg.domain.dealias_cutoff:
        issues.append(("initial.cutoff",
                       f"exceeds the dealiasing cutoff {cfg.domain.dealias_cutoff}"))
    return issues


def validate_config(data: Dict[str, Any]) -> RunConfig:
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigValidationError([(_dotted(err["loc"]), err["msg"]) for err in e.errors()]) from e
    issues = cross_field_issues(cfg)
    if issues:
        raise ConfigValidationError(issues)
    return cfg


def parse_config(text: str) -> RunConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        problem = getattr(e, "problem", None) or str(e)
        raise ConfigParseError(f"malformed config: {problem}", line) from e
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigParseError("config must be a mapping of sections", 1)
    return validate_config(data)


def load_config(path: Union[str, Path]) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigParseError(f"cannot read {p}: {e}") from e
    cfg = parse_config(text)
    log.debug("loaded config %s", p)
    return cfg


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False)
