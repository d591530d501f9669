"""
Studies built on the run driver: θ-continuation toward the degenerate limit,
N-refinement, manufactured-solution order checks, the empirical Gronwall fit
and manifest-driven sweeps.

Every study goes through `execute_run`, so each solver run leaves the same
directory layout behind (see persist.py). Independent runs of one study are
spread across a multiprocessing pool.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from multiprocessing import Pool
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

import settings
from config import (
    ConstantInit,
    FileInit,
    ModeInit,
    RandomInit,
    RunConfig,
    cross_field_issues,
    load_config,
    validate_config,
)
from diagnostics import (
    DiagnosticsRecord,
    EnergyMonitor,
    bound_sample,
    dissipation_budget,
    gronwall_envelope,
)
from errors import (
    BlowUpError,
    CCHError,
    ConfigParseError,
    ConfigValidationError,
    InvalidParameterError,
    InvariantViolation,
)
from integrator import RunResult, SolverState, default_dt, initial_state, run
from model import (
    ModelParams,
    effective_mobility,
    mobility_prime,
    phi_prime,
    phi_second,
    psi_prime,
    regularization_gap,
    rhs,
)
from persist import (
    DIAGNOSTICS_FILE,
    read_snapshot,
    run_dir_for,
    snapshot_path,
    write_config,
    write_records,
    write_snapshot,
    write_summary,
    write_table,
)
from spectral import (
    DomainSpec,
    PhysicalField,
    SpectralField,
    dealias,
    forward,
    from_real_basis,
    grid_points,
    inverse,
    l2_norm,
    real_basis_modes,
    resample,
    sample,
)
from version import __version__

log = logging.getLogger("experiments")

PathLike = Union[str, Path]


# ---------------- initial conditions ----------------
def build_initial(cfg: RunConfig) -> PhysicalField:
    """u0 on the grid of `cfg.domain`; file paths resolve against the working directory."""
    d = cfg.domain
    init = cfg.initial
    if isinstance(init, ConstantInit):
        return sample(d, lambda *x: np.full(d.shape, init.value))
    if isinstance(init, ModeInit):
        trig = np.cos if init.phase == "cos" else np.sin

        def f(*x):
            return init.mean + init.amplitude * trig(sum(k * xi for k, xi in zip(init.wavevector, x)))
        return sample(d, f)
    if isinstance(init, RandomInit):
        return _random_smooth(d, init)
    assert isinstance(init, FileInit)
    path = Path(init.path)
    field_, _t = read_snapshot(path)
    if field_.domain.dimension != d.dimension:
        raise InvalidParameterError(f"{path}: {field_.domain.dimension}D snapshot for a {d.dimension}D run")
    if field_.domain.points_per_axis != d.points_per_axis:
        field_ = inverse(resample(forward(field_), d))
    return field_


def _random_smooth(d: DomainSpec, init: RandomInit) -> PhysicalField:
    rng = np.random.Generator(np.random.PCG64(init.seed))
    modes = real_basis_modes(d.dimension, init.cutoff)
    c = rng.standard_normal(len(modes))
    c[0] = 0.0
    weights = np.array([(1.0 + sum(k * k for k in xi)) ** (-0.5 * init.decay) for xi, _ in modes])
    c *= weights
    rms = math.sqrt(float(np.sum(c * c)) / d.volume)
    if rms > 0:
        c *= init.amplitude / rms
    fluct = inverse(from_real_basis(c, d, init.cutoff)).values
    return PhysicalField(d, init.mean + fluct)


# ---------------- run driver ----------------
@dataclass
class RunOutcome:
    config: RunConfig
    run_dir: Optional[Path]
    status: str  # ok | blow-up | invariant-violation | failed
    records: List[DiagnosticsRecord] = field(default_factory=list)
    snapshots: List[Tuple[float, SpectralField]] = field(default_factory=list)
    events: List[str] = field(default_factory=list)
    final: Optional[SolverState] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def _persist(outcome: RunOutcome) -> None:
    if outcome.run_dir is None:
        return
    rd = outcome.run_dir
    for i, (t, u) in enumerate(outcome.snapshots):
        write_snapshot(snapshot_path(rd, i), inverse(u), t)
    write_records(rd / DIAGNOSTICS_FILE, outcome.records)
    final = outcome.final
    write_summary(rd, {
        "status": outcome.status,
        "version": __version__,
        "name": outcome.config.run.name,
        "t_final": final.t if final is not None else None,
        "step_count": final.step_count if final is not None else 0,
        "records": len(outcome.records),
        "snapshot_times": [t for t, _ in outcome.snapshots],
        "budget": dissipation_budget(outcome.records),
        "events": outcome.events,
        "error": outcome.error,
    })


def execute_run(cfg: RunConfig, run_dir: Optional[PathLike] = None, *,
                strict: Optional[bool] = None, forcing=None) -> RunOutcome:
    """
    Run one configuration end to end. With a `run_dir` the config, snapshots,
    diagnostics and summary are written there, also when the run blows up or
    trips a strict invariant (the error is re-raised after persisting).
    """
    issues = cross_field_issues(cfg)
    if issues:
        raise ConfigValidationError(issues)
    rd = Path(run_dir) if run_dir is not None else None
    if rd is not None:
        write_config(rd, cfg)
    params = cfg.model
    diag = cfg.diagnostics
    strict = diag.strict_inequality if strict is None else strict

    u0 = build_initial(cfg)
    state = initial_state(u0, cfg.domain.dealias_cutoff)
    state = replace(state, dt=default_dt(state.u, params, cfg.stepper))
    monitor = EnergyMonitor(params, eps_deg=diag.eps_deg, tol_ineq=diag.tol_ineq,
                            strict=strict, with_source=diag.source_bound and params.theta > 0)
    outcome = RunOutcome(config=cfg, run_dir=rd, status="ok")
    log.info("run %s: N=%d dim=%d theta=%g T=%g dt=%.3e", cfg.run.name, cfg.domain.points_per_axis,
             cfg.domain.dimension, params.theta, cfg.run.t_end, state.dt)
    try:
        result = run(state, params, cfg.stepper, cfg.run.t_end, [monitor],
                     cadence=diag.cadence, snapshot_times=cfg.run.times(), forcing=forcing)
    except BlowUpError as e:
        partial: Optional[RunResult] = e.partial
        outcome.status = "blow-up"
        outcome.error = str(e)
        if partial is not None:
            outcome.snapshots = list(partial.snapshots)
            outcome.events = list(partial.events)
            outcome.final = partial.state
        outcome.records = list(monitor.records)
        outcome.events += monitor.violations
        _persist(outcome)
        raise
    except InvariantViolation as e:
        outcome.status = "invariant-violation"
        outcome.error = str(e)
        outcome.records = list(monitor.records)
        outcome.events = list(monitor.violations)
        _persist(outcome)
        raise
    outcome.records = list(monitor.records)
    outcome.snapshots = list(result.snapshots)
    outcome.events = list(result.events) + monitor.violations
    outcome.final = result.state
    _persist(outcome)
    return outcome


def _run_job(job: Tuple[RunConfig, Optional[str]]) -> RunOutcome:
    """Pool worker: failures come back as an outcome status instead of an exception."""
    cfg, run_dir = job
    try:
        return execute_run(cfg, run_dir)
    except CCHError as e:
        status = {BlowUpError: "blow-up", InvariantViolation: "invariant-violation"}.get(type(e), "failed")
        log.warning("run %s ended with %s: %s", cfg.run.name, status, e)
        return RunOutcome(config=cfg, run_dir=Path(run_dir) if run_dir else None,
                          status=status, error=str(e))


def run_many(configs: Sequence[RunConfig], run_dirs: Sequence[Optional[PathLike]],
             jobs: int = 1) -> List[RunOutcome]:
    work = [(c, str(d) if d is not None else None) for c, d in zip(configs, run_dirs)]
    if jobs > 1 and len(work) > 1:
        with Pool(min(jobs, len(work))) as pool:
            return pool.map(_run_job, work)
    return [_run_job(w) for w in work]


def override_config(cfg: RunConfig, overrides: Dict[str, Any]) -> RunConfig:
    """Merge {section: {key: value}} into `cfg` and re-validate."""
    data = cfg.model_dump(mode="json")
    issues = []
    for section, values in overrides.items():
        if section not in data or not isinstance(values, dict):
            issues.append((str(section), "unknown section or not a mapping"))
            continue
        if section == "initial" and values.get("kind", data["initial"]["kind"]) != data["initial"]["kind"]:
            data["initial"] = dict(values)
        else:
            data[section].update(values)
    if issues:
        raise ConfigValidationError(issues)
    return validate_config(data)


def _space_time_l2(times: Sequence[float], norms_sq: Sequence[float]) -> float:
    t = np.asarray(times, dtype=float)
    v = np.asarray(norms_sq, dtype=float)
    if len(t) < 2:
        return 0.0
    return math.sqrt(float(np.sum(0.5 * np.diff(t) * (v[1:] + v[:-1]))))


def _study_root(root: Optional[PathLike]) -> Path:
    return Path(root) if root is not None else settings.output_root()


# ---------------- θ-continuation ----------------
@dataclass
class ContinuationResult:
    theta_sequence: Tuple[float, ...]
    pairwise_l2: List[float]
    sup_l2: List[float]
    final_fields: List[Optional[Path]]
    degeneracy_traces: List[List[Tuple[float, float]]]
    bounds: List[Dict[str, float]]
    findings: List[str] = field(default_factory=list)
    failures: List[str] = field(default_factory=list)
    statuses: List[str] = field(default_factory=list)


def theta_continuation(base_config: RunConfig, theta_sequence: Sequence[float],
                       snapshot_times: Optional[Sequence[float]] = None, *,
                       root: Optional[PathLike] = None, experiment: str = "continuation",
                       jobs: int = 1) -> ContinuationResult:
    thetas = tuple(float(t) for t in theta_sequence)
    if not thetas or any(not t > 0 for t in thetas):
        raise InvalidParameterError("theta_sequence needs positive values")
    if any(b > a for a, b in zip(thetas, thetas[1:])):
        raise InvalidParameterError("theta_sequence must be decreasing")
    times = tuple(snapshot_times) if snapshot_times is not None else base_config.run.times()
    if len(times) < 2:
        raise InvalidParameterError("continuation needs at least two snapshot times")

    configs, dirs = [], []
    out = _study_root(root) / experiment
    for i, th in enumerate(thetas):
        cfg = override_config(base_config, {
            "model": {"theta": th},
            "run": {"name": f"theta-{i:02d}", "snapshot_times": list(times)},
        })
        configs.append(cfg)
        dirs.append(out / f"theta-{i:02d}")
    outcomes = run_many(configs, dirs, jobs)

    failures = [f"theta={th:g}: {o.status} ({o.error})" for th, o in zip(thetas, outcomes) if not o.ok]
    d, sup = [], []
    for a, b in zip(outcomes, outcomes[1:]):
        if not (a.ok and b.ok) or len(a.snapshots) != len(b.snapshots):
            d.append(math.nan)
            sup.append(math.nan)
            continue
        diffs = [l2_norm(ua - ub) for (_, ua), (_, ub) in zip(a.snapshots, b.snapshots)]
        d.append(_space_time_l2([t for t, _ in a.snapshots], [x * x for x in diffs]))
        sup.append(max(diffs))

    findings = []
    for i in range(len(d) - 1):
        if not d[i + 1] < d[i]:
            msg = f"d_{i + 2} = {d[i + 1]:.3e} not below d_{i + 1} = {d[i]:.3e}"
            findings.append(msg)
            log.warning("continuation: %s", msg)

    bounds = []
    for th, o in zip(thetas, outcomes):
        row: Dict[str, float] = {"theta": th, "gap": regularization_gap(o.config.model)}
        if o.ok and o.records:
            budget = dissipation_budget(o.records)
            samples = [bound_sample(u, o.config.model) for _, u in o.snapshots]
            row.update({
                "sup_h1": max(math.hypot(r.l2, r.h1) for r in o.records),
                "int_dissipation": budget["total_dissipation"],
                "sup_phi_l2": max(s["phi_l2"] for s in samples),
                "sup_psi_l2": max(s["psi_l2"] for s in samples),
                "sup_mobility_l1": max(s["mobility_l1"] for s in samples),
            })
        bounds.append(row)

    result = ContinuationResult(
        theta_sequence=thetas, pairwise_l2=d, sup_l2=sup,
        final_fields=[o.run_dir / "snapshots" if o.run_dir else None for o in outcomes],
        degeneracy_traces=[[(r.t, r.degeneracy_measure) for r in o.records] for o in outcomes],
        bounds=bounds, findings=findings, failures=failures,
        statuses=[o.status for o in outcomes],
    )
    write_table(out / "continuation.csv", ["theta_i", "theta_next", "d", "sup_l2"],
                [(thetas[i], thetas[i + 1], d[i], sup[i]) for i in range(len(d))])
    keys = ["theta", "gap", "sup_h1", "int_dissipation", "sup_phi_l2", "sup_psi_l2", "sup_mobility_l1"]
    write_table(out / "bounds.csv", keys, [[b.get(k, math.nan) for k in keys] for b in bounds])
    (out / "findings.json").write_text(json.dumps({"findings": findings, "failures": failures},
                                                  indent=2), encoding="utf-8")
    log.info("continuation over %d thetas: d=%s", len(thetas), ["%.3e" % x for x in d])
    return result


# ---------------- N-refinement ----------------
@dataclass
class RefinementResult:
    n_list: Tuple[int, ...]
    times: Tuple[float, ...]
    errors: List[Tuple[int, float, float]]  # (N, max over snapshots, at t_end)
    failures: List[str] = field(default_factory=list)
    statuses: List[str] = field(default_factory=list)


def n_refinement(base_config: RunConfig, n_list: Sequence[int], t_end: Optional[float] = None, *,
                 root: Optional[PathLike] = None, experiment: str = "refinement",
                 jobs: int = 1) -> RefinementResult:
    ns = tuple(int(n) for n in n_list)
    if not ns:
        raise InvalidParameterError("n_list is empty")
    if any(b <= a for a, b in zip(ns, ns[1:])) or any(n & (n - 1) for n in ns):
        raise InvalidParameterError("n_list must be increasing powers of two")
    run_update: Dict[str, Any] = {}
    if t_end is not None:
        run_update["t_end"] = t_end
    base = override_config(base_config, {"run": run_update}) if run_update else base_config
    times = base.run.times() or (base.run.t_end,)

    out = _study_root(root) / experiment
    configs = [override_config(base, {"domain": {"points_per_axis": n},
                                      "run": {"name": f"n-{n}", "snapshot_times": list(times)}})
               for n in ns]
    outcomes = run_many(configs, [out / f"n-{n}" for n in ns], jobs)
    failures = [f"N={n}: {o.status} ({o.error})" for n, o in zip(ns, outcomes) if not o.ok]

    errors: List[Tuple[int, float, float]] = []
    finest = outcomes[-1]
    if len(ns) > 1 and finest.ok:
        for n, o in zip(ns[:-1], outcomes[:-1]):
            if not o.ok:
                errors.append((n, math.nan, math.nan))
                continue
            errs = [l2_norm(resample(u, finest.config.domain) - uf)
                    for (_, u), (_, uf) in zip(o.snapshots, finest.snapshots)]
            errors.append((n, max(errs), errs[-1]))
    write_table(out / "refinement.csv", ["N", "max_error", "final_error"], errors)
    return RefinementResult(n_list=ns, times=tuple(times), errors=errors, failures=failures,
                            statuses=[o.status for o in outcomes])


# ---------------- manufactured solutions ----------------
@dataclass(frozen=True)
class MmsCase:
    """
    u*(x, t) = e^{−rate·t} (mean + amplitude · trig(ξ·x)), ξ = (1,…,1).

    The forcing is built from the discrete right-hand side so u* solves the
    forced Galerkin system exactly. `residual` checks that forcing against
    the strong operator written out in closed form; it is at roundoff for
    polynomial mobility and limited by the kink of M_θ once u* enters
    |u|² <= θ, hence the per-case `residual_tol`.
    """

    name: str
    mean: float
    amplitude: float
    rate: float
    phase: Literal["cos", "sin"] = "cos"
    residual_tol: float = 1e-10

    def _trig(self, domain: DomainSpec) -> Tuple[np.ndarray, np.ndarray]:
        arg = np.broadcast_to(sum(grid_points(domain)), domain.shape)
        if self.phase == "cos":
            return np.cos(arg), -np.sin(arg)
        return np.sin(arg), np.cos(arg)

    def exact(self, domain: DomainSpec, t: float) -> SpectralField:
        trig = np.cos if self.phase == "cos" else np.sin
        scale = math.exp(-self.rate * t)
        return forward(sample(domain, lambda *x: scale * (self.mean + self.amplitude * trig(sum(x)))))

    def forcing(self, domain: DomainSpec, params: ModelParams):
        """f(t) = ∂t u* − rhs(u*), so u* solves the forced Galerkin system exactly."""
        def f(t: float) -> SpectralField:
            u = self.exact(domain, t)
            return (-self.rate) * u - rhs(u, params)
        return f

    def closed_form_forcing(self, domain: DomainSpec, params: ModelParams, t: float) -> SpectralField:
        """∂t u* − ∇·(M_θ(u*)∇μ*) − β·∇ψ(u*) from pointwise derivatives of u*, dealiased."""
        n = domain.dimension
        s = math.exp(-self.rate * t)
        tr, dtr = self._trig(domain)
        u = s * (self.mean + self.amplitude * tr)
        g = s * self.amplitude * dtr  # every ∂_i u
        dphi = np.asarray(phi_prime(u, params))
        grad_mu = (params.gamma * n + dphi) * g  # every ∂_i μ
        lap_mu = n * ((params.gamma * n + dphi) * (-s * self.amplitude * tr)
                      + np.asarray(phi_second(u, params)) * g * g)
        div_flux = (np.asarray(mobility_prime(u, params)) * n * g * grad_mu
                    + np.asarray(effective_mobility(u, params)) * lap_mu)
        conv = sum(params.beta) * np.asarray(psi_prime(u, params)) * g
        values = -self.rate * u - div_flux - conv
        return dealias(forward(PhysicalField(domain, values)))

    def residual(self, domain: DomainSpec, params: ModelParams, t: float = 0.0) -> float:
        return l2_norm(self.forcing(domain, params)(t) - self.closed_form_forcing(domain, params, t))


MMS_CATALOG: Dict[str, MmsCase] = {
    "decaying_positive": MmsCase("decaying_positive", mean=0.2, amplitude=0.1, rate=1.0),
    "stationary": MmsCase("stationary", mean=0.5, amplitude=0.1, rate=0.0),
    "zero_crossing": MmsCase("zero_crossing", mean=0.0, amplitude=0.3, rate=1.0, phase="sin",
                             residual_tol=5e-2),
}


@dataclass
class MmsResult:
    case: str
    scheme: str
    dt_list: Tuple[float, ...]
    errors: List[float]
    order: Optional[float]


def observed_order(dt_list: Sequence[float], errors: Sequence[float]) -> Optional[float]:
    """Least-squares slope of log(error) against log(dt)."""
    if len(dt_list) < 2:
        return None
    x = np.log(np.asarray(dt_list, dtype=float))
    y = np.log(np.maximum(np.asarray(errors, dtype=float), 1e-300))
    return float(np.polyfit(x, y, 1)[0])


def mms_verify(case: Union[str, MmsCase], base_config: RunConfig, dt_list: Sequence[float],
               n: Optional[int] = None, t_end: Optional[float] = None, *,
               root: Optional[PathLike] = None, experiment: str = "mms") -> MmsResult:
    c = MMS_CATALOG[case] if isinstance(case, str) else case
    cfg = base_config
    if n is not None:
        cfg = override_config(cfg, {"domain": {"points_per_axis": n}})
    domain, params = cfg.domain, cfg.model
    T = cfg.run.t_end if t_end is None else t_end
    res0 = c.residual(domain, params)
    if res0 > c.residual_tol:
        raise InvariantViolation([f"manufactured case {c.name} residual {res0:.3e} at t=0"])
    forcing = c.forcing(domain, params)

    errors = []
    for dt in dt_list:
        stepper = cfg.stepper.model_copy(update={"dt_init": dt, "adaptive": False,
                                                 "dt_min": min(dt, cfg.stepper.dt_min),
                                                 "dt_max": max(dt, cfg.stepper.dt_max)})
        state = SolverState(t=0.0, u=c.exact(domain, 0.0), dt=dt)
        res = run(state, params, stepper, T, forcing=forcing)
        errors.append(l2_norm(res.state.u - c.exact(domain, T)))
        log.info("mms %s dt=%.3e error=%.3e", c.name, dt, errors[-1])
    order = observed_order(dt_list, errors)
    result = MmsResult(case=c.name, scheme=cfg.stepper.scheme.value,
                       dt_list=tuple(float(x) for x in dt_list), errors=errors, order=order)
    if root is not None:
        write_table(Path(root) / experiment / f"{c.name}-{result.scheme}.csv", ["dt", "error"],
                    [(float(dt), e) for dt, e in zip(dt_list, errors)])
    return result


# ---------------- Gronwall fit ----------------
@dataclass
class GronwallFit:
    C1: float
    C3: float
    rate: float  # C1·|β|²/2, the rate the envelope uses
    slope: float  # least-squares slope through the origin
    residual: float
    note: str = ""


def fit_gronwall_constants(ensemble: Sequence[Sequence[DiagnosticsRecord]],
                           beta: Sequence[float]) -> GronwallFit:
    """
    Fit E(t) + C3 <= e^{C1|β|²t/2}(E(0) + C3) over an ensemble. C3 lifts
    the energies above zero; the rate is the least-squares slope of
    log((E + C3)/(E0 + C3)) through the origin, raised to the largest
    observed slope so the envelope covers every fitted point.
    """
    b2 = float(sum(b * b for b in beta))
    if b2 == 0.0:
        return GronwallFit(C1=0.0, C3=0.0, rate=0.0, slope=0.0, residual=0.0,
                           note="beta = 0: no source term")
    runs = [list(r) for r in ensemble if len(r) > 0]
    if len(runs) < 2:
        raise InvalidParameterError("fit_gronwall_constants needs at least two runs")
    e_min = min(r.energy for recs in runs for r in recs)
    C3 = 0.0 if e_min > 0 else -e_min + 1e-3 * (1.0 + abs(e_min))
    ts, ys = [], []
    for recs in runs:
        t0, e0 = recs[0].t, recs[0].energy
        for r in recs[1:]:
            ts.append(r.t - t0)
            ys.append(math.log((r.energy + C3) / (e0 + C3)))
    t = np.asarray(ts)
    y = np.asarray(ys)
    if t.size == 0 or float(np.max(np.abs(y))) < 1e-14:
        return GronwallFit(C1=0.0, C3=C3, rate=0.0, slope=0.0, residual=0.0,
                           note="flat energy: degenerate fit")
    a = float(np.dot(t, y) / np.dot(t, t))
    resid = float(np.sqrt(np.mean((y - a * t) ** 2)))
    rate = max(a, float(np.max(y / t)), 0.0)
    return GronwallFit(C1=2.0 * rate / b2, C3=C3, rate=rate, slope=a, residual=resid)


# ---------------- manifests ----------------
class StudySpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["runs", "theta_continuation", "n_refinement", "mms", "gronwall"]
    config: str
    name: Optional[str] = None
    overrides: List[Dict[str, Any]] = Field(default_factory=list)
    thetas: Optional[List[float]] = None
    n_list: Optional[List[int]] = None
    t_end: Optional[float] = None
    dt_list: Optional[List[float]] = None
    case: str = "decaying_positive"
    held_out: Optional[Dict[str, Any]] = None


class Manifest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    experiment: str
    output_root: Optional[str] = None
    studies: List[StudySpec]


def load_manifest(path: PathLike) -> Manifest:
    p = Path(path)
    try:
        data = yaml.safe_load(p.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigParseError(f"cannot read {p}: {e}") from e
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ConfigParseError(f"malformed manifest: {e}", mark.line + 1 if mark else None) from e
    try:
        return Manifest.model_validate(data)
    except ValidationError as e:
        raise ConfigValidationError(
            [(".".join(str(x) for x in err["loc"]) or "<root>", err["msg"]) for err in e.errors()]) from e


def _run_study(study: StudySpec, index: int, base_dir: Path, root: Path, jobs: int) -> Dict[str, Any]:
    cfg = load_config(base_dir / study.config)
    name = study.name or f"{index:02d}-{study.kind}"
    out = root / name
    summary: Dict[str, Any] = {"name": name, "kind": study.kind}
    if study.kind == "runs":
        configs = [override_config(cfg, o) for o in study.overrides] or [cfg]
        outcomes = run_many(configs, [run_dir_for(root, name, c) for c in configs], jobs)
        summary["runs"] = [{"run_dir": str(o.run_dir), "status": o.status} for o in outcomes]
        summary.update(statuses=[o.status for o in outcomes], ok=all(o.ok for o in outcomes))
    elif study.kind == "theta_continuation":
        thetas = study.thetas or [4.0 ** -i for i in range(1, 7)]
        res = theta_continuation(cfg, thetas, root=root, experiment=name, jobs=jobs)
        summary.update(pairwise_l2=res.pairwise_l2, sup_l2=res.sup_l2,
                       findings=res.findings, failures=res.failures, statuses=res.statuses,
                       ok=not res.failures)
    elif study.kind == "n_refinement":
        if not study.n_list:
            raise ConfigValidationError([(f"studies.{index}.n_list", "required for n_refinement")])
        ref = n_refinement(cfg, study.n_list, study.t_end, root=root, experiment=name, jobs=jobs)
        summary.update(errors=ref.errors, failures=ref.failures, statuses=ref.statuses,
                       ok=not ref.failures)
    elif study.kind == "mms":
        if not study.dt_list:
            raise ConfigValidationError([(f"studies.{index}.dt_list", "required for mms")])
        if study.case not in MMS_CATALOG:
            raise ConfigValidationError([(f"studies.{index}.case", f"unknown case {study.case!r}")])
        mms = mms_verify(study.case, cfg, study.dt_list, t_end=study.t_end, root=root, experiment=name)
        summary.update(errors=mms.errors, order=mms.order, scheme=mms.scheme,
                       statuses=["ok"], ok=True)
    else:
        if len(study.overrides) < 2 or study.held_out is None:
            raise ConfigValidationError(
                [(f"studies.{index}.overrides", "gronwall needs >= 2 ensemble members and held_out")])
        configs = [override_config(cfg, o) for o in study.overrides]
        held = override_config(cfg, study.held_out)
        outcomes = run_many(configs + [held], [run_dir_for(root, name, c) for c in configs + [held]],
                            jobs)
        summary["statuses"] = [o.status for o in outcomes]
        if not all(o.ok for o in outcomes):
            summary.update(ok=False, failures=[o.error for o in outcomes if not o.ok])
            return summary
        fit = fit_gronwall_constants([o.records for o in outcomes[:-1]], configs[0].model.beta)
        margin = gronwall_envelope(outcomes[-1].records, fit.C1, fit.C3, held.model.beta)
        summary.update(C1=fit.C1, C3=fit.C3, rate=fit.rate, slope=fit.slope, residual=fit.residual,
                       note=fit.note,
                       held_out_margin=margin, ok=margin <= 0)
        out.mkdir(parents=True, exist_ok=True)
        (out / "gronwall.json").write_text(json.dumps(summary, indent=2), encoding="utf-8")
    return summary


def run_manifest(manifest_path: PathLike, jobs: int = 1,
                 output_root: Optional[PathLike] = None) -> Dict[str, Any]:
    p = Path(manifest_path)
    manifest = load_manifest(p)
    root_base = Path(output_root) if output_root is not None else (
        Path(manifest.output_root) if manifest.output_root else settings.output_root())
    root = root_base / manifest.experiment
    log.info("manifest %s: %d stud(ies) -> %s (jobs=%d)", p, len(manifest.studies), root, jobs)
    studies = [_run_study(s, i, p.parent, root, jobs) for i, s in enumerate(manifest.studies)]
    report = {"experiment": manifest.experiment, "version": __version__, "studies": studies,
              "ok": all(s.get("ok", False) for s in studies)}
    root.mkdir(parents=True, exist_ok=True)
    (root / "manifest_summary.json").write_text(json.dumps(report, indent=2, default=str),
                                                encoding="utf-8")
    return report
