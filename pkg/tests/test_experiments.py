import json
import math
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose

import experiments
from config import load_config, parse_config
from diagnostics import DiagnosticsRecord
from errors import BlowUpError, ConfigValidationError, InvalidParameterError, InvariantViolation
from experiments import (
    MMS_CATALOG,
    build_initial,
    execute_run,
    fit_gronwall_constants,
    mms_verify,
    n_refinement,
    observed_order,
    override_config,
    run_many,
    run_manifest,
    theta_continuation,
)
from persist import read_records, read_summary, write_snapshot
from spectral import DomainSpec, forward, resample, sample

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

CONSTANT = """
model: {beta: [1.0]}
run: {name: constant, t_end: 0.5, snapshots: 3}
initial: {kind: constant, value: 0.4}
stepper: {dt_init: 0.01}
"""


def _energy_rec(t, e):
    return DiagnosticsRecord(t=t, mass=0.0, energy=e, dissipation=0.0, source_bound=0.0,
                             ineq_residual=math.nan, l2=0.0, h1=0.0, max_abs=0.0, min_abs=0.0,
                             degeneracy_measure=0.0)


def test_random_initial_is_resolution_independent():
    text = "domain: {points_per_axis: %d}\ninitial: {kind: random, seed: 5, amplitude: 0.2, mean: 0.1, cutoff: 6}"
    coarse = forward(build_initial(parse_config(text % 32)))
    fine = forward(build_initial(parse_config(text % 64)))
    assert_allclose(resample(coarse, fine.domain).coeffs, fine.coeffs, atol=1e-14)
    values = build_initial(parse_config(text % 64)).values
    assert float(np.mean(values)) == pytest.approx(0.1)
    assert float(np.sqrt(np.mean((values - 0.1) ** 2))) == pytest.approx(0.2, rel=1e-12)


def test_random_initial_depends_on_seed():
    a = build_initial(parse_config("initial: {kind: random, seed: 1}")).values
    b = build_initial(parse_config("initial: {kind: random, seed: 2}")).values
    assert not np.array_equal(a, b)


def test_mode_and_file_initial(tmp_path):
    cfg = parse_config("domain: {dimension: 2, points_per_axis: 16}\nmodel: {beta: [0, 0]}\n"
                       "initial: {kind: mode, mean: 0.2, amplitude: 0.5, wavevector: [1, 2], phase: sin}")
    u0 = build_initial(cfg)
    expect = sample(cfg.domain, lambda x, y: 0.2 + 0.5 * np.sin(x + 2 * y))
    assert_allclose(u0.values, expect.values, atol=1e-15)
    snap = write_snapshot(tmp_path / "u0.snap", u0, 0.0)
    loaded = build_initial(parse_config(
        f"domain: {{dimension: 2, points_per_axis: 32}}\nmodel: {{beta: [0, 0]}}\n"
        f"initial: {{kind: file, path: '{snap}'}}"))
    assert_allclose(loaded.values, sample(DomainSpec(dimension=2, points_per_axis=32),
                                          lambda x, y: 0.2 + 0.5 * np.sin(x + 2 * y)).values,
                    atol=1e-13)


def test_constant_run_is_flat_and_persisted(tmp_path):
    cfg = parse_config(CONSTANT)
    out = execute_run(cfg, tmp_path / "a")
    assert out.ok
    assert len(out.records) == 51
    e0 = out.records[0].energy
    assert all(r.energy == pytest.approx(e0, rel=1e-12) for r in out.records)
    assert all(r.mass == pytest.approx(0.4 * 2 * math.pi, rel=1e-14) for r in out.records)
    assert [t for t, _ in out.snapshots] == [0.0, 0.25, 0.5]
    summary = read_summary(tmp_path / "a")
    assert summary["status"] == "ok"
    assert summary["step_count"] == 50
    assert len(read_records(tmp_path / "a" / "diagnostics.csv")) == 51
    assert len(list((tmp_path / "a" / "snapshots").glob("*.snap"))) == 3
    # same config, same bytes
    execute_run(cfg, tmp_path / "b")
    assert (tmp_path / "a" / "diagnostics.csv").read_bytes() == \
        (tmp_path / "b" / "diagnostics.csv").read_bytes()


def test_blowup_is_persisted(tmp_path):
    cfg = parse_config("initial: {kind: mode, amplitude: 0.9, phase: sin}\n"
                       "stepper: {blowup_threshold: 0.5, dt_init: 0.001}\nrun: {t_end: 0.1}")
    with pytest.raises(BlowUpError):
        execute_run(cfg, tmp_path / "r")
    summary = read_summary(tmp_path / "r")
    assert summary["status"] == "blow-up"
    assert summary["records"] == 1


def test_strict_violation_is_persisted(tmp_path):
    cfg = load_config(CONFIGS / "coarse_verify.yaml")
    with pytest.raises(InvariantViolation):
        execute_run(cfg, tmp_path / "v")
    assert read_summary(tmp_path / "v")["status"] == "invariant-violation"
    out = execute_run(cfg, tmp_path / "w", strict=False)
    assert out.ok and len(out.events) == 1
    assert out.records[1].ineq_residual == pytest.approx(3.32, abs=0.05)


def test_override_config():
    cfg = parse_config(CONSTANT)
    o = override_config(cfg, {"model": {"theta": 1e-3}, "initial": {"kind": "mode", "amplitude": 0.2}})
    assert o.model.theta == 1e-3 and o.initial.kind == "mode"
    assert o.model.beta == cfg.model.beta
    with pytest.raises(ConfigValidationError):
        override_config(cfg, {"solver": {"x": 1}})
    with pytest.raises(ConfigValidationError):
        override_config(cfg, {"model": {"gamma": -1}})


def test_run_many_in_pool(tmp_path):
    cfg = parse_config(CONSTANT)
    cfgs = [cfg, override_config(cfg, {"initial": {"value": -0.3}})]
    outs = run_many(cfgs, [tmp_path / "p0", tmp_path / "p1"], jobs=2)
    assert [o.status for o in outs] == ["ok", "ok"]
    assert outs[1].records[0].mass == pytest.approx(-0.3 * 2 * math.pi)


def test_theta_continuation_on_constant(tmp_path):
    cfg = parse_config(CONSTANT)
    res = theta_continuation(cfg, [0.25, 0.0625, 0.0625], root=tmp_path)
    assert len(res.pairwise_l2) == 2
    assert all(d <= 1e-12 for d in res.pairwise_l2)
    assert res.failures == []
    assert res.bounds[0]["gap"] == pytest.approx(0.25)
    out = tmp_path / "continuation"
    for name in ("continuation.csv", "bounds.csv", "findings.json"):
        assert (out / name).exists()
    with pytest.raises(InvalidParameterError):
        theta_continuation(cfg, [0.01, 0.1], root=tmp_path)
    with pytest.raises(InvalidParameterError):
        theta_continuation(cfg, [0.1, 0.0], root=tmp_path)


def test_n_refinement_decreases(tmp_path):
    cfg = parse_config("model: {beta: [0.5]}\ninitial: {kind: mode, mean: 0.6, amplitude: 0.3}\n"
                       "stepper: {dt_init: 0.001}\nrun: {snapshots: 2}")
    res = n_refinement(cfg, [16, 32, 64], t_end=0.05, root=tmp_path)
    assert [n for n, _, _ in res.errors] == [16, 32]
    assert res.errors[0][2] > res.errors[1][2]
    assert (tmp_path / "refinement" / "refinement.csv").exists()
    with pytest.raises(InvalidParameterError):
        n_refinement(cfg, [32, 16], root=tmp_path)
    with pytest.raises(InvalidParameterError):
        n_refinement(cfg, [24], root=tmp_path)


def test_mms_stationary_is_exact(tmp_path):
    cfg = parse_config("domain: {points_per_axis: 32}\nmodel: {theta: 0.001, gamma: 0.1, beta: [1.0]}\n"
                       "run: {t_end: 0.2}")
    res = mms_verify("stationary", cfg, [0.05, 0.025], root=tmp_path)
    assert max(res.errors) <= 1e-8
    assert (tmp_path / "mms" / "stationary-IMEX_BE.csv").exists()
    assert mms_verify(MMS_CATALOG["stationary"], cfg, [0.05]).order is None


def test_mms_residual_within_case_tolerance():
    d = DomainSpec(points_per_axis=32)
    p = parse_config("model: {theta: 0.001, beta: [1.0]}").model
    for case in MMS_CATALOG.values():
        assert case.residual(d, p, 0.3) <= case.residual_tol
    assert MMS_CATALOG["decaying_positive"].residual(d, p, 0.0) <= 1e-10
    assert MMS_CATALOG["stationary"].residual(d, p, 0.0) <= 1e-10


def test_mms_residual_catches_a_wrong_rhs(monkeypatch):
    d = DomainSpec(points_per_axis=32)
    cfg = parse_config("domain: {points_per_axis: 32}\nmodel: {theta: 0.001, beta: [1.0]}\nrun: {t_end: 0.1}")
    monkeypatch.setattr(experiments, "rhs", lambda u, p: 1e6 * u)
    for case in MMS_CATALOG.values():
        assert case.residual(d, cfg.model) > 1.0
    with pytest.raises(InvariantViolation):
        mms_verify("decaying_positive", cfg, [0.05])


def test_mms_zero_crossing_case(tmp_path):
    cfg = parse_config("domain: {points_per_axis: 32}\nmodel: {theta: 0.001, gamma: 0.1, beta: [1.0]}\n"
                       "run: {t_end: 0.2}")
    res = mms_verify("zero_crossing", cfg, [0.02, 0.01, 0.005], root=tmp_path)
    assert res.errors[0] > res.errors[1] > res.errors[2]
    assert res.order == pytest.approx(1.0, abs=0.3)
    assert (tmp_path / "mms" / "zero_crossing-IMEX_BE.csv").exists()


def test_observed_order():
    assert observed_order([0.1, 0.05, 0.025], [1e-2, 2.5e-3, 6.25e-4]) == pytest.approx(2.0)
    assert observed_order([0.1], [1.0]) is None


def test_gronwall_fit_recovers_rate():
    a = 0.3
    ensemble = [[_energy_rec(t, e0 * math.exp(a * t)) for t in np.linspace(0, 1, 11)]
                for e0 in (1.0, 2.0, 0.5)]
    fit = fit_gronwall_constants(ensemble, (1.0,))
    assert fit.C3 == 0.0
    assert fit.C1 == pytest.approx(2 * a, rel=1e-9)
    assert fit.rate == pytest.approx(a, rel=1e-9) and fit.slope == pytest.approx(a, rel=1e-9)
    assert fit.residual == pytest.approx(0.0, abs=1e-12)



def test_gronwall_rate_covers_the_steepest_run():
    ensemble = [[_energy_rec(t, math.exp(rate * t)) for t in np.linspace(0, 1, 11)] for rate in (0.2, 0.4)]
    fit = fit_gronwall_constants(ensemble, (2.0,))
    assert fit.slope < fit.rate
    assert fit.rate == pytest.approx(0.4, rel=1e-9)
    assert fit.C1 == pytest.approx(2 * fit.rate / 4.0)

def test_gronwall_fit_edge_cases():
    ens = [[_energy_rec(0.0, -1.0), _energy_rec(1.0, -1.5)], [_energy_rec(0.0, -2.0), _energy_rec(1.0, -2.0)]]
    fit = fit_gronwall_constants(ens, (1.0,))
    assert fit.C3 == pytest.approx(2.0 + 3e-3)
    assert fit.C1 >= 0.0
    zero = fit_gronwall_constants(ens, (0.0,))
    assert zero.C1 == 0.0 and "beta" in zero.note
    flat = fit_gronwall_constants([[_energy_rec(0.0, 1.0), _energy_rec(1.0, 1.0)]] * 2, (1.0,))
    assert flat.C1 == 0.0 and "degenerate" in flat.note
    with pytest.raises(InvalidParameterError):
        fit_gronwall_constants(ens[:1], (1.0,))


def test_run_manifest(tmp_path):
    (tmp_path / "constant.yaml").write_text(CONSTANT)
    (tmp_path / "m.yaml").write_text(
        "experiment: smoke\nstudies:\n"
        "  - kind: runs\n    config: constant.yaml\n"
        "    overrides: [{model: {theta: 0.001}}, {run: {t_end: 0.1}}]\n")
    report = run_manifest(tmp_path / "m.yaml", output_root=tmp_path / "out")
    assert report["ok"]
    runs = report["studies"][0]["runs"]
    assert [r["status"] for r in runs] == ["ok", "ok"]
    summary = json.loads((tmp_path / "out" / "smoke" / "manifest_summary.json").read_text())
    assert summary["experiment"] == "smoke"


def test_manifest_rejects_unknown_kind(tmp_path):
    (tmp_path / "m.yaml").write_text("experiment: x\nstudies:\n  - kind: dance\n    config: c.yaml\n")
    with pytest.raises(ConfigValidationError):
        run_manifest(tmp_path / "m.yaml", output_root=tmp_path)
