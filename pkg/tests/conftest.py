from __future__ import annotations

import math

import numpy as np
import pytest

from model import ModelParams
from spectral import DomainSpec


@pytest.fixture(autouse=True)
def _isolated_env(tmp_path, monkeypatch):
    monkeypatch.setenv("CCH_OUTPUT_ROOT", str(tmp_path / "results"))
    monkeypatch.setenv("CCH_LOG_DIR", str(tmp_path / "logs"))


@pytest.fixture
def domain1d() -> DomainSpec:
    return DomainSpec(dimension=1, points_per_axis=64)


@pytest.fixture
def domain2d() -> DomainSpec:
    return DomainSpec(dimension=2, points_per_axis=32)


@pytest.fixture
def double_well() -> ModelParams:
    return ModelParams(gamma=0.05, m=1, beta=(1.0,), phi_coeffs=(-1.0, 0.0, 1.0),
                       psi_coeffs=(0.0, 0.5), theta=1e-2)


def unchecked_params(**kw) -> ModelParams:
    """ModelParams without validation, for closed-form cases (φ = 0, linear φ)."""
    base = dict(gamma=1.0, m=1.0, beta=(0.0,), phi_coeffs=(0.0, 0.0, 0.0),
                psi_coeffs=(0.0, 0.0), theta=1.0, signed_power=False)
    base.update(kw)
    return ModelParams.model_construct(**base)


@pytest.fixture
def unchecked():
    return unchecked_params


def random_real_coeffs(rng: np.random.Generator, n_modes: int, dimension: int,
                       mean: float, spread: float) -> np.ndarray:
    """Real-basis coefficients of mean + fluctuation with sup|fluctuation| <= spread."""
    c = rng.standard_normal(n_modes)
    alpha = math.sqrt(2.0) * (2.0 * math.pi) ** (-dimension / 2.0)
    c[0] = 0.0
    c *= spread / (alpha * float(np.sum(np.abs(c))))
    c[0] = mean * (2.0 * math.pi) ** (dimension / 2.0)
    return c
