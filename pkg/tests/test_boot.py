import importlib

import pytest

MODULES = [
    "cli",
    "config",
    "debug",
    "diagnostics",
    "errors",
    "experiments",
    "integrator",
    "model",
    "persist",
    "settings",
    "spectral",
    "version",
]


@pytest.mark.parametrize("name", MODULES)
def test_import_modules(name):
    importlib.import_module(name)


def test_version_string():
    from version import __version__
    assert __version__.count(".") == 2
