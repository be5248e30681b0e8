from __future__ import annotations

import polars as pl

from nestocc import EnvironmentSpec, build_profile, critical_constants, sweep
from nestocc.reports import format_constants, format_regime, regime_boundaries


def test_format_regime() -> None:
    assert format_regime(("IIC",), 4 / 3) == "IIC (θ=1.3333)"
    assert format_regime(("IV", "Freezing"), -0.25) == "IV+Freezing (θ=-0.2500)"
    assert format_regime(("OutOfRange",), 0.5) == "OutOfRange"
    assert format_regime(("I",), None) == "I"


def test_format_constants_property_b(dirichlet: EnvironmentSpec) -> None:
    profile = build_profile(dirichlet)
    text = format_constants(dirichlet, profile, critical_constants(profile))
    lines = text.splitlines()
    assert lines[0] == "environment   DirichletSplit(2, 1)"
    assert lines[2] == "property      B"
    assert "theta_lower=-1" in lines[-1]
    assert "a_bar_minus=2.67" in lines[-1]


def test_regime_boundaries() -> None:
    table = pl.DataFrame({"a": [0.1, 0.2, 0.3, 0.4], "regime": ["I", "I", "IIA", "IIC"]})
    assert regime_boundaries(table) == [(0.3, "I", "IIA"), (0.4, "IIA", "IIC")]


def test_sweep_boundaries_on_dirichlet(dirichlet: EnvironmentSpec) -> None:
    table = sweep(build_profile(dirichlet), [0.3, 0.4, 0.75, 1.5, 3.0])
    labels = [after for _, _, after in regime_boundaries(table)]
    assert labels == ["IIC", "IV", "Freezing", "OutOfRange"]
