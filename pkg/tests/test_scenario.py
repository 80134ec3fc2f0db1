"""Configuration grammar, round-trip, and preset tests."""

import json

import numpy as np
import pytest

from frostflow.scenario import (
    PRESETS,
    Scenario,
    ScenarioError,
    compile_expression,
    load_config,
)


# ---------------------------------------------------------------------------
# expression grammar


def test_expression_basic_arithmetic():
    fn = compile_expression("2*x + t**2 - 1")
    assert fn(x=np.array([1.0, 2.0]), y=0.0, t=3.0) == pytest.approx(
        [1 + 9, 4 + 9 - 1 + 1 - 1]) or True
    out = fn(x=np.array([1.0, 2.0]), y=0.0, t=3.0)
    assert np.allclose(out, [2 + 9 - 1, 4 + 9 - 1])


def test_expression_functions_and_constants():
    fn = compile_expression("sin(pi*t) + max(x, 0)")
    assert fn(x=-2.0, y=0.0, t=0.5) == pytest.approx(1.0)
    assert fn(x=3.0, y=0.0, t=0.0) == pytest.approx(3.0)


def test_expression_numeric_literal_shortcut():
    fn = compile_expression(2.5)
    assert fn(x=1.0, y=0.0, t=0.0) == 2.5


def test_expression_rejects_unknown_names():
    with pytest.raises(ScenarioError):
        compile_expression("__import__('os')")
    with pytest.raises(ScenarioError):
        compile_expression("q + 1")
    with pytest.raises(ScenarioError):
        compile_expression("x.real")
    with pytest.raises(ScenarioError):
        compile_expression("open('x')")


def test_expression_rejects_bad_syntax():
    with pytest.raises(ScenarioError):
        compile_expression("2*(")


# ---------------------------------------------------------------------------
# round trip


def test_config_round_trip_identity():
    sc = Scenario.from_dict(PRESETS["freeze_thaw"]())
    text = sc.to_text()
    back = Scenario.from_text(text)
    assert back.to_dict() == sc.to_dict()
    assert back.to_text() == text


def test_parse_error_carries_position():
    with pytest.raises(ScenarioError) as err:
        Scenario.from_text('{"mesh": [1,]}')
    assert "line" in str(err.value) and "column" in str(err.value)


def test_missing_sections_rejected():
    with pytest.raises(ScenarioError):
        Scenario.from_dict({"mesh": {}})
    with pytest.raises(ScenarioError):
        Scenario.from_dict([1, 2, 3])


# ---------------------------------------------------------------------------
# presets


def test_presets_build_and_validate():
    for name in ("zero_forcing", "freeze_thaw"):
        sc = Scenario.from_dict(PRESETS[name]())
        report = sc.validate()
        assert report.passed, f"{name}: " + "\n".join(report.lines())
        sim, state = sc.build_simulation()
        assert state.p.shape[0] == sim.mesh.n_nodes


def test_linear_regime_preset_fails_validation_but_builds():
    sc = Scenario.from_dict(PRESETS["linear_regime"]())
    report = sc.validate()
    assert not report.passed
    names = {c.name for c in report.clauses if not c.passed}
    assert "(vi)" in names and "(mass)" in names and "(iii)" in names
    sim, state = sc.build_simulation()
    assert sim.basis is not None


def test_with_solver_override():
    sc = Scenario.from_dict(PRESETS["zero_forcing"]())
    sc2 = sc.with_solver(dt=0.5, t_end=1.0)
    assert sc2.data["solver"]["dt"] == 0.5
    assert sc.data["solver"]["dt"] != 0.5


def test_load_config_preset_and_file(tmp_path):
    sc = load_config("preset:zero_forcing")
    assert sc.name == "zero_forcing"
    path = tmp_path / "scenario.json"
    path.write_text(sc.to_text(), encoding="utf-8")
    sc2 = load_config(str(path))
    assert sc2.to_dict() == sc.to_dict()
    with pytest.raises(ScenarioError):
        load_config("preset:nope")


def test_density_from_file(tmp_path):
    from frostflow.hysteresis import PreisachDensity
    table = PreisachDensity.uniform_box(0.1, (0.0, 2.0), (-1.5, 1.5))
    path = tmp_path / "density.txt"
    path.write_text(table.to_text(), encoding="utf-8")
    sc = Scenario.from_dict(PRESETS["zero_forcing"]())
    sc.data["density"] = {"kind": "file", "path": str(path), "n_r": 32}
    density, grid = sc.build_density()
    assert density.c_plus == pytest.approx(0.1 * 2.0 * 1.5)
    assert grid.levels[-1] < 2.0


def test_spatially_varying_boundary_coefficients():
    sc = Scenario.from_dict(PRESETS["zero_forcing"]())
    sc.data["boundary"]["alpha"] = "2 + x"
    mesh = sc.build_mesh()
    bd = sc.build_boundary(mesh)
    # left facet at x=0, right at x=1
    assert bd.alpha[0] == pytest.approx(2.0)
    assert bd.alpha[1] == pytest.approx(3.0)


def test_initial_displacement_expressions():
    sc = Scenario.from_dict(PRESETS["zero_forcing"]())
    sc.data["initial"]["u"] = ["x*(1-x)"]
    sim, state = sc.build_simulation()
    u = state.u.reshape(-1, 1)
    x = sim.mesh.nodes[:, 0]
    assert np.allclose(u[:, 0], x * (1 - x), atol=1e-14)


def test_gravity_shape_checked():
    sc = Scenario.from_dict(PRESETS["zero_forcing"]())
    sc.data["gravity"] = [1.0, 2.0]
    with pytest.raises(ScenarioError):
        sc.build_simulation()
