import json

import numpy as np
import pytest

from oqwlab.cli import dispatch
from oqwlab.derivation import SIGMA_Z, ModelSpec, build_transition_operators, two_level_paper_spec
from oqwlab.errors import BadParameter, NotHermitian, ParseError
from oqwlab.io import (
    dump_model_config,
    dump_operators,
    encode_matrix,
    parse_model_config,
    parse_operators,
    read_trajectory,
    trajectory_csv,
    write_trajectory,
)
from oqwlab.states import BlockState
from oqwlab.walk import run_walk

from conftest import random_hermitian

PRESET_DOC = {"preset": "two-level-paper", "beta": 0.01, "omega0": 1.0, "gamma0": 1.0}


def same_spec(a: ModelSpec, b: ModelSpec):
    for f in ("omega1", "omega2", "coupling_a"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))
    assert (a.gamma0, a.beta, a.preset, a.zero_frequency_rate) == (b.gamma0, b.beta, b.preset, b.zero_frequency_rate)


def test_round_trip(rng):
    spec = ModelSpec(random_hermitian(rng, 3), random_hermitian(rng, 3), random_hermitian(rng, 3),
                     gamma0=0.37, beta=2.5, zero_frequency_rate=0.1)
    same_spec(parse_model_config(dump_model_config(spec)), spec)
    preset = two_level_paper_spec(2.0, 0.005, 3.0)
    same_spec(parse_model_config(dump_model_config(preset)), preset)


def test_field_named_in_hermiticity_error():
    doc = {"omega1": [[[0, 0], [1, 0]], [[0, 0], [0, 0]]], "omega2": encode_matrix(SIGMA_Z),
           "coupling_a": encode_matrix(np.eye(2)), "gamma0": 1.0, "beta": 1.0}
    with pytest.raises(NotHermitian) as info:
        parse_model_config(json.dumps(doc))
    assert info.value.field == "omega1"


def test_preset_defaults():
    spec = parse_model_config('{"preset": "two-level-paper"}')
    np.testing.assert_allclose(spec.omega1, 0.5 * spec.omega0 * SIGMA_Z)
    np.testing.assert_allclose(spec.omega2, spec.omega1)
    assert spec.omega0 * spec.beta == pytest.approx(0.01)
    assert spec.gamma0 == 1.0


@pytest.mark.parametrize(
    "text, error",
    [
        ("not json", ParseError),
        ("[1, 2]", ParseError),
        ('{"preset": "nope"}', ParseError),
        ('{"preset": "two-level-paper", "beta": -1}', BadParameter),
        ('{"omega1": [[[1, 0]]], "omega2": [[[1, 0]]], "coupling_a": [[[1, 0]]], "gamma0": 0, "beta": 1}', BadParameter),
        ('{"omega1": [[[1, 0]]], "omega2": [[[1, 0]]], "gamma0": 1, "beta": 1}', ParseError),
        ('{"omega1": [[[1, 0]]], "omega2": [[[1, 0]]], "coupling_a": [["x"]], "gamma0": 1, "beta": 1}', ParseError),
    ],
)
def test_config_errors(text, error):
    with pytest.raises(error):
        parse_model_config(text)


def test_operator_file_round_trip():
    ops = build_transition_operators(two_level_paper_spec(), 1e-3, "exact")
    back = parse_operators(dump_operators(ops))
    assert (back.node_count, back.dim, back.delta, back.mode) == (2, 2, 1e-3, "exact")
    for a, b in zip(ops.terms, back.terms):
        assert (a.source, a.target, a.label) == (b.source, b.target, b.label)
        np.testing.assert_array_equal(a.matrix, b.matrix)


def equilibration_traj(steps):
    ops = build_transition_operators(two_level_paper_spec(), 0.01, "first_order")
    init = BlockState.localized(np.diag([0.0, 1.0]), 0, 2)
    return run_walk(ops.to_map("renormalized"), init, steps, 0.01)


def test_trajectory_table(tmp_path):
    text = trajectory_csv(equilibration_traj(0))
    lines = text.split("\n")
    assert lines[0] == "step,time,p1,p2,trace,purity1,purity2"
    assert len(text.strip("\n").split("\n")) == 2
    assert text.endswith("\n") and "\r" not in text

    path = tmp_path / "t.csv"
    write_trajectory(equilibration_traj(50), path)
    cols = read_trajectory(path)
    assert len(cols["step"]) == 51
    np.testing.assert_allclose(cols["p1"] + cols["p2"], cols["trace"], atol=1e-9)
    first = path.read_text().split("\n")[1].split(",")
    assert first[1] == "0.0000000000000000e+00"
    assert all(len(x.split("e")[0].replace("-", "").replace(".", "")) == 17 for x in first[1:])


def test_trajectory_file_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_trajectory(equilibration_traj(20), a)
    write_trajectory(equilibration_traj(20), b)
    assert a.read_bytes() == b.read_bytes()


# ------------------------------------------------------------ command line


@pytest.fixture
def preset_config(tmp_path):
    p = tmp_path / "preset.json"
    p.write_text(json.dumps(PRESET_DOC))
    return str(p)


def run_cli(argv, capsys):
    code = dispatch(argv)
    out = capsys.readouterr().out
    return code, (json.loads(out) if code == 0 or out.startswith("{") else None)


def test_derive(preset_config, tmp_path, capsys):
    out = tmp_path / "ops.json"
    code, report = run_cli(["derive", "--config", preset_config, "--out", str(out)], capsys)
    assert code == 0
    assert report["operator_count"] == 4
    assert report["residuals"][0] == pytest.approx(0.2475, abs=1e-4)
    assert parse_operators(out.read_text()).mode == "first_order"
    assert (tmp_path / "ops.json.meta.json").exists()


def test_walk_reproduces_equilibration(preset_config, tmp_path, capsys):
    out = tmp_path / "walk.csv"
    code, report = run_cli(["walk", "--config", preset_config, "--steps", "50", "--mode", "renormalized",
                            "--out", str(out)], capsys)
    assert code == 0
    assert report["mixing_time"] <= 10
    assert report["final_probabilities"][0] == pytest.approx(0.502, abs=1e-3)
    assert len(read_trajectory(out)["step"]) == 51
    first = out.read_bytes()
    run_cli(["walk", "--config", preset_config, "--steps", "50", "--mode", "renormalized", "--out", str(out)], capsys)
    assert out.read_bytes() == first


def test_walk_from_operator_file(tmp_path, capsys):
    ops = build_transition_operators(two_level_paper_spec(), 1e-3, "exact")
    path = tmp_path / "ops.json"
    path.write_text(dump_operators(ops))
    code, report = run_cli(["walk", "--operators", str(path), "--steps", "5", "--init", "basis:1"], capsys)
    assert code == 0
    assert report["final_trace"] == pytest.approx(1.0, abs=1e-12)


def test_compare(preset_config, capsys):
    code, report = run_cli(["compare", "--config", preset_config, "--delta", "1e-4", "--steps", "1000"], capsys)
    assert code == 0
    assert report["deviation"] <= 2e-2


def test_evolve(preset_config, tmp_path, capsys):
    out = tmp_path / "ev.csv"
    code, report = run_cli(["evolve", "--config", preset_config, "--dt", "1e-4", "--t-final", "0.1",
                            "--stride", "100", "--out", str(out)], capsys)
    assert code == 0
    assert report["final_probabilities"][0] == pytest.approx(0.5025, abs=1e-4)
    assert len(read_trajectory(out)["step"]) == 11


def test_validate_exit_codes(preset_config, tmp_path, capsys):
    code, report = run_cli(["validate", "--config", preset_config, "--delta", "1e-3"], capsys)
    assert code == 0 and report["ok"]
    code, report = run_cli(["validate", "--config", preset_config, "--mode", "first-order"], capsys)
    assert code == 3 and not report["normalized"]


def test_exit_codes(preset_config, tmp_path, capsys):
    assert dispatch([]) == 2
    assert dispatch(["walk", "--config", preset_config, "--mode", "sideways"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"preset": "two-level-paper", "gamma0": -1}')
    assert dispatch(["derive", "--config", str(bad)]) == 3
    # the exact construction fails at the preset's default step size
    assert dispatch(["walk", "--config", preset_config, "--mode", "strict"]) == 4
    assert dispatch(["derive", "--config", str(tmp_path / "missing.json")]) == 5
    capsys.readouterr()
