"""Model configs, operator files and trajectory tables.

Complex numbers are written as ``[re, im]`` pairs everywhere.  Data files
are deterministic: identical inputs give byte-identical output.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .derivation import TWO_LEVEL_PRESET, KrausTerm, ModelSpec, TransitionOperatorSet, two_level_paper_spec
from .errors import BadParameter, NotHermitian, ParseError, ShapeMismatch
from .linalg import hermiticity_error
from .walk import OQWMap, Trajectory

CONFIG_HERMITIAN_TOL = 1e-10
PRESET_DEFAULTS = {"omega0": 1.0, "beta": 0.01, "gamma0": 1.0}


def encode_matrix(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]


def decode_matrix(data, field: str) -> np.ndarray:
    try:
        rows = []
        for row in data:
            out = []
            for z in row:
                if isinstance(z, (int, float)):
                    out.append(complex(z))
                else:
                    re, im = z
                    out.append(complex(float(re), float(im)))
            rows.append(out)
        m = np.array(rows, dtype=complex)
    except (TypeError, ValueError) as err:
        raise ParseError(f"{field}: expected a nested array of [re, im] pairs ({err})") from None
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.size == 0:
        raise ParseError(f"{field}: expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ParseError(f"{field}: non-finite entry")
    return m


def _number(doc: dict, key: str, default=None) -> float:
    if key not in doc:
        if default is None:
            raise ParseError(f"missing field {key!r}")
        return float(default)
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"{key}: expected a number, got {v!r}")
    return float(v)


def _load_json(text: str, what: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(f"{what} is not valid JSON: {err}") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{what} must be a JSON object")
    return doc


def parse_model_config(text: str) -> ModelSpec:
    """Parse a model config document into a validated ModelSpec."""
    doc = _load_json(text, "model config")
    preset = doc.get("preset")
    zero_rate = doc.get("zero_frequency_rate")
    if zero_rate is not None:
        zero_rate = _number(doc, "zero_frequency_rate")

    if preset is not None:
        if preset != TWO_LEVEL_PRESET:
            raise ParseError(f"preset: unknown preset {preset!r} (known: {TWO_LEVEL_PRESET!r})")
        vals = {k: _number(doc, k, d) for k, d in PRESET_DEFAULTS.items()}
        for k in ("gamma0", "beta", "omega0"):
            if vals[k] <= 0:
                raise BadParameter(f"{k} must be > 0, got {vals[k]}")
        return two_level_paper_spec(vals["omega0"], vals["beta"], vals["gamma0"])

    gamma0 = _number(doc, "gamma0")
    beta = _number(doc, "beta")
    if gamma0 <= 0:
        raise BadParameter(f"gamma0 must be > 0, got {gamma0}")
    if beta <= 0:
        raise BadParameter(f"beta must be > 0, got {beta}")
    mats = {}
    for key in ("omega1", "omega2", "coupling_a"):
        if key not in doc:
            raise ParseError(f"missing field {key!r}")
        m = decode_matrix(doc[key], key)
        if hermiticity_error(m) > CONFIG_HERMITIAN_TOL:
            raise NotHermitian(key)
        mats[key] = 0.5 * (m + m.conj().T)
    if "dim" in doc:
        dim = doc["dim"]
        if not isinstance(dim, int) or isinstance(dim, bool):
            raise ParseError(f"dim: expected an integer, got {dim!r}")
        for key, m in mats.items():
            if m.shape[0] != dim:
                raise ShapeMismatch(f"{key}: dimension {m.shape[0]} does not match dim = {dim}")
    return ModelSpec(mats["omega1"], mats["omega2"], mats["coupling_a"], gamma0=gamma0, beta=beta,
                     zero_frequency_rate=zero_rate)


def dump_model_config(spec: ModelSpec) -> str:
    doc = {
        "dim": spec.dim,
        "omega1": encode_matrix(spec.omega1),
        "omega2": encode_matrix(spec.omega2),
        "coupling_a": encode_matrix(spec.coupling_a),
        "gamma0": spec.gamma0,
        "beta": spec.beta,
    }
    if spec.preset is not None:
        doc["preset"] = spec.preset
        doc["omega0"] = spec.omega0
    if spec.zero_frequency_rate is not None:
        doc["zero_frequency_rate"] = spec.zero_frequency_rate
    return json.dumps(doc, indent=2) + "\n"


# ---------------------------------------------------------------- operators


def dump_operators(ops: TransitionOperatorSet, residuals=None) -> str:
    doc = {
        "node_count": ops.node_count,
        "dim": ops.dim,
        "delta": ops.delta,
        "mode": ops.mode,
        "operators": [
            {"from": t.source + 1, "to": t.target + 1, "label": t.label, "matrix": encode_matrix(t.matrix)}
            for t in ops.terms
        ],
    }
    if residuals is not None:
        doc["residuals"] = [float(r) for r in residuals]
    return json.dumps(doc, indent=2) + "\n"


def parse_operators(text: str) -> TransitionOperatorSet:
    doc = _load_json(text, "operator file")
    try:
        nodes, dim = int(doc["node_count"]), int(doc["dim"])
        delta = float(doc.get("delta", 1.0))
        mode = doc.get("mode", "first_order")
        terms = []
        for k, entry in enumerate(doc["operators"]):
            m = decode_matrix(entry["matrix"], f"operators[{k}].matrix")
            terms.append(KrausTerm(int(entry["from"]) - 1, int(entry["to"]) - 1, m, str(entry.get("label", ""))))
    except KeyError as err:
        raise ParseError(f"operator file: missing field {err}") from None
    except (TypeError, ValueError) as err:
        raise ParseError(f"operator file: {err}") from None
    for t in terms:
        if t.matrix.shape != (dim, dim):
            raise ShapeMismatch(f"operator {t.source + 1}->{t.target + 1} is not {dim}x{dim}")
        if not (0 <= t.source < nodes and 0 <= t.target < nodes):
            raise ShapeMismatch(f"operator {t.source + 1}->{t.target + 1} references a missing node")
    return TransitionOperatorSet(nodes, dim, delta, mode, tuple(terms))


def operators_to_map(ops: TransitionOperatorSet, step_mode: str) -> OQWMap:
    return OQWMap(ops.node_count, ops.dim, ops.terms, step_mode)


# ---------------------------------------------------------------- trajectories


def _num(x: float) -> str:
    if not math.isfinite(x):
        return repr(float(x))
    return f"{x:.16e}"


def trajectory_csv(traj: Trajectory) -> str:
    v = traj.node_count
    header = ["step", "time"] + [f"p{i + 1}" for i in range(v)] + ["trace"] + [f"purity{i + 1}" for i in range(v)]
    lines = [",".join(header)]
    probs = traj.probabilities
    purities = traj.purities
    for n, (t, p, pur) in enumerate(zip(traj.times, probs, purities)):
        row = [str(n), _num(t)] + [_num(x) for x in p] + [_num(float(np.sum(p)))] + [_num(x) for x in pur]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def atomic_write(path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_trajectory(traj: Trajectory, path) -> None:
    atomic_write(path, trajectory_csv(traj))


def read_trajectory(path) -> dict[str, np.ndarray]:
    """Read a trajectory table back as columns (used by tests and tooling)."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.rstrip("\n").split("\n")
    header = lines[0].split(",")
    data = np.array([[float(x) for x in line.split(",")] for line in lines[1:]])
    if data.size == 0:
        data = data.reshape(0, len(header))
    return {name: data[:, k] for k, name in enumerate(header)}

