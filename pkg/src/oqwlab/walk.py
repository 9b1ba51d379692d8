"""Discrete-time open quantum walks on finite graphs.

A walk is a family of Kraus matrices B attached to ordered edges
(source -> target).  One step maps the block state as

    rho_i' = sum_j sum_labels B rho_j B^dag      (B on edge j -> i)

Stepping works on the node blocks directly; the dilated operators
B (x) |i><j| are only built for full-state steps and Choi matrices.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .derivation import KrausTerm
from .errors import BadParameter, NotConverged, ShapeMismatch, ValidationError, ZeroTrace
from .linalg import dagger, frobenius_norm
from .states import BlockState, FullState, node_probabilities

log = logging.getLogger(__name__)

STEP_MODES = ("strict", "renormalized", "first_order_warn")
STRICT_TOL = 1e-10

_MODE_ALIASES = {"first-order": "first_order_warn", "first_order": "first_order_warn"}


def _normalise_mode(mode: str) -> str:
    mode = _MODE_ALIASES.get(mode, mode)
    if mode not in STEP_MODES:
        raise BadParameter(f"step mode must be one of {STEP_MODES}, got {mode!r}")
    return mode


class OQWMap:
    """Open quantum walk on ``node_count`` nodes with ``dim``-level coin."""

    def __init__(self, node_count: int, dim: int, terms: Sequence[KrausTerm], step_mode: str = "strict",
                 tol: float = STRICT_TOL):
        self.node_count = int(node_count)
        self.dim = int(dim)
        self.step_mode = _normalise_mode(step_mode)
        self.terms = tuple(terms)
        for t in self.terms:
            if t.matrix.shape != (self.dim, self.dim):
                raise ShapeMismatch(f"Kraus matrix on edge {t.source}->{t.target} has shape {t.matrix.shape}")
            if not (0 <= t.source < self.node_count and 0 <= t.target < self.node_count):
                raise ShapeMismatch(f"edge {t.source}->{t.target} outside {self.node_count} nodes")
        if self.terms:
            self._mats = np.array([t.matrix for t in self.terms], dtype=complex)
        else:
            self._mats = np.zeros((0, self.dim, self.dim), dtype=complex)
        self._src = np.array([t.source for t in self.terms], dtype=int)
        self._tgt = np.array([t.target for t in self.terms], dtype=int)

        self.residuals = validate_kraus_normalization(self)
        worst = float(self.residuals.max()) if self.residuals.size else 0.0
        if self.step_mode == "strict" and worst > tol:
            raise ValidationError(f"Kraus family is not normalised (max residual {worst:.3e} > {tol:g})")
        if self.step_mode == "first_order_warn" and worst > 1e-6:
            log.warning("Kraus family is only approximately normalised (max residual %.3e)", worst)

    def with_mode(self, step_mode: str) -> "OQWMap":
        return OQWMap(self.node_count, self.dim, self.terms, step_mode)

    def dilated(self) -> list[np.ndarray]:
        """Operators B (x) |target><source| on coin (x) position."""
        out = []
        for t in self.terms:
            e = np.zeros((self.node_count, self.node_count))
            e[t.target, t.source] = 1.0
            out.append(np.kron(t.matrix, e))
        return out


def validate_kraus_normalization(m: OQWMap, tol: float | None = None) -> np.ndarray:
    """Per-node residual ||sum_i sum_labels B^dag B - I||_F of the Kraus family.

    With ``tol`` given, raises ValidationError if any residual exceeds it.
    """
    acc = np.zeros((m.node_count, m.dim, m.dim), dtype=complex)
    for t in m.terms:
        acc[t.source] += dagger(t.matrix) @ t.matrix
    eye = np.eye(m.dim)
    res = np.array([frobenius_norm(acc[j] - eye) for j in range(m.node_count)])
    if tol is not None and res.size and res.max() > tol:
        raise ValidationError(f"Kraus normalisation residual {res.max():.3e} exceeds {tol:g}")
    return res


def _apply(m: OQWMap, blocks: np.ndarray) -> np.ndarray:
    if blocks.shape[0] != m.node_count or blocks.shape[1:] != (m.dim, m.dim):
        raise ShapeMismatch(f"state blocks {blocks.shape} do not fit a {m.node_count}-node, dim {m.dim} walk")
    out = np.zeros_like(blocks)
    if m._mats.shape[0]:
        moved = m._mats @ blocks[m._src] @ dagger(m._mats)
        np.add.at(out, m._tgt, moved)
    return out


def _step(m: OQWMap, blocks: np.ndarray) -> tuple[np.ndarray, float]:
    out = _apply(m, blocks)
    raw = float(np.einsum("kii->", out).real)
    if m.step_mode == "renormalized":
        if raw <= 1e-300:
            raise ZeroTrace("state vanished during a renormalised step")
        out = out / raw
    return out, raw


def oqw_step(m: OQWMap, s: BlockState) -> BlockState:
    """One walk step; renormalised maps divide by the total trace afterwards."""
    return BlockState(_step(m, s.blocks)[0])


def oqw_step_full(m: OQWMap, f: FullState) -> FullState:
    """One step on a dense coin (x) position state, using dilated operators.

    The result is block diagonal in position even when ``f`` carries node
    coherences.
    """
    if f.node_count != m.node_count or f.dim != m.dim:
        raise ShapeMismatch("full state does not match the walk dimensions")
    out = np.zeros_like(f.matrix)
    for op in m.dilated():
        out += op @ f.matrix @ op.conj().T
    if m.step_mode == "renormalized":
        out = out / np.trace(out).real
    return FullState(out, m.node_count)


@dataclass(eq=False)
class Trajectory:
    """Recorded states with their times; row 0 is the initial state.

    ``raw_traces`` holds the total trace of each step before any
    renormalisation (1.0 for the initial row).
    """

    states: list[BlockState]
    times: np.ndarray
    raw_traces: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def node_count(self) -> int:
        return self.states[0].node_count

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([node_probabilities(s) for s in self.states])

    @property
    def traces(self) -> np.ndarray:
        return np.array([s.total_trace() for s in self.states])

    @property
    def purities(self) -> np.ndarray:
        return np.array([s.purities() for s in self.states])


def run_walk(m: OQWMap, init: BlockState, steps: int, delta: float = 1.0) -> Trajectory:
    """Iterate the walk ``steps`` times; ``delta`` only sets the time column."""
    if steps < 0:
        raise BadParameter("steps must be >= 0")
    blocks = init.blocks
    states = [init]
    raw = [init.total_trace()]
    for _ in range(steps):
        blocks, r = _step(m, blocks)
        states.append(BlockState(blocks))
        raw.append(r)
    if m.step_mode == "first_order_warn" and steps:
        drift = abs(states[-1].total_trace() - init.total_trace())
        if drift > 1e-6:
            log.warning("trace drifted by %.3e over %d first-order steps", drift, steps)
    times = delta * np.arange(steps + 1, dtype=float)
    return Trajectory(states, times, np.array(raw), {"kind": "walk", "step_mode": m.step_mode, "delta": delta})


def mixing_time(traj: Trajectory, eps: float) -> int:
    """First step after which node probabilities stay within ``eps`` of the last row.

    The last row is trivially within ``eps`` of itself; a trajectory that
    only settles there raises NotConverged.
    """
    if len(traj) < 2:
        raise BadParameter("mixing_time needs at least two recorded states")
    p = traj.probabilities
    dist = np.max(np.abs(p - p[-1]), axis=1)
    outside = np.nonzero(dist > eps)[0]
    n = 0 if outside.size == 0 else int(outside[-1]) + 1
    if n >= len(traj) - 1 and n > 0:
        raise NotConverged(f"node probabilities did not settle within eps = {eps:g}")
    return n


def choi_matrix(m: OQWMap) -> np.ndarray:
    """Choi matrix sum_ab |a><b| (x) Phi(|a><b|) of the dilated walk map."""
    d = m.dim * m.node_count
    ops = m.dilated()
    choi = np.zeros((d * d, d * d), dtype=complex)
    for a in range(d):
        for b in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[a, b] = 1.0
            img = sum(op @ e @ op.conj().T for op in ops)
            choi[a * d:(a + 1) * d, b * d:(b + 1) * d] = img
    return choi


def random_kraus_map(rng: np.random.Generator, node_count: int, dim: int, max_labels: int = 2,
                     step_mode: str = "strict") -> OQWMap:
    """Random normalised walk: each node hops to a random subset of nodes.

    The Kraus family of each source node is a random isometry cut into
    N x N blocks, so it satisfies sum B^dag B = I exactly up to round-off.
    """
    terms = []
    for src in range(node_count):
        k = int(rng.integers(1, node_count + 1))
        targets = rng.choice(node_count, size=k, replace=False)
        edges = [(int(t), lab) for t in targets for lab in range(int(rng.integers(1, max_labels + 1)))]
        g = rng.normal(size=(len(edges) * dim, dim)) + 1j * rng.normal(size=(len(edges) * dim, dim))
        q, _ = np.linalg.qr(g)
        for n, (tgt, lab) in enumerate(edges):
            terms.append(KrausTerm(src, tgt, q[n * dim:(n + 1) * dim], f"r{lab}"))
    return OQWMap(node_count, dim, terms, step_mode)


def random_block_state(rng: np.random.Generator, node_count: int, dim: int) -> BlockState:
    """Random PSD blocks with total trace one."""
    g = rng.normal(size=(node_count, dim, dim)) + 1j * rng.normal(size=(node_count, dim, dim))
    blocks = g @ dagger(g)
    blocks *= rng.dirichlet(np.ones(node_count))[:, None, None] / np.einsum("kii->k", blocks).real[:, None, None]
    return BlockState(blocks)


def random_full_state(rng: np.random.Generator, node_count: int, dim: int) -> FullState:
    d = node_count * dim
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    return FullState(rho / np.trace(rho).real, node_count)
