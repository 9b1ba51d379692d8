"""Continuous-time counterpart of the walk: coupled block master equations.

For block states the master equation closes on the node blocks:

    d rho_t / dt += rate K rho_s K^dag
    d rho_s / dt -= (rate / 2) {K^dag K, rho_s}

for each jump s -> t.  The two-level generator is also written out by hand
(``form="two_level"``) so the generic route has an independent check.
No coherent -i[H, rho] term is included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .derivation import (
    SIGMA_MINUS,
    SIGMA_PLUS,
    TWO_LEVEL_PRESET,
    Jump,
    ModelSpec,
    bath_rate,
    build_transition_operators,
    jumps,
    max_rate,
)
from .errors import BadParameter, NotConverged, ShapeMismatch, StepUnstable
from .linalg import dagger, frobenius_norm, hermitian_eig
from .states import BlockState
from .walk import Trajectory, run_walk

FORMS = ("generic", "two_level")


@dataclass(frozen=True, eq=False)
class GeneratorSpec:
    """Generator of the block master equation.

    ``generic`` sums over ``jumps``; ``two_level`` is the hand-written
    two-node, two-level equation with rates ``absorption`` = gamma(omega0)
    and ``emission`` = gamma(-omega0).
    """

    node_count: int
    dim: int
    form: str = "generic"
    jumps: tuple[Jump, ...] = ()
    absorption: float = 0.0
    emission: float = 0.0
    gamma0: float = 1.0

    def __post_init__(self):
        if self.form not in FORMS:
            raise BadParameter(f"generator form must be one of {FORMS}")
        if self.form == "two_level" and (self.node_count, self.dim) != (2, 2):
            raise ShapeMismatch("the two-level generator acts on 2 nodes x 2 levels")
        rates = [j.rate for j in self.jumps] + [self.absorption, self.emission]
        if any(not (r >= 0) for r in rates):
            raise BadParameter("rates must be non-negative")
        for j in self.jumps:
            if j.operator.shape != (self.dim, self.dim):
                raise ShapeMismatch("jump operator dimension mismatch")

    @classmethod
    def from_model(cls, spec: ModelSpec, form: str = "generic") -> "GeneratorSpec":
        if form == "two_level":
            if spec.preset != TWO_LEVEL_PRESET:
                raise BadParameter("the two_level form needs the two-level preset")
            w0 = spec.omega0
            return cls(2, 2, "two_level",
                       absorption=bath_rate(spec.gamma0, spec.beta, w0, "plus"),
                       emission=bath_rate(spec.gamma0, spec.beta, w0, "minus"),
                       gamma0=spec.gamma0)
        return cls(2, spec.dim, "generic", tuple(jumps(spec)), gamma0=spec.gamma0)

    def rate_scale(self) -> float:
        if self.form == "two_level":
            return max(self.absorption, self.emission)
        return max_rate(list(self.jumps))


@dataclass(frozen=True)
class OdeConfig:
    dt: float
    t_final: float
    stride: int = 1

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise BadParameter("dt must be > 0")
        if not self.t_final >= self.dt:
            raise BadParameter("t_final must be >= dt")
        if self.stride < 1:
            raise BadParameter("stride must be >= 1")


def _generic(g: GeneratorSpec, rho: np.ndarray) -> np.ndarray:
    out = np.zeros_like(rho)
    for j in g.jumps:
        k = j.operator
        kd = dagger(k)
        src = rho[j.source]
        out[j.target] += j.rate * (k @ src @ kd)
        kk = kd @ k
        out[j.source] -= 0.5 * j.rate * (kk @ src + src @ kk)
    return out


def _two_level(g: GeneratorSpec, rho: np.ndarray) -> np.ndarray:
    sm, sp = SIGMA_MINUS, SIGMA_PLUS
    ground = sm @ sp
    excited = sp @ sm
    r1, r2 = rho
    d1 = g.emission * (sm @ r2 @ sp) - 0.5 * g.absorption * (ground @ r1 + r1 @ ground)
    d2 = g.absorption * (sp @ r1 @ sm) - 0.5 * g.emission * (excited @ r2 + r2 @ excited)
    return np.array([d1, d2])


def generator_apply(g: GeneratorSpec, s) -> np.ndarray:
    """Time derivative of the node blocks, shape (V, N, N)."""
    rho = s.blocks if isinstance(s, BlockState) else np.asarray(s, dtype=complex)
    if rho.shape != (g.node_count, g.dim, g.dim):
        raise ShapeMismatch(f"state shape {rho.shape} does not match generator ({g.node_count}, {g.dim}, {g.dim})")
    if g.form == "two_level":
        return _two_level(g, rho)
    return _generic(g, rho)


def generator_matrix(g: GeneratorSpec) -> np.ndarray:
    """The generator as a dense matrix on the flattened blocks."""
    n = g.node_count * g.dim * g.dim
    shape = (g.node_count, g.dim, g.dim)
    cols = []
    for k in range(n):
        e = np.zeros(n, dtype=complex)
        e[k] = 1.0
        cols.append(generator_apply(g, e.reshape(shape)).ravel())
    return np.array(cols).T


def _rk4_steps(lmat: np.ndarray, y: np.ndarray, h: float, count: int) -> np.ndarray:
    for _ in range(count):
        k1 = lmat @ y
        k2 = lmat @ (y + 0.5 * h * k1)
        k3 = lmat @ (y + 0.5 * h * k2)
        k4 = lmat @ (y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.max(np.abs(y)) <= 1e6:
            raise StepUnstable(f"state blew up with dt = {h:g}; reduce dt")
    return y


def rk4_integrate(g: GeneratorSpec, init: BlockState, cfg: OdeConfig) -> Trajectory:
    """Classical fixed-step fourth-order Runge-Kutta.

    Samples every ``cfg.stride`` steps and at ``t_final``; a final partial
    step lands exactly on ``t_final`` when it is not a multiple of ``dt``.
    """
    shape = (g.node_count, g.dim, g.dim)
    if init.blocks.shape != shape:
        raise ShapeMismatch("initial state does not match generator")
    lmat = generator_matrix(g)
    nfull = int(math.floor(cfg.t_final / cfg.dt + 1e-9))
    tail = cfg.t_final - nfull * cfg.dt
    if tail <= 1e-12 * cfg.t_final:
        tail = 0.0

    y = init.blocks.ravel().copy()
    states, times = [init], [0.0]
    done = 0
    while done < nfull:
        chunk = min(cfg.stride, nfull - done)
        y = _rk4_steps(lmat, y, cfg.dt, chunk)
        done += chunk
        states.append(BlockState(y.reshape(shape)))
        times.append(done * cfg.dt)
    if tail:
        y = _rk4_steps(lmat, y, tail, 1)
        states.append(BlockState(y.reshape(shape)))
        times.append(cfg.t_final)
    raw = np.array([s.total_trace() for s in states])
    return Trajectory(states, np.array(times), raw, {"kind": "rk4", "dt": cfg.dt, "form": g.form})


def steady_state(g: GeneratorSpec, init: BlockState, tol: float = 1e-10, dt: float | None = None,
                 max_steps: int = 2_000_000, check_every: int = 200) -> BlockState:
    """Integrate until ||d rho/dt||_F <= tol * gamma0 and return the settled state."""
    scale = g.gamma0 if g.gamma0 > 0 else 1.0
    rate = g.rate_scale()
    if dt is None:
        dt = 0.1 / rate if rate > 0 else 1.0
    lmat = generator_matrix(g)
    shape = init.blocks.shape
    y = init.blocks.ravel().copy()
    steps = 0
    while True:
        if frobenius_norm(lmat @ y) <= tol * scale:
            return BlockState(y.reshape(shape))
        if steps >= max_steps:
            raise NotConverged(f"no steady state within {max_steps} steps of dt = {dt:g}")
        y = _rk4_steps(lmat, y, dt, check_every)
        steps += check_every


def ground_state_on_node(spec: ModelSpec, node: int = 0) -> BlockState:
    """Lowest eigenstate of the node-1 Hamiltonian placed on ``node``."""
    w, v = hermitian_eig(spec.omega1)
    psi = v[:, 0]
    return BlockState.localized(np.outer(psi, psi.conj()), node, 2)


@dataclass(eq=False)
class Comparison:
    deviation: float
    per_step: np.ndarray
    discrete: Trajectory
    continuous: Trajectory
    meta: dict = field(default_factory=dict)


def compare_discrete_continuous(spec: ModelSpec, delta: float, steps: int, init: BlockState | None = None,
                                substeps: int = 10, step_mode: str = "first_order_warn") -> Comparison:
    """Run the first-order walk and the RK4 master equation side by side.

    The integrator uses dt = delta / substeps and is sampled on the walk's
    time grid.  Reports the largest node-probability difference over all
    steps.
    """
    js = jumps(spec)
    rate = max_rate(js)
    if not delta * rate < 0.1:
        raise BadParameter(f"delta * max_rate = {delta * rate:.3g}; need < 0.1 for first-order operators")
    if init is None:
        init = ground_state_on_node(spec)
    ops = build_transition_operators(spec, delta, "first_order")
    disc = run_walk(ops.to_map(step_mode), init, steps, delta)
    gen = GeneratorSpec(2, spec.dim, "generic", tuple(js), gamma0=spec.gamma0)
    if steps == 0:
        cont = Trajectory([init], np.zeros(1), np.ones(1), {"kind": "rk4"})
    else:
        cont = rk4_integrate(gen, init, OdeConfig(delta / substeps, delta * steps, substeps))
    per = np.max(np.abs(disc.probabilities - cont.probabilities), axis=1)
    return Comparison(float(per.max()), per, disc, cont,
                      {"delta": delta, "steps": steps, "substeps": substeps, "step_mode": step_mode})
