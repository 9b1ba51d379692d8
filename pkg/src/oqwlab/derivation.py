"""From a microscopic two-node system-bath model to walk operators.

The model is a walker with node Hamiltonians ``omega1`` and ``omega2``
coupled to a thermal bosonic bath through ``A (x) (|1><2| + |2><1|) (x) B``.
The bath only enters through the spontaneous emission coefficient
``gamma0`` and the inverse temperature ``beta``.

Pipeline::

    bohr_frequencies  ->  coupling_components  ->  jumps  ->  build_transition_operators

Nodes are 0-based in code: node 0 is the first node ("node 1" in user-facing text), node 1 the second.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import (
    BadParameter,
    DegenerateSpectrum,
    NotHermitian,
    NotPSD,
    ShapeMismatch,
    StepTooLarge,
    UnknownFrequency,
    ZeroFrequency,
)
from .linalg import EigenSystem, as_matrix, dagger, frobenius_norm, hermitian_eig, hermiticity_error, psd_sqrt

Direction = Literal["up", "down"]
KrausMode = Literal["first_order", "exact"]

TWO_LEVEL_PRESET = "two-level-paper"

# coin basis: |e> = (1, 0), |g> = (0, 1)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Microscopic model: node Hamiltonians, coupling operator, bath parameters.

    ``zero_frequency_rate`` is the dephasing rate used for nonzero
    eigenoperators at Bohr frequency 0, where the thermal rate has a pole.
    Leaving it unset makes such components an error.
    """

    omega1: np.ndarray
    omega2: np.ndarray
    coupling_a: np.ndarray
    gamma0: float = 1.0
    beta: float = 1.0
    preset: str | None = None
    zero_frequency_rate: float | None = None
    gap_tol: float = 1e-9

    def __post_init__(self):
        mats = {}
        for name in ("omega1", "omega2", "coupling_a"):
            m = as_matrix(getattr(self, name), name)
            if m.shape[0] != m.shape[1]:
                raise ShapeMismatch(f"{name} must be square")
            if hermiticity_error(m) > 1e-12:
                raise NotHermitian(name)
            m = 0.5 * (m + m.conj().T)
            m.setflags(write=False)
            mats[name] = m
            object.__setattr__(self, name, m)
        if len({m.shape for m in mats.values()}) != 1:
            raise ShapeMismatch("omega1, omega2 and coupling_a must share one dimension")
        if not (self.gamma0 >= 0 and math.isfinite(self.gamma0)):
            raise BadParameter(f"gamma0 must be >= 0, got {self.gamma0}")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise BadParameter(f"beta must be > 0, got {self.beta}")
        if self.zero_frequency_rate is not None and self.zero_frequency_rate < 0:
            raise BadParameter("zero_frequency_rate must be >= 0")
        if self.preset not in (None, TWO_LEVEL_PRESET):
            raise BadParameter(f"unknown preset {self.preset!r}")

    @property
    def dim(self) -> int:
        return self.omega1.shape[0]

    @property
    def omega0(self) -> float:
        """Level splitting of node 1 (the transition frequency of the two-level preset)."""
        w = hermitian_eig(self.omega1).eigenvalues
        return float(w[-1] - w[0])


def two_level_paper_spec(omega0: float = 1.0, beta: float = 0.01, gamma0: float = 1.0) -> ModelSpec:
    """Two-level walker on two nodes with Omega_1 = Omega_2 = (omega0/2) sigma_z.

    The defaults give omega0 * beta = 0.01.  The jump structure is the
    single sigma_-/sigma_+ pair, not the generic decomposition of A.
    """
    h = 0.5 * omega0 * SIGMA_Z
    return ModelSpec(h, h, SIGMA_X, gamma0=gamma0, beta=beta, preset=TWO_LEVEL_PRESET)


# ---------------------------------------------------------------- frequencies


@dataclass(frozen=True)
class BohrFrequency:
    omega: float
    pairs: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class BohrDecomposition:
    """Eigensystems of both node Hamiltonians and their transition frequencies.

    ``up`` holds omega = lambda_i - xi_j >= 0 (pairs (i, j)); ``down`` holds
    omega' = xi_i - lambda_j > 0 (pairs (i, j)).  Zero appears only in ``up``.
    """

    eig1: EigenSystem
    eig2: EigenSystem
    up: tuple[BohrFrequency, ...]
    down: tuple[BohrFrequency, ...]
    tol: float

    def frequencies(self, direction: Direction) -> list[float]:
        return [f.omega for f in self._entries(direction)]

    def _entries(self, direction: Direction) -> tuple[BohrFrequency, ...]:
        if direction == "up":
            return self.up
        if direction == "down":
            return self.down
        raise ValueError(f"direction must be 'up' or 'down', got {direction!r}")

    def lookup(self, omega: float, direction: Direction) -> BohrFrequency:
        for f in self._entries(direction):
            if abs(f.omega - omega) <= self.tol:
                return f
        raise UnknownFrequency(f"{omega!r} is not a {direction} Bohr frequency")


def _check_gaps(w: np.ndarray, gap_tol: float, name: str) -> None:
    if w.size < 2:
        return
    span = w[-1] - w[0]
    gap = np.min(np.diff(w))
    if span <= 0 or gap <= gap_tol * span:
        raise DegenerateSpectrum(f"{name} has a degenerate spectrum (min gap {gap:.3e})")


def _cluster(diffs: list[tuple[float, int, int]], tol: float) -> tuple[BohrFrequency, ...]:
    diffs = sorted(diffs)
    groups: list[list[tuple[float, int, int]]] = []
    for d in diffs:
        if groups and d[0] - groups[-1][0][0] <= tol:
            groups[-1].append(d)
        else:
            groups.append([d])
    out = []
    for g in groups:
        values = [d[0] for d in g]
        omega = 0.0 if min(abs(x) for x in values) <= tol else float(np.mean(values))
        out.append(BohrFrequency(omega, tuple((i, j) for _, i, j in g)))
    return tuple(out)


def bohr_frequencies(omega1, omega2, gap_tol: float = 1e-9) -> BohrDecomposition:
    """Distinct Bohr frequencies between the two node Hamiltonians.

    Frequencies closer than ``gap_tol`` times the energy scale are merged
    into one, and |omega| below that threshold counts as exactly zero.
    """
    e1 = hermitian_eig(omega1, name="omega1")
    e2 = hermitian_eig(omega2, name="omega2")
    _check_gaps(e1.eigenvalues, gap_tol, "omega1")
    _check_gaps(e2.eigenvalues, gap_tol, "omega2")
    lam, xi = e1.eigenvalues, e2.eigenvalues
    scale = max(np.max(np.abs(lam)), np.max(np.abs(xi)), lam[-1] - lam[0], xi[-1] - xi[0])
    tol = gap_tol * scale if scale > 0 else 0.0

    up, down = [], []
    for i, li in enumerate(lam):
        for j, xj in enumerate(xi):
            d = float(li - xj)
            if d >= -tol:
                up.append((max(d, 0.0) if abs(d) <= tol else d, i, j))
    for i, xi_i in enumerate(xi):
        for j, lj in enumerate(lam):
            d = float(xi_i - lj)
            if d > tol:
                down.append((d, i, j))
    return BohrDecomposition(e1, e2, _cluster(up, tol), _cluster(down, tol), tol)


def eigenoperator(a, bd: BohrDecomposition, omega: float, direction: Direction = "up") -> np.ndarray:
    """Frequency component of the coupling operator.

    ``up`` (node 2 -> node 1, raising by omega): sum |lambda_i><lambda_i| A |xi_j><xi_j| over lambda_i - xi_j = omega.
    ``down`` (node 1 -> node 2, raising by omega'): sum |xi_i><xi_i| A |lambda_j><lambda_j| over xi_i - lambda_j = omega'.
    """
    a = as_matrix(a, "coupling_a")
    entry = bd.lookup(omega, direction)
    v1, v2 = bd.eig1.eigenvectors, bd.eig2.eigenvectors
    if direction == "up":
        left, right = v1, v2
    else:
        left, right = v2, v1
    out = np.zeros_like(a)
    for i, j in entry.pairs:
        li, rj = left[:, i], right[:, j]
        out += (li.conj() @ a @ rj) * np.outer(li, rj.conj())
    return out


@dataclass(frozen=True, eq=False)
class Component:
    direction: Direction
    omega: float
    operator: np.ndarray


def coupling_components(a, bd: BohrDecomposition, prune_tol: float = 1e-12) -> list[Component]:
    """All nonzero eigenoperators, up list first, each ascending in frequency."""
    a = as_matrix(a, "coupling_a")
    floor = prune_tol * frobenius_norm(a)
    out = []
    for direction in ("up", "down"):
        for omega in bd.frequencies(direction):
            op = eigenoperator(a, bd, omega, direction)
            if frobenius_norm(op) > floor:
                out.append(Component(direction, omega, op))
    return out


# ---------------------------------------------------------------- bath rates


def bath_rate(gamma0: float, beta: float, omega: float, sign: Literal["plus", "minus"] = "plus",
              omega_floor: float = 0.0) -> float:
    """Thermal rate gamma(+-omega) = (gamma0/2) (coth(beta omega / 2) -+ 1).

    ``plus`` is the absorption rate gamma(omega) = gamma0 * n(omega), ``minus``
    the emission rate gamma(-omega) = gamma0 * (n(omega) + 1), with n the
    Bose occupation.  Written via expm1 so that small beta*omega keeps full
    relative precision.
    """
    if gamma0 < 0 or beta <= 0:
        raise BadParameter("bath_rate needs gamma0 >= 0 and beta > 0")
    if omega <= omega_floor or omega <= 0:
        raise ZeroFrequency(f"thermal rate diverges at omega = {omega!r}")
    x = beta * omega
    n = 0.0 if x > 700 else 1.0 / math.expm1(x)
    absorption = gamma0 * n
    if sign == "plus":
        return absorption
    if sign == "minus":
        return absorption + gamma0
    raise ValueError(f"sign must be 'plus' or 'minus', got {sign!r}")


# ---------------------------------------------------------------- jumps


@dataclass(frozen=True, eq=False)
class Jump:
    """Incoherent hop source -> target with jump operator K at a given rate.

    Contributes rate * K rho_source K^dag to the target block and
    -(rate/2) {K^dag K, rho_source} to the source block.
    """

    source: int
    target: int
    operator: np.ndarray
    rate: float
    label: str


def _fmt(omega: float) -> str:
    return f"{omega:.17g}"


def jumps(spec: ModelSpec) -> list[Jump]:
    """Jump operators and rates of the coupled block master equation."""
    if spec.preset == TWO_LEVEL_PRESET:
        return two_level_jumps(spec.omega0, spec.gamma0, spec.beta)

    bd = bohr_frequencies(spec.omega1, spec.omega2, spec.gap_tol)
    out: list[Jump] = []
    for c in coupling_components(spec.coupling_a, bd):
        op, w = c.operator, c.omega
        if w == 0.0:
            if spec.zero_frequency_rate is None:
                raise ZeroFrequency(
                    "coupling has a nonzero component at Bohr frequency 0; "
                    "set zero_frequency_rate to supply a dephasing rate"
                )
            r_plus = r_minus = spec.zero_frequency_rate
        else:
            r_plus = bath_rate(spec.gamma0, spec.beta, w, "plus")
            r_minus = bath_rate(spec.gamma0, spec.beta, w, "minus")
        if c.direction == "up":
            lab = f"omega={_fmt(w)}"
            # op is the up component: node 2 -> node 1 climbs by w
            out.append(Jump(1, 0, op, r_plus, lab))
            out.append(Jump(0, 1, dagger(op), r_minus, lab))
        else:
            lab = f"omega'={_fmt(w)}"
            # op is the down component: node 1 -> node 2 climbs by w'
            out.append(Jump(1, 0, dagger(op), r_minus, lab))
            out.append(Jump(0, 1, op, r_plus, lab))
    return out


def two_level_jumps(omega0: float, gamma0: float, beta: float) -> list[Jump]:
    """The single transition pair of the two-level example.

    node 2 -> 1 with sigma_- at gamma(-omega0); node 1 -> 2 with sigma_+ at gamma(omega0).
    """
    lab = f"omega={_fmt(omega0)}"
    return [
        Jump(1, 0, SIGMA_MINUS.copy(), bath_rate(gamma0, beta, omega0, "minus"), lab),
        Jump(0, 1, SIGMA_PLUS.copy(), bath_rate(gamma0, beta, omega0, "plus"), lab),
    ]


def max_rate(js: list[Jump]) -> float:
    """Largest rate * ||K||_2^2 among the jumps."""
    best = 0.0
    for j in js:
        s = np.linalg.norm(j.operator, 2) if j.operator.size else 0.0
        best = max(best, j.rate * s * s)
    return best


# ---------------------------------------------------------------- Kraus sets


@dataclass(frozen=True, eq=False)
class KrausTerm:
    source: int
    target: int
    matrix: np.ndarray
    label: str = ""


@dataclass(frozen=True, eq=False)
class TransitionOperatorSet:
    node_count: int
    dim: int
    delta: float
    mode: KrausMode
    terms: tuple[KrausTerm, ...] = field(default_factory=tuple)

    def off_diagonal(self) -> list[KrausTerm]:
        return [t for t in self.terms if t.source != t.target]

    def diagonal(self, node: int) -> np.ndarray:
        for t in self.terms:
            if t.source == t.target == node:
                return t.matrix
        raise KeyError(node)

    def to_map(self, step_mode: str = "strict"):
        from .walk import OQWMap

        return OQWMap(self.node_count, self.dim, self.terms, step_mode)


def kraus_from_jumps(js: list[Jump], dim: int, delta: float, mode: KrausMode = "first_order",
                     node_count: int = 2) -> TransitionOperatorSet:
    """Finite-difference Kraus operators for one time step ``delta``.

    Hops become sqrt(delta * rate) K.  The stay operator of node j is
    I - (delta/2) X_j in ``first_order`` mode and sqrt(I - delta X_j) in
    ``exact`` mode, with X_j = sum over jumps leaving j of rate K^dag K.
    """
    if not delta >= 0:
        raise BadParameter(f"delta must be >= 0, got {delta}")
    if mode not in ("first_order", "exact"):
        raise BadParameter(f"unknown Kraus mode {mode!r}")
    eye = np.eye(dim, dtype=complex)
    leave = np.zeros((node_count, dim, dim), dtype=complex)
    hops = []
    for j in js:
        k = j.operator
        hops.append(KrausTerm(j.source, j.target, math.sqrt(delta * j.rate) * k, j.label))
        leave[j.source] += j.rate * (dagger(k) @ k)

    stays = []
    for node in range(node_count):
        x = delta * leave[node]
        if mode == "first_order":
            b = eye - 0.5 * x
        else:
            try:
                b = psd_sqrt(eye - x, name=f"I - sum B^dag B at node {node + 1}")
            except NotPSD as err:
                raise StepTooLarge(
                    f"delta = {delta:g} is too large for an exact CPTP step at node {node + 1}"
                ) from err
        stays.append(KrausTerm(node, node, b, "stay"))
    return TransitionOperatorSet(node_count, dim, float(delta), mode, tuple(stays + hops))


def build_transition_operators(spec: ModelSpec, delta: float, mode: KrausMode = "first_order") -> TransitionOperatorSet:
    return kraus_from_jumps(jumps(spec), spec.dim, delta, mode)


def normalization_residual(ops) -> np.ndarray:
    """Per-source-node ||sum_i sum_labels B^dag B - I||_F."""
    acc = np.zeros((ops.node_count, ops.dim, ops.dim), dtype=complex)
    for t in ops.terms:
        acc[t.source] += dagger(t.matrix) @ t.matrix
    eye = np.eye(ops.dim)
    return np.array([frobenius_norm(acc[j] - eye) for j in range(ops.node_count)])
