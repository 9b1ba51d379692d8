"""Walker states: single-node density matrices and node-block states.

A walker on V nodes with an N-dimensional internal ("coin") space is stored
as V unnormalised N x N blocks, rho = sum_i rho_i (x) |i><i|.  Node
probabilities are always derived from the blocks, never stored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadTrace, NotHermitian, NotPSD, ShapeMismatch
from .linalg import as_matrix, frobenius_norm, hermitian_eig, hermiticity_error

CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def validate_density(rho, tol: float = 1e-12) -> DensityMatrix:
    """Check that rho is Hermitian, PSD and of unit trace.

    >>> validate_density(np.eye(2) / 2).dim
    2
    """
    a = as_matrix(rho, "rho")
    if a.shape[0] != a.shape[1]:
        raise ShapeMismatch(f"density matrix must be square, got {a.shape}")
    if hermiticity_error(a) > tol:
        raise NotHermitian("rho")
    w = hermitian_eig(a, tol=tol).eigenvalues
    if w[0] < -tol:
        raise NotPSD(f"rho has eigenvalue {w[0]:.3e}")
    tr = np.trace(a)
    if abs(tr - 1.0) > tol:
        raise BadTrace(f"trace of rho is {tr.real:.12g}, expected 1")
    m = 0.5 * (a + a.conj().T)
    m.setflags(write=False)
    return DensityMatrix(m)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BlockState:
    """Block-diagonal walker state; ``blocks`` has shape (V, N, N)."""

    blocks: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.blocks, dtype=complex)
        if b.ndim != 3 or b.shape[1] != b.shape[2] or b.shape[0] < 1:
            raise ShapeMismatch(f"blocks must have shape (V, N, N), got {b.shape}")
        object.__setattr__(self, "blocks", _freeze(b))

    @classmethod
    def from_blocks(cls, blocks, tol: float = 1e-10) -> "BlockState":
        """Build and validate: every block Hermitian PSD, total trace 1."""
        s = cls(np.asarray([as_matrix(b, f"block {i}") for i, b in enumerate(blocks)]))
        s.check(tol)
        return s

    @classmethod
    def localized(cls, rho, node: int, node_count: int) -> "BlockState":
        """The state rho (x) |node><node| (nodes are 0-based)."""
        r = validate_density(rho, tol=1e-10).matrix
        b = np.zeros((node_count,) + r.shape, dtype=complex)
        b[node] = r
        return cls(b)

    @property
    def node_count(self) -> int:
        return self.blocks.shape[0]

    @property
    def dim(self) -> int:
        return self.blocks.shape[1]

    def traces(self) -> np.ndarray:
        return np.einsum("kii->k", self.blocks).real

    def total_trace(self) -> float:
        return float(np.sum(self.traces()))

    def purities(self) -> np.ndarray:
        """Purity Tr(r^2) of each normalised block r = rho_i / Tr(rho_i).

        Empty nodes report 0.
        """
        tr = self.traces()
        sq = np.einsum("kij,kji->k", self.blocks, self.blocks).real
        out = np.zeros_like(tr)
        nz = tr > 1e-300
        out[nz] = sq[nz] / tr[nz] ** 2
        return out

    def min_eigenvalue(self) -> float:
        return min(float(hermitian_eig(b, tol=1e-8).eigenvalues[0]) for b in self.blocks)

    def check(self, tol: float = 1e-10) -> None:
        for i, b in enumerate(self.blocks):
            scale = max(frobenius_norm(b), 1.0)
            if frobenius_norm(b - b.conj().T) > tol * scale:
                raise NotHermitian(f"block {i}")
            w = hermitian_eig(b, tol=1.0).eigenvalues
            if w[0] < -tol:
                raise NotPSD(f"block {i} has eigenvalue {w[0]:.3e}")
        if abs(self.total_trace() - 1.0) > tol:
            raise BadTrace(f"total trace {self.total_trace():.12g} != 1")

    def scaled(self, factor: float) -> "BlockState":
        return BlockState(self.blocks * factor)

    def to_full(self) -> "FullState":
        v, n = self.node_count, self.dim
        f = np.zeros((n * v, n * v), dtype=complex)
        for i in range(v):
            f[i::v, i::v] = self.blocks[i]
        return FullState(f, v)


@dataclass(frozen=True, eq=False)
class FullState:
    """Dense state on coin (x) position, including node coherences.

    Index convention: the composite index of (coin a, node i) is a * V + i,
    matching np.kron(coin_op, node_op).
    """

    matrix: np.ndarray
    node_count: int

    def __post_init__(self):
        m = as_matrix(self.matrix, "full state")
        if m.shape[0] != m.shape[1] or m.shape[0] % self.node_count:
            raise ShapeMismatch(f"full state shape {m.shape} incompatible with {self.node_count} nodes")
        object.__setattr__(self, "matrix", _freeze(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0] // self.node_count

    def block(self, i: int, j: int) -> np.ndarray:
        """Coin-space block rho_{i,j} multiplying |i><j|."""
        v = self.node_count
        return self.matrix[i::v, j::v]

    def check(self, tol: float = 1e-10) -> None:
        m = self.matrix
        if frobenius_norm(m - m.conj().T) > tol * max(frobenius_norm(m), 1.0):
            raise NotHermitian("full state")
        w = hermitian_eig(m, tol=1.0).eigenvalues
        if w[0] < -tol:
            raise NotPSD(f"full state has eigenvalue {w[0]:.3e}")
        if abs(np.trace(m) - 1.0) > tol:
            raise BadTrace("full state trace != 1")


def node_probabilities(s: BlockState) -> np.ndarray:
    """p_i = Tr(rho_i); round-off excursions within 1e-12 of [0, 1] are clamped.

    Unnormalised states (first-order walks) keep their raw weights above 1.
    """
    p = s.traces()
    if np.any(p < -CLAMP_TOL):
        raise NotPSD(f"negative node probability {p.min():.3e}")
    p = np.where(p < 0.0, 0.0, p)
    return np.where((p > 1.0) & (p <= 1.0 + CLAMP_TOL), 1.0, p)


def block_extract(f: FullState) -> tuple[BlockState, float]:
    """Keep the diagonal node blocks of a full state.

    Returns the block state and the discarded mass, the summed Frobenius
    norms of all off-diagonal node blocks.
    """
    v = f.node_count
    blocks = np.array([f.block(i, i) for i in range(v)])
    discarded = sum(frobenius_norm(f.block(i, j)) for i in range(v) for j in range(v) if i != j)
    return BlockState(blocks), float(discarded)
