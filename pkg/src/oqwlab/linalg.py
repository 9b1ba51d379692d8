"""Dense complex linear algebra: Hermitian eigensystems and PSD square roots.

The eigensolver is a cyclic complex Jacobi method.  It is slow for large
matrices but unconditionally stable, and the walker dimensions handled by
this package are tiny (N <= 16).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, NotHermitian, NotPSD, ShapeMismatch

HERMITIAN_TOL = 1e-12
MAX_SWEEPS = 64


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues in ascending order with orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __iter__(self):
        yield self.eigenvalues
        yield self.eigenvectors

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-d complex array with finite entries."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ShapeMismatch(f"{name} must be a non-empty 2-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ShapeMismatch(f"{name} has non-finite entries")
    return a


def frobenius_norm(m) -> float:
    a = np.asarray(m, dtype=complex)
    return float(np.sqrt(np.sum(a.real**2 + a.imag**2)))


def hermiticity_error(m: np.ndarray) -> float:
    """Relative Frobenius distance to the Hermitian part (absolute if m == 0)."""
    norm = frobenius_norm(m)
    diff = frobenius_norm(m - m.conj().T)
    return diff / norm if norm > 0 else diff


def is_hermitian(m, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(m, dtype=complex)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and hermiticity_error(a) <= tol


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def _off_norm(a: np.ndarray) -> float:
    return frobenius_norm(a - np.diag(np.diag(a)))


def hermitian_eig(m, tol: float = HERMITIAN_TOL, name: str = "matrix") -> EigenSystem:
    """Diagonalise a Hermitian matrix by cyclic Jacobi rotations.

    Each rotation first removes the phase of the pivot element a_pq with a
    diagonal unitary and then applies the real symmetric Jacobi rotation, so
    that the 2x2 pivot block becomes diagonal.

    Raises NotHermitian when ||M - M^H||_F > tol * ||M||_F and NoConvergence
    when the off-diagonal mass has not vanished after MAX_SWEEPS sweeps.
    """
    a = as_matrix(m, name)
    n = a.shape[0]
    if a.shape[1] != n:
        raise ShapeMismatch(f"{name} must be square, got shape {a.shape}")
    if hermiticity_error(a) > tol:
        raise NotHermitian(name, f"relative anti-Hermitian part {hermiticity_error(a):.3e}")

    a = 0.5 * (a + a.conj().T)
    v = np.eye(n, dtype=complex)
    scale = frobenius_norm(a)
    target = 1e-17 * scale

    for _ in range(MAX_SWEEPS):
        if _off_norm(a) <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= 1e-300 or mag <= 1e-20 * scale:
                    continue
                phase = apq / mag
                theta = (a[q, q].real - a[p, p].real) / (2.0 * mag)
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # G = diag(1, conj(phase)) @ [[c, s], [-s, c]]
                g = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ g
                a[idx, :] = g.conj().T @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
                v[:, idx] = v[:, idx] @ g
    else:
        if _off_norm(a) > max(target, 1e-14 * scale):
            raise NoConvergence(f"Jacobi did not converge in {MAX_SWEEPS} sweeps")

    w = np.diag(a).real.copy()
    order = np.argsort(w, kind="stable")
    return EigenSystem(w[order], v[:, order])


def psd_sqrt(m, tol: float = 1e-12, name: str = "matrix") -> np.ndarray:
    """Principal square root of a positive semidefinite Hermitian matrix.

    Eigenvalues down to -tol * ||M||_F are clamped to zero.
    """
    a = as_matrix(m, name)
    w, v = hermitian_eig(a, name=name)
    scale = frobenius_norm(a)
    if w.size and w[0] < -tol * scale:
        raise NotPSD(f"{name} has eigenvalue {w[0]:.3e} < 0")
    root = np.sqrt(np.clip(w, 0.0, None))
    r = (v * root) @ v.conj().T
    return 0.5 * (r + r.conj().T)
