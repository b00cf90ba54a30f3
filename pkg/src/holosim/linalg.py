"""Dense complex linear algebra for small Hermitian problems.

Everything here operates on plain numpy arrays (complex128). Matrices are
small (dim <= 16 for the shipped models), so direct dense LAPACK routines
are used throughout; determinism matters more than scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Tolerances (absolute, relative to max(1, scale) where noted).
HERMITIAN_TOL = 1e-10
EIG_TOL = 1e-10
DEGENERACY_TOL = 1e-9
RANK_TOL = 1e-12
UNITARITY_TOL = 1e-12
NORM_TOL = 1e-12


class NonHermitianError(ValueError):
    """Input matrix fails the Hermiticity check; carries the defect."""

    def __init__(self, defect: float, tol: float):
        self.defect = defect
        super().__init__(
            f"matrix is not Hermitian: max |M - M^dag| entry = {defect:.3e} "
            f"exceeds tolerance {tol:.1e}"
        )


class RankDeficientError(ValueError):
    """Matrix is numerically singular; carries the offending singular value."""

    def __init__(self, sigma_min: float, tol: float):
        self.sigma_min = sigma_min
        super().__init__(
            f"matrix is numerically rank-deficient: smallest singular value "
            f"{sigma_min:.3e} <= {tol:.1e}"
        )


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conjugate(np.swapaxes(m, -1, -2))


def max_abs(m: np.ndarray) -> float:
    """Max-entry norm, used for all defect and matrix-distance reporting."""
    return float(np.max(np.abs(m))) if np.asarray(m).size else 0.0


def hermiticity_defect(m: np.ndarray) -> float:
    return max_abs(m - dagger(m))


def norm_scale(m: np.ndarray) -> float:
    """Scale used for relative tolerances: max(1, largest entry magnitude)."""
    return max(1.0, max_abs(m))


def normalize_state(v: np.ndarray) -> np.ndarray:
    """Return v / ||v||; rejects (near-)zero vectors."""
    v = np.asarray(v, dtype=complex)
    n = float(np.linalg.norm(v))
    if n < RANK_TOL:
        raise ValueError("cannot normalize a zero state vector")
    return v / n


def gauge_fix(v: np.ndarray) -> np.ndarray:
    """Rephase v so its largest-magnitude component is real positive.

    Ties are broken by the lowest index (np.argmax). This is the fixed,
    deterministic gauge convention used for eigenvectors; it carries no
    physical meaning on its own.
    """
    v = np.asarray(v, dtype=complex)
    k = int(np.argmax(np.abs(v)))
    pivot = v[k]
    if abs(pivot) < RANK_TOL:
        return v.copy()
    return v * (np.conjugate(pivot) / abs(pivot))


@dataclass
class EigenDecomposition:
    """Spectral decomposition of a Hermitian matrix.

    eigenvalues are sorted ascending; eigenvectors[:, k] belongs to
    eigenvalues[k] and carries the deterministic gauge of gauge_fix. Within
    a degenerate cluster only the spanned subspace is meaningful; use
    clusters() and treat each block as a frame.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def clusters(self, scale: float, tol: float = DEGENERACY_TOL) -> list[range]:
        """Group eigenvalue indices whose gaps fall below tol * scale."""
        gaps = np.diff(self.eigenvalues)
        blocks: list[range] = []
        start = 0
        for i, g in enumerate(gaps):
            if g >= tol * max(1.0, scale):
                blocks.append(range(start, i + 1))
                start = i + 1
        blocks.append(range(start, self.dim))
        return blocks


def check_hermitian(h: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    defect = hermiticity_defect(h)
    bound = tol * norm_scale(h)
    if defect >= bound:
        raise NonHermitianError(defect, bound)
    return h


def eigh(h: np.ndarray) -> EigenDecomposition:
    """Hermitian eigendecomposition with deterministic ordering and gauge.

    Eigenvalues ascending (LAPACK order); each eigenvector rephased by
    gauge_fix. Rejects non-Hermitian input with the measured defect.
    """
    h = check_hermitian(h)
    w, v = np.linalg.eigh(h)
    for k in range(v.shape[1]):
        v[:, k] = gauge_fix(v[:, k])
    return EigenDecomposition(eigenvalues=w, eigenvectors=v)


def eigh_batch(hs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched Hermitian eigendecomposition over a (..., n, n) stack.

    No per-vector gauge fixing (call sites that need smooth frames align
    gauges themselves); returns (eigenvalues, eigenvectors) LAPACK-ordered.
    """
    hs = np.asarray(hs, dtype=complex)
    defect = max_abs(hs - dagger(hs))
    bound = HERMITIAN_TOL * norm_scale(hs)
    if defect >= bound:
        raise NonHermitianError(defect, bound)
    return np.linalg.eigh(hs)


def nearest_unitary(m: np.ndarray) -> np.ndarray:
    """Polar factor of m: the unitary minimizing ||U - m||.

    Computed from the SVD m = u s v^dag as U = u v^dag. Rejects matrices
    whose smallest singular value is at the numerical-rank floor.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    u, s, vh = np.linalg.svd(m)
    tol = RANK_TOL * max(1.0, float(s[0]))
    if s[-1] <= tol:
        raise RankDeficientError(float(s[-1]), tol)
    return u @ vh


def unitarity_defect(m: np.ndarray) -> float:
    """Max-entry norm of M^dag M - I; zero iff M is unitary."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    eye = np.eye(m.shape[0], dtype=complex)
    return max_abs(dagger(m) @ m - eye)


def wrap_angle(x) -> np.ndarray | float:
    """Wrap angle(s) to the principal interval (-pi, pi]."""
    x = np.asarray(x, dtype=float)
    wrapped = -np.mod(-x + np.pi, 2.0 * np.pi) + np.pi
    if wrapped.ndim == 0:
        return float(wrapped)
    return wrapped


def angle_distance(a: float, b: float) -> float:
    """Circular distance |a - b| mod 2pi, in [0, pi]."""
    return abs(wrap_angle(a - b))
