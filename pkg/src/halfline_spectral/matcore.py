"""Dense complex matrix utilities at small fixed dimension.

Everything here is SVD/eigendecomposition based.  The matrices are tiny
(n <= ~8), so robustness wins over speed everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, InconsistentRankError, NotPositiveDefiniteError

# Relative singular-value threshold for numerical rank decisions.
REL_RANK_TOL = 1e-10
# Hermitian deviation considered a caller bug rather than roundoff.
GROSS_ASYMMETRY_TOL = 1e-6


def symmetrize(m: np.ndarray) -> np.ndarray:
    """(M + M^dagger)/2, removing accumulated asymmetric roundoff."""
    m = np.asarray(m, dtype=complex)
    return 0.5 * (m + m.conj().swapaxes(-1, -2))


def hermitian_deviation(m: np.ndarray) -> float:
    m = np.asarray(m, dtype=complex)
    return float(np.linalg.norm(m - m.conj().swapaxes(-1, -2)))


def require_square(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"{name} must be square, got shape {m.shape}")
    return m


def as_hermitian(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Validate rough Hermiticity and return the symmetrized matrix."""
    m = require_square(m, name)
    dev = hermitian_deviation(m)
    scale = 1.0 + float(np.linalg.norm(m))
    if dev > GROSS_ASYMMETRY_TOL * scale:
        raise DimensionMismatchError(
            f"{name} is not Hermitian (deviation {dev:.3e} at scale {scale:.3e})"
        )
    return symmetrize(m)


@dataclass(frozen=True)
class Projection:
    """An orthogonal projection with its rank."""

    matrix: np.ndarray
    rank: int

    def deviation(self) -> float:
        """Frobenius deviation from being an orthogonal projection."""
        p = self.matrix
        return float(
            max(
                np.linalg.norm(p @ p - p),
                np.linalg.norm(p - p.conj().T),
                abs(np.trace(p).real - self.rank),
            )
        )


def moore_penrose(m: np.ndarray, rank_hint: int | None = None, rel_tol: float = REL_RANK_TOL) -> np.ndarray:
    """Moore-Penrose inverse via full SVD.

    With ``rank_hint`` the singular values are truncated to exactly that many
    terms (used where the rank is known a priori, e.g. the tail Gram matrix of
    a bound state whose rank equals its multiplicity).  Otherwise the rank is
    the count of singular values above ``rel_tol`` times the largest.
    """
    m = require_square(m)
    n = m.shape[0]
    u, s, vh = np.linalg.svd(m)
    smax = s[0] if n else 0.0
    if rank_hint is None:
        rank = int(np.count_nonzero(s > rel_tol * smax)) if smax > 0 else 0
    else:
        if not 0 <= rank_hint <= n:
            raise InconsistentRankError(f"rank_hint {rank_hint} outside [0, {n}]")
        if rank_hint > 0 and (smax == 0.0 or s[rank_hint - 1] <= 1e-12 * smax):
            raise InconsistentRankError(
                f"rank_hint {rank_hint} exceeds numerical rank: sigma_{rank_hint} = "
                f"{s[rank_hint - 1] if smax else 0.0:.3e} vs sigma_1 = {smax:.3e}"
            )
        rank = rank_hint
    if rank == 0:
        return np.zeros_like(m)
    return (vh[:rank].conj().T / s[:rank]) @ u[:, :rank].conj().T


def moore_penrose_batch(m: np.ndarray, rank: int, rel_floor: float = 1e-12) -> np.ndarray:
    """Pseudoinverse of a stack of square matrices at a fixed known rank.

    Raises if the kept singular values fall to the roundoff floor anywhere in
    the stack, which would mean the assumed rank is wrong.
    """
    m = np.asarray(m, dtype=complex)
    n = m.shape[-1]
    if not 0 < rank <= n:
        raise InconsistentRankError(f"rank {rank} outside (0, {n}]")
    u, s, vh = np.linalg.svd(m)
    smax = s[..., 0]
    if np.any(s[..., rank - 1] <= rel_floor * smax):
        worst = int(np.argmin(s[..., rank - 1] / np.where(smax > 0, smax, 1.0)))
        raise InconsistentRankError(
            f"assumed rank {rank} collapses in batch entry {worst}: "
            f"sigma_{rank}/sigma_1 = {s[worst, rank - 1] / smax[worst]:.3e}"
        )
    uk = u[..., :, :rank]
    vk = vh[..., :rank, :]
    return (vk.conj().swapaxes(-1, -2) / s[..., None, :rank]) @ uk.conj().swapaxes(-1, -2)


def positive_sqrt(m: np.ndarray) -> np.ndarray:
    """Unique positive square root of a Hermitian positive matrix."""
    m = as_hermitian(m)
    w, v = np.linalg.eigh(m)
    if w[0] <= 1e-12 * max(w[-1], 0.0) or w[-1] <= 0.0:
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite: eigenvalues in [{w[0]:.3e}, {w[-1]:.3e}]"
        )
    return symmetrize((v * np.sqrt(w)) @ v.conj().T)


def positive_inv_sqrt(m: np.ndarray) -> np.ndarray:
    """Inverse positive square root of a Hermitian positive matrix."""
    m = as_hermitian(m)
    w, v = np.linalg.eigh(m)
    if w[0] <= 1e-12 * max(w[-1], 0.0) or w[-1] <= 0.0:
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite: eigenvalues in [{w[0]:.3e}, {w[-1]:.3e}]"
        )
    return symmetrize((v / np.sqrt(w)) @ v.conj().T)


def kernel_projection(m: np.ndarray, tol: float) -> Projection:
    """Orthogonal projection onto the span of right-singular vectors with
    sigma < tol * sigma_max."""
    m = require_square(m)
    if tol <= 0:
        raise ValueError("tol must be positive")
    _, s, vh = np.linalg.svd(m)
    smax = s[0] if m.shape[0] else 0.0
    if smax == 0.0:
        return Projection(np.eye(m.shape[0], dtype=complex), m.shape[0])
    mask = s < tol * smax
    rank = int(np.count_nonzero(mask))
    if rank == 0:
        return Projection(np.zeros_like(m), 0)
    vk = vh[mask]
    return Projection(symmetrize(vk.conj().T @ vk), rank)


def spectral_norm(m: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(m, dtype=complex), ord=2))
