"""Integration of the matrix Schrodinger equation -psi'' + V psi = k^2 psi.

The integrator is the classical 4th-order one-step method on the first-order
2n x 2n system (psi, psi').  On each grid cell the potential is constant, so
one RK4 step is a linear map given explicitly by the degree-4 Taylor
polynomial of exp(h S) with S = [[0, I], [V - k^2, 0]].  Building those
per-cell step matrices up front lets whole propagations reduce to associative
matrix products, which vectorizes over cells and over batches of k values;
the result is the same method, evaluated without a Python-level step loop.

Sign conventions: the Jost solution decays like e^{-kappa x} at bound-state
wavenumbers k = i kappa, so it is integrated backwards from the support edge
(growing modes decay backwards); the regular solution is integrated forwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PropagationError
from .model import BoundaryPair, PotentialGrid

# Target scratch size for batched transfer-matrix stacks (bytes).
_CHUNK_BYTES = 6e7


@dataclass(frozen=True)
class MatrixSolution:
    """An n x n matrix solution with its derivative, sampled on the grid."""

    k: complex
    x: np.ndarray           # (m + 1,) grid nodes
    psi: np.ndarray         # (m + 1, n, n)
    psi_prime: np.ndarray   # (m + 1, n, n)

    @property
    def n(self) -> int:
        return self.psi.shape[-1]

    def at_zero(self) -> tuple[np.ndarray, np.ndarray]:
        return self.psi[0], self.psi_prime[0]

    def at_end(self) -> tuple[np.ndarray, np.ndarray]:
        return self.psi[-1], self.psi_prime[-1]


def _step_matrices(cells: np.ndarray, k: np.ndarray | complex, step: float) -> np.ndarray:
    """Per-cell RK4 one-step matrices, shape (..., m, 2n, 2n).

    ``cells`` has shape (m, n, n); ``k`` is a scalar or a 1-d batch.
    """
    cells = np.asarray(cells, dtype=complex)
    m, n = cells.shape[0], cells.shape[-1]
    k2 = np.asarray(k, dtype=complex) ** 2
    eye = np.eye(n, dtype=complex)
    if k2.ndim == 0:
        w = cells - k2 * eye
    else:
        w = cells[None, :, :, :] - k2[:, None, None, None] * eye
    w2 = w @ w
    p = eye + (step**2 / 2.0) * w + (step**4 / 24.0) * w2
    q = step * eye + (step**3 / 6.0) * w
    r = step * w + (step**3 / 6.0) * w2
    t = np.empty(w.shape[:-2] + (2 * n, 2 * n), dtype=complex)
    t[..., :n, :n] = p
    t[..., :n, n:] = q
    t[..., n:, :n] = r
    t[..., n:, n:] = p
    return t


def _cell_transfers(cells: np.ndarray, k, h: float, substeps: int, backward: bool) -> np.ndarray:
    if substeps < 1:
        raise PropagationError(f"substeps must be >= 1, got {substeps}")
    step = (-h if backward else h) / substeps
    if not np.isfinite(step) or step == 0.0:
        raise PropagationError(f"step size underflow: h={h}, substeps={substeps}")
    t = _step_matrices(cells, k, step)
    out = t
    for _ in range(substeps - 1):
        out = t @ out
    return out


def ordered_product(t: np.ndarray) -> np.ndarray:
    """Ordered product t[..., m-1] @ ... @ t[..., 0] by pairwise reduction."""
    while t.shape[-3] > 1:
        m = t.shape[-3]
        tail = t[..., m - 1:, :, :] if m % 2 else None
        body = t[..., : m - (m % 2), :, :]
        body = np.matmul(body[..., 1::2, :, :], body[..., 0::2, :, :])
        t = body if tail is None else np.concatenate([body, tail], axis=-3)
    return t[..., 0, :, :]


def prefix_products(t: np.ndarray) -> np.ndarray:
    """Inclusive ordered prefixes: out[i] = t[i] @ ... @ t[0]."""
    m = t.shape[-3]
    if m == 1:
        return t.copy()
    if m % 2:
        out = np.empty_like(t)
        out[..., : m - 1, :, :] = prefix_products(t[..., : m - 1, :, :])
        out[..., m - 1, :, :] = np.matmul(t[..., m - 1, :, :], out[..., m - 2, :, :])
        return out
    even = t[..., 0::2, :, :]
    odd = t[..., 1::2, :, :]
    pair_prefix = prefix_products(np.matmul(odd, even))
    out = np.empty_like(t)
    out[..., 1::2, :, :] = pair_prefix
    out[..., 0, :, :] = even[..., 0, :, :]
    out[..., 2::2, :, :] = np.matmul(even[..., 1:, :, :], pair_prefix[..., :-1, :, :])
    return out


def _require_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise PropagationError(f"non-finite values in {what} (overflow or invalid input)")


def propagate_forward(v: PotentialGrid, k: complex, psi0: np.ndarray, psi0_prime: np.ndarray,
                      substeps: int = 1) -> MatrixSolution:
    """Integrate forwards over [0, x_max] from initial data at x = 0."""
    n = v.n
    y0 = np.concatenate([np.asarray(psi0, dtype=complex), np.asarray(psi0_prime, dtype=complex)], axis=0)
    with np.errstate(over="ignore", invalid="ignore"):
        t = _cell_transfers(v.cells, complex(k), v.h, substeps, backward=False)
        g = prefix_products(t)
        y = np.concatenate([y0[None], g @ y0], axis=0)
    _require_finite(y, f"forward propagation at k={k}")
    return MatrixSolution(complex(k), v.nodes, y[:, :n, :], y[:, n:, :])


def regular_solution(v: PotentialGrid, bc: BoundaryPair, k: complex, substeps: int = 1) -> MatrixSolution:
    """The solution with psi(0) = A, psi'(0) = B."""
    check = bc.validate()
    if not check:
        raise PropagationError(f"invalid boundary pair: {check.message}")
    return propagate_forward(v, k, bc.a, bc.b, substeps=substeps)


def _jost_end_data(n: int, k: complex, x_end: float) -> np.ndarray:
    phase = np.exp(1j * k * x_end)
    if not np.isfinite(phase):
        raise PropagationError(f"e^(ik x_max) overflows at k={k}, x_max={x_end}")
    eye = np.eye(n, dtype=complex)
    return np.concatenate([phase * eye, 1j * k * phase * eye], axis=0)


def jost_solution(v: PotentialGrid, k: complex, substeps: int = 1) -> MatrixSolution:
    """The solution equal to e^{ikx} I for x >= x_max, integrated backwards.

    Valid for Im k >= 0; k = 0 is allowed (the potential has compact support).
    """
    k = complex(k)
    if k.imag < -1e-12:
        raise PropagationError(f"Jost solution requires Im k >= 0, got {k}")
    n = v.n
    y_end = _jost_end_data(n, k, v.x_max)
    with np.errstate(over="ignore", invalid="ignore"):
        t = _cell_transfers(v.cells, k, v.h, substeps, backward=True)
        g = prefix_products(np.flip(t, axis=-3))
        y = np.concatenate([np.flip(g @ y_end, axis=0), y_end[None]], axis=0)
    _require_finite(y, f"backward propagation at k={k}")
    return MatrixSolution(k, v.nodes, y[:, :n, :], y[:, n:, :])


def jost_boundary_values(v: PotentialGrid, ks: np.ndarray, substeps: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """(f(k, 0), f'(k, 0)) for a batch of k values; shapes (K, n, n).

    Endpoint-only fast path: only the total backward transfer is formed.
    """
    ks = np.atleast_1d(np.asarray(ks, dtype=complex))
    if np.any(ks.imag < -1e-12):
        raise PropagationError("Jost solution requires Im k >= 0")
    n = v.n
    m = v.m_cells
    chunk = max(1, int(_CHUNK_BYTES / (m * (2 * n) ** 2 * 16)))
    f0 = np.empty((ks.size, n, n), dtype=complex)
    f0p = np.empty_like(f0)
    for start in range(0, ks.size, chunk):
        kc = ks[start:start + chunk]
        with np.errstate(over="ignore", invalid="ignore"):
            t = _cell_transfers(v.cells, kc, v.h, substeps, backward=True)
            total = ordered_product(np.flip(t, axis=-3))
            ends = np.stack([_jost_end_data(n, k, v.x_max) for k in kc], axis=0)
            y0 = total @ ends
        f0[start:start + kc.size] = y0[:, :n, :]
        f0p[start:start + kc.size] = y0[:, n:, :]
    _require_finite(f0, "batched Jost boundary values")
    _require_finite(f0p, "batched Jost boundary values")
    return f0, f0p


def second_difference_residual(v: PotentialGrid, sol: MatrixSolution) -> float:
    """Max residual of -psi'' + V psi - k^2 psi on interior nodes.

    The second difference at a node of a piecewise-constant potential sees the
    average of the two adjacent cell values.
    """
    psi = sol.psi
    h = float(sol.x[1] - sol.x[0])
    d2 = (psi[2:] - 2.0 * psi[1:-1] + psi[:-2]) / h**2
    v_avg = 0.5 * (v.cells[:-1] + v.cells[1:])
    res = -d2 + v_avg @ psi[1:-1] - sol.k**2 * psi[1:-1]
    return float(np.max(np.abs(res)))
