"""Independent finite-difference eigenvalue oracle on a truncated interval.

Second-order central differences on [0, L] with a Dirichlet wall at x = L
(bound states decay like e^{-kappa x}, so the truncation error is e^{-2 kappa L}
and is below tolerance for the mandated L).  The Robin condition psi'(0) =
B psi(0) enters through a ghost node eliminated symmetrically: the first row
is halved and the problem rescaled, which keeps the matrix Hermitian at the
cost of a sqrt(2) on the first off-diagonal coupling.

This solver shares no code path with the Jost-matrix machinery; it is the
brute-force cross-check for every spectral computation in the package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eig_banded

from .errors import PreconditionError
from .model import BoundaryPair, PotentialGrid, normalize_to_robin

EDGE = 1e-4          # eigenvalues above -EDGE are treated as threshold artifacts
CLUSTER_REL = 1e-6   # relative gap below which eigenvalues merge into one level


@dataclass(frozen=True)
class DiscretizedOperator:
    """Banded Hermitian discretization of the half-line operator."""

    length: float
    h: float
    n: int
    n_nodes: int
    bc_left: str               # "robin" or "dirichlet"
    band: np.ndarray           # lower banded storage, shape (n + 1, n * n_nodes)

    def dense(self) -> np.ndarray:
        size = self.n * self.n_nodes
        a = np.zeros((size, size), dtype=complex)
        for d in range(self.n + 1):
            for j in range(size - d):
                a[j + d, j] = self.band[d, j]
                if d:
                    a[j, j + d] = np.conj(self.band[d, j])
        return a


def build_discretized(v: PotentialGrid, bc: BoundaryPair | str, length: float = 20.0,
                      h: float = 0.01) -> DiscretizedOperator:
    """Assemble the banded matrix; ``bc`` may be a pair or the string "dirichlet"."""
    n = v.n
    m_nodes = int(round(length / h))
    dirichlet = isinstance(bc, str)
    if dirichlet:
        if bc != "dirichlet":
            raise PreconditionError(f"unknown left boundary {bc!r}")
        xs = h * np.arange(1, m_nodes)          # node 0 removed: psi(0) = 0
    else:
        pair = bc if bc.is_robin else normalize_to_robin(bc.a, bc.b)
        xs = h * np.arange(0, m_nodes)          # Dirichlet wall at x = L stays

    n_nodes = xs.size
    blocks = np.zeros((n_nodes, n, n), dtype=complex)
    blocks += (2.0 / h**2) * np.eye(n)
    blocks += v.averages_over(xs, h)
    if not dirichlet:
        # the halved boundary row carries only the half-cell [0, h/2]
        blocks[0] = (2.0 / h**2) * np.eye(n) + v.averages_over(np.array([h / 4.0]), h / 2.0)[0]
        blocks[0] += (2.0 / h) * pair.b

    size = n * n_nodes
    band = np.zeros((n + 1, size), dtype=complex)
    for d in range(n):
        view = band[d].reshape(n_nodes, n)
        for c in range(n - d):
            view[:, c] = blocks[:, c + d, c]
    coupling = band[n].reshape(n_nodes, n)
    coupling[:-1, :] = -1.0 / h**2
    if not dirichlet:
        coupling[0, :] *= np.sqrt(2.0)
    return DiscretizedOperator(length, h, n, n_nodes, "dirichlet" if dirichlet else "robin", band)


def _cluster(eigs: np.ndarray, rel: float = CLUSTER_REL) -> list[tuple[float, int]]:
    out: list[tuple[float, int]] = []
    for lam in np.sort(eigs):
        if out and abs(lam - out[-1][0]) <= max(rel * abs(lam), 1e-9):
            prev, cnt = out[-1]
            out[-1] = ((prev * cnt + lam) / (cnt + 1), cnt + 1)
        else:
            out.append((float(lam), 1))
    return out


def oracle_negative_spectrum(v: PotentialGrid, bc: BoundaryPair | str, length: float = 20.0,
                             h: float = 0.01, edge: float = EDGE) -> list[tuple[float, int]]:
    """Negative eigenvalues (below -edge) with multiplicities, by brute force."""
    if h**2 * v.max_norm() >= 0.1:
        raise PreconditionError(f"h = {h} too coarse for |V|_max = {v.max_norm():.3g}")
    op = build_discretized(v, bc, length, h)
    b_norm = 0.0 if isinstance(bc, str) else float(np.linalg.norm(bc.b, 2))
    lo = -max(100.0, 10.0 * (v.max_norm() + (2.0 * b_norm) ** 2 + 1.0))
    eigs = eig_banded(op.band, lower=True, eigvals_only=True,
                      select="v", select_range=(lo, -edge))
    return _cluster(np.asarray(eigs, dtype=float))


def compare_spectra(jost: list[tuple[float, int]], oracle: list[tuple[float, int]]) -> dict:
    """Match two (lambda, multiplicity) lists expanded by multiplicity."""
    flat_j = np.array([lam for lam, m in jost for _ in range(m)])
    flat_o = np.array([lam for lam, m in oracle for _ in range(m)])
    count_ok = flat_j.size == flat_o.size
    max_dev = float(np.max(np.abs(np.sort(flat_j) - np.sort(flat_o)))) if (count_ok and flat_j.size) else np.inf
    if flat_j.size == 0 and flat_o.size == 0:
        max_dev = 0.0
    return {"count_ok": count_ok, "n_jost": int(flat_j.size), "n_oracle": int(flat_o.size),
            "max_lambda_dev": max_dev}
