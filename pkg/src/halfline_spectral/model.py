"""Domain model: potentials on a uniform grid, boundary conditions, truncations.

A potential is piecewise constant: ``samples[i]`` is the value on the cell
``[x_i, x_{i+1})``.  Builders that discretize a smooth function evaluate it at
cell midpoints, which keeps the piecewise-constant operator within O(h^2) of
the smooth one in spectral terms; genuinely piecewise-constant potentials
(square wells) are represented exactly.  The trailing sample sits at
``x_max``; the potential is identically zero beyond ``x_max``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import BoundaryConditionError, DimensionMismatchError
from .matcore import as_hermitian, symmetrize

BOUNDARY_TOL = 1e-10


# ---------------------------------------------------------------------------
# complex-matrix JSON codec: [[re, im], ...] pairs, row-major
# ---------------------------------------------------------------------------

def encode_matrix(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def decode_matrix(data: Sequence) -> np.ndarray:
    rows = []
    for row in data:
        entries = []
        for z in row:
            if isinstance(z, (int, float)):
                entries.append(complex(z))
            else:
                re, im = z
                entries.append(complex(re, im))
        rows.append(entries)
    return np.array(rows, dtype=complex)


# ---------------------------------------------------------------------------
# Potentials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PotentialGrid:
    """Hermitian matrix potential sampled on a uniform grid with compact support."""

    n: int
    x_max: float
    h: float
    samples: np.ndarray  # (m_cells + 1, n, n), samples[i] = value on [x_i, x_{i+1})

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        if samples.ndim != 3 or samples.shape[1:] != (self.n, self.n):
            raise DimensionMismatchError(
                f"samples must have shape (m+1, {self.n}, {self.n}), got {samples.shape}"
            )
        m = samples.shape[0] - 1
        if m < 1:
            raise ValueError("need at least one cell")
        if abs(m * self.h - self.x_max) > 1e-9 * max(1.0, self.x_max):
            raise ValueError(
                f"grid mismatch: {m} cells of h={self.h} do not span x_max={self.x_max}"
            )
        dagger = samples.conj().swapaxes(-1, -2)
        dev = np.abs(samples - dagger).max(axis=(1, 2))
        scale = 1.0 + np.abs(samples).max(axis=(1, 2))
        worst = int(np.argmax(dev / scale))
        if dev[worst] > 1e-6 * scale[worst]:
            raise DimensionMismatchError(
                f"samples[{worst}] is not Hermitian (deviation {dev[worst]:.3e})"
            )
        object.__setattr__(self, "samples", 0.5 * (samples + dagger))
        object.__setattr__(self, "h", self.x_max / m)

    # -- constructors -------------------------------------------------------

    @staticmethod
    def _cell_count(x_max: float, h: float) -> int:
        m = int(round(x_max / h))
        return max(m, 1)

    @classmethod
    def zeros(cls, n: int, x_max: float, h: float) -> "PotentialGrid":
        m = cls._cell_count(x_max, h)
        return cls(n, x_max, x_max / m, np.zeros((m + 1, n, n), dtype=complex))

    @classmethod
    def from_function(cls, fn: Callable[[float], np.ndarray], n: int, x_max: float, h: float) -> "PotentialGrid":
        """Discretize a smooth matrix function; cell values taken at midpoints."""
        m = cls._cell_count(x_max, h)
        hh = x_max / m
        samples = np.empty((m + 1, n, n), dtype=complex)
        for i in range(m):
            samples[i] = np.asarray(fn((i + 0.5) * hh), dtype=complex)
        samples[m] = np.asarray(fn(x_max), dtype=complex)
        return cls(n, x_max, hh, samples)

    @classmethod
    def from_cell_values(cls, cells: np.ndarray, x_max: float) -> "PotentialGrid":
        cells = np.asarray(cells, dtype=complex)
        m, n = cells.shape[0], cells.shape[1]
        samples = np.concatenate([cells, np.zeros((1, n, n), dtype=complex)], axis=0)
        return cls(n, x_max, x_max / m, samples)

    @classmethod
    def square_well(cls, depth_matrix: np.ndarray, width: float, x_max: float | None = None,
                    h: float | None = None) -> "PotentialGrid":
        """Constant Hermitian value ``depth_matrix`` on [0, width), zero after."""
        depth = as_hermitian(np.asarray(depth_matrix, dtype=complex), "depth_matrix")
        n = depth.shape[0]
        if x_max is None:
            x_max = 2.0 * width
        if h is None:
            h = 1e-3 * x_max
        m = cls._cell_count(x_max, h)
        hh = x_max / m
        mids = (np.arange(m) + 0.5) * hh
        samples = np.zeros((m + 1, n, n), dtype=complex)
        samples[:m][mids < width] = depth
        return cls(n, x_max, hh, samples)

    @classmethod
    def diagonal_wells(cls, depths: Sequence[float], widths: Sequence[float],
                       x_max: float | None = None, h: float | None = None) -> "PotentialGrid":
        """Decoupled scalar wells, one per channel (star-graph style)."""
        depths = np.asarray(depths, dtype=float)
        widths = np.asarray(widths, dtype=float)
        if depths.shape != widths.shape:
            raise DimensionMismatchError("depths and widths must have equal length")
        n = depths.size
        if x_max is None:
            x_max = 2.0 * float(widths.max())
        if h is None:
            h = 1e-3 * x_max
        m = cls._cell_count(x_max, h)
        hh = x_max / m
        mids = (np.arange(m) + 0.5) * hh
        samples = np.zeros((m + 1, n, n), dtype=complex)
        for j in range(n):
            samples[:m, j, j] = np.where(mids < widths[j], depths[j], 0.0)
        return cls(n, x_max, hh, samples)

    # -- views ---------------------------------------------------------------

    @property
    def m_cells(self) -> int:
        return self.samples.shape[0] - 1

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.x_max, self.m_cells + 1)

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(self.m_cells) + 0.5) * self.h

    @property
    def cells(self) -> np.ndarray:
        return self.samples[:-1]

    def value_at(self, x: float) -> np.ndarray:
        if x >= self.x_max or x < 0.0:
            return np.zeros((self.n, self.n), dtype=complex)
        return self.cells[min(int(x / self.h), self.m_cells - 1)]

    def values_at(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        out = np.zeros(xs.shape + (self.n, self.n), dtype=complex)
        inside = (xs >= 0.0) & (xs < self.x_max)
        idx = np.minimum((xs[inside] / self.h).astype(int), self.m_cells - 1)
        out[inside] = self.cells[idx]
        return out

    def _antiderivative_at(self, xs: np.ndarray) -> np.ndarray:
        """integral of V over [0, x], exact for the piecewise-constant function."""
        cum = np.concatenate([np.zeros((1, self.n, self.n), dtype=complex),
                              self.h * np.cumsum(self.cells, axis=0)], axis=0)
        xs = np.clip(np.asarray(xs, dtype=float), 0.0, self.x_max)
        idx = np.minimum((xs / self.h).astype(int), self.m_cells - 1)
        frac = (xs - idx * self.h)[..., None, None]
        return cum[idx] + frac * self.cells[idx]

    def averages_over(self, centers: np.ndarray, width: float) -> np.ndarray:
        """Exact averages of V over the windows [c - width/2, c + width/2].

        Used by node-based discretizations: averaging represents jumps of the
        piecewise-constant potential to second order, plain sampling does not.
        """
        centers = np.asarray(centers, dtype=float)
        hi = self._antiderivative_at(centers + width / 2.0)
        lo = self._antiderivative_at(centers - width / 2.0)
        return (hi - lo) / width

    # -- integrals (exact for the piecewise-constant representation) ---------

    def trace_integral(self) -> float:
        """integral of Tr V(x) dx over [0, infinity)."""
        return float(self.h * np.einsum("ijj->", self.cells).real)

    def _cell_norms(self) -> np.ndarray:
        return np.linalg.svd(self.cells, compute_uv=False)[..., 0]

    def norm_integral(self) -> float:
        """integral of the operator norm |V(x)| dx (finiteness witness)."""
        return float(self.h * self._cell_norms().sum())

    def weighted_norm_integral(self) -> float:
        """integral of x |V(x)| dx, by the midpoint rule."""
        return float(self.h * (self.midpoints * self._cell_norms()).sum())

    def max_norm(self) -> float:
        return float(self._cell_norms().max())

    # -- derived grids --------------------------------------------------------

    def with_cells(self, cells: np.ndarray) -> "PotentialGrid":
        samples = self.samples.copy()
        samples[:-1] = cells
        return PotentialGrid(self.n, self.x_max, self.h, samples)

    def refined(self, factor: int) -> "PotentialGrid":
        """Same piecewise-constant potential on a grid that is ``factor`` finer."""
        cells = np.repeat(self.cells, factor, axis=0)
        samples = np.concatenate([cells, self.samples[-1:]], axis=0)
        return PotentialGrid(self.n, self.x_max, self.h / factor, samples)

    def scaled(self, coupling: float) -> "PotentialGrid":
        return PotentialGrid(self.n, self.x_max, self.h, coupling * self.samples)


def split_pos_neg(v: PotentialGrid) -> tuple[PotentialGrid, PotentialGrid]:
    """Pointwise spectral decomposition V = V_+ - V_- with V_+ V_- = 0."""
    w, u = np.linalg.eigh(v.samples)
    pos = (u * np.maximum(w, 0.0)[..., None, :]) @ u.conj().swapaxes(-1, -2)
    neg = (u * np.maximum(-w, 0.0)[..., None, :]) @ u.conj().swapaxes(-1, -2)
    vp = PotentialGrid(v.n, v.x_max, v.h, symmetrize(pos))
    vm = PotentialGrid(v.n, v.x_max, v.h, symmetrize(neg))
    return vp, vm


def truncate_negative(v: PotentialGrid, l: float) -> PotentialGrid:
    """Keep the negative part only on [0, l]:  V_+ - chi_[0,l] V_-."""
    if l <= 0:
        raise ValueError("l must be positive")
    vp, vm = split_pos_neg(v)
    keep = np.concatenate([v.midpoints <= l, [v.x_max <= l]])
    samples = vp.samples - keep[:, None, None] * vm.samples
    return PotentialGrid(v.n, v.x_max, v.h, samples)


def truncate_support(v: PotentialGrid, p: float) -> PotentialGrid:
    """Multiply by the characteristic function of [0, p]."""
    if p <= 0:
        raise ValueError("p must be positive")
    keep = np.concatenate([v.midpoints <= p, [v.x_max <= p]])
    return PotentialGrid(v.n, v.x_max, v.h, keep[:, None, None] * v.samples)


# ---------------------------------------------------------------------------
# Boundary conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryValidation:
    ok: bool
    selfadjoint_residual: float   # ||B^dagger A - A^dagger B||_F
    positivity_min_eig: float     # smallest eigenvalue of A^dagger A + B^dagger B
    message: str = ""

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class BoundaryPair:
    """Boundary matrices (A, B) of  -B^dagger psi(0) + A^dagger psi'(0) = 0."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=complex)
        b = np.asarray(self.b, dtype=complex)
        if a.ndim != 2 or a.shape != b.shape or a.shape[0] != a.shape[1]:
            raise DimensionMismatchError(f"A and B must be square of equal size, got {a.shape}, {b.shape}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @classmethod
    def robin(cls, b: np.ndarray) -> "BoundaryPair":
        b = as_hermitian(np.asarray(b, dtype=complex), "B")
        return cls(np.eye(b.shape[0], dtype=complex), b)

    @classmethod
    def neumann(cls, n: int) -> "BoundaryPair":
        return cls(np.eye(n, dtype=complex), np.zeros((n, n), dtype=complex))

    def validate(self) -> BoundaryValidation:
        return validate_boundary(self.a, self.b)

    @property
    def a_invertible(self) -> bool:
        s = np.linalg.svd(self.a, compute_uv=False)
        return bool(s[0] > 0 and s[-1] > 1e-10 * s[0])

    @property
    def is_robin(self) -> bool:
        return bool(np.allclose(self.a, np.eye(self.n), atol=1e-12))


def validate_boundary(a: np.ndarray, b: np.ndarray) -> BoundaryValidation:
    """Check the selfadjointness conditions on a boundary-matrix pair."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim != 2 or a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"A and B must be square of equal size, got {a.shape}, {b.shape}")
    residual = float(np.linalg.norm(b.conj().T @ a - a.conj().T @ b))
    gram = a.conj().T @ a + b.conj().T @ b
    min_eig = float(np.linalg.eigvalsh(symmetrize(gram))[0])
    scale = 1.0 + float(np.linalg.norm(a)) ** 2 + float(np.linalg.norm(b)) ** 2
    ok = residual <= BOUNDARY_TOL * scale and min_eig > BOUNDARY_TOL * scale
    msg = []
    if residual > BOUNDARY_TOL * scale:
        msg.append(f"B^dagger A != A^dagger B (residual {residual:.3e})")
    if min_eig <= BOUNDARY_TOL * scale:
        msg.append(f"A^dagger A + B^dagger B not positive (min eig {min_eig:.3e})")
    return BoundaryValidation(ok, residual, min_eig, "; ".join(msg))


def normalize_to_robin(a: np.ndarray, b: np.ndarray) -> BoundaryPair:
    """Transform (A, B) -> (I, B A^{-1}); requires A invertible (no Dirichlet channel)."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    check = validate_boundary(a, b)
    if not check:
        raise BoundaryConditionError(f"invalid boundary pair: {check.message}")
    s = np.linalg.svd(a, compute_uv=False)
    if s[-1] <= 1e-10 * s[0]:
        raise BoundaryConditionError(
            "A is singular (Dirichlet channels present); the Robin normal form does not exist"
        )
    ba_inv = b @ np.linalg.inv(a)
    dev = float(np.linalg.norm(ba_inv - ba_inv.conj().T))
    if dev > BOUNDARY_TOL * (1.0 + np.linalg.norm(ba_inv)):
        raise BoundaryConditionError(f"B A^-1 is not Hermitian (deviation {dev:.3e})")
    return BoundaryPair(np.eye(a.shape[0], dtype=complex), symmetrize(ba_inv))


@dataclass(frozen=True)
class DiagonalBoundary:
    """Diagonal normal form: angles theta_j in (0, pi]; theta_j = pi is Dirichlet."""

    angles: np.ndarray

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=float)
        if np.any(angles <= 0.0) or np.any(angles > np.pi + 1e-12):
            raise ValueError("angles must lie in (0, pi]")
        object.__setattr__(self, "angles", angles)

    @property
    def has_dirichlet(self) -> bool:
        return bool(np.any(np.abs(self.angles - np.pi) < 1e-12))

    def pair(self) -> BoundaryPair:
        a = -np.diag(np.sin(self.angles)).astype(complex)
        b = np.diag(np.cos(self.angles)).astype(complex)
        return BoundaryPair(a, b)


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def potential_to_dict(v: PotentialGrid) -> dict:
    return {
        "n": v.n,
        "x_max": v.x_max,
        "h": v.h,
        "kind": "grid",
        "samples": [encode_matrix(s) for s in v.samples],
    }


def potential_from_dict(data: dict) -> PotentialGrid:
    kind = data.get("kind", "grid")
    n = int(data["n"])
    x_max = float(data["x_max"])
    h = float(data.get("h", 1e-3 * x_max))
    if kind == "grid":
        samples = np.array([decode_matrix(s) for s in data["samples"]])
        return PotentialGrid(n, x_max, h, samples)
    if kind == "square_well":
        depth = decode_matrix(data["depth_matrix"])
        return PotentialGrid.square_well(depth, float(data["width"]), x_max, h)
    if kind == "diagonal_wells":
        return PotentialGrid.diagonal_wells(data["depths"], data["widths"], x_max, h)
    raise ValueError(f"unknown potential kind {kind!r}")


def load_potential(path: str | Path) -> PotentialGrid:
    with open(path, "r", encoding="utf-8") as handle:
        return potential_from_dict(json.load(handle))


def boundary_from_dict(data: dict) -> BoundaryPair:
    if "angles" in data:
        return DiagonalBoundary(np.asarray(data["angles"], dtype=float)).pair()
    pair = BoundaryPair(decode_matrix(data["A"]), decode_matrix(data["B"]))
    check = pair.validate()
    if not check:
        raise BoundaryConditionError(f"boundary file invalid: {check.message}")
    return pair


def boundary_to_dict(bc: BoundaryPair) -> dict:
    return {"A": encode_matrix(bc.a), "B": encode_matrix(bc.b)}


def load_boundary(path: str | Path) -> BoundaryPair:
    with open(path, "r", encoding="utf-8") as handle:
        return boundary_from_dict(json.load(handle))
