"""Built-in (potential, boundary) presets used by the CLI and the test suite."""

from __future__ import annotations

import numpy as np

from .model import BoundaryPair, PotentialGrid


def zero_robin(h: float | None = None, x_max: float | None = None):
    """Zero potential with B = diag(-1, -2): closed-form two-state spectrum."""
    x_max = x_max or 2.0
    h = h or 2e-3
    v = PotentialGrid.zeros(2, x_max, h)
    bc = BoundaryPair.robin(np.diag([-1.0, -2.0]).astype(complex))
    return v, bc


def square_well_neumann(h: float | None = None, x_max: float | None = None):
    """Scalar square well of depth -4 on [0, 1) with a Neumann condition."""
    x_max = x_max or 2.0
    h = h or 1e-3
    v = PotentialGrid.square_well(np.array([[-4.0 + 0j]]), 1.0, x_max, h)
    return v, BoundaryPair.neumann(1)


def coupled_2x2_well(h: float | None = None, x_max: float | None = None):
    """A 2x2 Hermitian well with channel coupling and a mixed-sign B."""
    x_max = x_max or 2.4
    h = h or 1.2e-3
    depth = np.array([[-3.0, 0.7], [0.7, -1.5]], dtype=complex)
    v = PotentialGrid.square_well(depth, 1.2, x_max, h)
    bc = BoundaryPair.robin(np.array([[-0.5, 0.2], [0.2, 0.3]], dtype=complex))
    return v, bc


def star_graph_3edge(h: float | None = None, x_max: float | None = None):
    """Three half-line edges with per-edge wells and a coupling vertex condition.

    A star graph is the diagonal-potential case; the Hermitian B couples the
    edges at the vertex while keeping A = I (no Dirichlet edge).
    """
    x_max = x_max or 2.4
    h = h or 1.2e-3
    v = PotentialGrid.diagonal_wells([-2.0, -3.5, -1.2], [1.0, 0.8, 1.2], x_max, h)
    b = np.array([
        [-0.8, 0.25, 0.25],
        [0.25, -1.1, 0.25],
        [0.25, 0.25, -0.4],
    ], dtype=complex)
    return v, BoundaryPair.robin(b)


PRESETS = {
    "zero_robin": zero_robin,
    "square_well_neumann": square_well_neumann,
    "coupled_2x2_well": coupled_2x2_well,
    "star_graph_3edge": star_graph_3edge,
}


def load_preset(name: str, h: float | None = None, x_max: float | None = None):
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    return PRESETS[name](h=h, x_max=x_max)
