import numpy as np
import pytest

from halfline_spectral.errors import PropagationError
from halfline_spectral.model import BoundaryPair, PotentialGrid
from halfline_spectral.propagate import (jost_boundary_values, jost_solution,
                                         ordered_product, prefix_products,
                                         propagate_forward, regular_solution,
                                         second_difference_residual)

from conftest import random_complex


def free_regular(k, x, b):
    # phi = cos(kx) I + sin(kx)/k B; the k = 0 limit is I + x B
    n = b.shape[0]
    x = np.asarray(x)[:, None, None]
    if abs(k) < 1e-12:
        return np.eye(n) + x * b
    return np.cos(k * x) * np.eye(n) + np.sin(k * x) / k * b


@pytest.mark.parametrize("k", [0.7, 1.3 + 0.8j, 2j, 0.0])
def test_free_regular_solution_closed_form(k):
    b = np.diag([-1.0, -2.0]).astype(complex)
    v = PotentialGrid.zeros(2, 2.0, 2e-3)
    sol = regular_solution(v, BoundaryPair.robin(b), k)
    assert np.max(np.abs(sol.psi - free_regular(k, sol.x, b))) < 1e-9


def test_free_regular_scalar_decaying_mode():
    # (I, -I) at k = i: cosh x - sinh x = e^{-x}
    v = PotentialGrid.zeros(1, 2.0, 1e-3)
    sol = regular_solution(v, BoundaryPair.robin(np.array([[-1.0 + 0j]])), 1j)
    assert np.max(np.abs(sol.psi[:, 0, 0] - np.exp(-sol.x))) < 1e-11


def test_free_regular_neumann_cosh():
    v = PotentialGrid.zeros(2, 2.0, 1e-3)
    sol = regular_solution(v, BoundaryPair.neumann(2), 1j)
    expected = np.cosh(sol.x)[:, None, None] * np.eye(2)
    assert np.max(np.abs(sol.psi - expected)) < 1e-10


@pytest.mark.parametrize("k", [0.9, 1j, 1.1 + 0.7j, 0.0])
def test_free_jost_solution(k):
    v = PotentialGrid.zeros(2, 2.0, 1e-3)
    f = jost_solution(v, k)
    expected = np.exp(1j * k * f.x)[:, None, None] * np.eye(2)
    assert np.max(np.abs(f.psi - expected)) < 1e-10
    dexpected = 1j * k * expected
    assert np.max(np.abs(f.psi_prime - dexpected)) < 1e-10


def test_jost_exact_beyond_support():
    v = PotentialGrid.square_well(np.array([[-4.0 + 0j]]), 1.0, 2.0, 1e-3)
    k = 0.8 + 0.3j
    f = jost_solution(v, k)
    outside = f.x >= 1.0
    expected = np.exp(1j * k * f.x[outside])
    assert np.max(np.abs(f.psi[outside, 0, 0] - expected)) < 1e-10


def test_jost_square_well_two_region_oracle():
    # depth -4 on [0, 1), k = i: inside the well f'' = -3 f, outside e^{-x};
    # match value and derivative at x = 1 and compare at x = 0
    v = PotentialGrid.square_well(np.array([[-4.0 + 0j]]), 1.0, 2.0, 5e-4)
    f = jost_solution(v, 1j)
    q = np.sqrt(3.0)
    c, s = np.cos(q), np.sin(q)
    e = np.exp(-1.0)
    # f = alpha cos(qx) + beta sin(qx); solving the 2x2 match at x = 1 gives
    alpha = e * (c + s / q)
    beta = e * (s - c / q)
    assert abs(f.psi[0, 0, 0] - alpha) < 1e-10
    assert abs(f.psi_prime[0, 0, 0] - beta * q) < 1e-10


def test_fourth_order_convergence():
    k = 1.5 + 0.5j
    b = np.array([[-1.0 + 0j]])
    errs = []
    for h in [4e-2, 2e-2, 1e-2, 5e-3]:
        v = PotentialGrid.zeros(1, 2.0, h)
        sol = regular_solution(v, BoundaryPair.robin(b), k)
        errs.append(np.max(np.abs(sol.psi - free_regular(k, sol.x, b))))
    ratios = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]
    assert all(13.0 < r < 19.0 for r in ratios)


def test_substeps_refine_accuracy():
    k = 1.5 + 0.5j
    b = np.array([[-1.0 + 0j]])
    v = PotentialGrid.zeros(1, 2.0, 2e-2)
    coarse = regular_solution(v, BoundaryPair.robin(b), k, substeps=1)
    fine = regular_solution(v, BoundaryPair.robin(b), k, substeps=2)
    err_c = np.max(np.abs(coarse.psi - free_regular(k, coarse.x, b)))
    err_f = np.max(np.abs(fine.psi - free_regular(k, fine.x, b)))
    assert err_c / err_f > 13.0


def test_backward_forward_consistency():
    v = PotentialGrid.square_well(np.array([[-4.0 + 0j]]), 1.0, 2.0, 1e-3)
    k = 1j
    f = jost_solution(v, k)
    fwd = propagate_forward(v, k, f.psi[0], f.psi_prime[0])
    end = np.exp(1j * k * v.x_max)
    assert abs(fwd.psi[-1, 0, 0] - end) < 1e-9
    assert abs(fwd.psi_prime[-1, 0, 0] - 1j * k * end) < 1e-9


def test_batched_endpoint_matches_full_solution():
    v = PotentialGrid.square_well(np.array([[-4.0 + 0j]]), 1.0, 2.0, 1e-3)
    kappas = np.array([0.5, 1.0, 1.7])
    f0, f0p = jost_boundary_values(v, 1j * kappas)
    for i, kap in enumerate(kappas):
        f = jost_solution(v, 1j * kap)
        assert np.max(np.abs(f0[i] - f.psi[0])) < 1e-12
        assert np.max(np.abs(f0p[i] - f.psi_prime[0])) < 1e-12


def test_product_helpers(rng):
    t = np.eye(3) + 0.05 * random_complex(rng, (7, 3, 3))
    seq = t[0]
    prefixes = [t[0]]
    for i in range(1, 7):
        seq = t[i] @ seq
        prefixes.append(seq)
    assert np.allclose(ordered_product(t), seq)
    assert np.allclose(prefix_products(t), np.stack(prefixes))


def test_solution_satisfies_equation():
    v = PotentialGrid.square_well(np.array([[-4.0 + 0j]]), 1.0, 2.0, 1e-3)
    sol = regular_solution(v, BoundaryPair.neumann(1), 0.7 + 0.2j)
    scale = np.max(np.abs(sol.psi))
    bound = scale * (4 + abs(sol.k) ** 2)
    # the residual is O(h) at the single node where the well jumps ...
    assert second_difference_residual(v, sol) < 2.0 * v.h * bound
    # ... and O(h^2) away from it (nodes strictly inside the constant region)
    psi = sol.psi[100:900]
    d2 = (psi[2:] - 2 * psi[1:-1] + psi[:-2]) / v.h**2
    res = np.max(np.abs(-d2 - 4.0 * psi[1:-1] - sol.k**2 * psi[1:-1]))
    assert res < 10.0 * v.h**2 * bound


def test_overflow_flagged():
    v = PotentialGrid.zeros(1, 2.0, 1e-2)
    with pytest.raises(PropagationError):
        jost_solution(v, 500j)


def test_jost_rejects_lower_half_plane():
    v = PotentialGrid.zeros(1, 2.0, 1e-2)
    with pytest.raises(PropagationError):
        jost_solution(v, -0.5j)


def test_invalid_boundary_rejected():
    v = PotentialGrid.zeros(2, 2.0, 1e-2)
    bad = BoundaryPair(np.eye(2), np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex))
    with pytest.raises(PropagationError):
        regular_solution(v, bad, 1.0)
