import numpy as np
import pytest

from halfline_spectral.errors import (DimensionMismatchError, InconsistentRankError,
                                      NotPositiveDefiniteError)
from halfline_spectral.matcore import (Projection, kernel_projection, moore_penrose,
                                       moore_penrose_batch, positive_inv_sqrt,
                                       positive_sqrt, symmetrize)

from conftest import random_complex, random_hermitian


def penrose_residual(m, mp):
    return max(
        np.linalg.norm(m @ mp @ m - m),
        np.linalg.norm(mp @ m @ mp - mp),
        np.linalg.norm((m @ mp).conj().T - m @ mp),
        np.linalg.norm((mp @ m).conj().T - mp @ m),
    )


def test_pinv_diagonal():
    assert np.allclose(moore_penrose(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))


def test_pinv_identity():
    assert np.allclose(moore_penrose(np.eye(3)), np.eye(3))


def test_pinv_rank_one():
    m = np.ones((2, 2), dtype=complex)
    mp = moore_penrose(m)
    assert np.allclose(mp, 0.25 * np.ones((2, 2)))
    assert penrose_residual(m, mp) < 1e-12


def test_pinv_penrose_identities_random(rng):
    for n in range(1, 7):
        for _ in range(20):
            m = random_complex(rng, (n, n))
            assert penrose_residual(m, moore_penrose(m)) < 1e-9


def test_pinv_of_projection_is_projection(rng):
    # used at W(0) = Q: the pseudoinverse of an orthogonal projection is itself
    for n in (2, 4):
        g = random_complex(rng, (n, 2))
        q, _ = np.linalg.qr(g)
        p = q @ q.conj().T
        assert np.linalg.norm(moore_penrose(p) - p) < 1e-10


def test_pinv_rank_hint_truncates(rng):
    d = np.diag([1.0, 1e-6, 1e-13]).astype(complex)
    full = moore_penrose(d, rank_hint=2)
    assert np.allclose(full, np.diag([1.0, 1e6, 0.0]))
    with pytest.raises(InconsistentRankError):
        moore_penrose(d, rank_hint=3)
    with pytest.raises(InconsistentRankError):
        moore_penrose(d, rank_hint=5)


def test_pinv_batch_matches_single(rng):
    stack = np.stack([random_complex(rng, (3, 3)) for _ in range(8)])
    batch = moore_penrose_batch(stack, rank=3)
    for i in range(8):
        assert np.linalg.norm(batch[i] - moore_penrose(stack[i])) < 1e-10


def test_pinv_dimension_error():
    with pytest.raises(DimensionMismatchError):
        moore_penrose(np.ones((2, 3)))


def test_positive_sqrt_examples():
    assert np.allclose(positive_sqrt(np.eye(2)), np.eye(2))
    assert np.allclose(positive_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))


def test_positive_sqrt_spectral_oracle():
    m = np.array([[2.0, 1.0], [1.0, 2.0]], dtype=complex)
    w, v = np.linalg.eigh(m)
    expected = (v * np.sqrt(w)) @ v.conj().T
    s = positive_sqrt(m)
    assert np.linalg.norm(s - expected) < 1e-12
    assert sorted(np.linalg.eigvalsh(s)) == pytest.approx([1.0, np.sqrt(3.0)])


def test_positive_sqrt_squares_back(rng):
    for _ in range(20):
        h = random_hermitian(rng, 4)
        m = h @ h.conj().T + 0.1 * np.eye(4)
        s = positive_sqrt(m)
        assert np.linalg.norm(s @ s - m) < 1e-9
        assert np.linalg.norm(s - s.conj().T) < 1e-12
        assert np.linalg.norm(positive_inv_sqrt(m) @ s - np.eye(4)) < 1e-9


def test_positive_sqrt_rejects_indefinite():
    with pytest.raises(NotPositiveDefiniteError):
        positive_sqrt(np.diag([1.0, -0.5]))
    with pytest.raises(NotPositiveDefiniteError):
        positive_sqrt(np.diag([1.0, 0.0]))


def test_kernel_projection_examples():
    p = kernel_projection(np.diag([0.0, 3.0]).astype(complex), 1e-8)
    assert p.rank == 1
    assert np.allclose(p.matrix, np.diag([1.0, 0.0]))

    p0 = kernel_projection(np.array([[2.0, 1.0], [0.0, 1.0]], dtype=complex), 1e-8)
    assert p0.rank == 0
    assert np.allclose(p0.matrix, 0.0)


def test_kernel_projection_free_jost_eigenchannel():
    # J(i kappa) = B + kappa I for the zero potential; at kappa = 1 with
    # B = diag(-1, -2) the kernel is the first coordinate axis
    b = np.diag([-1.0, -2.0]).astype(complex)
    j = b + 1.0 * np.eye(2)
    p = kernel_projection(j, 1e-8)
    assert p.rank == 1
    assert np.allclose(p.matrix, np.diag([1.0, 0.0]))


def test_kernel_projection_properties(rng):
    for _ in range(20):
        n = int(rng.integers(2, 6))
        r = int(rng.integers(0, n))
        diag = np.concatenate([rng.uniform(0.5, 2.0, size=n - r), np.zeros(r)])
        u, _ = np.linalg.qr(random_complex(rng, (n, n)))
        w, _ = np.linalg.qr(random_complex(rng, (n, n)))
        m = (u * diag) @ w.conj().T
        p = kernel_projection(m, 1e-8)
        assert p.rank == r
        assert p.deviation() < 1e-10
        smax = np.linalg.norm(m, 2)
        assert np.linalg.norm(m @ p.matrix, 2) <= 10 * 1e-8 * max(smax, 1e-300)


def test_kernel_projection_zero_matrix():
    p = kernel_projection(np.zeros((3, 3), dtype=complex), 1e-8)
    assert p.rank == 3
    assert np.allclose(p.matrix, np.eye(3))


def test_symmetrize_removes_drift(rng):
    h = random_hermitian(rng, 3)
    noisy = h + 1e-14 * random_complex(rng, (3, 3))
    s = symmetrize(noisy)
    assert np.linalg.norm(s - s.conj().T) == 0.0


def test_projection_dataclass_deviation():
    p = Projection(np.diag([1.0, 0.0]).astype(complex), 1)
    assert p.deviation() < 1e-15
