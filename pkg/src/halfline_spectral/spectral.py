"""Jost matrix, bound-state location, and bound-state normalization.

Bound states are located through the smallest singular value of the Jost
matrix on the positive imaginary axis rather than through its determinant:
sigma_min is robust for multiplicities > 1 and for complex-valued J whose
determinant need not be real there.

A located bound state at k = i kappa is represented through the Jost solution:
the normalized solution is Phi = f(i kappa, .) Omega C, where the connection
matrix Omega is obtained from a least-squares match of boundary data.  The
backward-integrated f is numerically stable in the decaying direction, so this
representation stays accurate deep into the exponential tail where the
forward-propagated regular solution loses the decaying component to roundoff.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .errors import PreconditionError, PropagationError
from .matcore import Projection, positive_inv_sqrt, symmetrize
from .model import BoundaryPair, PotentialGrid, encode_matrix, normalize_to_robin
from .propagate import (MatrixSolution, jost_boundary_values, jost_solution,
                        regular_solution)

KAPPA_FLOOR = 1e-6
TOL_RANK = 1e-7
MERGE_TOL = 1e-8
REFINE_TOL = 1e-10
RANK_GAP = 1e-4


def jost_matrix(v: PotentialGrid, bc: BoundaryPair, k: complex, substeps: int = 1) -> np.ndarray:
    """J(k) = f(-k*, 0)^dagger B - f'(-k*, 0)^dagger A,  Im k >= 0."""
    k = complex(k)
    if k.imag < -1e-12:
        raise PropagationError(f"Jost matrix requires Im k >= 0, got {k}")
    f0, f0p = jost_boundary_values(v, np.array([-np.conj(k)]), substeps=substeps)
    return f0[0].conj().T @ bc.b - f0p[0].conj().T @ bc.a


def jost_matrix_bound_batch(v: PotentialGrid, bc: BoundaryPair, kappas: np.ndarray,
                            substeps: int = 1) -> np.ndarray:
    """J(i kappa) for a batch of positive kappa (on the imaginary axis -k* = k)."""
    f0, f0p = jost_boundary_values(v, 1j * np.asarray(kappas, dtype=float), substeps=substeps)
    return (f0.conj().swapaxes(-1, -2) @ bc.b - f0p.conj().swapaxes(-1, -2) @ bc.a)


def jost_regular_bilinear(v: PotentialGrid, bc: BoundaryPair, k: complex,
                          substeps: int = 1) -> np.ndarray:
    """f(-k*, x)^dagger phi'(k, x) - f'(-k*, x)^dagger phi(k, x) at every node.

    This is x-independent and equals J(k); its constancy is a propagation test.
    """
    f = jost_solution(v, -np.conj(complex(k)), substeps=substeps)
    phi = regular_solution(v, bc, k, substeps=substeps)
    fd = f.psi.conj().swapaxes(-1, -2)
    fpd = f.psi_prime.conj().swapaxes(-1, -2)
    return fd @ phi.psi_prime - fpd @ phi.psi


# ---------------------------------------------------------------------------
# Bound states
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundState:
    """One bound state: energy -kappa^2 with multiplicity m.

    ``q`` projects onto Ker J(i kappa).  After normalization, ``c`` is the
    Gel'fand-Levitan matrix, ``omega`` the Jost connection (phi(i kappa, .) Q =
    f(i kappa, .) omega), and ``phi_n`` the normalized solution f omega c with
    integral of phi_n^dagger phi_n equal to q.
    """

    kappa: float
    m: int
    q: Projection
    p: Projection
    jost: np.ndarray
    flags: tuple[str, ...] = ()
    g: np.ndarray | None = None
    h_matrix: np.ndarray | None = None
    c: np.ndarray | None = None
    omega: np.ndarray | None = None
    phi_n: MatrixSolution | None = None
    residuals: dict = field(default_factory=dict)

    @property
    def lam(self) -> float:
        return -self.kappa**2

    @property
    def normalized(self) -> bool:
        return self.c is not None

    def tail_coefficient(self) -> np.ndarray:
        """T with Phi(x) = e^{-kappa x} T exactly for x >= x_max."""
        if not self.normalized:
            raise PreconditionError("state is not normalized")
        return self.omega @ self.c


@dataclass(frozen=True)
class SpectrumReport:
    """All bound states, ordered by increasing energy, plus the scan curve."""

    states: tuple[BoundState, ...]
    kappa_grid: np.ndarray
    sigma_min: np.ndarray
    kappa_max: float

    def __iter__(self):
        return iter(self.states)

    def __len__(self) -> int:
        return len(self.states)

    def kappas(self) -> np.ndarray:
        return np.array([s.kappa for s in self.states])

    def total_multiplicity(self) -> int:
        return sum(s.m for s in self.states)

    def eigenvalue_list(self) -> list[tuple[float, int]]:
        """(lambda, multiplicity) in increasing lambda order."""
        return [(s.lam, s.m) for s in self.states]

    def to_dict(self) -> dict:
        states = []
        for s in self.states:
            entry = {
                "kappa": s.kappa,
                "lambda": s.lam,
                "m": s.m,
                "Q": encode_matrix(s.q.matrix),
                "flags": list(s.flags),
            }
            if s.normalized:
                entry["C"] = encode_matrix(s.c)
                entry["residuals"] = {k: float(vv) for k, vv in s.residuals.items()}
            states.append(entry)
        return {"states": states, "kappa_max": self.kappa_max}


def default_kappa_max(v: PotentialGrid, bc: BoundaryPair) -> float:
    """Safe upper bar for the bound-state scan."""
    try:
        b_eff = bc.b if bc.is_robin else normalize_to_robin(bc.a, bc.b).b
        b_low = float(np.linalg.eigvalsh(symmetrize(b_eff))[0])
    except Exception:
        b_low = float(np.linalg.eigvalsh(symmetrize(bc.b))[0])
    return float(np.sqrt(v.norm_integral() + 2.0 * max(0.0, -b_low)) + 1.0)


def _singular_values_batch(v: PotentialGrid, bc: BoundaryPair, kappas: np.ndarray,
                           substeps: int) -> np.ndarray:
    j = jost_matrix_bound_batch(v, bc, kappas, substeps=substeps)
    return np.linalg.svd(j, compute_uv=False)


def find_bound_states(v: PotentialGrid, bc: BoundaryPair, kappa_max: float | None = None,
                      grid_points: int = 400, kappa_floor: float = KAPPA_FLOOR,
                      tol_rank: float = TOL_RANK, merge_tol: float = MERGE_TOL,
                      refine_tol: float = REFINE_TOL, substeps: int = 1) -> SpectrumReport:
    """Scan sigma_min(J(i kappa)) and refine its near-zero minima.

    Multiplicity is the count of singular values of J(i kappa_j) below
    tol_rank * sigma_max; roots closer than merge_tol are merged and flagged.
    """
    check = bc.validate()
    if not check:
        raise PreconditionError(f"invalid boundary pair: {check.message}")
    if kappa_max is None:
        kappa_max = default_kappa_max(v, bc)
    if kappa_max <= kappa_floor:
        raise PreconditionError("kappa_max must exceed kappa_floor")
    kappas = np.linspace(kappa_floor, kappa_max, grid_points)
    s_grid = _singular_values_batch(v, bc, kappas, substeps)
    smin = s_grid[..., -1]
    # fallback scale for the full-kernel case, where sigma_max(J) itself
    # vanishes at the root and a purely local relative test is meaningless
    sigma_ref = float(np.median(s_grid[..., 0]))

    interior = np.arange(1, grid_points - 1)
    is_min = (smin[interior] <= smin[interior - 1]) & (smin[interior] < smin[interior + 1])
    cand = interior[is_min]
    refined: list[float] = []
    if cand.size:
        lo = kappas[cand - 1]
        hi = kappas[cand + 1]
        fun = lambda ks: _singular_values_batch(v, bc, np.maximum(ks, kappa_floor), substeps)[..., -1]
        roots = _golden_batch(fun, lo, hi, refine_tol)
        refined = sorted(float(r) for r in roots)

    # merge refined roots that collapsed to the same kappa
    merged: list[tuple[float, int, bool]] = []
    for r in refined:
        if merged and abs(r - merged[-1][0]) < max(merge_tol, 1e-12):
            k0, cnt, _ = merged[-1]
            merged[-1] = (0.5 * (k0 + r), cnt + 1, True)
        else:
            merged.append((r, 1, False))

    states: list[BoundState] = []
    for kap, _dup, was_merged in merged:
        if kap < kappa_floor * (1.0 + 1e-9):
            continue
        j = jost_matrix_bound_batch(v, bc, np.array([kap]), substeps=substeps)[0]
        u, s, vh = np.linalg.svd(j)
        scale = max(s[0], sigma_ref)
        if scale == 0.0 or s[-1] >= tol_rank * scale:
            continue
        mask = s < tol_rank * scale
        m = int(np.count_nonzero(mask))
        flags = []
        if was_merged:
            flags.append("merged")
        if m < v.n and s[v.n - m - 1] <= RANK_GAP * scale:
            flags.append("rank-gap")
        vk = vh[mask]
        uk = u[:, mask]
        q = Projection(symmetrize(vk.conj().T @ vk), m)       # onto Ker J(i kappa)
        p = Projection(symmetrize(uk @ uk.conj().T), m)       # onto Ker J(i kappa)^dagger
        states.append(BoundState(kappa=kap, m=m, q=q, p=p, jost=j, flags=tuple(flags)))

    states.sort(key=lambda s: s.lam)  # increasing energy: largest kappa first
    return SpectrumReport(tuple(states), kappas, smin, float(kappa_max))


def _golden_batch(fun, a: np.ndarray, b: np.ndarray, tol: float) -> np.ndarray:
    """Golden-section minimization, one batched function call per iteration."""
    invphi = 0.6180339887498949
    a = np.asarray(a, dtype=float).copy()
    b = np.asarray(b, dtype=float).copy()
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = fun(c)
    fd = fun(d)
    while np.max(b - a) > tol:
        left = fc < fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new = np.where(left, b - invphi * (b - a), d)
        d_new = np.where(left, c, a + invphi * (b - a))
        probe = np.where(left, c_new, d_new)
        fp = fun(probe)
        fc_next = np.where(left, fp, fd)
        fd_next = np.where(left, fc, fp)
        fc, fd = fc_next, fd_next
        c, d = c_new, d_new
    return 0.5 * (a + b)


# ---------------------------------------------------------------------------
# Gel'fand-Levitan normalization
# ---------------------------------------------------------------------------

def _tail_factor(kappa_sum: float, x_max: float) -> float:
    return float(np.exp(-kappa_sum * x_max) / kappa_sum)


def gl_normalization(v: PotentialGrid, bc: BoundaryPair, state: BoundState,
                     substeps: int = 1) -> BoundState:
    """Fill G, H, C and the normalized solution Phi for a located bound state.

    G is a quadrature of Q phi^dagger phi Q over [0, x_max] plus the exact
    exponential tail; beyond the support the decaying representation is exact.
    """
    kap = state.kappa
    k = 1j * kap
    qm = state.q.matrix
    n = v.n

    f = jost_solution(v, k, substeps=substeps)
    f0, f0p = f.at_zero()
    stacked = np.concatenate([f0, f0p], axis=0)
    rhs = np.concatenate([bc.a @ qm, bc.b @ qm], axis=0)
    omega, *_ = np.linalg.lstsq(stacked, rhs, rcond=None)
    scale = float(np.linalg.norm(rhs)) + 1e-30
    match_residual = float(np.linalg.norm(stacked @ omega - rhs)) / scale

    # growing-mode coefficient of phi(i kappa, .) Q must vanish for a true
    # bound state; extracted at x_max from the forward-propagated solution.
    # The floor accounts for the e^{kappa x_max} amplification of roundoff and
    # of the kappa refinement error in the forward direction.
    phi = regular_solution(v, bc, k, substeps=substeps)
    pe, pep = phi.at_end()
    m_plus = 0.5 * (pe + pep / kap)
    m_minus = 0.5 * (pe - pep / kap)
    mode_scale = max(np.linalg.norm(m_plus), np.linalg.norm(m_minus))
    growth = np.exp(min(kap * v.x_max, 700.0)) * (np.linalg.norm(bc.a) + np.linalg.norm(bc.b))
    floor = (10 * np.finfo(float).eps + REFINE_TOL * (1.0 + v.x_max)) * growth
    growing = float(np.linalg.norm(m_plus @ qm) / (1e-6 * mode_scale + floor))

    fo = f.psi @ omega
    integrand = fo.conj().swapaxes(-1, -2) @ fo
    g_raw = simpson(integrand, dx=v.h, axis=0)
    g_raw = g_raw + _tail_factor(2 * kap, v.x_max) * (omega.conj().T @ omega)
    g = symmetrize(qm @ g_raw @ qm)
    h = symmetrize(np.eye(n, dtype=complex) - qm + g)
    c = symmetrize(positive_inv_sqrt(h) @ qm)

    oc = omega @ c
    phi_n = MatrixSolution(k, f.x, f.psi @ oc, f.psi_prime @ oc)
    norm_mat = simpson(phi_n.psi.conj().swapaxes(-1, -2) @ phi_n.psi, dx=v.h, axis=0)
    norm_mat = norm_mat + _tail_factor(2 * kap, v.x_max) * (oc.conj().T @ oc)
    normalization = float(np.linalg.norm(norm_mat - qm))

    flags = list(state.flags)
    if match_residual > 1e-6:
        flags.append("jost-match")
    if growing > 1.0:
        flags.append("growing-mode")
    if normalization > 1e-6:
        flags.append("normalization")
    residuals = {"jost_match": match_residual, "growing_mode": growing,
                 "normalization": normalization}
    return dataclasses.replace(state, g=g, h_matrix=h, c=c, omega=omega,
                               phi_n=phi_n, flags=tuple(flags), residuals=residuals)


def overlap_matrix(v: PotentialGrid, sj: BoundState, sl: BoundState) -> np.ndarray:
    """integral of Phi_j^dagger Phi_l over [0, infinity); equals delta_jl Q_j."""
    if not (sj.normalized and sl.normalized):
        raise PreconditionError("both states must be normalized")
    inner = simpson(sj.phi_n.psi.conj().swapaxes(-1, -2) @ sl.phi_n.psi, dx=v.h, axis=0)
    tj = sj.tail_coefficient()
    tl = sl.tail_coefficient()
    inner = inner + _tail_factor(sj.kappa + sl.kappa, v.x_max) * (tj.conj().T @ tl)
    return inner


def analyze_spectrum(v: PotentialGrid, bc: BoundaryPair, substeps: int = 1,
                     **find_kwargs) -> SpectrumReport:
    """find_bound_states followed by gl_normalization on every state."""
    report = find_bound_states(v, bc, substeps=substeps, **find_kwargs)
    states = tuple(gl_normalization(v, bc, s, substeps=substeps) for s in report.states)
    return dataclasses.replace(report, states=states)
