"""Acceptance suite: one test per criterion, each printing a PASS line.

Every tolerance is pinned here, not configured elsewhere.  Runtime budgets are
asserted against wall-clock time for the computational core of each criterion.
"""

import time

import numpy as np
import pytest

from halfline_spectral.darboux import (DET_CHECK_POINTS, add_bound_state,
                                       remove_bound_state, verify_addition_roundtrip,
                                       verify_removal)
from halfline_spectral.fdoracle import compare_spectra, oracle_negative_spectrum
from halfline_spectral.ltcheck import (lt_property_suite, random_instance,
                                       random_instance_with_bound_state,
                                       sharpness_sweep)
from halfline_spectral.matcore import moore_penrose
from halfline_spectral.model import (BoundaryPair, PotentialGrid,
                                     truncate_negative, truncate_support)
from halfline_spectral.presets import PRESETS
from halfline_spectral.propagate import regular_solution
from halfline_spectral.spectral import (analyze_spectrum, find_bound_states,
                                        jost_matrix, jost_regular_bilinear)


def report(name: str, elapsed: float, detail: str) -> None:
    print(f"PASS {name} [{elapsed:.2f}s] {detail}")


def test_criterion_1_worked_scalar_chain():
    """V=0, B=-1: kappa=1, C^2=2, Phi=sqrt(2)e^-x; removal gives V~=0, B~=+1;
    determinant identity at 10 points; all residuals < 1e-7; runtime < 1 s."""
    t0 = time.perf_counter()
    v = PotentialGrid.zeros(1, 2.0, 2e-3)
    bc = BoundaryPair.robin(np.array([[-1.0 + 0j]]))
    rep = analyze_spectrum(v, bc, kappa_max=2.5, grid_points=150)
    assert len(rep.states) == 1
    s = rep.states[0]
    worst = abs(s.kappa - 1.0)
    worst = max(worst, abs((s.c @ s.c)[0, 0] - 2.0))
    worst = max(worst, float(np.max(np.abs(s.phi_n.psi[:, 0, 0]
                                           - np.sqrt(2.0) * np.exp(-s.phi_n.x)))))
    res = remove_bound_state(v, bc, [s], 0)
    worst = max(worst, float(np.max(np.abs(res.v_tilde.samples))))
    worst = max(worst, abs(res.bc_tilde.b[0, 0] - 1.0))
    for k in DET_CHECK_POINTS:
        jv = np.linalg.det(jost_matrix(v, bc, k))
        jt = np.linalg.det(jost_matrix(res.v_tilde, res.bc_tilde, k))
        expected = (k + 1j) / (k - 1j) * jv
        worst = max(worst, abs(jt - expected) / abs(expected))
    elapsed = time.perf_counter() - t0
    assert worst < 1e-7
    assert elapsed < 1.0
    report("criterion 1 (worked scalar chain)", elapsed, f"worst residual {worst:.2e}")


def test_criterion_2_matrix_removal():
    """n=2, V=0, B=diag(-1,-2); removing kappa=2 keeps kappa=1 with Q_1, C_1
    unchanged to 1e-7; one state remains; det identity < 1e-6; runtime < 10 s."""
    t0 = time.perf_counter()
    v = PotentialGrid.zeros(2, 2.0, 1e-3)
    bc = BoundaryPair.robin(np.diag([-1.0, -2.0]).astype(complex))
    states = list(analyze_spectrum(v, bc).states)
    assert [round(s.kappa, 6) for s in states] == [2.0, 1.0]
    res = remove_bound_state(v, bc, states, 0)
    ver = verify_removal(v, bc, states, 0, res)
    elapsed = time.perf_counter() - t0
    assert ver["spectrum_count_ok"] and ver["n_states_after"] == 1
    assert ver["q_deviation"] < 1e-7
    assert ver["c_deviation"] < 1e-7
    assert ver["kappa_deviation"] < 1e-7
    assert ver["det_identity"] < 1e-6
    assert elapsed < 10.0
    report("criterion 2 (matrix removal)", elapsed,
           f"Q dev {ver['q_deviation']:.2e}, C dev {ver['c_deviation']:.2e}, "
           f"det {ver['det_identity']:.2e}")


def test_criterion_3_reverse_lt_property_suite():
    """200 random instances (n <= 4) with a bound state: strict inequality with
    positive margin and the strengthened bound; zero violations; < 10 min."""
    t0 = time.perf_counter()
    rows = lt_property_suite(200, seed=20250801)
    elapsed = time.perf_counter() - t0
    violations = [r for r in rows if not (r["verdict"] and r["strengthened_ok"]
                                          and r["margin"] > 0)]
    assert len(rows) == 200
    assert not violations
    assert elapsed < 600.0
    report("criterion 3 (reverse LT property suite)", elapsed,
           f"200 instances, min margin {min(r['margin'] for r in rows):.4f}")


def test_criterion_4_sharpness():
    """Sweep c in {0.5,...,0.02} at kappa=1, m=1: identity residual < 1e-6 at
    every c, ratios decreasing, rho(0.02) < 0.2501; runtime < 1 min."""
    t0 = time.perf_counter()
    rows = sharpness_sweep(1.0, 1, [0.5, 0.2, 0.1, 0.05, 0.02])
    elapsed = time.perf_counter() - t0
    ratios = [r["ratio"] for r in rows]
    assert max(r["identity_residual"] for r in rows) < 1e-6
    assert all(a > b for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] < 0.2501
    assert all(r > 0.25 for r in ratios)
    assert elapsed < 60.0
    report("criterion 4 (sharpness of 1/4)", elapsed,
           f"rho(0.02) = {ratios[-1]:.6f}")


def _oracle_h(report_states) -> float:
    deepest = max(abs(s.lam) for s in report_states)
    return 0.005 if deepest > 3.5 else 0.01


def test_criterion_5_oracle_agreement():
    """Jost-based and finite-difference spectra agree in count+multiplicity
    with |d lambda| < 5e-4 on all presets and 50 random instances; < 5 min."""
    t0 = time.perf_counter()
    worst = 0.0
    for name, builder in PRESETS.items():
        v, bc = builder()
        rep = find_bound_states(v, bc)
        oracle = oracle_negative_spectrum(v, bc, 20.0, _oracle_h(rep.states))
        diff = compare_spectra([(s.lam, s.m) for s in rep.states], oracle)
        assert diff["count_ok"], f"count mismatch on preset {name}"
        assert diff["max_lambda_dev"] < 5e-4, f"lambda deviation on preset {name}"
        worst = max(worst, diff["max_lambda_dev"])

    children = np.random.default_rng(20250802).spawn(50)
    for rng in children:
        v, bc, rep = random_instance_with_bound_state(
            rng, min_kappa=0.35, max_strength=2.0, b_norm=1.5, b_shift=0.8)
        oracle = oracle_negative_spectrum(v, bc, 20.0, _oracle_h(rep.states))
        diff = compare_spectra([(s.lam, s.m) for s in rep.states], oracle)
        assert diff["count_ok"]
        assert diff["max_lambda_dev"] < 5e-4
        worst = max(worst, diff["max_lambda_dev"])
    elapsed = time.perf_counter() - t0
    assert elapsed < 300.0
    report("criterion 5 (oracle agreement)", elapsed,
           f"4 presets + 50 instances, worst |d lambda| {worst:.2e}")


def test_criterion_6_add_remove_round_trip():
    """20 random additions to (0, Neumann) followed by removal recover the
    free operator in sup-norm < 1e-6; B after addition is exactly -C^2; < 2 min."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(20250803)
    worst_v = worst_b = 0.0
    for trial in range(20):
        n = 2 if trial % 7 == 3 else 1
        kappa = float(rng.uniform(0.7, 1.4))
        c_scale = float(rng.uniform(0.05, 0.45))
        rank = 1 if n == 1 else int(rng.integers(1, n + 1))
        c = np.zeros((n, n), dtype=complex)
        c[:rank, :rank] = c_scale * np.eye(rank)
        v = PotentialGrid.zeros(n, 2.0, 1e-3)
        bc = BoundaryPair.neumann(n)
        added = add_bound_state(v, bc, kappa, c)
        assert np.max(np.abs(added.bc_new.b + c @ c)) < 1e-14 * (1 + c_scale**2)
        rt = verify_addition_roundtrip(v, bc, added)
        assert rt["v_sup_deviation"] < 1e-6
        assert rt["b_deviation"] < 1e-6
        worst_v = max(worst_v, rt["v_sup_deviation"])
        worst_b = max(worst_b, rt["b_deviation"])
    elapsed = time.perf_counter() - t0
    assert elapsed < 120.0
    report("criterion 6 (add/remove round trip)", elapsed,
           f"20 trips, worst V dev {worst_v:.2e}, worst B dev {worst_b:.2e}")


def _negatives(v, bc, h=0.01):
    return [lam for lam, m in oracle_negative_spectrum(v, bc, 20.0, h)
            for _ in range(m)]


def test_criterion_7_minmax_monotonicity():
    """Ordered negative eigenvalues satisfy mu_j(V) <= mu_j(V_l) + 1e-6 and
    mu_j(V_{l,p}) <= mu_j(V_l) + 1e-6, via the oracle, on 20 instances."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(20250804)
    checked = 0
    for _ in range(20):
        v, bc = random_instance(rng, max_strength=3.0)
        l = float(rng.uniform(0.5, 0.9) * v.x_max)
        p = float(rng.uniform(l, v.x_max))
        v_l = truncate_negative(v, l)
        v_lp = truncate_support(v_l, p)
        mu = _negatives(v, bc)
        mu_l = _negatives(v_l, bc)
        mu_lp = _negatives(v_lp, bc)
        assert len(mu) >= len(mu_l)            # V <= V_l termwise
        for j in range(len(mu_l)):
            assert mu[j] <= mu_l[j] + 1e-6
        assert len(mu_lp) >= len(mu_l)         # V_{l,p} <= V_l for p >= l
        for j in range(len(mu_l)):
            assert mu_lp[j] <= mu_l[j] + 1e-6
        checked += len(mu_l)
    elapsed = time.perf_counter() - t0
    report("criterion 7 (min-max monotonicity)", elapsed,
           f"20 instances, {checked} eigenvalue comparisons")


def test_criterion_8_dirichlet_remark():
    """Scalar Q = -1 on [0,1]: no negative eigenvalue for beta in {0.5, 1, 2}
    (criterion value >= 0), exactly one for beta = 4; runtime < 1 min."""
    t0 = time.perf_counter()
    q = PotentialGrid.square_well(np.array([[-1.0 + 0j]]), 1.0, 2.0, 1e-3)
    weighted = q.weighted_norm_integral()
    assert weighted == pytest.approx(0.5, abs=1e-12)
    for beta in (0.5, 1.0, 2.0):
        assert 1.0 - beta * weighted >= 0.0
        assert _negatives(q.scaled(beta), "dirichlet", h=0.005) == []
    deep = _negatives(q.scaled(4.0), "dirichlet", h=0.005)
    elapsed = time.perf_counter() - t0
    assert len(deep) == 1
    assert elapsed < 60.0
    report("criterion 8 (Dirichlet remark)", elapsed,
           f"beta <= 2 empty, beta = 4 gives lambda = {deep[0]:.6f}")


def test_criterion_9_numerical_sanity(rng):
    """4th-order convergence against the free closed form; Wronskian/J(k)
    constancy drift < 1e-8; Penrose residuals < 1e-9 on random matrices."""
    t0 = time.perf_counter()
    # convergence
    k = 1.5 + 0.5j
    b = np.array([[-1.0 + 0j]])
    errs = []
    for h in (4e-2, 2e-2, 1e-2, 5e-3):
        v = PotentialGrid.zeros(1, 2.0, h)
        sol = regular_solution(v, BoundaryPair.robin(b), k)
        x = sol.x[:, None, None]
        errs.append(np.max(np.abs(sol.psi - (np.cos(k * x) + np.sin(k * x) / k * b))))
    ratios = [errs[i] / errs[i + 1] for i in range(3)]
    assert all(13.0 < r < 19.0 for r in ratios)

    # Wronskian / J(k) constancy
    v = PotentialGrid.square_well(np.array([[-3.0, 0.7], [0.7, -1.5]]), 1.2, 2.4, 1.2e-3)
    bc = BoundaryPair.robin(np.array([[-0.5, 0.2], [0.2, 0.3]], dtype=complex))
    drift = 0.0
    for k in (0.9, 1.1 + 0.8j, 2j):
        bil = jost_regular_bilinear(v, bc, k)
        drift = max(drift, float(np.max(np.abs(bil - bil[0]))))
    assert drift < 1e-8

    # Penrose residuals
    worst = 0.0
    for n in range(1, 7):
        for _ in range(30):
            m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            mp = moore_penrose(m)
            worst = max(worst,
                        np.linalg.norm(m @ mp @ m - m),
                        np.linalg.norm(mp @ m @ mp - mp),
                        np.linalg.norm((m @ mp).conj().T - m @ mp),
                        np.linalg.norm((mp @ m).conj().T - mp @ m))
    assert worst < 1e-9
    elapsed = time.perf_counter() - t0
    report("criterion 9 (numerical sanity)", elapsed,
           f"RK4 ratios {[f'{r:.1f}' for r in ratios]}, drift {drift:.1e}, "
           f"Penrose {worst:.1e}")
