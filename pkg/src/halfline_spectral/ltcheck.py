"""Reverse Lieb-Thirring evaluation, positivity ledger, sharpness, Dirichlet remark.

The inequality under test bounds the eigenvalue-root sum from below:

    sum_j m_j sqrt(|lambda_j|)  >  (1/4) [ -int Tr V dx - Tr B ],

for the Robin-form operator with at least one bound state; the constant 1/4 is
sharp.  The strengthened variant adds (1/4) sum_j Tr C_j^2 on the right, with
C_j the Gel'fand-Levitan matrices.  Sharpness is probed constructively: adding
a single state at -kappa^2 with C = c P to the free Neumann operator realizes
the trace identity exactly, and c -> 0 drives the ratio to 1/4 from above.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .darboux import add_bound_state
from .errors import PreconditionError, TransformationInstabilityError
from .matcore import spectral_norm, symmetrize
from .model import BoundaryPair, PotentialGrid, normalize_to_robin
from .fdoracle import oracle_negative_spectrum
from .spectral import SpectrumReport, analyze_spectrum, find_bound_states

THREADS_ENV = "HALFLINE_SPECTRAL_THREADS"


def worker_count() -> int:
    value = os.environ.get(THREADS_ENV)
    if value:
        return max(1, int(value))
    return min(8, os.cpu_count() or 1)


def _parallel_map(fn, items):
    """Order-preserving map honoring the thread cap (deterministic aggregation)."""
    workers = worker_count()
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# The inequality
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LTReport:
    lhs: float                   # sum of m_j sqrt(|lambda_j|)
    rhs: float                   # (1/4) [-int Tr V - Tr B]
    rhs_strengthened: float      # rhs + (1/4) sum Tr C_j^2
    margin: float                # lhs - rhs
    verdict: bool                # lhs > rhs
    hypothesis_met: bool         # at least one bound state exists
    trace_v_integral: float
    trace_b: float
    ledger: tuple[float, ...]    # per-state Tr C_j^2
    kappas: tuple[float, ...]
    multiplicities: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs, "rhs": self.rhs,
            "rhs_strengthened": self.rhs_strengthened,
            "margin": self.margin, "verdict": self.verdict,
            "hypothesis_met": self.hypothesis_met,
            "trace_v_integral": self.trace_v_integral, "trace_b": self.trace_b,
            "ledger_tr_c2": list(self.ledger),
            "kappas": list(self.kappas), "multiplicities": list(self.multiplicities),
        }


def _robin(bc: BoundaryPair) -> BoundaryPair:
    if bc.is_robin:
        return bc
    return normalize_to_robin(bc.a, bc.b)   # raises for Dirichlet channels


def lt_evaluate(v: PotentialGrid, bc: BoundaryPair, spectrum: SpectrumReport | None = None,
                substeps: int = 1, **find_kwargs) -> LTReport:
    """Evaluate both sides of the inequality and the strengthened variant."""
    bc = _robin(bc)
    if spectrum is None:
        spectrum = analyze_spectrum(v, bc, substeps=substeps, **find_kwargs)
    states = [s if s.normalized else None for s in spectrum.states]
    if any(s is None for s in states):
        raise PreconditionError("spectrum must carry normalized states (use analyze_spectrum)")
    lhs = float(sum(s.m * s.kappa for s in states))
    trace_v = v.trace_integral()
    trace_b = float(np.trace(bc.b).real)
    rhs = 0.25 * (-trace_v - trace_b)
    ledger = tuple(float(np.trace(s.c @ s.c).real) for s in states)
    rhs_strong = rhs + 0.25 * sum(ledger)
    return LTReport(
        lhs=lhs, rhs=rhs, rhs_strengthened=rhs_strong, margin=lhs - rhs,
        verdict=lhs > rhs, hypothesis_met=len(states) > 0,
        trace_v_integral=trace_v, trace_b=trace_b, ledger=ledger,
        kappas=tuple(s.kappa for s in states),
        multiplicities=tuple(s.m for s in states),
    )


def positivity_ledger(v: PotentialGrid, bc: BoundaryPair, substeps: int = 1,
                      **find_kwargs) -> np.ndarray:
    """Per-channel int V_rr dx + B_rr for an operator with no negative spectrum."""
    bc = _robin(bc)
    spectrum = find_bound_states(v, bc, substeps=substeps, **find_kwargs)
    if len(spectrum) > 0:
        raise PreconditionError(
            f"positivity ledger requires an empty negative spectrum, found {len(spectrum)} states"
        )
    diag_int = v.h * np.einsum("ijj->j", v.cells).real
    return diag_int + np.diag(bc.b).real


# ---------------------------------------------------------------------------
# Sharpness sweep
# ---------------------------------------------------------------------------

def sharpness_sweep(kappa: float, m: int, c_values, n: int | None = None,
                    substeps: int = 1) -> list[dict]:
    """Add a rank-m state with C = c P to the free Neumann operator for each c.

    Verifies the trace identity at every c and that the ratio
    lhs / (-int Tr V - Tr B) decreases towards 1/4 from above as c -> 0.
    """
    c_values = list(c_values)
    if any(c <= 0 for c in c_values):
        raise PreconditionError("c values must be positive")
    if any(b >= a for a, b in zip(c_values, c_values[1:])) and sorted(c_values, reverse=True) != c_values:
        raise PreconditionError("c values must decrease towards 0")
    n = n or m
    if not 1 <= m <= n:
        raise PreconditionError(f"need 1 <= m <= n, got m={m}, n={n}")
    proj = np.zeros((n, n), dtype=complex)
    proj[:m, :m] = np.eye(m)
    base_v = PotentialGrid.zeros(n, 1.0, 1e-3)
    base_bc = BoundaryPair.neumann(n)

    def one(c: float) -> dict:
        added = add_bound_state(base_v, base_bc, kappa, c * proj, substeps=substeps)
        spectrum = find_bound_states(added.v_new, added.bc_new, substeps=substeps)
        if len(spectrum) != 1 or spectrum.states[0].m != m:
            raise TransformationInstabilityError(
                f"sharpness instance c={c}: expected one rank-{m} state, got "
                f"{[(s.kappa, s.m) for s in spectrum.states]}"
            )
        found = spectrum.states[0]
        lhs = found.m * found.kappa
        denom = -added.v_new.trace_integral() - float(np.trace(added.bc_new.b).real)
        return {
            "c": float(c),
            "lhs": lhs,
            "kappa_found": found.kappa,
            "trace_v_integral": added.v_new.trace_integral(),
            "trace_b": float(np.trace(added.bc_new.b).real),
            "tr_c2": float(m * c**2),
            "identity_residual": added.report["trace_identity"],
            "ratio": lhs / denom,
        }

    rows = _parallel_map(one, c_values)
    ratios = [r["ratio"] for r in rows]
    for a, b in zip(ratios, ratios[1:]):
        if not b < a:
            raise TransformationInstabilityError(
                f"sharpness ratios not decreasing along the sweep: {ratios}"
            )
    if any(r <= 0.25 for r in ratios):
        raise TransformationInstabilityError(f"sharpness ratio fell to 1/4 or below: {ratios}")
    return rows


# ---------------------------------------------------------------------------
# Dirichlet remark
# ---------------------------------------------------------------------------

def dirichlet_no_bound_state_check(q: PotentialGrid, beta_values, length: float = 20.0,
                                   h: float = 0.005) -> list[dict]:
    """For each coupling beta, compare the smallness criterion
    1 - |beta| int x |Q(x)| dx >= 0 with the oracle's Dirichlet spectrum."""
    weighted = q.weighted_norm_integral()
    rows = []
    for beta in beta_values:
        criterion = 1.0 - abs(beta) * weighted
        negatives = oracle_negative_spectrum(q.scaled(float(beta)), "dirichlet", length, h)
        n_neg = sum(mult for _, mult in negatives)
        rows.append({
            "beta": float(beta),
            "criterion": float(criterion),
            "n_negative": int(n_neg),
            "eigenvalues": [lam for lam, _ in negatives],
            "consistent": (criterion < 0) or (n_neg == 0),
        })
    return rows


# ---------------------------------------------------------------------------
# Random instances for the property suite
# ---------------------------------------------------------------------------

def random_hermitian(rng: np.random.Generator, n: int, norm: float) -> np.ndarray:
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    h = symmetrize(g)
    scale = spectral_norm(h)
    return (norm / scale) * h if scale > 0 else h


def random_instance(rng: np.random.Generator, n: int | None = None, x_max: float = 2.0,
                    h: float = 4e-3, n_bumps: int = 3, max_strength: float = 5.0,
                    b_norm: float = 3.0, b_shift: float = 1.5) -> tuple[PotentialGrid, BoundaryPair]:
    """Smooth random Hermitian bump potential on [0, x_max] plus a Hermitian B."""
    if n is None:
        n = int(rng.integers(1, 5))
    centers = rng.uniform(0.2 * x_max, 0.9 * x_max, size=n_bumps)
    widths = rng.uniform(0.075 * x_max, 0.25 * x_max, size=n_bumps)
    mats = [random_hermitian(rng, n, rng.uniform(0.3, 1.0) * max_strength) for _ in range(n_bumps)]

    def fn(x: float) -> np.ndarray:
        out = np.zeros((n, n), dtype=complex)
        for c, w, s in zip(centers, widths, mats):
            out += s * np.exp(-((x - c) ** 2) / (2 * w**2))
        return out

    v = PotentialGrid.from_function(fn, n, x_max, h)
    b = random_hermitian(rng, n, rng.uniform(0.1, 1.0) * b_norm)
    b -= rng.uniform(0.0, b_shift) * np.eye(n)
    return v, BoundaryPair.robin(b)


def random_instance_with_bound_state(rng: np.random.Generator, min_kappa: float = 0.0,
                                     max_tries: int = 60, substeps: int = 1,
                                     **instance_kwargs):
    """Draw instances until one has a bound state (optionally all kappa >= min_kappa)."""
    for _ in range(max_tries):
        v, bc = random_instance(rng, **instance_kwargs)
        report = analyze_spectrum(v, bc, substeps=substeps)
        if len(report) == 0:
            continue
        if min_kappa and min(s.kappa for s in report.states) < min_kappa:
            continue
        return v, bc, report
    raise PreconditionError(f"no instance with a bound state after {max_tries} draws")


def lt_property_suite(n_instances: int, seed: int = 0, min_kappa: float = 0.0,
                      substeps: int = 1, **instance_kwargs) -> list[dict]:
    """Evaluate the inequality on random instances; deterministic in the seed."""
    children = np.random.default_rng(seed).spawn(n_instances)

    def one(rng: np.random.Generator) -> dict:
        v, bc, report = random_instance_with_bound_state(
            rng, min_kappa=min_kappa, substeps=substeps, **instance_kwargs)
        lt = lt_evaluate(v, bc, spectrum=report)
        return {
            "n": v.n,
            "n_states": len(report),
            "lhs": lt.lhs, "rhs": lt.rhs,
            "rhs_strengthened": lt.rhs_strengthened,
            "margin": lt.margin,
            "verdict": lt.verdict,
            "strengthened_ok": lt.lhs >= lt.rhs_strengthened - 1e-9,
            "min_kappa": min(lt.kappas),
        }

    return _parallel_map(one, children)
