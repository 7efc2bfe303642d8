"""Figure rendering for the CLI report path.

Each function takes the already-assembled report data and writes one PNG next
to the delimited output.  Rendering is headless (Agg backend).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

DPI = 150


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def spectrum_figure(kappa_grid, sigma_min, kappas, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.semilogy(kappa_grid, np.maximum(sigma_min, 1e-300), lw=1.2)
    for kap in kappas:
        ax.axvline(kap, color="crimson", ls="--", lw=0.8)
    ax.set_xlabel(r"$\kappa$")
    ax.set_ylabel(r"$\sigma_{\min}\,J(i\kappa)$")
    ax.set_title("Bound-state scan (dashed: refined roots)")
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def lt_figure(report: dict, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    labels = ["lhs", "rhs", "rhs + ledger/4"]
    values = [report["lhs"], report["rhs"], report["rhs_strengthened"]]
    bars = ax.bar(labels, values, color=["#2c7fb8", "#d95f0e", "#fdae6b"])
    ax.bar_label(bars, fmt="%.4f")
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_ylabel("1/length")
    ax.set_title(f"Eigenvalue-root sum vs trace bound (margin {report['margin']:.4f})")
    return _save(fig, path)


def removal_figure(x, trace_v, trace_v_tilde, trace_bracket, kappa, path: Path) -> Path:
    fig, axes = plt.subplots(2, 1, figsize=(6.4, 6.0), sharex=True)
    axes[0].plot(x, trace_v, label="Tr V", lw=1.2)
    axes[0].plot(x, trace_v_tilde, label="Tr V~", lw=1.2, ls="--")
    axes[0].set_ylabel("trace of potential")
    axes[0].legend()
    axes[0].grid(alpha=0.3)
    axes[1].plot(x, trace_bracket, lw=1.2, color="seagreen")
    axes[1].axhline(2 * kappa, color="k", ls=":", lw=0.9, label=r"$2\kappa_N m_N$ scale")
    axes[1].set_ylabel("Tr bracket")
    axes[1].set_xlabel("x")
    axes[1].grid(alpha=0.3)
    fig.suptitle(f"Removal of the state at kappa = {kappa:.6g}")
    return _save(fig, path)


def addition_figure(x, trace_v_new, kappa, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(x, trace_v_new, lw=1.2)
    ax.set_xlabel("x")
    ax.set_ylabel("Tr V_new")
    ax.set_title(f"Potential after adding a state at kappa = {kappa:.6g}")
    ax.grid(alpha=0.3)
    axin = ax.twinx()
    mask = np.asarray(trace_v_new) != 0
    axin.semilogy(np.asarray(x)[mask], np.abs(np.asarray(trace_v_new))[mask],
                  lw=0.8, color="gray", alpha=0.6)
    axin.set_ylabel("|Tr V_new| (log)", color="gray")
    return _save(fig, path)


def sharpness_figure(rows: list[dict], path: Path) -> Path:
    c = [r["c"] for r in rows]
    rho = [r["ratio"] for r in rows]
    fig, ax = plt.subplots(figsize=(5.6, 4.0))
    ax.semilogx(c, rho, "o-", lw=1.2)
    ax.axhline(0.25, color="crimson", ls="--", lw=1.0, label="sharp constant 1/4")
    ax.set_xlabel("c")
    ax.set_ylabel(r"$\rho(c)$")
    ax.set_title("Sharpness sweep: ratio approaches 1/4 from above")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def oracle_figure(jost: list, oracle: list, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for lam, m in jost:
        ax.plot([lam] * m, np.arange(1, m + 1), "o", color="#2c7fb8",
                label="Jost" if lam == jost[0][0] else None, ms=8, mfc="none")
    for lam, m in oracle:
        ax.plot([lam] * m, np.arange(1, m + 1), "x", color="#d95f0e",
                label="oracle" if lam == oracle[0][0] else None, ms=8)
    ax.set_xlabel(r"$\lambda$")
    ax.set_ylabel("multiplicity index")
    ax.set_title("Negative spectrum: Jost vs finite differences")
    if jost or oracle:
        ax.legend()
    ax.grid(alpha=0.3)
    return _save(fig, path)


def dirichlet_figure(rows: list[dict], path: Path) -> Path:
    betas = [r["beta"] for r in rows]
    crit = [r["criterion"] for r in rows]
    n_neg = [r["n_negative"] for r in rows]
    fig, ax = plt.subplots(figsize=(5.6, 4.0))
    ax.plot(betas, crit, "o-", label="criterion value")
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel(r"$\beta$")
    ax.set_ylabel(r"$1 - |\beta|\int x\,|Q|\,dx$")
    ax2 = ax.twinx()
    ax2.plot(betas, n_neg, "s--", color="crimson", label="negative eigenvalues")
    ax2.set_ylabel("# negative eigenvalues", color="crimson")
    ax.set_title("Dirichlet smallness criterion vs oracle spectrum")
    ax.grid(alpha=0.3)
    return _save(fig, path)
