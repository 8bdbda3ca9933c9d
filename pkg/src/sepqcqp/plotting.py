"""Figures for solver traces and RLS fits, written straight to files."""

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _finite(rows, key):
    it = np.array([r["iter"] for r in rows], dtype=float)
    v = np.array([r[key] for r in rows], dtype=float)
    ok = np.isfinite(v)
    return it[ok], v[ok]


def plot_trace(trace, path, title=None):
    """Dual value, primal value and gap against the outer iteration.

    The gap panel is on a log scale; non-positive and missing gaps are
    dropped from it.
    """
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(6.0, 5.5), sharex=True)
    it, qv = _finite(trace, "q_lambda")
    ax0.plot(it, qv, lw=1.2, label=r"$q(\lambda)$")
    it, fv = _finite(trace, "primal_f")
    if it.size:
        ax0.plot(it, fv, ".", ms=3, alpha=0.6, label=r"$f(x)$, feasible")
    ax0.set_ylabel("value")
    ax0.legend(frameon=False)
    it, gap = _finite(trace, "gap")
    keep = gap > 0
    if keep.any():
        ax1.semilogy(it[keep], gap[keep], lw=1.0, color="C3")
    ax1.set_ylabel("gap")
    ax1.set_xlabel("outer iteration")
    if title:
        ax0.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_rls_history(history, path, title=None):
    """Robust objective per outer iteration of an RLS fit."""
    it = [h["iter"] for h in history]
    obj = [h["objective"] for h in history]
    fig, ax = plt.subplots(figsize=(6.0, 3.5))
    ax.plot(it, obj, marker="o", ms=3, lw=1.0)
    lo = min(obj)
    if all(math.isfinite(v) for v in obj) and max(obj) - lo > 0:
        ax.set_ylim(lo - 0.05 * (max(obj) - lo), max(obj) + 0.05 * (max(obj) - lo))
    ax.set_xlabel("outer iteration")
    ax.set_ylabel("robust objective")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
