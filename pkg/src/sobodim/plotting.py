"""Figures written next to the CSV outputs (Agg backend, PNG files)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)


def box_counts(path, series, title="box counts"):
    """``series``: list of ``(label, radii, counts, slope)``."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for label, radii, counts, slope in series:
        ax.loglog(1.0 / np.asarray(radii), counts, "o-", ms=3, label=f"{label} (slope {slope:.3f})")
    ax.set_xlabel("1 / r")
    ax.set_ylabel("N(r)")
    ax.set_title(title)
    ax.legend(fontsize=7)
    _save(fig, path)


def level_norms(path, tables):
    """``tables``: list of ``(p, levels, norms, exponent)``."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for p, levels, norms, exponent in tables:
        vals = np.asarray(norms, dtype=float) ** p
        ax.semilogy(levels, vals, "o-", ms=3, label=f"p={p:g}, exponent {exponent:+.3f}")
    ax.set_xlabel("level n")
    ax.set_ylabel("||Lip f_n||_p^p")
    ax.legend(fontsize=7)
    _save(fig, path)


def regularity(path, tables):
    """``tables``: list of :class:`RegularityTable`."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for t in tables:
        ax.loglog(t.r, t.normalized, "o-", ms=3, label=f"{t.chart}, s={t.s:g} (window {t.window:.2f})")
    ax.set_xlabel("r")
    ax.set_ylabel("N(r) r^s")
    ax.legend(fontsize=7)
    _save(fig, path)


def ratio_scatter(path, cores, ratios, lo, hi):
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.loglog(cores, ratios, ".", ms=2)
    ax.axhline(lo, color="k", lw=0.8, ls="--")
    ax.axhline(hi, color="k", lw=0.8, ls="--")
    ax.set_xlabel("Grushin core")
    ax.set_ylabel("quotient distance / core")
    _save(fig, path)


def survey(path, params, estimates, alphas):
    fig, ax = plt.subplots(figsize=(5.5, 4))
    params = np.asarray(params, dtype=float)
    if params.ndim == 2 and params.shape[1] == 2:
        sc = ax.scatter(params[:, 0], params[:, 1], c=estimates, s=12)
        fig.colorbar(sc, ax=ax, label="leaf image box dimension")
        ax.set_xlabel("parameter 0")
        ax.set_ylabel("parameter 1")
    else:
        ax.plot(params.reshape(-1), estimates, "o", ms=3)
        for a in alphas:
            ax.axhline(a, color="k", lw=0.8, ls="--")
        ax.set_xlabel("parameter")
        ax.set_ylabel("leaf image box dimension")
    _save(fig, path)


def ahlfors(path, radii, lo, hi):
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.fill_between(radii, lo, hi, alpha=0.3)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("r")
    ax.set_ylabel("nu(B(x, r)) / r^2  (min..max over centers)")
    _save(fig, path)
