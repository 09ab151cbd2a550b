"""Figure rendering for the report path.

Each report CSV gets a PNG next to it: renewal tables on log-log axes
with the regular-variation reference slope, ratio series with their error
bars and the series-constant band, and the minimum-epoch term decay.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_META = {"Software": "bpremc"}


def render_renewal(table, path, slope_ref: float | None = None):
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    pos = table.abscissae > 0
    x = table.abscissae[pos]
    ax.errorbar(x, table.raw[pos], yerr=2 * table.std_error[pos], fmt=".",
                ms=3, lw=0.8, label="raw estimate (2 se)")
    ax.plot(x, table.isotonic[pos], "-", lw=1.2, label="isotonic")
    if slope_ref is not None:
        anchor = table.isotonic[pos][-1]
        ax.plot(x, anchor * (x / x[-1]) ** slope_ref, "--", lw=1.0,
                label=f"slope {slope_ref:.3g} reference")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("x" if table.kind == "U" else "z")
    ax.set_ylabel("U(x)" if table.kind == "U" else "V(-z)")
    ax.set_title(f"{table.kind} renewal table ({table.paths} paths, {table.n_terms} terms)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130, metadata=_META)
    plt.close(fig)


def render_ratio_series(ns, ratios, errors, path, title, band=None, band_label=None):
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.errorbar(ns, ratios, yerr=[3 * e for e in errors], fmt="o-", capsize=3,
                lw=1.0, label="ratio (3 se)")
    if band is not None:
        center, half = band
        ax.axhspan(center - half, center + half, alpha=0.2, label=band_label)
        ax.axhline(center, lw=0.8, ls="--")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("n")
    ax.set_ylabel("ratio")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130, metadata=_META)
    plt.close(fig)


def render_theta_terms(theta, path):
    js = [t.j for t in theta.terms if t.j >= 1]
    vals = [t.estimate.value for t in theta.terms if t.j >= 1]
    errs = [t.estimate.std_error for t in theta.terms if t.j >= 1]
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.errorbar(js, vals, yerr=[3 * e for e in errs], fmt="s", capsize=3,
                label="series terms (3 se)")
    if len(js) >= 2 and np.isfinite(theta.tail_exponent) and vals[-1] > 0:
        ref = vals[-1] * (np.array(js, float) / js[-1]) ** (-theta.tail_exponent)
        ax.plot(js, ref, "--", lw=1.0,
                label=f"fitted decay exponent {theta.tail_exponent:.2f}")
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("minimum epoch j")
    ax.set_ylabel("term value")
    ax.set_title(f"series terms; sum={theta.value:.4f}, tail heuristic={theta.tail_heuristic:.4f}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130, metadata=_META)
    plt.close(fig)
