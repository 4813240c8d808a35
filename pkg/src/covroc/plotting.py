"""Figure rendering for CLI reports (PNG files next to the CSV/JSON output)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    # fixed metadata keeps repeated runs byte-identical
    "svg.hashsalt": "covroc",
}

matplotlib.rcParams.update(STYLE)

ROC_COLOR = "tab:orange"
AROC_COLOR = "saddlebrown"


def new_figure(ncols=1, width=3.4, height=3.2):
    fig, axes = plt.subplots(1, ncols, figsize=(width * ncols, height), squeeze=False)
    return fig, axes[0]


def save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def _unit_square(ax):
    ax.plot([0, 1], [0, 1], color="0.75", lw=0.8, ls=":")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.set_aspect("equal")
    ax.set_xlabel("false-positive fraction p")
    ax.set_ylabel("true-positive fraction")


def plot_curves(payload: dict, path) -> Path:
    """Pooled, adjusted and conditional ROC curves from a ``curves`` payload."""
    fig, (ax, ax2) = new_figure(ncols=2)
    grid = np.asarray(payload["grid"])
    _unit_square(ax)
    cmap = plt.get_cmap("viridis")
    cond = payload.get("conditional", [])
    for i, c in enumerate(cond):
        ax.plot(grid, c["values"], color=cmap(i / max(1, len(cond) - 1)), lw=0.9,
                label=f"ROC$^x$, x={c['x']:.3g}")
    ax.plot(grid, payload["roc"], color=ROC_COLOR, ls="--", lw=1.4, label="ROC")
    ax.plot(grid, payload["aroc"], color=AROC_COLOR, ls="-.", lw=1.4, label="AROC")
    ax.legend(loc="lower right", frameon=False)

    if cond:
        xs = [c["x"] for c in cond]
        ax2.plot(xs, [c["auc"] for c in cond], "o-", color="0.3", lw=1, label="AUC$^x$")
    ax2.axhline(payload["auc"], color=ROC_COLOR, ls="--", label="AUC")
    ax2.axhline(payload["aauc"], color=AROC_COLOR, ls="-.", label="AAUC")
    ax2.axhline(0.5, color="0.75", lw=0.8)
    ax2.set_ylim(0.4, 1.0)
    ax2.set_xlabel(payload.get("covariate", "covariate"))
    ax2.set_ylabel("area under the curve")
    ax2.legend(loc="lower right", frameon=False)
    return save(fig, path)


def plot_bootstrap(result, path) -> Path:
    """Bootstrap replicate histograms with the observed statistic marked."""
    kinds = list(result.statistics)
    fig, axes = new_figure(ncols=len(kinds), width=2.6, height=2.4)
    for ax, k in zip(axes, kinds):
        reps = result.bootstrap_replicates[k]
        ax.hist(reps, bins=30, color="0.7", edgecolor="white", lw=0.4)
        ax.axvline(result.statistics[k], color="firebrick", lw=1.2)
        ax.set_title(f"{k.value}: p = {result.p_values[k]:.3g}")
        ax.set_xlabel("bootstrap statistic")
    axes[0].set_ylabel("count")
    return save(fig, path)


def plot_rejections(table, path) -> Path:
    """Rejection proportion against sample size, one panel per alpha."""
    alphas = sorted({r.alpha for r in table.rows})
    fig, axes = new_figure(ncols=len(alphas), width=2.8, height=2.6)
    markers = {"L1": "o", "L2": "s", "KS": "^"}
    styles = {}
    for ax, alpha in zip(axes, alphas):
        rows = [r for r in table.rows if r.alpha == alpha]
        sizes = sorted({(r.n_f, r.n_g) for r in rows})
        pos = {s: i for i, s in enumerate(sizes)}
        for key in sorted({(r.distance, r.rho) for r in rows}):
            sel = sorted((r for r in rows if (r.distance, r.rho) == key), key=lambda r: pos[(r.n_f, r.n_g)])
            ls = styles.setdefault(key[1], ["-", "--", ":", "-."][len(styles) % 4])
            xs = [pos[(r.n_f, r.n_g)] for r in sel]
            ys = [r.proportion for r in sel]
            err = [[r.proportion - r.lo for r in sel], [r.hi - r.proportion for r in sel]]
            ax.errorbar(xs, ys, yerr=err, marker=markers.get(key[0], "o"), ls=ls, lw=0.9,
                        ms=3.5, capsize=2, label=f"{key[0]}, rho={key[1]:.3g}")
        ax.axhline(alpha, color="0.6", lw=0.8)
        ax.set_xticks(range(len(sizes)))
        ax.set_xticklabels([f"({a},{b})" for a, b in sizes], rotation=20)
        ax.set_title(f"scenario {rows[0].scenario}, alpha = {alpha:g}")
        ax.set_ylim(0, 1 if max(r.proportion for r in rows) > 0.3 else 0.3)
    axes[0].set_ylabel("rejection proportion")
    axes[-1].legend(frameon=False, fontsize=6)
    return save(fig, path)
