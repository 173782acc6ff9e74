"""Figures for the report paths of the CLI (written next to the CSV output)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _figure(width=4.5, height=3.0):
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(width, height))
    return fig, ax


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(RC):
        fig.savefig(path)
    plt.close(fig)
    return path


def failure_rates(rows, path) -> Path:
    """Bar chart of failure rate per drift configuration."""
    fig, ax = _figure()
    labels = [("no CIT" if not r["cit"] else f"eps={r['epsilon']:g}") for r in rows]
    rates = [100.0 * r["failure_rate"] for r in rows]
    ax.bar(range(len(rows)), rates, color=["#b2182b" if not r["cit"] else "#2166ac" for r in rows])
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, rotation=20)
    ax.set_ylabel("decode failure rate (%)")
    ax.set_ylim(0, 105)
    bound = rows[0]["index_noise_bound"] if rows else 0
    ax.set_title(f"index drift bound {bound:g}")
    return _save(fig, path)


def calibration_sweep(rows, path) -> Path:
    """Calibration-set size against epsilon, with and without rectification."""
    fig, ax = _figure()
    for rect, style in ((False, "o-"), (True, "s--")):
        sel = [r for r in rows if r["rectified"] == rect]
        if not sel:
            continue
        eps = [r["epsilon"] for r in sel]
        ax.loglog(eps, [max(r["mean_count"], 1e-1) for r in sel], style,
                  label="rectified" if rect else "plain")
    if rows:
        n = rows[0]["elements"]
        e = np.array(sorted({r["epsilon"] for r in rows}))
        ax.loglog(e, 2 * e * n, ":", color="gray", label="2 eps N")
    ax.set_xlabel("calibration precision eps")
    ax.set_ylabel("mean calibration coordinates / frame")
    ax.legend(frameon=False)
    return _save(fig, path)


def fractional_histogram(before, after, path, bins: int = 50) -> Path:
    """Distribution of index fractional parts before and after rectification."""
    fig, ax = _figure()
    for data, label in ((before, "before"), (after, "after")):
        frac = np.asarray(data, dtype=np.float64).ravel() % 1.0
        ax.hist(frac, bins=bins, range=(0, 1), histtype="step", density=True, label=label)
    ax.set_xlabel("fractional part of continuous index")
    ax.set_ylabel("density")
    ax.legend(frameon=False)
    return _save(fig, path)
