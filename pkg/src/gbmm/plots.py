"""Figure rendering for the experiment outputs.

Each renderer takes the rows a runner produced (the same data written to CSV)
and saves a PNG next to the delimited output.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["render_sweep", "render_convergence", "render_codec"]

KIND_STYLE = {
    "exact_mc": ("-", "o"),
    "upper_bound": ("--", "^"),
    "lower_bound_plus_gap": (":", "v"),
    "baseline_wf": ("-.", "s"),
}


def _new_axes(xlabel, ylabel):
    fig, ax = plt.subplots(figsize=(6.4, 4.4), dpi=150)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    return fig, ax


def render_sweep(rows, out_path, title="") -> None:
    """SE against SNR, one line per (scheme, kind) pair with error bars."""
    fig, ax = _new_axes("SNR (dB)", "Spectral efficiency (bits/s/Hz)")
    series = {}
    for row in rows:
        series.setdefault((row["scheme"], row["kind"]), []).append(row)
    for (scheme, kind), pts in series.items():
        pts = sorted(pts, key=lambda r: r["snr_db"])
        style, marker = KIND_STYLE.get(kind, ("-", "."))
        ax.errorbar(
            [r["snr_db"] for r in pts],
            [r["mean"] for r in pts],
            yerr=[r["stderr"] for r in pts],
            linestyle=style, marker=marker, capsize=2, markersize=4,
            label=f"{scheme} ({kind})",
        )
    if title:
        ax.set_title(title)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def render_convergence(rows, out_path) -> None:
    """Recentred lower bound per iteration, with the reference levels dashed."""
    fig, ax = _new_axes("Iteration", "Lower bound + gap (bits/s/Hz)")
    for label in ("mod_on", "mod_off"):
        pts = [r for r in rows if r["series"] == label]
        if pts:
            ax.plot([r["iteration"] for r in pts],
                    [r["lower_bound_plus_gap"] for r in pts], label=label)
    for label, style in (("alg2_ref", "--"), ("cwf_ref", ":")):
        pts = [r for r in rows if r["series"] == label]
        if pts:
            ax.axhline(pts[0]["lower_bound_plus_gap"], linestyle=style,
                       color="gray", label=label)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def render_codec(report, out_path) -> None:
    """Target against achieved activation probabilities per precoder index."""
    fig, ax = _new_axes("Precoder index", "Probability")
    idx = range(len(report["target_p"]))
    width = 0.4
    ax.bar([i - width / 2 for i in idx], report["target_p"], width, label="target")
    ax.bar([i + width / 2 for i in idx], report["achieved_p"], width, label="achieved")
    ax.set_title(f"TV distance {report['tv_distance']:.4f}, "
                 f"rate {report['rate']:.3f}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
