"""Figure rendering for the report commands.

Figures are written straight to files (Agg backend, no display); the CLI
drops them next to the delimited output so a sweep or Monte Carlo run leaves
both machine-readable and visual artifacts.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .harness import ErrorStats, McConfig, _mc_rows, bounds_sweep  # noqa: E402


def save_bounds_figure(rows: Sequence[dict], path) -> Path:
    """Log-log panels of the normalized error bounds versus the SNR quantity C."""
    path = Path(path)
    C = [r["C"] for r in rows]
    fig, axes = plt.subplots(2, 1, figsize=(6.0, 7.0), sharex=True)
    panels = (("sigma11", r"$\Sigma_{11}$ bound  [$\theta_1^2/(\theta_2 T)$]"),
              ("sigma22", r"$\Sigma_{22}$ bound  [$\theta_2/T$]"))
    for ax, (key, label) in zip(axes, panels):
        ax.loglog(C, [r[f"{key}_quantum"] for r in rows], "k-", label="quantum limit")
        ax.loglog(C, [r[f"{key}_homodyne"] for r in rows], "b--", label="homodyne limit")
        ax.set_ylabel(label)
        ax.grid(True, which="both", alpha=0.3)
    axes[0].legend()
    axes[1].set_xlabel(r"SNR quantity $C = 8\theta_1 S_I/\theta_2$")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_mc_figure(cfg: McConfig, stats: ErrorStats, path) -> Path:
    """Bound curves around the run's C with the measured errors overlaid."""
    path = Path(path)
    rows = _mc_rows(cfg, stats)
    C = rows[0]["C"]
    grid = [C * f for f in (0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0)]
    sweep = bounds_sweep(cfg.theta_true, cfg.T, grid)
    fig, axes = plt.subplots(2, 1, figsize=(6.0, 7.0), sharex=True)
    panels = (("sigma11", r"$\Sigma_{11}$  [$\theta_1^2/(\theta_2 T)$]"),
              ("sigma22", r"$\Sigma_{22}$  [$\theta_2/T$]"))
    for idx, (ax, (key, label)) in enumerate(zip(axes, panels)):
        ax.loglog([r["C"] for r in sweep], [r[f"{key}_quantum"] for r in sweep],
                  "k-", label="quantum limit")
        ax.loglog([r["C"] for r in sweep], [r[f"{key}_homodyne"] for r in sweep],
                  "b--", label="homodyne limit")
        row = rows[idx]
        ax.errorbar([C], [row["eps_bar"]], yerr=[row["se"]], fmt="ro",
                    capsize=4, label=f"measured ({cfg.measurement.kind}, M={stats.M})")
        ax.set_ylabel(label)
        ax.grid(True, which="both", alpha=0.3)
    axes[0].legend()
    axes[1].set_xlabel(r"SNR quantity $C = 8\theta_1 S_I/\theta_2$")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
