"""Report figures, rendered with the non-interactive Agg backend."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .clt import CltReport  # noqa: E402

# fixed metadata keeps PNG bytes reproducible across runs
PNG_METADATA = {"Software": None}


def plot_clt_sweep(reports: Sequence[CltReport], path: str | Path) -> Path:
    """Empirical TV against n on log-log axes, with error bars and the VV bound."""
    path = Path(path)
    ns = [r.n for r in reports]
    tv = [r.empirical_tv for r in reports]
    hw = [r.half_width for r in reports]
    fig, ax = plt.subplots(figsize=(5.0, 3.6), dpi=120)
    ax.errorbar(ns, tv, yerr=hw, marker="o", capsize=3, label="empirical TV")
    ax.plot(ns, [r.vv_bound for r in reports], linestyle="--", label="VV bound")
    if tv and min(tv) > 0:
        scale = tv[0] * ns[0] ** 0.5
        ax.plot(ns, [scale / n ** 0.5 for n in ns], linestyle=":", color="gray", label=r"$\propto n^{-1/2}$")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("total variation")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="png", metadata=PNG_METADATA)
    plt.close(fig)
    return path
