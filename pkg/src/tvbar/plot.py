"""SVG overlay in three rows: generating code, observation, reconstruction."""
from __future__ import annotations

import io
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .barcode import BarCode  # noqa: E402
from .convolve import GridSignal  # noqa: E402


def _bars(ax, code: BarCode, color: str, label: str):
    for i, (a, b) in enumerate(code.bars):
        ax.axvspan(a, b, color=color, alpha=0.35, lw=0, label=label if i == 0 else None)


def overlay_svg(
    observed: GridSignal,
    field: GridSignal,
    code: BarCode,
    truth: Optional[BarCode] = None,
    title: str = "",
) -> str:
    matplotlib.rcParams["svg.hashsalt"] = "tvbar"
    fig, axes = plt.subplots(3, 1, figsize=(8, 6), sharex=True)
    top, mid, bot = axes
    if truth is not None:
        _bars(top, truth, "black", "generating code")
        top.set_title("generating bar code", fontsize=9)
    else:
        top.set_title("generating bar code (not supplied)", fontsize=9)
    top.set_yticks([])
    mid.plot(observed.x, observed.samples, lw=0.6, color="tab:blue")
    mid.set_title("observed signal", fontsize=9)
    bot.plot(field.x, field.samples, lw=0.8, color="tab:red", label="steady state")
    if truth is not None:
        xs = np.linspace(field.x[0], field.x[-1], 4001)
        bot.plot(xs, truth(xs), lw=0.6, color="black", label="generating code")
    _bars(bot, code, "tab:orange", "thresholded")
    bot.set_title("reconstruction", fontsize=9)
    bot.legend(fontsize=7, loc="upper right")
    bot.set_xlabel("x")
    if title:
        fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()
