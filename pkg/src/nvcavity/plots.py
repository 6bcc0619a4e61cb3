"""PNG figures written next to the CSV outputs (``--plot``)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (4.5, 3.2),
    "savefig.dpi": 150,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_sweep(path, n, pl_m, pl_0, label=""):
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        m = n > 0
        ax.semilogx(n[m], pl_m[m], label="NV-")
        ax.semilogx(n[m], pl_0[m], label="NV0")
        ax.axhline(1.0, color="0.6", lw=0.6)
        ax.set_xlabel("intracavity photons")
        ax.set_ylabel("normalised PL")
        if label:
            ax.set_title(label)
        ax.legend(frameon=False)
        _save(fig, path)


def plot_trace(path, t, pl_m, n_ir):
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ax.plot(t * 1e6, pl_m, color="C0")
        ax.set_xlabel("time (us)")
        ax.set_ylabel("normalised NV- PL", color="C0")
        ax2 = ax.twinx()
        ax2.plot(t * 1e6, n_ir, color="C3", lw=0.8)
        ax2.set_ylabel("intracavity photons", color="C3")
        _save(fig, path)


def plot_contrast(path, f, contrast, dc=None):
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ax.semilogx(f, contrast, "o-")
        if dc is not None:
            ax.axhline(dc, color="0.6", lw=0.6, ls="--", label="DC")
            ax.legend(frameon=False)
        ax.set_xlabel("modulation frequency (Hz)")
        ax.set_ylabel("NV- PL contrast")
        ax.set_ylim(0, 1)
        _save(fig, path)
