"""Figures for the CLI report path. Everything renders off-screen to files."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 4.2),
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "legend.fontsize": 8,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}

MARKERS = {"ISS_NLMS": "o", "VSS_NLMS": "s", "ZA_ISS_NLMS": "v", "RZA_ISS_NLMS": "^",
           "ZA_VSS_NLMS": "D", "RZA_VSS_NLMS": "*", "PERFECT_CSI": "x"}


def _save(fig, path):
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_mse_traces(traces: dict, path, title: str = ""):
    """``traces`` maps a label to an averaged MSE array (one value per iteration)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, y in traces.items():
            y = np.asarray(y)
            n = np.arange(1, len(y) + 1)
            ax.semilogy(n, y, label=label, marker=MARKERS.get(label.split(" ")[0]),
                        markevery=max(1, len(y) // 10), markersize=4)
        ax.set_xlabel("iterations")
        ax.set_ylabel("average MSE")
        ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def plot_step_traces(traces: dict, path, title: str = ""):
    """Step-size versus iteration; ``traces`` maps label -> mean step-size array."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, y in traces.items():
            ax.plot(np.arange(1, len(y) + 1), y, label=label)
        ax.set_xlabel("iterations")
        ax.set_ylabel("step-size")
        ax.set_ylim(bottom=0)
        ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def plot_ber(points, path, title: str = ""):
    """BER versus SNR; one line per (algorithm, order) from a list of BerPoint."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        keys = sorted({(p.algorithm, p.order) for p in points})
        for algo, order in keys:
            sel = sorted((p for p in points if (p.algorithm, p.order) == (algo, order)),
                         key=lambda p: p.snr_db)
            ber = np.array([p.ber for p in sel], float)
            ber[ber == 0] = np.nan
            ax.semilogy([p.snr_db for p in sel], ber, marker=MARKERS.get(algo, "."),
                        label=f"{algo} {order}QAM" if sel[0].scheme == "QAM" else f"{algo} {sel[0].scheme}{order}")
        ax.set_xlabel("Es/N0 (dB)")
        ax.set_ylabel("BER")
        ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def plot_sweep(rows, path, title: str = ""):
    """Steady-state MSE versus penalty strength, one line per (T, SNR)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        keys = sorted({(r["T"], r["snr_db"]) for r in rows})
        for T, snr in keys:
            sel = sorted((r for r in rows if (r["T"], r["snr_db"]) == (T, snr)), key=lambda r: r["gamma"])
            g = [r["gamma"] for r in sel]
            ax.loglog([max(x, 1e-12) for x in g], [r["steady_state_mse"] for r in sel],
                      marker="o", label=f"T={T}, {snr:g} dB")
        ax.set_xlabel("penalty strength")
        ax.set_ylabel("steady-state MSE")
        ax.set_title(title)
        ax.legend()
        return _save(fig, path)
