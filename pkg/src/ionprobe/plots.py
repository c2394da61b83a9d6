"""Figure rendering for scan, fit, and sensitivity outputs.

Every figure is written straight to a file next to the delimited output;
nothing interactive, so the Agg backend is forced.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .fitting import FitResult, SensitivityCurve
from .simulate import ScanDataset

_AXIS_LABELS = {
    "ramsey": ("delay (s)", "P(up)"),
    "power": ("power (mW)", "shift (Hz)"),
    "hwp": ("HWP angle (deg)", "shift (Hz)"),
    "position": ("ion position (um)", "shift (Hz)"),
    "rabi": ("ion position (um)", "Rabi frequency (Hz)"),
}


def _new_axes(title: str):
    fig, ax = plt.subplots(figsize=(6.0, 4.0), constrained_layout=True)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    return fig, ax


def save_scan_figure(dataset: ScanDataset, path) -> None:
    xlabel, ylabel = _AXIS_LABELS[dataset.kind]
    fig, ax = _new_axes(f"{dataset.kind} scan")
    if np.any(dataset.sigma_y > 0):
        ax.errorbar(dataset.x, dataset.y, yerr=dataset.sigma_y, fmt="o", ms=3, lw=1, capsize=2)
    else:
        ax.plot(dataset.x, dataset.y, "o-", ms=3, lw=1)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_fit_figure(dataset: ScanDataset, fit: FitResult, model_y: np.ndarray, path) -> None:
    """Data with the fitted model overlaid on a dense grid."""
    xlabel, ylabel = _AXIS_LABELS[dataset.kind]
    fig, ax = _new_axes(f"{dataset.kind} fit")
    if np.any(dataset.sigma_y > 0):
        ax.errorbar(dataset.x, dataset.y, yerr=dataset.sigma_y, fmt="o", ms=3, lw=0,
                    elinewidth=1, capsize=2, label="data")
    else:
        ax.plot(dataset.x, dataset.y, "o", ms=3, label="data")
    dense_x = np.linspace(dataset.x.min(), dataset.x.max(), model_y.size)
    ax.plot(dense_x, model_y, "-", lw=1.5, label="fit")
    caption = ", ".join(f"{k}={v:.4g}" for k, v in fit.params.items())
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(title=caption, fontsize=8, title_fontsize=8)
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_sensitivity_figure(curve: SensitivityCurve, path) -> None:
    fig, ax = _new_axes("misalignment sensitivity")
    ax.plot(curve.d_um, curve.f_rabi, label="Rabi (geometric mean)")
    ax.plot(curve.d_um, curve.f_stark, label="shift (intensity squared)")
    ax.set_xlabel("misalignment d (um)")
    ax.set_ylabel("fractional signal change")
    ax.legend(loc="upper left")
    twin = ax.twinx()
    twin.plot(curve.d_um, curve.ratio, ":", color="gray")
    twin.set_ylabel("advantage ratio")
    fig.savefig(path, dpi=150)
    plt.close(fig)
