"""Figures for the `report` command.  Files only; the Agg backend is forced."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["read_table", "plot_diagnostics", "plot_distance", "plot_stability", "plot_verify",
           "plot_density", "plot_commutator", "plot_mollifier", "render_directory"]

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.frameon": False,
    "savefig.dpi": 120,
}


def read_table(path) -> tuple[list[str], dict[str, np.ndarray] | dict[str, list], list[str]]:
    """(comment lines, columns, header) of a CSV whose leading '#' lines are metadata."""
    comments, rows = [], []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                comments.append(line[1:].strip())
            else:
                rows.append(line)
    reader = csv.reader(rows)
    header = next(reader)
    body = list(reader)
    cols = {}
    for j, name in enumerate(header):
        vals = [r[j] for r in body]
        try:
            cols[name] = np.array([float(v) for v in vals])
        except ValueError:
            cols[name] = vals
    return comments, cols, header


def _save(fig, path: Path, comments) -> Path:
    meta = {"Description": "; ".join(comments)} if comments else None
    fig.savefig(path, metadata=meta)
    plt.close(fig)
    return path


def plot_diagnostics(csv_path, png_path=None) -> Path:
    comments, c, _ = read_table(csv_path)
    png_path = Path(png_path or Path(csv_path).with_suffix(".png"))
    t = c["t"]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(2, 2, figsize=(8, 5.5), sharex=True)
        m0 = c["mass"][0] if c["mass"][0] else 1.0
        ax[0, 0].semilogy(t, np.abs(c["mass"] - c["mass"][0]) / abs(m0) + 1e-18)
        ax[0, 0].set_ylabel("relative mass drift")
        for k in ("px", "py", "pz"):
            ax[0, 1].plot(t, c[k] / abs(m0), label=k)
        ax[0, 1].set_ylabel("momentum / mass")
        ax[0, 1].legend()
        ax[1, 0].plot(t, c["energy"])
        ax[1, 0].set_ylabel("energy")
        ax[1, 1].plot(t, c["rho_min"], label="min rho")
        ax[1, 1].plot(t, c["min_f"], label="min f")
        ax[1, 1].legend()
        for a in ax[1]:
            a.set_xlabel("t")
        fig.tight_layout()
        return _save(fig, png_path, comments)


def plot_density(csv_path, png_path=None) -> Path:
    comments, c, header = read_table(csv_path)
    png_path = Path(png_path or Path(csv_path).with_suffix(".png"))
    rho = np.stack([c[h] for h in header[1:]], axis=1)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        im = ax.imshow(rho.T, aspect="auto", origin="lower",
                       extent=[c["t"][0], c["t"][-1], 0, 2 * np.pi], cmap="viridis")
        ax.set_xlabel("t")
        ax.set_ylabel("x")
        fig.colorbar(im, ax=ax, label="rho")
        fig.tight_layout()
        return _save(fig, png_path, comments)


def plot_distance(csv_path, png_path=None) -> Path:
    comments, c, _ = read_table(csv_path)
    png_path = Path(png_path or Path(csv_path).with_suffix(".png"))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        d = c["distance"]
        if np.any(d > 0):
            ax.semilogy(c["t"], np.where(d > 0, d, np.nan), marker=".")
        else:
            ax.plot(c["t"], d, marker=".")
        ax.set_xlabel("t")
        ax.set_ylabel("||f - g||_2")
        fig.tight_layout()
        return _save(fig, png_path, comments)


def plot_stability(csv_path, png_path=None) -> Path:
    comments, c, header = read_table(csv_path)
    png_path = Path(png_path or Path(csv_path).with_suffix(".png"))
    x, y = c[header[0]], c[header[1]]
    slope = np.polyfit(np.log(x), np.log(y), 1)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.loglog(x, y, "o", label="measured")
        xx = np.geomspace(x.min(), x.max(), 50)
        ax.loglog(xx, np.exp(np.polyval(slope, np.log(xx))), "--", label=f"slope {slope[0]:.3f}")
        ax.set_xlabel(header[0])
        ax.set_ylabel(header[1])
        ax.legend()
        fig.tight_layout()
        return _save(fig, png_path, comments)


def plot_commutator(csv_path, png_path=None) -> Path:
    comments, c, _ = read_table(csv_path)
    png_path = Path(png_path or Path(csv_path).with_suffix(".png"))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(1, 2, figsize=(8, 3.5))
        ax[0].loglog(c["T"], c["commutator"], "o-", label="||[M,phi]f||")
        ax[0].loglog(c["T"], c["commutator"] / c["m_norm"], "s-", label="||[M,phi]f|| / ||Mf||")
        ax[0].set_xlabel("T")
        ax[0].legend()
        ax[1].semilogx(c["T"], c["ratio"], "o-")
        ax[1].set_xlabel("T")
        ax[1].set_ylabel("r(T)")
        ax[1].set_ylim(bottom=0)
        fig.tight_layout()
        return _save(fig, png_path, comments)


def plot_mollifier(csv_path, png_path=None) -> Path:
    comments, c, _ = read_table(csv_path)
    png_path = Path(png_path or Path(csv_path).with_suffix(".png"))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.semilogy(c["a"], c["eps_rho"], "o-", label="eps_rho(a)")
        ax.semilogy(c["a"], c["eps_phase"], "s-", label="eps_phase(a)")
        ax.set_xlabel("a")
        ax.invert_xaxis()
        ax.legend()
        fig.tight_layout()
        return _save(fig, png_path, comments)


def plot_verify(csv_path, png_path=None) -> Path:
    comments, c, _ = read_table(csv_path)
    png_path = Path(png_path or Path(csv_path).with_suffix(".png"))
    names = list(c["check"])
    status = list(c["status"])
    colors = {"pass": "tab:green", "fail": "tab:red", "skipped": "tab:gray"}
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(7, 0.25 * len(names) + 1))
        ax.barh(range(len(names)), [1] * len(names), color=[colors.get(s, "k") for s in status])
        ax.set_yticks(range(len(names)))
        ax.set_yticklabels(names)
        ax.invert_yaxis()
        ax.set_xticks([])
        ax.grid(False)
        fig.tight_layout()
        return _save(fig, png_path, comments)


RENDERERS = {
    "diagnostics.csv": plot_diagnostics,
    "density.csv": plot_density,
    "report.csv": plot_distance,
    "stability.csv": plot_stability,
    "dt_convergence.csv": plot_stability,
    "commutator.csv": plot_commutator,
    "mollifier.csv": plot_mollifier,
    "verify.csv": plot_verify,
}


def render_directory(directory) -> list[Path]:
    """Render a PNG next to every known CSV in `directory` (searched recursively)."""
    d = Path(directory)
    out = []
    for name, fn in RENDERERS.items():
        for path in sorted(d.rglob(name)):
            out.append(fn(path))
    return out
