"""Figure rendering for CLI reports: PNG files next to the CSV tables.

Every function takes an output path, draws one figure with the Agg backend,
and closes it; nothing here opens a window or touches global state beyond
the backend selection.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def weight_scatter(path, points, weights, title="node weights"):
    P = np.atleast_2d(np.asarray(points, dtype=float))
    w = np.asarray(weights, dtype=float)
    r = np.linalg.norm(P, axis=1)
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.scatter(r, w, s=6, c=np.sign(w), cmap="coolwarm", vmin=-1, vmax=1)
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_xlabel("|x|")
    ax.set_ylabel("weight")
    ax.set_title(title)
    _finish(fig, path)


def potential_profile(path, distances, values, title="potential profile"):
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(np.asarray(distances, dtype=float),
            np.asarray(values, dtype=float), ".", ms=4)
    for level in (0.0, 1.0):
        ax.axhline(level, color="k", lw=0.5, ls=":")
    ax.set_xlabel("distance from center")
    ax.set_ylabel("potential")
    ax.set_title(title)
    _finish(fig, path)


def partial_sums(path, wiener, capacity, q, title="shell partial sums"):
    ks = np.arange(1, len(wiener) + 1)
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.semilogy(ks, np.maximum(np.asarray(wiener, dtype=float), 1e-300),
                "o-", ms=4, label="weighted terms, cumulative")
    ax.semilogy(np.arange(1, len(capacity) + 1),
                np.maximum(np.asarray(capacity, dtype=float), 1e-300),
                "s-", ms=4, label="shell capacities, cumulative")
    ax.set_xlabel(f"shell index (ratio q = {q:g})")
    ax.set_ylabel("partial sum")
    ax.legend(fontsize=8)
    ax.set_title(title)
    _finish(fig, path)


def convergence_traces(path, traces, title="minimizing-sequence traces"):
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for name, vals in traces.items():
        v = np.asarray(vals, dtype=float)
        ax.semilogy(np.arange(1, len(v) + 1), np.maximum(np.abs(v), 1e-300),
                    "o-", ms=4, label=name)
    ax.set_xlabel("exhaustion step")
    ax.legend(fontsize=8)
    ax.set_title(title)
    _finish(fig, path)


def density_slice(path, points, weights, title="swept measure"):
    P = np.atleast_2d(np.asarray(points, dtype=float))
    w = np.asarray(weights, dtype=float)
    fig, ax = plt.subplots(figsize=(4.6, 4.0))
    sc = ax.scatter(P[:, 0], P[:, 2], s=8, c=w, cmap="viridis")
    fig.colorbar(sc, ax=ax, label="weight")
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("z")
    ax.set_title(title)
    _finish(fig, path)


def residual_bars(path, names, residuals, tolerances, title="verification"):
    x = np.arange(len(names))
    ratio = np.asarray(residuals, dtype=float) / np.asarray(tolerances, dtype=float)
    fig, ax = plt.subplots(figsize=(max(5.0, 0.6 * len(names)), 3.4))
    ax.bar(x, np.maximum(ratio, 1e-6), color=np.where(ratio <= 1.0, "tab:green", "tab:red"))
    ax.axhline(1.0, color="k", lw=0.8, ls="--")
    ax.set_yscale("log")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=7)
    ax.set_ylabel("residual / tolerance")
    ax.set_title(title)
    _finish(fig, path)
