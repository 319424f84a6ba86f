"""Report figures (Agg backend, written straight to files)."""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_layers(rows, path, z_key=None):
    """Three top-view panels: Fisher trace, distribution score and their product.

    ``z_key`` selects one voxel layer; by default the most populated one.
    """
    keys = np.array([r.key for r in rows], dtype=int).reshape(-1, 3)
    fig, axes = plt.subplots(1, 3, figsize=(13, 4))
    if len(keys):
        if z_key is None:
            zs, counts = np.unique(keys[:, 2], return_counts=True)
            z_key = int(zs[np.argmax(counts)])
        sel = [r for r in rows if r.key[2] == z_key]
        xy = np.array([r.center[:2] for r in sel])
        for ax, attr, title in zip(axes, ("fisher", "dist", "weighted"), ("Fisher trace", "distribution", "weighted")):
            vals = np.array([getattr(r, attr) for r in sel])
            sc = ax.scatter(xy[:, 0], xy[:, 1], c=vals, s=8, marker="s", cmap="viridis")
            fig.colorbar(sc, ax=ax, shrink=0.8)
            ax.set_title(f"{title} (kz={z_key})")
            ax.set_aspect("equal")
            ax.set_xlabel("x [m]")
    axes[0].set_ylabel("y [m]")
    return _save(fig, path)


def plot_curves(rows, path):
    """Dense gain (dots) against the fitted polynomial (line) for every circle."""
    arr = np.array(rows, dtype=float).reshape(-1, 4)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    circles = np.unique(arr[:, 0]).astype(int) if len(arr) else []
    cmap = plt.get_cmap("viridis", max(len(circles), 1))
    for k, c in enumerate(circles):
        m = arr[:, 0] == c
        ax.plot(arr[m, 1], arr[m, 2], ".", ms=1.5, color=cmap(k), alpha=0.5)
        ax.plot(arr[m, 1], arr[m, 3], "-", lw=1.0, color=cmap(k), label=f"circle {c}")
    ax.set_xlabel("theta [rad]")
    ax.set_ylabel("gain")
    if len(circles):
        ax.legend(fontsize=6, ncol=2)
    return _save(fig, path)


def _distance(records):
    pos = np.array([r.position[:2] for r in records])
    if len(pos) < 2:
        return np.zeros(len(pos))
    return np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pos, axis=0), axis=1))])


def plot_yaw(runs, path):
    """Relative yaw against travelled distance, one line per planner."""
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for label, records in runs.items():
        ax.plot(_distance(records), [r.rel_yaw for r in records], lw=1.0, label=label)
    ax.axhline(0.5, color="0.6", lw=0.6, ls="--")
    ax.axhline(-0.5, color="0.6", lw=0.6, ls="--")
    ax.set_xlabel("distance [m]")
    ax.set_ylabel("relative yaw [rad]")
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_crlb(runs, path):
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for label, records in runs.items():
        vals = [r.crlb if r.ok else np.nan for r in records]
        ax.semilogy(_distance(records), vals, lw=1.0, label=label)
    ax.set_xlabel("distance [m]")
    ax.set_ylabel("CRLB trace proxy")
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_plan_times(times, path):
    """Box plot of planning times in milliseconds, ``times`` maps label to a list."""
    fig, ax = plt.subplots(figsize=(7, 3.5))
    labels = list(times)
    data = [np.asarray(times[k], dtype=float) * 1e3 for k in labels]
    if labels:
        ax.boxplot(data, showfliers=False)
        ax.set_xticks(range(1, len(labels) + 1), labels)
    ax.set_ylabel("planning time [ms]")
    return _save(fig, path)


def plot_top_view(field, records, path, label=""):
    """Features, trajectory and chosen landing points in the plane."""
    fig, ax = plt.subplots(figsize=(6, 6))
    f = np.asarray(field, dtype=float).reshape(-1, 3)
    if len(f):
        ax.plot(f[:, 0], f[:, 1], ",", color="0.6")
    if records:
        pos = np.array([r.position for r in records])
        pts = np.array([r.point for r in records])
        ax.plot(pos[:, 0], pos[:, 1], "-", color="tab:red", lw=1.2, label="trajectory")
        ax.plot(pts[:, 0], pts[:, 1], "s", ms=2.5, color="tab:blue", label="landing points")
        ax.legend(fontsize=7)
    ax.set_aspect("equal")
    ax.set_title(label)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    return _save(fig, path)
