"""PNG figures for sweep reports (log-log Amari-index curves, TCC/LPA quotients)."""

from __future__ import annotations

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

RC = {"figsize": (5.5, 4.0), "dpi": 120}
MARKERS = {"LPA": "o", "TCC": "s"}


def _new():
    fig = Figure(figsize=RC["figsize"], dpi=RC["dpi"])
    FigureCanvasAgg(fig)
    return fig, fig.add_subplot(111)


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    return path


def plot_amari_vs_T(records, path):
    fig, ax = _new()
    series = {}
    for rec in sorted(records, key=lambda r: (r.L, r.T)):
        for m, s in rec.methods.items():
            if s.mean is not None and s.mean > 0:
                series.setdefault((m, rec.L), []).append((rec.T, 100 * s.mean))
    for (m, L), pts in sorted(series.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        T, r = zip(*pts)
        ax.loglog(T, r, marker=MARKERS.get(m, "^"), ms=4, lw=1,
                  ls="-" if m == "LPA" else "--", label=f"{m}, L+1={L + 1}")
    ax.set_xlabel("sample number T")
    ax.set_ylabel("Amari-index r (%)")
    ax.grid(True, which="both", alpha=0.3)
    if series:
        ax.legend(fontsize=7)
    return _save(fig, path)


def plot_quotient_vs_T(records, path):
    fig, ax = _new()
    series = {}
    for rec in sorted(records, key=lambda r: (r.L, r.T)):
        if rec.quotient is not None:
            series.setdefault(rec.L, []).append((rec.T, rec.quotient))
    for L, pts in sorted(series.items()):
        T, q = zip(*pts)
        ax.semilogx(T, q, marker="o", ms=4, lw=1, label=f"L+1={L + 1}")
    ax.axhline(1.0, color="k", lw=0.6)
    ax.set_xlabel("sample number T")
    ax.set_ylabel("r(TCC) / r(LPA)")
    ax.grid(True, which="both", alpha=0.3)
    if series:
        ax.legend(fontsize=7)
    return _save(fig, path)


def plot_global_matrix(G, d, path):
    """Hinton-style picture of |G| with the d x d block grid."""
    import numpy as np

    fig, ax = _new()
    A = np.abs(np.asarray(G))
    ax.imshow(A, cmap="gray_r", interpolation="nearest")
    for k in range(d, A.shape[0], d):
        ax.axhline(k - 0.5, color="tab:red", lw=0.5)
        ax.axvline(k - 0.5, color="tab:red", lw=0.5)
    ax.set_xticks([])
    ax.set_yticks([])
    return _save(fig, path)
