"""uBSSD solvers: linear predictive approximation (LPA) and temporal concatenation (TCC).

LPA fits an AR model to the observation, whitens the innovation down to
the source dimension and solves ISA there; the estimated demixer is the
polynomial matrix ``W_isa W_pca W_ar[z]``. TCC stacks ``L'`` lagged copies
of the observation and solves one large ISA problem whose hidden
components are the lagged sources.
"""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .arfit import fit_ar, innovation
from .core import FirFilter, LinearMap, ModelDims, TimeSeries, apply_fir, compose_demixer
from .isa import solve_isa
from .metrics import GlobalMatrix, amari_index, global_matrix

METHODS = ("LPA", "TCC")
MAX_STACK_DEPTH = 10_000


class PipelineError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage} stage failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True, eq=False)
class DeconvResult:
    method: str
    estimates: TimeSeries
    demixer: FirFilter
    g_matrix: LinearMap | None = None
    amari: float | None = None
    timings: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def record(self) -> dict:
        """JSON-ready summary (no sample data)."""
        return {
            "method": self.method,
            "amari": self.amari,
            "amari_percent": None if self.amari is None else round(100 * self.amari, 2),
            "demixer_degree": self.demixer.degree,
            "timings": self.timings,
            "diagnostics": self.diagnostics,
        }


class _Stages:
    def __init__(self):
        self.timings = {}

    @contextmanager
    def __call__(self, name):
        t0 = time.perf_counter()
        try:
            yield
        except PipelineError:
            raise
        except Exception as exc:
            raise PipelineError(name, exc) from exc
        finally:
            self.timings[name] = time.perf_counter() - t0


def lpa_deconvolve(x: TimeSeries, dims: ModelDims, seed=0, h0=None,
                   q_max: int | None = None, restarts: int = 5) -> DeconvResult:
    """Estimate the sources from ``x`` by linear prediction followed by ISA.

    ``h0`` (ground-truth first mixing tap) is optional; when given, the
    global matrix and its Amari-index are filled in.
    """
    if x.dim != dims.D_x:
        raise ValueError(f"observation has {x.dim} channels, dims say D_x={dims.D_x}")
    stage = _Stages()
    q_max = 2 * (dims.L + 1) if q_max is None else q_max
    xc = x.centered()
    with stage("ar_fit"):
        ar = fit_ar(xc, 0, q_max)
    with stage("innovation"):
        xt = innovation(xc, ar)
    with stage("isa"):
        isa = solve_isa(xt, dims.d, dims.M, seed=seed, restarts=restarts)
    with stage("demix"):
        demixer = compose_demixer(isa.w_isa, isa.w_pca, ar)
        estimates = apply_fir(demixer, xc).trimmed()
    diagnostics = {
        "ar_order": ar.order,
        "ar_q_max": q_max,
        "ar_regularized": ar.regularized,
        "sbc_curve": [list(c) for c in ar.sbc_curve],
        "isa": isa.diagnostics,
    }
    G = amari = None
    if h0 is not None:
        with stage("evaluate"):
            gm = global_matrix(isa.w_isa, isa.w_pca, _as_map(h0), dims.d)
            G, amari = LinearMap(gm.matrix), amari_index(gm)
    return DeconvResult("LPA", estimates, demixer, G, amari, stage.timings, diagnostics)


def stacking_depth(D_x: int, D_s: int, L: int, max_depth: int = MAX_STACK_DEPTH) -> int:
    """Smallest ``L' >= 1`` with ``D_x L' >= D_s (L + L')``."""
    for depth in range(1, max_depth + 1):
        if D_x * depth >= D_s * (L + depth):
            return depth
    raise ValueError(f"no feasible stacking depth up to {max_depth} for D_x={D_x}, D_s={D_s}, L={L}")


def stack_lags(x: np.ndarray, depth: int) -> np.ndarray:
    """Rows ``[x(t); x(t-1); ...; x(t-depth+1)]`` for ``t = depth-1 .. T-1``."""
    D, T = x.shape
    n = T - depth + 1
    return np.vstack([x[:, depth - 1 - l:depth - 1 - l + n] for l in range(depth)])


def stacked_mixing(mixing: FirFilter, depth: int) -> np.ndarray:
    """Block-Toeplitz map from ``[s(t); ...; s(t-L-depth+1)]`` to the stacked observation."""
    L, D_x, D_s = mixing.degree, mixing.rows, mixing.cols
    H = np.zeros((D_x * depth, D_s * (L + depth)))
    for i in range(depth):
        for l, tap in enumerate(mixing.taps):
            j = i + l
            H[i * D_x:(i + 1) * D_x, j * D_s:(j + 1) * D_s] = tap
    return H


def lag_predecessor_scores(y: np.ndarray, d: int) -> np.ndarray:
    """``score[k] = max_j ||cov(y_k(t), y_j(t-1))||_F^2 / d`` over the d-dim groups of y.

    For whitened groups the score is near 1 when group k is a one-step
    delayed copy of another group and near 0 for the newest lag.
    """
    D, T = y.shape
    y = y - y.mean(axis=1, keepdims=True)
    y = y / y.std(axis=1, keepdims=True)
    C = y[:, 1:] @ y[:, :-1].T / (T - 1)
    n = D // d
    blocks = (C ** 2).reshape(n, d, n, d).sum(axis=(1, 3)) / d
    np.fill_diagonal(blocks, 0.0)
    return blocks.max(axis=1)


def tcc_deconvolve(x: TimeSeries, dims: ModelDims, seed=0, mixing: FirFilter | None = None,
                   restarts: int = 5) -> DeconvResult:
    """Temporal-concatenation baseline.

    Lagged copies of each source are independent d-dim components of the
    stacked problem, so every source appears ``L + L'`` times among the
    estimates. The newest copy of each is kept: the M groups that are
    least predictable from any other group's previous sample.

    With ``mixing`` given, ``amari`` scores the whole stacked global
    matrix (the index is dimension-free, so it compares directly with
    LPA); the score restricted to the kept rows and the lag-0 source
    columns is reported as ``diagnostics["amari_lag0"]``.
    """
    if x.dim != dims.D_x:
        raise ValueError(f"observation has {x.dim} channels, dims say D_x={dims.D_x}")
    if dims.D_x < 2 * dims.D_s:
        raise ValueError("temporal concatenation needs D_x >= 2 D_s")
    d, M, L, D_x, D_s = dims.d, dims.M, dims.L, dims.D_x, dims.D_s
    depth = stacking_depth(D_x, D_s, L)
    n_comp = M * (L + depth)
    assert D_x * depth >= D_s * (L + depth), "stacked ISA is not undercomplete"
    stage = _Stages()
    xc = x.centered()
    with stage("stack"):
        X = TimeSeries(stack_lags(xc.steady, depth))
    with stage("isa"):
        isa = solve_isa(X, d, n_comp, seed=seed, restarts=restarts)
    with stage("select"):
        scores = lag_predecessor_scores(isa.components.values, d)
        heads = sorted(np.argsort(scores, kind="stable")[:M].tolist())
        rows = np.concatenate([np.arange(k * d, (k + 1) * d) for k in heads])
        W_full = (isa.w_isa @ isa.w_pca).matrix
        W_sel = W_full[rows]
    with stage("demix"):
        demixer = FirFilter(tuple(W_sel[:, l * D_x:(l + 1) * D_x] for l in range(depth)))
        estimates = apply_fir(demixer, xc).trimmed()
    diagnostics = {
        "stack_depth": depth,
        "stacked_components": n_comp,
        "stacked_dim": D_x * depth,
        "selected_groups": heads,
        "predecessor_scores": [float(s) for s in scores],
        "isa": isa.diagnostics,
    }
    G = amari = None
    if mixing is not None:
        with stage("evaluate"):
            H_stack = stacked_mixing(mixing, depth)
            G = LinearMap(W_full @ H_stack)
            amari = amari_index(GlobalMatrix(G.matrix, d))
            diagnostics["amari_lag0"] = amari_index(GlobalMatrix(W_sel @ H_stack[:, :D_s], d))
    return DeconvResult("TCC", estimates, demixer, G, amari, stage.timings, diagnostics)


def _as_map(h0) -> LinearMap:
    return h0 if isinstance(h0, LinearMap) else LinearMap(np.asarray(h0))


def run_method(method: str, scene, seed=0, restarts: int = 5) -> DeconvResult:
    """Run LPA or TCC on a generated scene, evaluating against its ground truth."""
    method = method.upper()
    if method == "LPA":
        return lpa_deconvolve(scene.observation, scene.dims, seed, h0=scene.ground_truth_H0,
                              restarts=restarts)
    if method == "TCC":
        return tcc_deconvolve(scene.observation, scene.dims, seed, mixing=scene.mixing,
                              restarts=restarts)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
