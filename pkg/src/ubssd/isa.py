"""Independent subspace analysis by PCA, ICA and component grouping.

The ISA separation route: whiten to the source dimension, run a
one-dimensional ICA, then permute the ICA outputs so that mutually
dependent channels end up in the same d-dimensional group.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import NamedTuple

import numpy as np
from scipy import integrate

from .core import DimensionError, LinearMap, Partition, TimeSeries

EXHAUSTIVE_LIMIT = 100_000


class SpectrumWarning(RuntimeWarning):
    """The eigenvalue gap after the retained dimension is small."""


class PcaWhitening(NamedTuple):
    w_pca: LinearMap
    white: TimeSeries
    eigenvalues: np.ndarray
    discarded_fraction: float


@dataclass(frozen=True, eq=False)
class IcaFit:
    unmixing: LinearMap
    contrast: float
    iterations: int
    converged: bool
    identifiable: bool
    restart: int
    restart_contrasts: tuple = ()


@dataclass(frozen=True, eq=False)
class IsaResult:
    w_pca: LinearMap
    w_isa: LinearMap
    partition: Partition
    components: TimeSeries
    diagnostics: dict = field(default_factory=dict)


def _covariance(x: np.ndarray) -> np.ndarray:
    xc = x - x.mean(axis=1, keepdims=True)
    C = xc @ xc.T / x.shape[1]
    return (C + C.T) / 2


def pca_whiten(x: TimeSeries, target_dim: int) -> PcaWhitening:
    """Project on the top ``target_dim`` principal directions and scale to unit variance.

    Eigenvector signs are fixed so that the largest-magnitude entry is
    positive, which makes the result invariant to rescaling the input.
    """
    if not 1 <= target_dim <= x.dim:
        raise DimensionError(f"target_dim={target_dim} must lie in [1, {x.dim}]")
    lam, U = np.linalg.eigh(_covariance(x.steady))
    lam, U = lam[::-1], U[:, ::-1]
    if lam[target_dim - 1] <= 0:
        raise ValueError("covariance has fewer than target_dim positive eigenvalues")
    if target_dim < x.dim and lam[target_dim] > 0.5 * lam[target_dim - 1]:
        warnings.warn(
            f"eigenvalue {target_dim + 1} is {lam[target_dim] / lam[target_dim - 1]:.2f} of "
            f"eigenvalue {target_dim}; the retained subspace is poorly separated",
            SpectrumWarning, stacklevel=2)
    U = U[:, :target_dim]
    flip = np.sign(U[np.argmax(np.abs(U), axis=0), np.arange(target_dim)])
    U = U * flip
    W = U.T / np.sqrt(lam[:target_dim])[:, None]
    total = lam.clip(min=0).sum()
    discarded = float(lam[target_dim:].clip(min=0).sum() / total) if total > 0 else 0.0
    return PcaWhitening(LinearMap(W), TimeSeries(W @ x.values, x.transient), lam, discarded)


@lru_cache(maxsize=None)
def _gauss_logcosh() -> tuple[float, float]:
    """Mean and standard deviation of log cosh(v) for v ~ N(0, 1)."""
    def moment(k):
        f = lambda v: float(_logcosh(np.array(v))) ** k * math.exp(-v * v / 2)
        return 2 * integrate.quad(f, 0, np.inf)[0] / math.sqrt(2 * math.pi)

    m1, m2 = moment(1), moment(2)
    return m1, math.sqrt(m2 - m1 * m1)


def _logcosh(y: np.ndarray) -> np.ndarray:
    a = np.abs(y)
    return a + np.log1p(np.exp(-2 * a)) - math.log(2)


def _sym_decorrelate(W: np.ndarray) -> np.ndarray:
    s, u = np.linalg.eigh(W @ W.T)
    s = np.clip(s, np.finfo(float).tiny, None)
    return (u / np.sqrt(s)) @ u.T @ W


def _negentropy_terms(Y: np.ndarray) -> np.ndarray:
    gamma, _ = _gauss_logcosh()
    return _logcosh(Y).mean(axis=1) - gamma


def _fastica_symmetric(X: np.ndarray, W: np.ndarray, max_iter: int, tol: float):
    T = X.shape[1]
    for it in range(1, max_iter + 1):
        G = np.tanh(W @ X)
        gp = 1.0 - (G * G).mean(axis=1)
        W1 = _sym_decorrelate(G @ X.T / T - gp[:, None] * W)
        lim = np.max(np.abs(np.abs(np.einsum("ij,ij->i", W1, W)) - 1))
        W = W1
        if lim < tol:
            return W, it, True
    return W, max_iter, False


def fit_ica(white: TimeSeries, seed=0, restarts: int = 5, max_iter: int = 1000,
            tol: float = 1e-5) -> IcaFit:
    """Symmetric fixed-point ICA with the tanh nonlinearity.

    Each restart starts from a random orthogonal matrix drawn from
    ``seed``; the restart with the largest log-cosh negentropy contrast
    wins, ties going to the lower restart index.
    """
    X = white.steady
    D, T = X.shape
    rng = np.random.default_rng(seed)
    best = None
    contrasts = []
    for r in range(max(restarts, 1)):
        W0, _ = np.linalg.qr(rng.standard_normal((D, D)))
        W, it, ok = _fastica_symmetric(X, W0, max_iter, tol)
        terms = _negentropy_terms(W @ X)
        J = float((terms ** 2).sum())
        contrasts.append(J)
        if best is None or J > best[0]:
            best = (J, W, it, ok, r, terms)
    J, W, it, ok, r, terms = best
    if not ok:
        warnings.warn(f"ICA did not converge in {max_iter} iterations", RuntimeWarning, stacklevel=2)
    _, sd = _gauss_logcosh()
    noise = 4 * sd / math.sqrt(T)
    identifiable = int((np.abs(terms) > noise).sum()) >= D - 1
    return IcaFit(LinearMap(W), J, it, ok, identifiable, r, tuple(contrasts))


def ica(white: TimeSeries, seed=0, restarts: int = 5, max_iter: int = 1000) -> LinearMap:
    return fit_ica(white, seed, restarts, max_iter).unmixing


NONLINEARITIES = (np.square, np.abs, np.tanh)


def dependence_matrix(y: np.ndarray) -> np.ndarray:
    """``S[i, j] = max_f |corr(f(y_i), f(y_j))|`` over the nonlinearity bank, zero diagonal."""
    y = y - y.mean(axis=1, keepdims=True)
    y = y / np.maximum(y.std(axis=1, keepdims=True), np.finfo(float).tiny)
    D = y.shape[0]
    S = np.zeros((D, D))
    for f in NONLINEARITIES:
        F = f(y)
        F = F - F.mean(axis=1, keepdims=True)
        norms = np.sqrt((F * F).sum(axis=1))
        norms[norms == 0] = np.inf
        C = np.abs(F @ F.T) / np.outer(norms, norms)
        S = np.maximum(S, C)
    np.fill_diagonal(S, 0.0)
    return S


def partition_count(M: int, d: int) -> int:
    return math.factorial(M * d) // (math.factorial(d) ** M * math.factorial(M))


def partition_objective(S: np.ndarray, groups) -> float:
    return float(sum(S[np.ix_(g, g)].sum() / 2 for g in groups))


def _enumerate_partitions(D: int, d: int):
    """All partitions of range(D) into groups of size d, in lexicographic order."""

    def rec(remaining):
        if not remaining:
            yield []
            return
        first, rest = remaining[0], remaining[1:]
        for combo in combinations(rest, d - 1):
            chosen = set(combo)
            left = [c for c in rest if c not in chosen]
            for tail in rec(left):
                yield [[first, *combo]] + tail

    yield from rec(list(range(D)))


def group_exhaustive(S: np.ndarray, d: int) -> list[list[int]]:
    best, best_val = None, -np.inf
    for groups in _enumerate_partitions(S.shape[0], d):
        val = partition_objective(S, groups)
        if val > best_val:
            best, best_val = groups, val
    return best


@lru_cache(maxsize=None)
def _packable(sizes: tuple, d: int) -> bool:
    """Can clusters of these sizes (all < d) be merged into groups of exactly d?"""
    if not sizes:
        return True
    first, rest = sizes[0], list(sizes[1:])

    def fill(need, pool, start):
        if need == 0:
            return _packable(tuple(sorted(pool, reverse=True)), d)
        seen = set()
        for i in range(start, len(pool)):
            s = pool[i]
            if s <= need and s not in seen:
                seen.add(s)
                if fill(need - s, pool[:i] + pool[i + 1:], i):
                    return True
        return False

    return fill(d - first, rest, 0)


def group_greedy(S: np.ndarray, d: int, history: list | None = None) -> list[list[int]]:
    """Average-linkage agglomeration under the size cap, then swap hill-climbing."""
    D = S.shape[0]
    clusters = [[i] for i in range(D)]
    while any(len(c) < d for c in clusters):
        open_ = [c for c in clusters if len(c) < d]
        best = None
        for a in range(len(open_)):
            for b in range(a + 1, len(open_)):
                ca, cb = open_[a], open_[b]
                if len(ca) + len(cb) > d:
                    continue
                merged_len = len(ca) + len(cb)
                rest = [len(c) for k, c in enumerate(open_) if k not in (a, b)]
                if merged_len < d:
                    rest.append(merged_len)
                if not _packable(tuple(sorted(rest, reverse=True)), d):
                    continue
                link = S[np.ix_(ca, cb)].mean()
                key = (link, -min(ca + cb))
                if best is None or key > best[0]:
                    best = (key, ca, cb)
        if best is None:
            raise RuntimeError("greedy grouping reached an infeasible state")
        _, ca, cb = best
        clusters = [c for c in clusters if c is not ca and c is not cb] + [sorted(ca + cb)]
    groups = sorted(clusters)
    return hill_climb(S, groups, history)


def hill_climb(S: np.ndarray, groups, history: list | None = None) -> list[list[int]]:
    """Steepest-ascent channel swaps between groups until no swap improves the objective."""
    groups = [list(g) for g in groups]
    val = partition_objective(S, groups)
    if history is not None:
        history.append(val)
    while True:
        best_gain, best_move = 1e-14 * max(abs(val), 1.0), None
        for a in range(len(groups)):
            for b in range(a + 1, len(groups)):
                ga, gb = groups[a], groups[b]
                for i in ga:
                    for j in gb:
                        ra = [k for k in ga if k != i]
                        rb = [k for k in gb if k != j]
                        gain = (S[j, ra].sum() + S[i, rb].sum()
                                - S[i, ra].sum() - S[j, rb].sum())
                        if gain > best_gain:
                            best_gain, best_move = gain, (a, b, i, j)
        if best_move is None:
            break
        a, b, i, j = best_move
        groups[a] = sorted([k for k in groups[a] if k != i] + [j])
        groups[b] = sorted([k for k in groups[b] if k != j] + [i])
        val = partition_objective(S, groups)
        if history is not None:
            history.append(val)
    return sorted(groups)


def find_groups(y: TimeSeries, d: int, M: int, method: str = "auto"):
    """Return ``(groups, objective)``; exhaustive search when the partition count allows."""
    if y.dim != M * d:
        raise DimensionError(f"{y.dim} channels cannot form {M} groups of dimension {d}")
    if d == 1:
        return [[i] for i in range(M)], 0.0
    S = dependence_matrix(y.steady)
    if method == "auto":
        method = "exhaustive" if partition_count(M, d) <= EXHAUSTIVE_LIMIT else "greedy"
    if method == "exhaustive":
        groups = group_exhaustive(S, d)
    elif method == "greedy":
        groups = group_greedy(S, d)
    else:
        raise ValueError(f"unknown grouping method {method!r}")
    return groups, partition_objective(S, groups)


def permutation_for(partition: Partition) -> LinearMap:
    """Row permutation making each group contiguous, groups ordered by smallest channel."""
    order = [ch for g in sorted(partition.groups) for ch in g]
    return LinearMap(np.eye(partition.dim)[order])


def group_components(y: TimeSeries, d: int, M: int, method: str = "auto"):
    """Partition ``y``'s channels into M dependent groups of size d.

    Returns ``(partition, permutation)``; applying ``permutation`` to ``y``
    makes every group contiguous.
    """
    groups, _ = find_groups(y, d, M, method)
    partition = Partition.from_groups(groups)
    return partition, permutation_for(partition)


def solve_isa(x: TimeSeries, d: int, M: int, seed=0, restarts: int = 5) -> IsaResult:
    """Whiten to ``M*d`` dimensions, run ICA and group the outputs."""
    D_s = M * d
    pca = pca_whiten(x, D_s)
    fit = fit_ica(pca.white, seed=seed, restarts=restarts)
    y = TimeSeries(fit.unmixing.matrix @ pca.white.values, x.transient)
    groups, objective = find_groups(y, d, M)
    partition = Partition.from_groups(groups)
    w_isa = permutation_for(partition) @ fit.unmixing
    components = TimeSeries(w_isa.matrix @ pca.white.values, x.transient)
    diagnostics = {
        "ica_iterations": fit.iterations,
        "ica_converged": fit.converged,
        "ica_contrast": fit.contrast,
        "ica_restart": fit.restart,
        "ica_identifiable": fit.identifiable,
        "grouping_objective": objective,
        "ica_groups": partition.groups,
        "pca_discarded_fraction": pca.discarded_fraction,
        "pca_eigenvalues": [float(v) for v in pca.eigenvalues],
    }
    return IsaResult(w_pca=pca.w_pca, w_isa=w_isa, partition=Partition.contiguous(M, d),
                     components=components, diagnostics=diagnostics)
