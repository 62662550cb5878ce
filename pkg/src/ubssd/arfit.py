"""Multivariate AR fitting with Schwarz-criterion order selection.

Every candidate order is read off a single QR factorization of the
lagged data matrix ``K = [x(t-1)' ... x(t-p)' x(t)']`` with ``p = q_max``:
the residual cross-product of order ``q`` is ``E_q' E_q`` where ``E_q``
is the block of ``R`` below row ``q*D`` in the response columns. All
orders therefore share the same effective sample count ``T - q_max``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .core import DimensionError, TimeSeries

RIDGE_EPS = 1e-10
RANK_TOL = 1e-8
# residual covariance eigenvalues are floored at this fraction of the largest
LOGDET_FLOOR = 1e-6

log = logging.getLogger(__name__)


class InsufficientSamplesError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ArModel:
    """AR(Q) model ``x(t) = sum_q A_q x(t-q) + e(t)`` with ``cov(e) = noise_cov``."""

    coeffs: tuple
    noise_cov: np.ndarray
    sbc_curve: tuple = ()
    dim: int = 0
    regularized: bool = False

    def __post_init__(self):
        coeffs = tuple(np.array(a, dtype=float) for a in self.coeffs)
        cov = np.array(self.noise_cov, dtype=float)
        dim = self.dim or cov.shape[0]
        for a in coeffs:
            if a.shape != (dim, dim):
                raise DimensionError(f"AR coefficient of shape {a.shape}, expected ({dim}, {dim})")
        if cov.shape != (dim, dim):
            raise DimensionError("noise covariance shape mismatch")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "noise_cov", cov)
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "sbc_curve", tuple((int(q), float(v)) for q, v in self.sbc_curve))

    @property
    def order(self) -> int:
        return len(self.coeffs)


def lagged_design(x: np.ndarray, p: int) -> np.ndarray:
    """Rows ``[x(t-1)', ..., x(t-p)', x(t)']`` for ``t = p .. T-1``."""
    D, T = x.shape
    K = np.empty((T - p, (p + 1) * D))
    for k in range(1, p + 1):
        K[:, (k - 1) * D:k * D] = x[:, p - k:T - k].T
    K[:, p * D:] = x[:, p:].T
    return K


def sbc_value(logdet: float, q: int, D: int, n_eff: int) -> float:
    return logdet + np.log(n_eff) * q * D * D / n_eff


def floored_logdet(cov: np.ndarray, floor: float = LOGDET_FLOOR) -> float:
    """log det with eigenvalues clipped below ``floor * max eigenvalue``.

    Undercomplete mixtures have a rank-deficient innovation covariance, so
    the plain log det diverges at every order that predicts perfectly; the
    floor makes those orders tie and leaves the choice to the penalty.
    """
    lam = np.linalg.eigvalsh((cov + cov.T) / 2)
    top = lam.max()
    if top <= 0:
        return -np.inf
    return float(np.log(np.maximum(lam, floor * top)).sum())


def fit_ar(x: TimeSeries, q_min: int = 0, q_max: int = 20) -> ArModel:
    """Least-squares AR fit; the order in ``[q_min, q_max]`` minimizing SBC is kept.

    Only the steady part of ``x`` is used. If the regressors are
    numerically rank deficient (the usual case for undercomplete
    mixtures, whose lagged observations span fewer than ``q*D``
    dimensions) the fit is ridge-regularized and the returned model
    carries ``regularized=True``.
    """
    if not 0 <= q_min <= q_max:
        raise ValueError(f"need 0 <= q_min <= q_max, got {q_min}, {q_max}")
    data = x.steady
    D, T = data.shape
    n_eff = T - q_max
    ncols = (q_max + 1) * D
    if n_eff <= ncols:
        raise InsufficientSamplesError(
            f"{T} samples cannot support order {q_max} in dimension {D}")

    K = lagged_design(data, q_max)
    R = np.linalg.qr(K, mode="r")
    del K
    npar = q_max * D
    regularized = False
    if npar:
        diag = np.abs(np.diag(R)[:npar])
        if diag.min() <= RANK_TOL * diag.max():
            regularized = True
            log.debug("AR regressors are rank deficient; using ridge regularization")
            scale = np.sqrt((R[:, :npar] ** 2).sum(axis=0))
            ridge = np.zeros((npar, ncols))
            ridge[:, :npar] = np.diag(np.sqrt(RIDGE_EPS) * np.maximum(scale, np.finfo(float).tiny))
            R = np.linalg.qr(np.vstack([R, ridge]), mode="r")

    curve = []
    for q in range(q_min, q_max + 1):
        E = R[q * D:, npar:]
        curve.append((q, sbc_value(floored_logdet(E.T @ E / n_eff), q, D, n_eff)))
    best = min(curve, key=lambda c: (c[1], c[0]))[0]

    E = R[best * D:, npar:]
    noise_cov = E.T @ E / n_eff
    noise_cov = (noise_cov + noise_cov.T) / 2
    if best:
        B = linalg.solve_triangular(R[:best * D, :best * D], R[:best * D, npar:])
        coeffs = tuple(B[(k - 1) * D:k * D].T for k in range(1, best + 1))
    else:
        coeffs = ()
    return ArModel(coeffs=coeffs, noise_cov=noise_cov, sbc_curve=tuple(curve),
                   dim=D, regularized=regularized)


def innovation(x: TimeSeries, model: ArModel) -> TimeSeries:
    """Prediction error ``x(t) - sum_q A_q x(t-q)`` for ``t >= Q``; length ``T - Q``."""
    if x.dim != model.dim:
        raise DimensionError(f"model dimension {model.dim} != series dimension {x.dim}")
    Q = model.order
    vals = x.values
    T = vals.shape[1]
    if T <= Q:
        raise InsufficientSamplesError(f"series of length {T} too short for order {Q}")
    out = vals[:, Q:].copy()
    for q, a in enumerate(model.coeffs, start=1):
        out -= a @ vals[:, Q - q:T - q]
    return TimeSeries(out, max(x.transient - Q, 0))


def simulate_ar(coeffs, noise: np.ndarray, burn_in: int = 0) -> np.ndarray:
    """Drive ``x(t) = sum_q A_q x(t-q) + e(t)`` from zero history.

    ``noise`` has shape (D, T + burn_in); the first ``burn_in`` samples
    are dropped from the returned (D, T) array.
    """
    coeffs = [np.asarray(a, dtype=float) for a in coeffs]
    D, n = noise.shape
    Q = len(coeffs)
    if not Q:
        return np.array(noise[:, burn_in:], dtype=float)
    # x(t) = [A_Q ... A_1] [x(t-Q); ...; x(t-1)] + e(t), on a zero-padded buffer
    A = np.hstack(coeffs[::-1])
    buf = np.zeros(D * (n + Q))
    e = np.asarray(noise, dtype=float).T.ravel()
    for t in range(n):
        lo = t * D
        buf[lo + Q * D:lo + (Q + 1) * D] = A @ buf[lo:lo + Q * D] + e[t * D:(t + 1) * D]
    return buf[Q * D:].reshape(n, D).T[:, burn_in:].copy()
