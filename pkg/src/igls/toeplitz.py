"""Toeplitz autocovariance matrices and their Levinson-Durbin factorization.

For a stationary sequence with autocovariances ``eta`` the ``T x T`` matrix
``Lambda_T[i, j] = eta_{|i-j|}`` has the inverse factorization

    Lambda_T^{-1} = L_T^T  Delta_T^{-1}  L_T

where row ``k`` of the unit lower-triangular ``L_T`` holds the coefficients
of the best order-``k`` linear predictor error
``V_t + a_{1k} V_{t-1} + ... + a_{kk} V_{t-k}`` and ``Delta_T`` holds the
prediction error variances.  The Levinson-Durbin recursion delivers all rows
in ``O(T^2)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import LevinsonBreakdown, ValidationError
from .processes import AcvfSeq

__all__ = [
    "MATERIALIZE_LIMIT",
    "LevinsonFactorization",
    "ToeplitzCov",
    "apply_inverse",
    "dense_inverse",
    "dense_solve",
    "durbin",
    "inverse_norms",
    "levinson",
    "materialize",
    "unwhiten_transpose",
    "whiten",
]

log = logging.getLogger(__name__)

MATERIALIZE_LIMIT = 4096
#: Prediction variances below ``BREAKDOWN_RTOL * eta_0`` signal an indefinite ACVF.
BREAKDOWN_RTOL = 1e-12
TAIL_WARN = 1e-8


@dataclass(frozen=True)
class ToeplitzCov:
    """``Lambda_T`` with entry ``(i, j) = eta_{|i-j|}``; lags past ``K`` are zero."""

    acvf: AcvfSeq
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError("Toeplitz dimension must be at least 1")

    def first_column(self) -> np.ndarray:
        if self.acvf.K < self.dim - 1 and self.acvf.tail_bound > TAIL_WARN:
            log.warning(
                "autocovariance known to lag %d only; lags up to %d are set to zero "
                "although the discarded tail is about %.2e",
                self.acvf.K, self.dim - 1, self.acvf.tail_bound,
            )
        return self.acvf.padded(self.dim)


def materialize(cov: ToeplitzCov) -> np.ndarray:
    """Dense symmetric ``Lambda_T``; refuses ``T > MATERIALIZE_LIMIT``."""
    if cov.dim > MATERIALIZE_LIMIT:
        raise ValidationError(
            f"refusing to materialize a {cov.dim}x{cov.dim} Toeplitz matrix "
            f"(limit {MATERIALIZE_LIMIT})"
        )
    return scipy.linalg.toeplitz(cov.first_column())


def durbin(eta, order: int):
    """Durbin recursion for predictor coefficients of orders ``1..order``.

    Works on any numpy dtype supporting ``+ - * /`` (``float`` or ``object``
    arrays of arbitrary-precision numbers).

    Returns
    -------
    phis : list of arrays
        ``phis[k-1]`` has the order-``k`` coefficients ``phi_{k,1..k}`` in
        ``V_t ~ sum_i phi_{k,i} V_{t-i}``.
    variances : array
        Prediction error variances for orders ``0..order``.
    """
    eta = np.asarray(eta)
    if eta.shape[0] < order + 1:
        raise ValidationError(f"need {order + 1} autocovariances, got {eta.shape[0]}")
    variances = np.empty(order + 1, dtype=eta.dtype)
    variances[0] = eta[0]
    floor = BREAKDOWN_RTOL * eta[0]
    phis = []
    phi = eta[:0]
    for k in range(1, order + 1):
        r = (eta[k] - phi @ eta[k - 1 : 0 : -1]) / variances[k - 1] if k > 1 else eta[1] / eta[0]
        phi = np.concatenate([phi - r * phi[::-1], np.array([r], dtype=eta.dtype)])
        v = variances[k - 1] * (1 - r * r)
        if not v >= floor:
            raise LevinsonBreakdown(k, float(v))
        variances[k] = v
        phis.append(phi)
    return phis, variances


@dataclass(frozen=True)
class LevinsonFactorization:
    """``Lambda_T^{-1} = L^T diag(variances)^{-1} L``.

    ``L`` is stored densely as a unit lower-triangular ``T x T`` array; row
    ``k`` is ``[a_{kk}, ..., a_{1k}, 1, 0, ...]``.
    """

    L: np.ndarray
    variances: np.ndarray
    eta0: float
    padded_from: int  # number of supplied lags; later lags were taken as zero

    @property
    def dim(self) -> int:
        return self.variances.size

    def row(self, k: int) -> np.ndarray:
        """``(a_{1k}, ..., a_{kk})`` for ``1 <= k <= T-1``."""
        if not 1 <= k < self.dim:
            raise IndexError(k)
        return self.L[k, :k][::-1].copy()

    def predictor(self, k: int) -> np.ndarray:
        """Order-``k`` predictor ``phi_{k,i} = -a_{ik}``."""
        return -self.row(k)

    def reconstructed_inverse(self) -> np.ndarray:
        return self.L.T @ (self.L / self.variances[:, None])


def levinson(acvf: AcvfSeq, T: int) -> LevinsonFactorization:
    """Factorize ``Lambda_T^{-1}`` from the autocovariances.

    Lags beyond the supplied ``K`` are treated as exactly zero; a warning is
    logged when the producer reported a non-negligible tail.

    Raises
    ------
    LevinsonBreakdown
        When a prediction variance drops below ``1e-12 * eta_0``.
    """
    if T < 1:
        raise ValidationError("T must be at least 1")
    eta = ToeplitzCov(acvf, T).first_column()
    phis, variances = durbin(eta, T - 1)
    L = np.eye(T)
    for k, phi in enumerate(phis, start=1):
        L[k, :k] = -phi[::-1]
    L.setflags(write=False)
    variances.setflags(write=False)
    return LevinsonFactorization(L, variances, float(eta[0]), acvf.values.size)


def _check_rows(fact: LevinsonFactorization, B: np.ndarray) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    if B.shape[0] != fact.dim:
        raise ValidationError(f"expected {fact.dim} rows, got {B.shape[0]}")
    return B


def whiten(fact: LevinsonFactorization, B) -> np.ndarray:
    """``Delta^{-1/2} L B``: rows become uncorrelated with unit variance."""
    B = _check_rows(fact, B)
    scale = 1.0 / np.sqrt(fact.variances)
    out = fact.L @ B
    return out * (scale if B.ndim == 1 else scale[:, None])


def unwhiten_transpose(fact: LevinsonFactorization, B) -> np.ndarray:
    """``L^T Delta^{-1/2} B`` (adjoint of `whiten`)."""
    B = _check_rows(fact, B)
    scale = 1.0 / np.sqrt(fact.variances)
    return fact.L.T @ (B * (scale if B.ndim == 1 else scale[:, None]))


def apply_inverse(fact: LevinsonFactorization, B) -> np.ndarray:
    """``Lambda_T^{-1} B`` as ``L^T Delta^{-1} L B`` without forming the inverse."""
    B = _check_rows(fact, B)
    inv = 1.0 / fact.variances
    LB = fact.L @ B
    LB = LB * (inv if B.ndim == 1 else inv[:, None])
    return fact.L.T @ LB


def inverse_norms(fact: LevinsonFactorization, block: int = 256) -> tuple[float, float]:
    """Induced 1- and infinity-norms of ``Lambda_T^{-1}``.

    Works through blocks of columns of the reconstructed inverse; the full
    inverse is never stored.
    """
    T = fact.dim
    L, inv = fact.L, 1.0 / fact.variances
    row_sums = np.zeros(T)
    l1 = 0.0
    for j0 in range(0, T, block):
        j1 = min(T, j0 + block)
        # columns j0:j1 of L vanish above row j0
        M = L[j0:, j0:j1] * inv[j0:, None]
        C = L[j0:, :].T @ M
        A = np.abs(C)
        l1 = max(l1, float(A.sum(axis=0).max()))
        row_sums += A.sum(axis=1)
    return l1, float(row_sums.max())


def dense_inverse(cov: ToeplitzCov) -> np.ndarray:
    """Reference inverse through a Cholesky factorization of the dense matrix."""
    if cov.dim > 512:
        raise ValidationError("dense reference inverse is limited to T <= 512")
    c = scipy.linalg.cho_factor(materialize(cov), lower=True)
    return scipy.linalg.cho_solve(c, np.eye(cov.dim))


def dense_solve(cov: ToeplitzCov, B) -> np.ndarray:
    """Reference ``Lambda_T^{-1} B`` through the dense Cholesky factor."""
    if cov.dim > 512:
        raise ValidationError("dense reference solve is limited to T <= 512")
    c = scipy.linalg.cho_factor(materialize(cov), lower=True)
    return scipy.linalg.cho_solve(c, np.asarray(B, dtype=float))
