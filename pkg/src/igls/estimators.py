"""OLS, time- and frequency-domain IGLS, and feasible GLS with an AR(N) model.

The two IGLS estimators are linear in ``y``, so `TimeDomainGLS` and
`FrequencyDomainGLS` do the ``y``-independent work once and can be reused
across Monte Carlo replicates that share a design.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.linalg

from .design import Design, scaling
from .errors import DegenerateResidualsError, NumericalError, SingularMatrixError, ValidationError
from .processes import AcvfSeq, ArModelSpec, SpectralDensity, acvf_from_ar
from .toeplitz import durbin, levinson, unwhiten_transpose, whiten

__all__ = [
    "FIT_METHODS",
    "FitResult",
    "FrequencyDomainGLS",
    "PeriodogramSet",
    "RegressionSample",
    "TimeDomainGLS",
    "fgls_ar",
    "fit_ar",
    "gls_frequency",
    "gls_time",
    "ols",
    "periodograms",
]

FIT_METHODS = ("ols", "gls_time", "gls_frequency", "fgls_ar")
AR_FIT_METHODS = ("yule_walker", "ols_residual_regression")

SINGULAR_COND = 1e12
IMAG_RTOL = 1e-8
DEGENERATE_RTOL = 1e-10


@dataclass(frozen=True)
class RegressionSample:
    design: Design
    y: np.ndarray

    def __post_init__(self):
        y = np.array(self.y, dtype=float).ravel()
        if y.size != self.design.T:
            raise ValidationError(f"y has length {y.size} but the design has T={self.design.T}")
        if not np.all(np.isfinite(y)):
            raise ValidationError("y must be finite")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_csv(cls, path, labels=None) -> RegressionSample:
        """Read column ``y`` plus design columns (all non-``t``/``u`` columns by default)."""
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header = [h.strip() for h in rows[0]]
        if "y" not in header:
            raise ValidationError(f"{path}: no 'y' column")
        design = Design.from_csv(path, columns=labels)
        iy = header.index("y")
        y = np.array([float(r[iy]) for r in rows[1:] if r])
        return cls(design, y)


@dataclass(frozen=True)
class FitResult:
    beta_hat: np.ndarray
    method: str
    scaled_dev: np.ndarray | None = None
    aux: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in FIT_METHODS:
            raise ValidationError(f"unknown method {self.method!r}")
        b = np.asarray(self.beta_hat, dtype=float)
        if not np.all(np.isfinite(b)):
            raise NumericalError(f"{self.method}: non-finite coefficient estimate {b}")
        object.__setattr__(self, "beta_hat", b)

    def with_truth(self, design: Design, beta) -> FitResult:
        """Attach ``S_T (beta_hat - beta)`` (simulation mode)."""
        dev = scaling(design).s * (self.beta_hat - np.asarray(beta, dtype=float))
        return FitResult(self.beta_hat, self.method, dev, self.aux)

    def to_dict(self) -> dict:
        out = {"method": self.method, "beta_hat": self.beta_hat.tolist(), "aux": _plain(self.aux)}
        if self.scaled_dev is not None:
            out["scaled_dev"] = np.asarray(self.scaled_dev).tolist()
        return out


def _plain(obj):
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# ---------------------------------------------------------------------------
# Least squares through orthogonal decompositions
# ---------------------------------------------------------------------------


def _ls_operator(W: np.ndarray):
    """QR of ``W`` with column equilibration.

    Returns ``(Q, R, norms)`` with ``W / norms = Q R``.
    """
    norms = np.sqrt(np.einsum("ti,ti->i", W, W))
    if np.any(norms == 0):
        raise SingularMatrixError("weighted design has a zero column")
    Q, R = scipy.linalg.qr(W / norms, mode="economic")
    if np.linalg.cond(R) > SINGULAR_COND:
        raise SingularMatrixError(
            f"normal matrix is numerically singular (condition number {np.linalg.cond(R):.3e})"
        )
    return Q, R, norms


class TimeDomainGLS:
    """``(X^T Lambda^{-1} X)^{-1} X^T Lambda^{-1}`` as a reusable ``d x T`` operator.

    With ``acvf=None`` the weighting is the identity (OLS).  The operator is
    assembled from the Levinson factor: whitening ``X`` gives ``Q R`` and
    ``beta = R^{-1} Q^T Delta^{-1/2} L y``.
    """

    def __init__(self, design: Design, acvf: AcvfSeq | None = None):
        self.design = design
        self.method = "ols" if acvf is None else "gls_time"
        if acvf is None:
            Q, R, norms = _ls_operator(design.X)
            rows = Q.T
            self.aux = {}
        else:
            fact = levinson(acvf, design.T)
            Q, R, norms = _ls_operator(whiten(fact, design.X))
            rows = unwhiten_transpose(fact, Q).T
            self.aux = {"acvf_lags": acvf.K, "zero_padded": bool(acvf.K < design.T - 1)}
        G = scipy.linalg.solve_triangular(R, rows) / norms[:, None]
        G.setflags(write=False)
        self.G = G

    def fit(self, y) -> FitResult:
        y = np.asarray(y, dtype=float)
        return FitResult(self.G @ y, self.method, aux=self.aux)


def ols(sample: RegressionSample) -> FitResult:
    """``(X^T X)^{-1} X^T y`` by Householder QR."""
    Q, R, norms = _ls_operator(sample.design.X)
    beta = scipy.linalg.solve_triangular(R, Q.T @ sample.y) / norms
    return FitResult(beta, "ols")


def gls_time(sample: RegressionSample, acvf_v: AcvfSeq) -> FitResult:
    """IGLS ``(X^T Lambda^{-1} X)^{-1} X^T Lambda^{-1} y`` with ``Lambda`` built from ``acvf_v``.

    ``Lambda^{-1}`` is applied through its Levinson factors and never formed.
    """
    fact = levinson(acvf_v, sample.design.T)
    Q, R, norms = _ls_operator(whiten(fact, sample.design.X))
    beta = scipy.linalg.solve_triangular(R, Q.T @ whiten(fact, sample.y)) / norms
    return FitResult(
        beta, "gls_time", aux={"acvf_lags": acvf_v.K, "zero_padded": bool(acvf_v.K < sample.design.T - 1)}
    )


# ---------------------------------------------------------------------------
# Frequency domain
# ---------------------------------------------------------------------------


def fourier_frequencies(T: int) -> np.ndarray:
    """``2 pi t / T`` for ``t = 1..T`` (the last one is ``2 pi``, aliasing 0)."""
    return 2 * np.pi * np.arange(1, T + 1) / T


def _dft(A: np.ndarray) -> np.ndarray:
    """``sum_s a_s exp(i w_t s)`` up to a unit phase common to every column.

    Row ``t - 1`` holds frequency ``2 pi t / T``.  The dropped phase
    ``exp(i w_t)`` cancels in every periodogram product.
    """
    T = A.shape[0]
    D = T * np.fft.ifft(A, axis=0)
    return np.roll(D, -1, axis=0)


@dataclass(frozen=True)
class PeriodogramSet:
    frequencies: np.ndarray
    Jxx: np.ndarray  # (T, d, d) complex
    JxY: np.ndarray  # (T, d) complex


def periodograms(sample: RegressionSample) -> PeriodogramSet:
    """``J_xx`` and ``J_xY`` at every Fourier frequency via FFT of each column."""
    T = sample.design.T
    if T < 2:
        raise ValidationError("periodograms need T >= 2")
    dx = _dft(sample.design.X)
    dy = _dft(sample.y)
    c = 1.0 / (2 * np.pi * T)
    Jxx = c * dx[:, :, None] * dx.conj()[:, None, :]
    JxY = c * dx * dy.conj()[:, None]
    return PeriodogramSet(fourier_frequencies(T), Jxx, JxY)


def _real_part(Z: np.ndarray, scale: np.ndarray, what: str) -> np.ndarray:
    resid = np.abs(Z.imag)
    bound = IMAG_RTOL * np.maximum(scale, np.finfo(float).tiny)
    if np.any(resid > bound):
        raise NumericalError(
            f"imaginary residue {resid.max():.3e} in the {what} exceeds {IMAG_RTOL:g} relative; "
            "frequency indexing is inconsistent"
        )
    return Z.real


def _solve_spd(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    dscale = 1.0 / np.sqrt(np.diag(A))
    As = A * np.outer(dscale, dscale)
    if np.linalg.cond(As) > SINGULAR_COND:
        raise SingularMatrixError(
            f"weighted periodogram sum is numerically singular (condition {np.linalg.cond(As):.3e})"
        )
    return dscale * scipy.linalg.solve(As, dscale * b, assume_a="pos")


class FrequencyDomainGLS:
    """``[sum_t f_v^{-1} J_xx]^{-1} sum_t f_v^{-1} J_xY`` over ``w_t = 2 pi t / T``, ``t = 1..T``."""

    def __init__(self, design: Design, f_v: SpectralDensity):
        T = design.T
        if T < 2:
            raise ValidationError("frequency-domain estimator needs T >= 2")
        self.design = design
        freqs = fourier_frequencies(T)
        w = 1.0 / np.asarray(f_v(freqs), dtype=float)
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValidationError("hypothesized density must be finite and positive at the Fourier frequencies")
        c = 1.0 / (2 * np.pi * T)
        dx = _dft(design.X)
        self._wdx = (c * w)[:, None] * dx
        A = self._wdx.T @ dx.conj()
        absdx = np.abs(dx)
        self._absw = np.abs(self._wdx)
        A = _real_part(A, self._absw.T @ absdx, "weighted periodogram sum")
        self.A = (A + A.T) / 2
        diagA = np.diag(self.A)
        terms = np.abs(self._wdx * dx.conj())
        self.aux = {
            # share of the w = 2 pi term (aliasing frequency 0) in each diagonal entry
            "zero_frequency_share": (terms[-1] / diagA).tolist(),
        }
        _solve_spd(self.A, np.zeros(design.d))  # raises early if singular

    def fit(self, y) -> FitResult:
        y = np.asarray(y, dtype=float)
        dy = _dft(y)
        b = self._wdx.T @ dy.conj()
        b = _real_part(b, self._absw.T @ np.abs(dy), "weighted cross-periodogram sum")
        return FitResult(_solve_spd(self.A, b), "gls_frequency", aux=self.aux)


def gls_frequency(sample: RegressionSample, f_v: SpectralDensity) -> FitResult:
    """Frequency-domain IGLS with hypothesized density ``f_v``."""
    return FrequencyDomainGLS(sample.design, f_v).fit(sample.y)


# ---------------------------------------------------------------------------
# Feasible GLS
# ---------------------------------------------------------------------------


def fit_ar(u: np.ndarray, N: int, fit_method: str = "yule_walker") -> ArModelSpec:
    """AR(N) fit to a residual series.

    ``yule_walker`` solves the Toeplitz normal equations of the biased sample
    autocovariances (about zero, since regression residuals are the
    observable error proxy); it always yields a stationary model.
    ``ols_residual_regression`` regresses ``u_t`` on ``u_{t-1..t-N}`` and may
    not, in which case `NonStationaryError` is raised.
    """
    u = np.asarray(u, dtype=float)
    T = u.size
    if fit_method == "yule_walker":
        full = np.correlate(u, u, mode="full")[T - 1 : T + N] / T
        phis, variances = durbin(full, N)
        return ArModelSpec(tuple(phis[-1]), float(variances[N]))
    if fit_method == "ols_residual_regression":
        lags = np.column_stack([u[N - i : T - i] for i in range(1, N + 1)])
        target = u[N:]
        kappa, *_ = np.linalg.lstsq(lags, target, rcond=None)
        resid = target - lags @ kappa
        return ArModelSpec(tuple(kappa), float(resid @ resid / target.size))
    raise ValidationError(f"unknown AR fit method {fit_method!r}; expected one of {AR_FIT_METHODS}")


def fgls_ar(sample: RegressionSample, N: int = 1, fit_method: str = "yule_walker") -> FitResult:
    """OLS, AR(N) fit to the residuals, then time-domain GLS with the fitted model.

    Raises
    ------
    DegenerateResidualsError
        When the OLS residuals are numerically zero.
    NonStationaryError
        When the fitted autoregression is not stationary.
    """
    T = sample.design.T
    if N < 1:
        raise ValidationError("AR order N must be at least 1")
    if not T > 10 * N:
        raise ValidationError(f"need T > 10 N for an AR({N}) fit, got T={T}")
    first = ols(sample)
    resid = sample.y - sample.design.X @ first.beta_hat
    ynorm = float(np.linalg.norm(sample.y))
    if not np.linalg.norm(resid) > DEGENERATE_RTOL * max(ynorm, np.finfo(float).tiny):
        raise DegenerateResidualsError(
            "OLS residuals are numerically zero; no error model can be identified"
        )
    ar = fit_ar(resid, N, fit_method)
    fit = gls_time(sample, acvf_from_ar(ar, T - 1))
    return FitResult(
        fit.beta_hat, "fgls_ar",
        aux={"kappa_hat": list(ar.kappa), "sigma2_hat": ar.sigma2, "order": N, "fit_method": fit_method},
    )
