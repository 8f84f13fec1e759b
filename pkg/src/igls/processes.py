"""Stationary error processes: linear filters, autoregressions, densities.

The true regression error is a two-sided linear filter of independent
innovations, ``U_t = sum_i theta_i E_{t-i}``.  The hypothesized error model is
described either by its autocovariance sequence or by its spectral density
``f(w) = (2 pi)^-1 sum_k eta_k exp(-i k w)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.fft

from .errors import NonStationaryError, ValidationError

__all__ = [
    "INNOVATION_LAWS",
    "AcvfSeq",
    "ArModelSpec",
    "AssumptionReport",
    "LinearFilterSpec",
    "SpectralDensity",
    "acvf_from_ar",
    "acvf_from_filter",
    "acvf_from_sdf",
    "arma_sdf",
    "check_assumptions",
    "check_grid",
    "constant_sdf",
    "innovations",
    "sdf_from_acvf",
    "sdf_from_filter",
    "simulate",
    "tabulated_sdf",
    "white_acvf",
]

INNOVATION_LAWS = ("gaussian", "uniform_centered", "student_t")

#: Number of points of the frequency grid used for positivity/evenness checks.
CHECK_GRID_SIZE = 4096
#: Innovations are generated in blocks of this many consecutive time points.
BLOCK_SIZE = 4096
# Keeps block keys nonnegative for negative absolute times.
_BLOCK_KEY_OFFSET = 2**32


def check_grid(n: int = CHECK_GRID_SIZE) -> np.ndarray:
    """Uniform grid on ``[-pi, pi]`` with ``n`` points (both ends included)."""
    return np.linspace(-np.pi, np.pi, n)


def _wrap(omega):
    """Map frequencies onto ``[-pi, pi)`` (the density is 2 pi periodic)."""
    w = np.asarray(omega, dtype=float)
    return np.mod(w + np.pi, 2.0 * np.pi) - np.pi


# ---------------------------------------------------------------------------
# Filters and autoregressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearFilterSpec:
    """Finite-support two-sided linear filter of independent innovations.

    Parameters
    ----------
    coefficients : mapping of int to float
        ``{lag i: theta_i}``.  Negative lags act on future innovations.
    sigma2 : float
        Innovation variance.
    innovation_law : {"gaussian", "uniform_centered", "student_t"}
        Law of the standardized (mean 0, variance 1) innovations.
    df : float, optional
        Degrees of freedom for ``student_t``; must exceed 2.
    truncation_lag : int, optional
        Set when the filter is a truncation of an infinite one (for example
        the moving-average form of an autoregression).
    """

    coefficients: Mapping[int, float]
    sigma2: float = 1.0
    innovation_law: str = "gaussian"
    df: float | None = None
    truncation_lag: int | None = None
    _lags: np.ndarray = field(init=False, repr=False, compare=False)
    _theta: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        coef = {int(k): float(v) for k, v in dict(self.coefficients).items()}
        coef = {k: v for k, v in coef.items() if v != 0.0}
        if not coef:
            raise ValidationError("filter needs at least one nonzero coefficient")
        if not all(math.isfinite(v) for v in coef.values()):
            raise ValidationError("filter coefficients must be finite")
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise ValidationError(f"sigma2 must be positive, got {self.sigma2}")
        if self.innovation_law not in INNOVATION_LAWS:
            raise ValidationError(
                f"unknown innovation law {self.innovation_law!r}; expected one of {INNOVATION_LAWS}"
            )
        if self.innovation_law == "student_t":
            if self.df is None or not self.df > 2:
                raise ValidationError("student_t innovations need df > 2 for a finite variance")
        object.__setattr__(self, "coefficients", MappingProxyType(dict(sorted(coef.items()))))
        lo, hi = min(coef), max(coef)
        theta = np.zeros(hi - lo + 1)
        for k, v in coef.items():
            theta[k - lo] = v
        object.__setattr__(self, "_lags", np.arange(lo, hi + 1))
        object.__setattr__(self, "_theta", theta)
        gamma = np.abs(self.transfer(check_grid()))
        if gamma.min() <= 1e-12 * np.abs(theta).sum():
            raise ValidationError(
                "transfer function vanishes on the frequency grid "
                f"(min |Gamma| = {gamma.min():.3e}); the error density would not be positive"
            )

    @property
    def min_lag(self) -> int:
        return int(self._lags[0])

    @property
    def max_lag(self) -> int:
        return int(self._lags[-1])

    @property
    def width(self) -> int:
        """Support width ``max_lag - min_lag``."""
        return self.max_lag - self.min_lag

    @property
    def dense(self) -> np.ndarray:
        """Coefficients on the contiguous lag range ``min_lag..max_lag``."""
        return self._theta.copy()

    def transfer(self, omega) -> np.ndarray:
        """``Gamma(w) = sum_i theta_i exp(-i i w)``."""
        w = np.asarray(omega, dtype=float)
        return np.exp(-1j * np.multiply.outer(w, self._lags)) @ self._theta


@dataclass(frozen=True)
class ArModelSpec:
    """Stationary autoregression ``V_t = sum_i kappa_i V_{t-i} + E_t``."""

    kappa: tuple[float, ...]
    sigma2: float = 1.0

    def __post_init__(self):
        kappa = tuple(float(k) for k in np.atleast_1d(np.asarray(self.kappa, dtype=float)))
        if len(kappa) < 1:
            raise ValidationError("AR order must be at least 1")
        if not all(math.isfinite(k) for k in kappa):
            raise ValidationError("AR coefficients must be finite")
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise ValidationError(f"sigma2 must be positive, got {self.sigma2}")
        object.__setattr__(self, "kappa", kappa)
        if not self.is_stationary():
            raise NonStationaryError(
                f"AR coefficients {kappa} have a root of 1 - sum kappa_i z^i on or inside "
                f"the unit circle (min |root| = {self.min_root_modulus():.6f})"
            )

    @property
    def order(self) -> int:
        return len(self.kappa)

    def roots(self) -> np.ndarray:
        # np.roots wants the highest power first: -kappa_N z^N - ... - kappa_1 z + 1
        poly = np.concatenate([-np.asarray(self.kappa)[::-1], [1.0]])
        poly = np.trim_zeros(poly, "f")
        if poly.size <= 1:
            return np.array([], dtype=complex)
        return np.roots(poly)

    def min_root_modulus(self) -> float:
        r = self.roots()
        return float(np.abs(r).min()) if r.size else math.inf

    def is_stationary(self) -> bool:
        return self.min_root_modulus() > 1.0 + 1e-10

    def sdf(self) -> SpectralDensity:
        return arma_sdf(ar=self.kappa, sigma2=self.sigma2)

    def ma_weights(self, tol: float = 1e-10) -> np.ndarray:
        """Moving-average weights ``psi_0..psi_L`` with discarded tail ``sum |psi| < tol``."""
        rho = 1.0 / self.min_root_modulus()
        n = int(math.ceil(50.0 / -math.log(rho))) if rho > 0 else 1
        n = min(n + 10 * self.order + 50, 1_000_000)
        kappa = np.asarray(self.kappa)
        psi = np.zeros(n)
        psi[0] = 1.0
        for j in range(1, n):
            m = min(j, self.order)
            psi[j] = kappa[:m] @ psi[j - 1 :: -1][:m]
        tail = np.cumsum(np.abs(psi)[::-1])[::-1]  # tail[j] = sum_{i>=j} |psi_i|
        keep = np.nonzero(tail >= tol)[0]
        last = int(keep[-1]) if keep.size else 0
        return psi[: last + 1]

    def to_filter(self, innovation_law: str = "gaussian", df: float | None = None,
                  tol: float = 1e-10) -> LinearFilterSpec:
        psi = self.ma_weights(tol)
        return LinearFilterSpec(
            dict(enumerate(psi)), sigma2=self.sigma2, innovation_law=innovation_law,
            df=df, truncation_lag=len(psi) - 1,
        )


# ---------------------------------------------------------------------------
# Autocovariances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AcvfSeq:
    """Autocovariances ``eta_0..eta_K`` at nonnegative lags.

    ``tail_bound`` bounds (or, where noted by the producer, estimates)
    ``sum_{i>K} |eta_i|``.
    """

    values: np.ndarray
    tail_bound: float = 0.0

    def __post_init__(self):
        eta = np.array(self.values, dtype=float).ravel()
        eta.setflags(write=False)
        object.__setattr__(self, "values", eta)
        if eta.size == 0 or not np.all(np.isfinite(eta)):
            raise ValidationError("autocovariances must be a nonempty finite sequence")
        if not eta[0] > 0:
            raise ValidationError(f"eta_0 must be positive, got {eta[0]}")
        if np.any(np.abs(eta) > eta[0] * (1 + 1e-12)):
            raise ValidationError("autocovariances must satisfy |eta_i| <= eta_0")
        if not self.tail_bound >= 0:
            raise ValidationError("tail_bound must be nonnegative")
        m = min(eta.size, 8)
        idx = np.arange(m)
        minor = eta[np.abs(idx[:, None] - idx[None, :])]
        if np.linalg.eigvalsh(minor).min() < -1e-12 * eta[0]:
            raise ValidationError(f"leading {m}x{m} Toeplitz minor is not positive semidefinite")

    @property
    def K(self) -> int:
        return self.values.size - 1

    def padded(self, n: int) -> np.ndarray:
        """First ``n`` lags, zero beyond ``K``."""
        out = np.zeros(n)
        m = min(n, self.values.size)
        out[:m] = self.values[:m]
        return out

    def scaled(self, c: float) -> AcvfSeq:
        return AcvfSeq(self.values * c, self.tail_bound * c)


def white_acvf(sigma2: float = 1.0) -> AcvfSeq:
    return AcvfSeq(np.array([sigma2]))


def acvf_from_filter(spec: LinearFilterSpec, K: int) -> AcvfSeq:
    """``eta_k = sigma^2 sum_i theta_i theta_{i+k}`` for ``k = 0..K``."""
    if K < 0:
        raise ValidationError("K must be nonnegative")
    theta = spec.dense
    full = spec.sigma2 * np.correlate(theta, theta, mode="full")
    positive = full[theta.size - 1 :]  # lags 0..width
    eta = np.zeros(K + 1)
    m = min(K + 1, positive.size)
    eta[:m] = positive[:m]
    tail = float(np.abs(positive[K + 1 :]).sum()) if K < spec.width else 0.0
    return AcvfSeq(eta, tail)


def acvf_from_ar(ar: ArModelSpec, K: int) -> AcvfSeq:
    """Autocovariances of a stationary AR(N) through the Yule-Walker equations.

    ``eta_0..eta_N`` solve the (N+1)x(N+1) system
    ``eta_k - sum_i kappa_i eta_{|k-i|} = sigma^2 [k == 0]``;
    later lags follow ``eta_k = sum_i kappa_i eta_{k-i}``.  ``tail_bound`` is
    estimated by running the recursion on until the terms underflow.
    """
    if K < 0:
        raise ValidationError("K must be nonnegative")
    if not ar.is_stationary():
        raise NonStationaryError("autoregression is not stationary")
    n, kappa = ar.order, np.asarray(ar.kappa)
    A = np.eye(n + 1)
    for k in range(n + 1):
        for i in range(1, n + 1):
            A[k, abs(k - i)] -= kappa[i - 1]
    rhs = np.zeros(n + 1)
    rhs[0] = ar.sigma2
    head = np.linalg.solve(A, rhs)

    rho = 1.0 / ar.min_root_modulus()
    extra = int(math.ceil(40.0 / -math.log(rho))) + 10 * n if rho > 0 else 0
    total = max(K, n) + extra + 1
    eta = np.zeros(total)
    eta[: n + 1] = head
    rev = kappa[::-1]
    for k in range(n + 1, total):
        eta[k] = rev @ eta[k - n : k]
    tail = float(np.abs(eta[K + 1 :]).sum())
    return AcvfSeq(eta[: K + 1], tail)


def acvf_from_sdf(f: SpectralDensity, K: int, n_grid: int = CHECK_GRID_SIZE) -> AcvfSeq:
    """Invert ``f`` by composite trapezoid quadrature.

    ``eta_k = 2 int_0^pi f(w) cos(k w) dw`` on ``n_grid`` uniform points.  The
    trapezoid sums for all lags at once are a type-I DCT of the tabulated
    density.  Lags beyond ``K`` up to ``n_grid - 1`` give ``tail_bound``
    (an estimate, not a rigorous bound).
    """
    if K < 0:
        raise ValidationError("K must be nonnegative")
    if n_grid < 2:
        raise ValidationError("quadrature grid needs at least 2 points")
    w = np.linspace(0.0, np.pi, n_grid)
    h = np.pi / (n_grid - 1)
    eta_all = h * scipy.fft.dct(f(w), type=1)
    eta = np.zeros(K + 1)
    m = min(K + 1, n_grid)
    eta[:m] = eta_all[:m]
    tail = float(np.abs(eta_all[K + 1 :]).sum())
    return AcvfSeq(eta, tail)


# ---------------------------------------------------------------------------
# Spectral densities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralDensity:
    """Real, positive, even spectral density on ``[-pi, pi]``.

    ``evaluator`` must be vectorized.  Calls wrap frequencies modulo 2 pi, so
    ``f(2 pi) == f(0)``.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    form_tag: str = "rational_arma"
    label: str = ""

    def __post_init__(self):
        if self.form_tag not in ("rational_arma", "tabulated_grid"):
            raise ValidationError(f"unknown form tag {self.form_tag!r}")
        grid = check_grid()
        vals = self(grid)
        if not np.all(np.isfinite(vals)):
            raise ValidationError("spectral density is not finite on the check grid")
        if vals.min() <= 0:
            raise ValidationError(
                f"spectral density is not positive on the check grid (min {vals.min():.3e})"
            )
        mirror = vals[::-1]  # the grid is symmetric about 0
        if np.max(np.abs(vals - mirror)) > 1e-10 * np.max(np.abs(vals)):
            raise ValidationError("spectral density is not even")

    def __call__(self, omega) -> np.ndarray:
        vals = self.evaluator(_wrap(omega))
        vals = np.asarray(vals)
        if np.iscomplexobj(vals):
            vals = vals.real
        return vals.astype(float, copy=False)

    def minimum(self) -> float:
        return float(self(check_grid()).min())


def arma_sdf(ar: Sequence[float] = (), ma: Sequence[float] = (), sigma2: float = 1.0,
             label: str = "") -> SpectralDensity:
    """``sigma^2/(2 pi) |1 + sum ma_j e^{-ijw}|^2 / |1 - sum ar_i e^{-iiw}|^2``."""
    ar = np.asarray(ar, dtype=float)
    ma = np.asarray(ma, dtype=float)

    def f(w):
        num = np.ones_like(w, dtype=complex)
        for j, b in enumerate(ma, start=1):
            num = num + b * np.exp(-1j * j * w)
        den = np.ones_like(w, dtype=complex)
        for i, a in enumerate(ar, start=1):
            den = den - a * np.exp(-1j * i * w)
        return sigma2 / (2 * np.pi) * np.abs(num) ** 2 / np.abs(den) ** 2

    return SpectralDensity(f, "rational_arma", label or f"arma(ar={ar.tolist()}, ma={ma.tolist()})")


def constant_sdf(c: float = 1.0 / (2 * np.pi)) -> SpectralDensity:
    return SpectralDensity(lambda w: np.full(np.shape(w), float(c)), "rational_arma", f"constant({c})")


def sdf_from_filter(spec: LinearFilterSpec) -> SpectralDensity:
    """Power transfer: ``f(w) = sigma^2/(2 pi) |Gamma(w)|^2``."""
    sigma2 = spec.sigma2

    def f(w):
        return sigma2 / (2 * np.pi) * np.abs(spec.transfer(w)) ** 2

    return SpectralDensity(f, "rational_arma", "filter")


def sdf_from_acvf(acvf: AcvfSeq) -> SpectralDensity:
    """``(2 pi)^-1 (eta_0 + 2 sum_{k>=1} eta_k cos(k w))`` over the stored lags."""
    eta = acvf.values
    k = np.arange(1, eta.size)

    def f(w):
        w = np.asarray(w, dtype=float)
        if k.size == 0:
            return np.full(w.shape, eta[0] / (2 * np.pi))
        out = np.empty(w.shape)
        flat_w, flat_out = w.ravel(), out.ravel()
        # chunk to keep the cosine table bounded for long ACVFs
        for s in range(0, flat_w.size, 256):
            c = np.cos(np.multiply.outer(flat_w[s : s + 256], k))
            flat_out[s : s + 256] = eta[0] + 2.0 * (c @ eta[1:])
        return out / (2 * np.pi)

    return SpectralDensity(f, "rational_arma", f"acvf(K={acvf.K})")


def tabulated_sdf(grid: np.ndarray, values: np.ndarray) -> SpectralDensity:
    """Density tabulated on ``0 <= w <= pi`` and extended evenly (linear interpolation)."""
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if grid.ndim != 1 or grid.shape != values.shape or grid.size < 2:
        raise ValidationError("grid and values must be 1-D of equal length >= 2")
    if grid[0] > 0 or grid[-1] < np.pi or np.any(np.diff(grid) <= 0):
        raise ValidationError("tabulation grid must increase and cover [0, pi]")

    def f(w):
        return np.interp(np.abs(w), grid, values)

    return SpectralDensity(f, "tabulated_grid", "tabulated")


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


def _standard_draws(law: str, df: float | None, rng: np.random.Generator, n: int) -> np.ndarray:
    if law == "gaussian":
        return rng.standard_normal(n)
    if law == "uniform_centered":
        return rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), n)
    if law == "student_t":
        return rng.standard_t(df, n) * math.sqrt((df - 2.0) / df)
    raise ValidationError(f"unknown innovation law {law!r}")


def innovations(law: str, seed: int, start: int, stop: int, df: float | None = None) -> np.ndarray:
    """Standardized innovations ``E_start..E_{stop-1}`` indexed by absolute time.

    Each block of ``BLOCK_SIZE`` consecutive times has its own generator keyed
    by ``(seed, block)``, so any window of the same stream is reproducible on
    its own.
    """
    if stop <= start:
        return np.zeros(0)
    first, last = start // BLOCK_SIZE, (stop - 1) // BLOCK_SIZE
    parts = []
    for b in range(first, last + 1):
        ss = np.random.SeedSequence(int(seed), spawn_key=(b + _BLOCK_KEY_OFFSET,))
        parts.append(_standard_draws(law, df, np.random.Generator(np.random.PCG64(ss)), BLOCK_SIZE))
    stream = np.concatenate(parts)
    off = start - first * BLOCK_SIZE
    return stream[off : off + (stop - start)]


def simulate(spec: LinearFilterSpec, T: int, seed: int) -> np.ndarray:
    """Simulate ``U_1..U_T`` exactly over the filter support."""
    if T < 1:
        raise ValidationError("T must be at least 1")
    # U_t needs E_{t - max_lag} .. E_{t - min_lag}
    e = innovations(spec.innovation_law, seed, 1 - spec.max_lag, T - spec.min_lag + 1, spec.df)
    e *= math.sqrt(spec.sigma2)
    return np.convolve(e, spec.dense, mode="valid")


# ---------------------------------------------------------------------------
# Assumption checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AssumptionReport:
    """Heuristic check of ``sum_i i |eta_i| < inf`` from finitely many lags.

    The verdict is a finite-data heuristic: it cannot decide an infinite-sum
    condition, only flag sequences that look summable or not.
    """

    partial_sums: np.ndarray
    partial_sum: float
    finite_support: bool
    decay_ratio: float | None
    r_squared: float | None
    verdict: str
    heuristic: bool = True

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {
            "partial_sum": self.partial_sum,
            "finite_support": self.finite_support,
            "decay_ratio": self.decay_ratio,
            "r_squared": self.r_squared,
            "verdict": self.verdict,
            "heuristic": True,
        }


def check_assumptions(acvf: AcvfSeq, *, min_r2: float = 0.99) -> AssumptionReport:
    """Partial sums of ``i |eta_i|`` plus a geometric-decay fit of ``|eta_i|``.

    Passes when the stored sequence has finite support (trailing exact zeros
    and no tail mass) or when ``log`` of the decreasing envelope of
    ``|eta_i|`` is fitted by a line with ratio ``< 1`` and ``R^2 > min_r2``.
    """
    eta = np.abs(acvf.values)
    lags = np.arange(eta.size)
    partial = np.cumsum(lags * eta)
    nz = np.nonzero(eta)[0]
    last_nz = int(nz[-1])
    finite = acvf.tail_bound == 0.0 and last_nz < acvf.K
    ratio = r2 = None
    # running maximum from the right: envelope that tames oscillating decay
    env = np.maximum.accumulate(eta[::-1])[::-1][1:]
    use = env > 1e-250 * eta[0]
    if use.sum() >= 3:
        i = lags[1:][use].astype(float)
        y = np.log(env[use])
        slope, intercept = np.polyfit(i, y, 1)
        resid = y - (slope * i + intercept)
        ss_tot = float(((y - y.mean()) ** 2).sum())
        r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0
        ratio = float(math.exp(slope))
    geometric = ratio is not None and ratio < 1.0 and r2 > min_r2
    verdict = "pass" if (finite or geometric) else "fail"
    return AssumptionReport(partial, float(partial[-1]), finite, ratio, r2, verdict)
