"""Asymptotic covariance of scaled IGLS estimates and Monte Carlo verification.

``C_v`` is available two ways: the finite-``T`` sandwich in the scaled
design ``Z = X S^{-1}``, and the spectral sandwich over the design's
measure ``H``.  `mc_study` compares both with simulated scaled deviations.
"""

from __future__ import annotations

import concurrent.futures as cf
import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.stats

from .design import Design, SpectralMeasure, scaling
from .errors import IglsError, NumericalError, ReplicateError, SingularMatrixError, ValidationError
from .estimators import FrequencyDomainGLS, RegressionSample, TimeDomainGLS, fgls_ar
from .processes import (
    AcvfSeq,
    ArModelSpec,
    LinearFilterSpec,
    SpectralDensity,
    acvf_from_ar,
    acvf_from_filter,
    constant_sdf,
    sdf_from_acvf,
    sdf_from_filter,
    simulate,
    white_acvf,
)
from .toeplitz import ToeplitzCov, apply_inverse, durbin, levinson, materialize

__all__ = [
    "CovarianceReport",
    "McStudyConfig",
    "MethodSpec",
    "NormalityReport",
    "StudyResult",
    "cv_matrix_limit",
    "cv_spectral",
    "mardia",
    "mc_study",
    "normality_report",
    "qq_table",
    "replicate_seed",
]

log = logging.getLogger(__name__)

PSD_SLACK = 1e-10


def _sym(A: np.ndarray) -> np.ndarray:
    return (A + A.T) / 2


def _sandwich(bread: np.ndarray, meat: np.ndarray) -> np.ndarray:
    if np.linalg.cond(bread) > 1e12:
        raise SingularMatrixError("bread matrix of the covariance sandwich is singular")
    left = scipy.linalg.solve(bread, meat, assume_a="sym")
    return _sym(scipy.linalg.solve(bread, left.T, assume_a="sym"))


def cv_matrix_limit(design: Design, acvf_u: AcvfSeq, acvf_v: AcvfSeq, T: int | None = None) -> np.ndarray:
    """``(Z^T L^{-1} Z)^{-1} Z^T L^{-1} Sigma L^{-1} Z (Z^T L^{-1} Z)^{-1}`` at finite ``T``.

    ``L^{-1} = Lambda_T^{-1}`` is applied through its Levinson factors;
    ``Sigma_T`` is materialized (``T <= 4096``).
    """
    if T is not None:
        design = design.head(T)
    T = design.T
    Z = scaling(design).Z
    W = apply_inverse(levinson(acvf_v, T), Z)
    Sigma = materialize(ToeplitzCov(acvf_u, T))
    bread = _sym(Z.T @ W)
    meat = _sym(W.T @ (Sigma @ W))
    return _sandwich(bread, meat)


def cv_spectral(H: SpectralMeasure, f_u: SpectralDensity, f_v: SpectralDensity) -> np.ndarray:
    """``2 pi [int f_v^{-1} dH]^{-1} int f_u f_v^{-2} dH [int f_v^{-1} dH]^{-1}``."""
    bread = H.integrate(lambda w: 1.0 / f_v(w))
    meat = H.integrate(lambda w: f_u(w) / f_v(w) ** 2)
    return 2 * np.pi * _sandwich(bread, meat)


# ---------------------------------------------------------------------------
# Normality diagnostics
# ---------------------------------------------------------------------------


def mardia(samples: np.ndarray, block: int = 1024) -> dict:
    """Mardia's multivariate skewness and kurtosis with asymptotic p-values."""
    X = np.asarray(samples, dtype=float)
    R, d = X.shape
    Xc = X - X.mean(axis=0)
    S = Xc.T @ Xc / R
    c = scipy.linalg.cholesky(S, lower=True)
    Y = scipy.linalg.solve_triangular(c, Xc.T, lower=True).T
    b1 = 0.0
    for i in range(0, R, block):
        b1 += float(((Y[i : i + block] @ Y.T) ** 3).sum())
    b1 /= R * R
    b2 = float(np.mean(np.einsum("ri,ri->r", Y, Y) ** 2))
    skew_stat = R * b1 / 6
    skew_df = d * (d + 1) * (d + 2) / 6
    kurt_z = (b2 - d * (d + 2)) / math.sqrt(8 * d * (d + 2) / R)
    return {
        "skewness": b1,
        "skewness_stat": skew_stat,
        "skewness_df": skew_df,
        "skewness_p": float(scipy.stats.chi2.sf(skew_stat, skew_df)),
        "kurtosis": b2,
        "kurtosis_z": kurt_z,
        "kurtosis_p": float(2 * scipy.stats.norm.sf(abs(kurt_z))),
    }


@dataclass(frozen=True)
class NormalityReport:
    ks_stats: np.ndarray
    ks_cutoff: float
    mardia: dict
    alpha: float
    cov_rel_error: np.ndarray  # |emp - target| / |target| per entry (diagonal-scaled)
    R: int

    @property
    def ks_pass(self) -> np.ndarray:
        return self.ks_stats < self.ks_cutoff

    @property
    def skewness_pass(self) -> bool:
        return self.mardia["skewness_p"] > self.alpha

    @property
    def kurtosis_pass(self) -> bool:
        return self.mardia["kurtosis_p"] > self.alpha

    @property
    def passed(self) -> bool:
        return bool(np.all(self.ks_pass) and self.skewness_pass and self.kurtosis_pass)

    def to_dict(self) -> dict:
        return {
            "R": self.R,
            "ks_stats": self.ks_stats.tolist(),
            "ks_cutoff": self.ks_cutoff,
            "ks_pass": self.ks_pass.tolist(),
            "mardia": dict(self.mardia),
            "alpha": self.alpha,
            "skewness_pass": self.skewness_pass,
            "kurtosis_pass": self.kurtosis_pass,
            "cov_rel_error": self.cov_rel_error.tolist(),
            "passed": self.passed,
        }


def normality_report(samples, C_v, ks_coef: float = 1.63, alpha: float = 0.01) -> NormalityReport:
    """KS of each standardized component against N(0, 1), Mardia tests, covariance error.

    The default KS cutoff ``1.63 / sqrt(R)`` is the asymptotic 1% point.
    """
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    C = np.atleast_2d(np.asarray(C_v, dtype=float))
    R, d = X.shape
    if R < 100:
        raise ValidationError(f"need at least 100 samples, got {R}")
    if C.shape != (d, d):
        raise ValidationError("C_v shape does not match the samples")
    if np.linalg.eigvalsh(_sym(C)).min() <= 0:
        raise SingularMatrixError("target covariance is not positive definite")
    sd = np.sqrt(np.diag(C))
    ks = np.array([scipy.stats.kstest(X[:, i] / sd[i], "norm").statistic for i in range(d)])
    emp = np.atleast_2d(np.cov(X, rowvar=False))
    rel = np.abs(emp - C) / np.outer(sd, sd)
    return NormalityReport(ks, ks_coef / math.sqrt(R), mardia(X), alpha, rel, R)


def qq_table(samples, C_v) -> list[tuple[int, float, float]]:
    """Rows ``(component, normal quantile, standardized empirical quantile)``."""
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    sd = np.sqrt(np.diag(np.atleast_2d(C_v)))
    R = X.shape[0]
    q = scipy.stats.norm.ppf((np.arange(1, R + 1) - 0.5) / R)
    rows = []
    for i in range(X.shape[1]):
        emp = np.sort(X[:, i]) / sd[i]
        rows.extend((i, float(a), float(b)) for a, b in zip(q, emp))
    return rows


# ---------------------------------------------------------------------------
# Monte Carlo studies
# ---------------------------------------------------------------------------

METHOD_KINDS = ("ols", "gls_time", "gls_frequency", "fgls_ar")


@dataclass(frozen=True)
class MethodSpec:
    """One estimator in a study.

    ``acvf`` is the hypothesized autocovariance for ``gls_time``; ``sdf`` the
    hypothesized density for ``gls_frequency`` (and, when given for
    ``gls_time``, the density used for the spectral target).
    """

    label: str
    kind: str
    acvf: AcvfSeq | None = None
    sdf: SpectralDensity | None = None
    order: int = 1
    fit_method: str = "yule_walker"

    def __post_init__(self):
        if self.kind not in METHOD_KINDS:
            raise ValidationError(f"unknown method kind {self.kind!r}; expected one of {METHOD_KINDS}")
        if self.kind == "gls_time" and self.acvf is None:
            raise ValidationError(f"method {self.label!r}: gls_time needs a hypothesized acvf")
        if self.kind == "gls_frequency" and self.sdf is None:
            raise ValidationError(f"method {self.label!r}: gls_frequency needs a hypothesized density")


@dataclass(frozen=True)
class McStudyConfig:
    design: Design
    error: LinearFilterSpec
    methods: tuple[MethodSpec, ...]
    beta: np.ndarray
    replicates: int
    seed: int
    error_sdf: SpectralDensity | None = None  # exact density of the errors when known in closed form
    error_acvf: AcvfSeq | None = None
    matrix_T: tuple[int, ...] | None = None   # sizes for the matrix-limit route (default: design T)

    def __post_init__(self):
        if self.replicates < 100:
            raise ValidationError(f"replicates must be at least 100, got {self.replicates}")
        beta = np.asarray(self.beta, dtype=float).ravel()
        if beta.size != self.design.d:
            raise ValidationError(f"beta has {beta.size} entries but the design has d={self.design.d}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "methods", tuple(self.methods))
        labels = [m.label for m in self.methods]
        if not labels or len(set(labels)) != len(labels):
            raise ValidationError("methods need distinct labels")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must be an unsigned 64-bit integer")


def replicate_seed(master: int, r: int) -> int:
    """Counter-based seed for replicate ``r``; independent of scheduling."""
    ss = np.random.SeedSequence(int(master), spawn_key=(int(r),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class CovarianceReport:
    cv_spectral: np.ndarray | None
    cv_matrix: dict            # T -> matrix
    cv_empirical: np.ndarray | None
    discrepancy: dict          # "a_vs_b" -> max-norm difference
    target_route: str

    @property
    def target(self) -> np.ndarray:
        if self.cv_spectral is not None:
            return self.cv_spectral
        return self.cv_matrix[max(self.cv_matrix)]

    def variance_rel_error(self) -> np.ndarray:
        t = np.diag(self.target)
        return np.abs(np.diag(self.cv_empirical) - t) / t

    def to_dict(self) -> dict:
        m = lambda a: None if a is None else np.asarray(a).tolist()  # noqa: E731
        return {
            "cv_spectral": m(self.cv_spectral),
            "cv_matrix": {str(T): m(v) for T, v in self.cv_matrix.items()},
            "cv_empirical": m(self.cv_empirical),
            "discrepancy": dict(self.discrepancy),
            "target_route": self.target_route,
            "target": m(self.target),
            "variance_rel_error": None if self.cv_empirical is None else self.variance_rel_error().tolist(),
        }


def covariance_report(cv_spec, cv_mat: dict, cv_emp) -> CovarianceReport:
    discrepancy = {}
    named = [("spectral", cv_spec)] + [(f"matrix_T{T}", v) for T, v in cv_mat.items()] + [("empirical", cv_emp)]
    named = [(n, v) for n, v in named if v is not None]
    for i, (na, a) in enumerate(named):
        for nb, b in named[i + 1 :]:
            discrepancy[f"{na}_vs_{nb}"] = float(np.abs(a - b).max())
    for name, v in named:
        if name != "empirical" and np.linalg.eigvalsh(_sym(v)).min() < -PSD_SLACK * max(1.0, np.abs(v).max()):
            raise NumericalError(f"{name} covariance is not positive semidefinite")
    route = "spectral" if cv_spec is not None else "matrix"
    return CovarianceReport(cv_spec, dict(cv_mat), cv_emp, discrepancy, route)


@dataclass(frozen=True)
class StudyResult:
    config: McStudyConfig
    samples: dict        # label -> (R, d) scaled deviations
    aux: dict            # label -> per-replicate arrays (e.g. kappa_hat)
    covariance: dict     # label -> CovarianceReport
    normality: dict      # label -> NormalityReport | None
    seeds: np.ndarray

    def samples_csv(self, label: str, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["replicate", "component", "value"])
            for r, row in enumerate(self.samples[label]):
                for i, v in enumerate(row):
                    w.writerow([r, i, repr(float(v))])


def _error_truth(config: McStudyConfig, T: int):
    acvf = config.error_acvf if config.error_acvf is not None else acvf_from_filter(config.error, T - 1)
    sdf = config.error_sdf if config.error_sdf is not None else sdf_from_filter(config.error)
    return acvf, sdf


def _ar_projection(acvf_u: AcvfSeq, N: int) -> ArModelSpec:
    """AR(N) model matching the first N+1 autocovariances of the truth."""
    phis, variances = durbin(acvf_u.padded(N + 1), N)
    return ArModelSpec(tuple(phis[-1]), float(variances[N]))


def _targets(config: McStudyConfig, method: MethodSpec, acvf_u: AcvfSeq, f_u: SpectralDensity):
    """Spectral and matrix-limit targets for one method."""
    design = config.design
    T = design.T
    if method.kind == "ols":
        acvf_v, f_v = white_acvf(), constant_sdf()
    elif method.kind == "gls_time":
        acvf_v = method.acvf
        f_v = method.sdf if method.sdf is not None else sdf_from_acvf(method.acvf)
    elif method.kind == "gls_frequency":
        f_v = method.sdf
        acvf_v = method.acvf
    else:
        ar = _ar_projection(acvf_u, method.order)
        acvf_v, f_v = acvf_from_ar(ar, T - 1), ar.sdf()
    cv_spec = None
    if design.analytic_measure is not None:
        cv_spec = cv_spectral(design.analytic_measure, f_u, f_v)
    cv_mat = {}
    if acvf_v is not None:
        for Tm in config.matrix_T or ((T,) if T <= 4096 else ()):
            acvf_u_T = acvf_u if acvf_u.K >= Tm - 1 else acvf_from_filter(config.error, Tm - 1)
            cv_mat[Tm] = cv_matrix_limit(design, acvf_u_T, acvf_v, Tm)
    if cv_spec is None and not cv_mat:
        raise ValidationError(f"method {method.label!r}: no route to a target covariance")
    return cv_spec, cv_mat


def _make_fitter(design: Design, method: MethodSpec):
    if method.kind == "ols":
        op = TimeDomainGLS(design)
        return lambda y: (op.fit(y).beta_hat, None)
    if method.kind == "gls_time":
        op = TimeDomainGLS(design, method.acvf)
        return lambda y: (op.fit(y).beta_hat, None)
    if method.kind == "gls_frequency":
        op = FrequencyDomainGLS(design, method.sdf)
        return lambda y: (op.fit(y).beta_hat, None)

    def fit(y):
        res = fgls_ar(RegressionSample(design, y), method.order, method.fit_method)
        return res.beta_hat, np.asarray(res.aux["kappa_hat"])
    return fit


def mc_study(config: McStudyConfig, workers: int = 1, normality: bool = True) -> StudyResult:
    """Simulate, fit every method, and assemble covariance and normality reports.

    Replicate ``r`` draws its errors from ``replicate_seed(config.seed, r)``
    and writes into slot ``r``, so results do not depend on ``workers``.
    """
    design = config.design
    R, d, T = config.replicates, design.d, design.T
    s = scaling(design).s
    mean = design.X @ config.beta
    fitters = {m.label: _make_fitter(design, m) for m in config.methods}
    seeds = np.array([replicate_seed(config.seed, r) for r in range(R)], dtype=np.uint64)
    samples = {m.label: np.empty((R, d)) for m in config.methods}
    aux = {m.label: np.empty((R, m.order)) for m in config.methods if m.kind == "fgls_ar"}

    def run(r: int):
        seed = int(seeds[r])
        try:
            y = mean + simulate(config.error, T, seed)
            for label, fit in fitters.items():
                beta_hat, extra = fit(y)
                samples[label][r] = s * (beta_hat - config.beta)
                if extra is not None:
                    aux[label][r] = extra
        except IglsError as exc:
            raise ReplicateError(r, seed, exc) from exc

    def run_range(lo: int, hi: int):
        for r in range(lo, hi):
            run(r)

    workers = max(1, int(workers))
    if workers == 1:
        run_range(0, R)
    else:
        chunk = max(1, math.ceil(R / (4 * workers)))
        with cf.ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_range, lo, min(R, lo + chunk)) for lo in range(0, R, chunk)]
            for fut in futures:
                fut.result()

    acvf_u, f_u = _error_truth(config, T)
    covariance, norm = {}, {}
    for m in config.methods:
        cv_spec, cv_mat = _targets(config, m, acvf_u, f_u)
        emp = np.atleast_2d(np.cov(samples[m.label], rowvar=False))
        rep = covariance_report(cv_spec, cv_mat, emp)
        covariance[m.label] = rep
        norm[m.label] = normality_report(samples[m.label], rep.target) if normality else None
    return StudyResult(config, samples, aux, covariance, norm, seeds)
