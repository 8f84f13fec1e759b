"""Fixed regressor designs, Grenander scaling and diagnostics.

Built-in designs carry their spectral measure ``H`` analytically, so the
limits ``R(k) = int exp(i k w) dH(w)`` are known in closed form.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.integrate

from .errors import ValidationError

__all__ = [
    "BUILTIN_KINDS",
    "Design",
    "GrenanderReport",
    "GrenanderThresholds",
    "ScalingInfo",
    "SpectralMeasure",
    "builtin_design",
    "builtin_family",
    "evaluate_verdicts",
    "grenander_diagnose",
    "sample_rho",
    "scaling",
]

BUILTIN_KINDS = (
    "intercept", "linear_trend", "cosine", "cosine_pair", "alternating", "geometric", "composite",
)

_ATOM_TOL = 1e-12


# ---------------------------------------------------------------------------
# Spectral measure
# ---------------------------------------------------------------------------


def _same_point(a: float, b: float) -> bool:
    """Frequencies are compared on the circle, so ``-pi`` and ``pi`` coincide."""
    d = abs(math.remainder(a - b, 2 * math.pi))
    return d < 1e-12


@dataclass(frozen=True)
class SpectralMeasure:
    """Real symmetric matrix measure on ``[-pi, pi]``.

    Parameters
    ----------
    atoms : sequence of (frequency, d x d mass)
        Point masses.  ``-pi`` and ``pi`` name the same point.
    density_grid, density_values : arrays, optional
        Absolutely continuous part tabulated on a grid covering ``[-pi, pi]``
        (values have shape ``(n, d, d)``), integrated by the trapezoid rule.
    """

    atoms: tuple[tuple[float, np.ndarray], ...] = ()
    density_grid: np.ndarray | None = None
    density_values: np.ndarray | None = None

    def __post_init__(self):
        atoms = tuple((float(w), np.atleast_2d(np.asarray(m, dtype=float))) for w, m in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        dims = {m.shape for _, m in atoms}
        if self.density_values is not None:
            grid = np.asarray(self.density_grid, dtype=float)
            vals = np.asarray(self.density_values, dtype=float)
            if grid.ndim != 1 or vals.shape[0] != grid.size or vals.ndim != 3:
                raise ValidationError("density values must have shape (n, d, d) matching the grid")
            object.__setattr__(self, "density_grid", grid)
            object.__setattr__(self, "density_values", vals)
            dims.add(vals.shape[1:])
        if len(dims) != 1:
            raise ValidationError("measure components must share one square shape")
        (shape,) = dims
        if shape[0] != shape[1]:
            raise ValidationError("masses must be square")
        for w, m in atoms:
            if not -math.pi - 1e-12 <= w <= math.pi + 1e-12:
                raise ValidationError(f"atom frequency {w} outside [-pi, pi]")
            if not np.allclose(m, m.T, atol=_ATOM_TOL):
                raise ValidationError("atom masses must be symmetric")
            if np.linalg.eigvalsh(m).min() < -1e-10:
                raise ValidationError(f"atom mass at {w} is not positive semidefinite")
        if self.density_values is not None:
            for m in self.density_values:
                if np.linalg.eigvalsh((m + m.T) / 2).min() < -1e-10:
                    raise ValidationError("density increment is not positive semidefinite")
        self._check_even()
        R0 = self.R(0)
        if not np.allclose(np.diag(R0), 1.0, atol=1e-9):
            raise ValidationError(f"total measure must have unit diagonal, got {np.diag(R0)}")
        if np.linalg.cond(R0) > 1e12:
            raise ValidationError("total measure R(0) is singular")

    @property
    def dim(self) -> int:
        if self.atoms:
            return self.atoms[0][1].shape[0]
        return self.density_values.shape[1]

    def _check_even(self):
        for w, m in self.atoms:
            mirror = sum(
                (m2 for w2, m2 in self.atoms if _same_point(w2, -w)), np.zeros_like(m)
            )
            own = sum((m2 for w2, m2 in self.atoms if _same_point(w2, w)), np.zeros_like(m))
            if not np.allclose(own, mirror, atol=1e-10):
                raise ValidationError(f"measure is not symmetric at frequency {w}")
        if self.density_values is not None:
            g, v = self.density_grid, self.density_values
            flipped = np.stack([np.interp(-g, g, v[:, i, j]) for i in range(v.shape[1])
                                for j in range(v.shape[2])], axis=-1).reshape(v.shape)
            if not np.allclose(v, flipped, atol=1e-10):
                raise ValidationError("density part is not even")

    def integrate(self, g: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """``int g(w) dH(w)`` for a real scalar function ``g``."""
        d = self.dim
        out = np.zeros((d, d))
        for w, m in self.atoms:
            out += float(np.asarray(g(np.array([w])))[0]) * m
        if self.density_values is not None:
            gw = np.asarray(g(self.density_grid), dtype=float)
            out += scipy.integrate.trapezoid(gw[:, None, None] * self.density_values, self.density_grid, axis=0)
        return (out + out.T) / 2

    def R(self, k: int) -> np.ndarray:
        """Limit autocorrelation matrix ``R(k) = int cos(k w) dH(w)``."""
        return self.integrate(lambda w: np.cos(k * np.asarray(w)))

    def to_dict(self) -> dict:
        out = {"atoms": [{"frequency": w, "mass": m.tolist()} for w, m in self.atoms]}
        if self.density_values is not None:
            out["density"] = {
                "grid": self.density_grid.tolist(), "values": self.density_values.tolist(),
            }
        return out


# ---------------------------------------------------------------------------
# Designs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Design:
    """Non-stochastic ``T x d`` design; row ``t`` is ``x_t``."""

    X: np.ndarray
    labels: tuple[str, ...] = ()
    analytic_measure: SpectralMeasure | None = None
    # recipe for rebuilding at other T (builtin designs only)
    recipe: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise ValidationError("design must be a 2-D array")
        T, d = X.shape
        if d < 1 or T < d:
            raise ValidationError(f"need T >= d >= 1, got T={T}, d={d}")
        if not np.all(np.isfinite(X)):
            raise ValidationError("design entries must be finite")
        zero = np.nonzero(~np.any(X != 0, axis=0))[0]
        if zero.size:
            raise ValidationError(f"design column(s) {zero.tolist()} are identically zero")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        labels = tuple(self.labels) or tuple(f"x{i + 1}" for i in range(d))
        if len(labels) != d or len(set(labels)) != d:
            raise ValidationError("need one distinct label per column")
        if "y" in labels or "t" in labels:
            raise ValidationError("column labels 't' and 'y' are reserved")
        object.__setattr__(self, "labels", labels)
        if self.analytic_measure is not None and self.analytic_measure.dim != d:
            raise ValidationError("analytic measure dimension does not match the design")

    @property
    def T(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def head(self, T: int) -> Design:
        """First ``T`` observations of the same regressor sequence."""
        if T == self.T:
            return self
        if T > self.T:
            if self.recipe is None:
                raise ValidationError(f"design has only {self.T} rows; cannot extend to {T}")
            kind, params = self.recipe
            return builtin_design(kind, params, T)
        return Design(self.X[:T], self.labels, self.analytic_measure, self.recipe)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.labels)
            for row in self.X:
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path, columns: Sequence[str] | None = None) -> Design:
        """Read a design CSV (header of labels, one row per ``t``).

        ``columns`` picks a subset; ``t`` and ``y`` columns are skipped.
        """
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ValidationError(f"{path}: empty CSV")
        header = [h.strip() for h in rows[0]]
        wanted = list(columns) if columns is not None else [h for h in header if h not in ("t", "y", "u")]
        missing = [c for c in wanted if c not in header]
        if missing:
            raise ValidationError(f"{path}: missing design column(s) {missing}")
        idx = [header.index(c) for c in wanted]
        data = np.array([[float(r[i]) for i in idx] for r in rows[1:] if r], dtype=float)
        return cls(data.reshape(-1, len(idx)), tuple(wanted))


@dataclass(frozen=True)
class ScalingInfo:
    s: np.ndarray
    Z: np.ndarray


def scaling(design: Design) -> ScalingInfo:
    """``s_i = sqrt(sum_t x_it^2)`` and unit-norm columns ``Z = X S^{-1}``."""
    s = np.sqrt(np.einsum("ti,ti->i", design.X, design.X))
    if np.any(s == 0):
        raise ValidationError("design has a zero column")
    return ScalingInfo(s, design.X / s)


def sample_rho(design: Design, k: int) -> np.ndarray:
    """``(s_i s_j)^{-1} sum_{t=1}^{T-k} x_{i,t} x_{j,t+k}``."""
    T = design.T
    if not 0 <= k < T:
        raise ValidationError(f"lag {k} out of range for T={T}")
    s = scaling(design).s
    X = design.X
    rho = (X[: T - k].T @ X[k:]) / np.outer(s, s)
    if k == 0:
        np.fill_diagonal(rho, 1.0)
    return rho


# ---------------------------------------------------------------------------
# Built-in design library
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Harmonic:
    """Component ``amp * t**degree * cos(freq * t)`` with ``0 <= freq <= pi``."""

    freq: float
    amp: float
    degree: int = 0


def _mean_square(freq: float) -> float:
    # time average of cos(freq t)^2 over integer t
    return 1.0 if _same_point(freq, 0.0) or _same_point(freq, math.pi) else 0.5


def _column(kind: str, params: Mapping) -> tuple[str, Callable[[np.ndarray], np.ndarray], list | None]:
    """Label, generator ``t -> x_t`` and harmonic content (None if not Grenander-regular)."""
    if kind == "intercept":
        return "intercept", lambda t: np.ones(t.size), [_Harmonic(0.0, 1.0, 0)]
    if kind == "linear_trend":
        return "trend", lambda t: t.astype(float), [_Harmonic(0.0, 1.0, 1)]
    if kind == "alternating":
        return "alternating", lambda t: np.where(t % 2 == 0, 1.0, -1.0), [_Harmonic(math.pi, 1.0, 0)]
    if kind == "cosine":
        w = float(params.get("omega", params.get("omega0", math.nan)))
        if not 0 < w < math.pi:
            raise ValidationError(f"cosine frequency must lie in (0, pi), got {w}")
        return f"cos({w:.6g})", lambda t: np.cos(w * t), [_Harmonic(w, 1.0, 0)]
    if kind == "cosine_pair":
        w1 = float(params.get("omega1", math.nan))
        w2 = float(params.get("omega2", math.nan))
        for w in (w1, w2):
            if not 0 < w <= math.pi:
                raise ValidationError(f"cosine_pair frequencies must lie in (0, pi], got {w}")
        if _same_point(w1, w2):
            raise ValidationError("cosine_pair frequencies must differ")
        # equal power at both frequencies: cos(pi t) already has mean square 1
        a1, a2 = (math.sqrt(0.5 / _mean_square(w)) for w in (w1, w2))
        return (
            f"cospair({w1:.6g},{w2:.6g})",
            lambda t: a1 * np.cos(w1 * t) + a2 * np.cos(w2 * t),
            [_Harmonic(w1, a1, 0), _Harmonic(w2, a2, 0)],
        )
    if kind == "geometric":
        r = float(params.get("ratio", 2.0))
        if not r > 0:
            raise ValidationError("geometric ratio must be positive")
        return f"geom({r:.6g})", lambda t: r ** t.astype(float), None
    raise ValidationError(f"unsupported design kind {kind!r}; expected one of {BUILTIN_KINDS}")


def _measure(contents: list[list[_Harmonic]]) -> SpectralMeasure:
    """Atoms of ``H`` for columns that are sums of harmonic components."""
    d = len(contents)
    norms = np.empty(d)
    for i, comps in enumerate(contents):
        degs = {c.degree for c in comps}
        if len(degs) != 1:
            raise ValidationError("components of one column must share a trend degree")
        (p,) = degs
        norms[i] = math.sqrt(sum(c.amp**2 * _mean_square(c.freq) for c in comps) / (2 * p + 1))
    freqs: list[float] = []
    for comps in contents:
        for c in comps:
            if not any(_same_point(c.freq, f) for f in freqs):
                freqs.append(c.freq)
    atoms = []
    for f in sorted(freqs):
        M = np.zeros((d, d))
        for i, ci in enumerate(contents):
            for j, cj in enumerate(contents):
                for a in ci:
                    for b in cj:
                        if _same_point(a.freq, f) and _same_point(b.freq, f):
                            ms = _mean_square(f)
                            M[i, j] += a.amp * b.amp * ms / (a.degree + b.degree + 1)
        M /= np.outer(norms, norms)
        if _same_point(f, 0.0) or _same_point(f, math.pi):
            atoms.append((f, M))
        else:
            atoms.extend([(-f, M / 2), (f, M / 2)])
    atoms.sort(key=lambda a: a[0])
    return SpectralMeasure(tuple(atoms))


def builtin_design(kind: str, params: Mapping | None, T: int) -> Design:
    """Design from the built-in library, with its analytic spectral measure.

    ``kind="composite"`` takes ``params={"columns": [{"kind": ..., "params": ...}, ...]}``.
    Designs that are not Grenander-regular (``geometric``) or whose limit
    ``R(0)`` is singular (repeated columns) get no analytic measure.
    """
    params = dict(params or {})
    if T < 1:
        raise ValidationError("T must be at least 1")
    if kind == "composite":
        specs = params.get("columns")
        if not specs:
            raise ValidationError("composite design needs a nonempty 'columns' list")
        cols = [_column(c["kind"], c.get("params") or {}) for c in specs]
    else:
        cols = [_column(kind, params)]
    t = np.arange(1, T + 1)
    labels = []
    for lab, _, _ in cols:
        base, n = lab, 2
        while lab in labels:
            lab, n = f"{base}_{n}", n + 1
        labels.append(lab)
    with np.errstate(over="ignore"):
        X = np.column_stack([gen(t) for _, gen, _ in cols])
    measure = None
    contents = [c for _, _, c in cols]
    if all(c is not None for c in contents):
        try:
            measure = _measure(contents)
        except ValidationError:
            measure = None
    return Design(X, tuple(labels), measure, recipe=(kind, params))


def builtin_family(kind: str, params: Mapping | None = None) -> Callable[[int], Design]:
    """``T -> Design`` for Grenander diagnostics over a grid of sample sizes."""
    return functools.partial(builtin_design, kind, params)


# ---------------------------------------------------------------------------
# Grenander diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GrenanderThresholds:
    gren1_min_slope: float = 0.1  # log s^2 vs log T over the last grid step
    gren2_tol: float = 1e-2       # extrapolated limit of x_T^2 / s_T^2
    gren3_tol: float = 1e-2       # successive differences of rho_ij(k)
    gren4_max_cond: float = 1e6


def _extrapolate(T: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares fit ``y ~ a + b / T`` along axis 0; returns ``a``."""
    A = np.column_stack([np.ones(T.size), 1.0 / T])
    flat = y.reshape(T.size, -1)
    coef, *_ = np.linalg.lstsq(A, flat, rcond=None)
    return coef[0].reshape(y.shape[1:])


@dataclass(frozen=True)
class GrenanderReport:
    """Finite-sample evidence for the Grenander conditions.

    Every verdict is recomputed from the stored numeric fields by
    `evaluate_verdicts`, so a stored report reproduces its verdicts.
    """

    T_grid: np.ndarray
    labels: tuple[str, ...]
    s2: np.ndarray            # (grid, d)
    last_ratio: np.ndarray    # (grid, d)  x_T^2 / s_T^2
    tail_ratio: np.ndarray    # (grid, d)  max_{T/2 < t <= T} x_t^2 / s_T^2
    gren2_limit: np.ndarray   # (d,)
    rho: np.ndarray           # (grid, k_max + 1, d, d)
    rho_limit: np.ndarray     # (k_max + 1, d, d)
    cond_R0: float
    thresholds: GrenanderThresholds = field(default_factory=GrenanderThresholds)
    verdicts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def clean(a):
            return np.where(np.isfinite(a), a, np.nan).tolist() if isinstance(a, np.ndarray) else a
        return {
            "T_grid": self.T_grid.tolist(),
            "labels": list(self.labels),
            "s2": clean(self.s2),
            "last_ratio": clean(self.last_ratio),
            "tail_ratio": clean(self.tail_ratio),
            "gren2_limit": clean(self.gren2_limit),
            "rho": clean(self.rho),
            "rho_limit": clean(self.rho_limit),
            "cond_R0": self.cond_R0 if math.isfinite(self.cond_R0) else None,
            "thresholds": vars(self.thresholds).copy(),
            "verdicts": dict(self.verdicts),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> GrenanderReport:
        arr = lambda k: np.asarray(data[k], dtype=float)  # noqa: E731
        cond = data["cond_R0"]
        return cls(
            np.asarray(data["T_grid"], dtype=int), tuple(data["labels"]), arr("s2"),
            arr("last_ratio"), arr("tail_ratio"), arr("gren2_limit"), arr("rho"),
            arr("rho_limit"), math.inf if cond is None else float(cond),
            GrenanderThresholds(**data["thresholds"]), dict(data.get("verdicts", {})),
        )


def evaluate_verdicts(report: GrenanderReport) -> dict[str, bool]:
    """Pass/fail for each condition from the report's numeric fields only."""
    th = report.thresholds
    T = report.T_grid.astype(float)
    s2 = report.s2
    increasing = bool(np.all(np.diff(s2, axis=0) > 0))
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = (np.log(s2[-1]) - np.log(s2[-2])) / (math.log(T[-1]) - math.log(T[-2]))
    gren1 = increasing and bool(np.all(slope >= th.gren1_min_slope))
    tail = report.tail_ratio
    gren2 = bool(np.all(report.gren2_limit <= th.gren2_tol) and np.all(tail[-1] <= tail[0]))
    diffs = np.abs(np.diff(report.rho, axis=0))
    last = diffs[-2:] if diffs.shape[0] >= 2 else diffs
    gren3 = bool(np.all(np.isfinite(last)) and last.max() < th.gren3_tol)
    gren4 = bool(math.isfinite(report.cond_R0) and report.cond_R0 < th.gren4_max_cond)
    return {"Gren1": gren1, "Gren2": gren2, "Gren3": gren3, "Gren4": gren4}


def grenander_diagnose(
    family: Callable[[int], Design],
    T_grid: Sequence[int],
    k_max: int = 8,
    thresholds: GrenanderThresholds | None = None,
) -> GrenanderReport:
    """Tabulate scaling, end-point ratios and autocorrelations over ``T_grid``.

    Limits are extrapolated by fitting ``a + b / T`` across the grid.  The
    verdicts are finite-sample heuristics for conditions about limits.
    """
    grid = np.asarray(sorted(int(T) for T in T_grid))
    if grid.size < 3 or np.any(np.diff(grid) <= 0):
        raise ValidationError("T_grid must hold at least 3 distinct sizes")
    if k_max < 0 or k_max >= grid[0]:
        raise ValidationError("k_max must satisfy 0 <= k_max < min(T_grid)")
    thresholds = thresholds or GrenanderThresholds()
    s2, last, tail, rho, labels = [], [], [], [], None
    for T in grid:
        design = family(int(T))
        X = design.X
        labels = design.labels
        sq = np.einsum("ti,ti->i", X, X)
        s2.append(sq)
        last.append(X[-1] ** 2 / sq)
        tail.append((X[T // 2 :] ** 2).max(axis=0) / sq)
        rho.append(np.stack([sample_rho(design, k) for k in range(k_max + 1)]))
    s2, last, tail, rho = map(np.asarray, (s2, last, tail, rho))
    Tf = grid.astype(float)
    gren2_limit = np.clip(_extrapolate(Tf, tail), 0.0, None)
    rho_limit = _extrapolate(Tf, rho)
    R0 = (rho_limit[0] + rho_limit[0].T) / 2
    np.fill_diagonal(R0, 1.0)
    cond = float(np.linalg.cond(R0))
    report = GrenanderReport(grid, labels, s2, last, tail, gren2_limit, rho, rho_limit,
                             cond if math.isfinite(cond) else math.inf, thresholds)
    object.__setattr__(report, "verdicts", evaluate_verdicts(report))
    return report
