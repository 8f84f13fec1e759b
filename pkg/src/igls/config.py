"""Strict YAML experiment configuration.

Unknown keys are rejected everywhere.  A config resolves to builtin objects
(`Design`, `LinearFilterSpec`, `MethodSpec`) through the ``build_*`` helpers.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
import pydantic
import yaml
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

from .asymptotics import McStudyConfig, MethodSpec
from .design import Design, GrenanderThresholds, builtin_design
from .errors import ValidationError
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
    white_acvf,
)

__all__ = ["ConfigError", "ExperimentConfig", "load_config"]


class ConfigError(ValidationError):
    """Configuration failed to parse or validate."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DesignColumn(_Strict):
    kind: str
    params: dict = Field(default_factory=dict)


class DesignSection(_Strict):
    kind: str = "intercept"
    params: dict = Field(default_factory=dict)
    columns: Optional[list[DesignColumn]] = None
    T: Optional[int] = Field(default=None, ge=1)
    T_grid: Optional[list[int]] = None
    csv: Optional[str] = None  # read X from a CSV file instead of the builtin library

    @model_validator(mode="after")
    def _sizes(self):
        if self.T is None and not self.T_grid and self.csv is None:
            raise ValueError("design needs T, T_grid or csv")
        if self.T_grid and any(t < 1 for t in self.T_grid):
            raise ValueError("T_grid entries must be positive")
        return self

    def sizes(self) -> list[int]:
        return [self.T] if self.T is not None else list(self.T_grid or [])

    def builtin_params(self) -> tuple[str, dict]:
        if self.kind == "composite" or self.columns:
            cols = [c.model_dump() for c in (self.columns or [])]
            return "composite", {"columns": cols}
        return self.kind, dict(self.params)


class ArSection(_Strict):
    kappa: list[float]
    order: Optional[int] = None

    @model_validator(mode="after")
    def _order(self):
        if self.order is not None and self.order != len(self.kappa):
            raise ValueError(f"order {self.order} does not match {len(self.kappa)} coefficients")
        return self


class ErrorSection(_Strict):
    filter: Optional[dict[int, float]] = None
    ar: Optional[ArSection] = None
    sigma2: float = Field(default=1.0, gt=0)
    innovation_law: Literal["gaussian", "uniform_centered", "student_t"] = "gaussian"
    df: Optional[float] = None

    @model_validator(mode="after")
    def _one(self):
        if (self.filter is None) == (self.ar is None):
            raise ValueError("error_model needs exactly one of 'filter' or 'ar'")
        return self


class HypothesisSection(_Strict):
    kind: Literal["white", "ar", "acvf_file", "same_as_truth"] = "same_as_truth"
    ar: Optional[ArSection] = None
    sigma2: float = Field(default=1.0, gt=0)
    path: Optional[str] = None

    @model_validator(mode="after")
    def _fields(self):
        if self.kind == "ar" and self.ar is None:
            raise ValueError("hypothesized_model kind 'ar' needs an 'ar' section")
        if self.kind == "acvf_file" and not self.path:
            raise ValueError("hypothesized_model kind 'acvf_file' needs 'path'")
        return self


class MethodSection(_Strict):
    kind: Literal["ols", "gls_time", "gls_frequency", "fgls_ar"]
    label: Optional[str] = None
    hypothesis: Optional[HypothesisSection] = None
    order: int = Field(default=1, ge=1)
    fit_method: Literal["yule_walker", "ols_residual_regression"] = "yule_walker"


class ToleranceSection(_Strict):
    variance_rel: Optional[float] = Field(default=None, ge=0)
    ks_coef: float = Field(default=1.63, gt=0)
    alpha: float = Field(default=0.01, gt=0, lt=1)
    require_normality: bool = False
    matrix_spectral_rel: Optional[float] = Field(default=None, ge=0)


class DiagnoseSection(_Strict):
    k_max: int = Field(default=8, ge=0)
    gren1_min_slope: float = 0.1
    gren2_tol: float = 1e-2
    gren3_tol: float = 1e-2
    gren4_max_cond: float = 1e6


class ExperimentConfig(_Strict):
    design: DesignSection
    error_model: ErrorSection = Field(default_factory=lambda: ErrorSection(filter={0: 1.0}))
    hypothesized_model: HypothesisSection = Field(default_factory=HypothesisSection)
    methods: list[MethodSection] = Field(default_factory=lambda: [MethodSection(kind="ols")])
    beta: Optional[list[float]] = None
    replicates: int = Field(default=1000, ge=100)
    seed: int = Field(default=0, ge=0, lt=2**64)
    output: str = "out"
    tolerances: ToleranceSection = Field(default_factory=ToleranceSection)
    diagnose: DiagnoseSection = Field(default_factory=DiagnoseSection)
    _base_dir: str = PrivateAttr(default=".")

    # -- resolution to library objects --------------------------------------

    def base_dir(self) -> Path:
        return Path(self._base_dir)

    def _path(self, p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else self.base_dir() / q

    def build_design(self, T: int | None = None) -> Design:
        sec = self.design
        if sec.csv is not None:
            d = Design.from_csv(self._path(sec.csv))
            return d if T is None else d.head(T)
        if T is None:
            sizes = sec.sizes()
            T = max(sizes)
        kind, params = sec.builtin_params()
        return builtin_design(kind, params, T)

    def design_family(self):
        kind, params = self.design.builtin_params()
        return lambda T: builtin_design(kind, params, T)

    def build_error(self) -> LinearFilterSpec:
        e = self.error_model
        if e.ar is not None:
            return ArModelSpec(tuple(e.ar.kappa), e.sigma2).to_filter(e.innovation_law, e.df)
        return LinearFilterSpec(dict(e.filter), e.sigma2, e.innovation_law, e.df)

    def error_ar(self) -> ArModelSpec | None:
        e = self.error_model
        return None if e.ar is None else ArModelSpec(tuple(e.ar.kappa), e.sigma2)

    def truth(self, T: int) -> tuple[AcvfSeq, SpectralDensity]:
        ar = self.error_ar()
        if ar is not None:
            return acvf_from_ar(ar, T - 1), ar.sdf()
        spec = self.build_error()
        return acvf_from_filter(spec, T - 1), sdf_from_filter(spec)

    def _hypothesis(self, h: HypothesisSection, T: int) -> tuple[AcvfSeq, SpectralDensity]:
        if h.kind == "white":
            return white_acvf(h.sigma2), constant_sdf(h.sigma2 / (2 * math.pi))
        if h.kind == "same_as_truth":
            return self.truth(T)
        if h.kind == "ar":
            ar = ArModelSpec(tuple(h.ar.kappa), h.sigma2)
            return acvf_from_ar(ar, T - 1), ar.sdf()
        acvf = read_acvf(self._path(h.path))
        return acvf, sdf_from_acvf(acvf)

    def build_methods(self, T: int) -> tuple[MethodSpec, ...]:
        out, seen = [], {}
        for m in self.methods:
            label = m.label
            if label is None:
                n = seen.get(m.kind, 0) + 1
                seen[m.kind] = n
                label = m.kind if n == 1 else f"{m.kind}_{n}"
            if m.kind in ("gls_time", "gls_frequency"):
                acvf, sdf = self._hypothesis(m.hypothesis or self.hypothesized_model, T)
                out.append(MethodSpec(label, m.kind, acvf, sdf))
            else:
                out.append(MethodSpec(label, m.kind, order=m.order, fit_method=m.fit_method))
        return tuple(out)

    def beta_vector(self, d: int) -> np.ndarray:
        if self.beta is None:
            return np.ones(d)
        if len(self.beta) != d:
            raise ConfigError(f"beta: expected {d} entries, got {len(self.beta)}")
        return np.asarray(self.beta, dtype=float)

    def study(self, T: int, seed: int | None = None) -> McStudyConfig:
        design = self.build_design(T)
        acvf, sdf = self.truth(design.T)
        return McStudyConfig(
            design, self.build_error(), self.build_methods(design.T), self.beta_vector(design.d),
            self.replicates, self.seed if seed is None else seed, error_sdf=sdf, error_acvf=acvf,
        )

    def thresholds(self) -> GrenanderThresholds:
        d = self.diagnose
        return GrenanderThresholds(d.gren1_min_slope, d.gren2_tol, d.gren3_tol, d.gren4_max_cond)


def read_acvf(path: Path) -> AcvfSeq:
    """One autocovariance per line (lag 0 first); a leading ``eta`` header is allowed."""
    vals = []
    for line in Path(path).read_text().splitlines():
        line = line.strip().split(",")[-1].strip()
        if not line or line.lower() in ("eta", "value"):
            continue
        vals.append(float(line))
    return AcvfSeq(np.asarray(vals))


def _format_pydantic(err: pydantic.ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "<root>"
        parts.append(f"{loc}: {e['msg']}")
    return "; ".join(parts)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    try:
        cfg = ExperimentConfig.model_validate(data)
    except pydantic.ValidationError as exc:
        raise ConfigError(f"{path}: {_format_pydantic(exc)}") from exc
    cfg._base_dir = str(path.parent)
    return cfg
