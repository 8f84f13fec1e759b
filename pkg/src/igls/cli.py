"""Command line driver: ``igls {simulate,estimate,study,diagnose} --config FILE``.

Exit codes: 0 success, 2 invalid configuration or input, 3 numerical
failure, 4 a configured tolerance was violated.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import mc_study, normality_report, qq_table
from .config import ExperimentConfig, load_config
from .design import Design, grenander_diagnose
from .errors import NumericalError, ValidationError
from .estimators import RegressionSample, fgls_ar, gls_frequency, gls_time, ols
from .processes import simulate
from .reports import dump_json, write_csv

log = logging.getLogger("igls")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_TOLERANCE = 0, 2, 3, 4


class ToleranceViolation(Exception):
    pass


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    out = Path(args.out) if args.out else cfg.base_dir() / cfg.output
    out.mkdir(parents=True, exist_ok=True)
    return out


def _size(cfg: ExperimentConfig) -> int:
    sizes = cfg.design.sizes()
    if not sizes:
        raise ValidationError("design.T is required for this command")
    return max(sizes)


def cmd_simulate(args, cfg: ExperimentConfig) -> int:
    T = _size(cfg)
    design = cfg.build_design(T)
    seed = cfg.seed if args.seed is None else args.seed
    u = simulate(cfg.build_error(), design.T, seed)
    y = design.X @ cfg.beta_vector(design.d) + u
    out = _out_dir(args, cfg)
    write_csv(out / "series.csv", ["t", "u", "y"],
              ((t, float(a), float(b)) for t, a, b in zip(range(1, design.T + 1), u, y)))
    design.to_csv(out / "design.csv")
    log.info("wrote %s (T=%d)", out / "series.csv", design.T)
    return EXIT_OK


def _load_sample(args, cfg: ExperimentConfig) -> RegressionSample:
    if not args.data:
        raise ValidationError("estimate needs --data <csv> with a 'y' column")
    data = Path(args.data)
    if not data.exists():
        raise ValidationError(f"data file {data} does not exist")
    with open(data) as fh:
        header = [h.strip() for h in fh.readline().split(",")]
    if "y" not in header:
        raise ValidationError(f"{data}: no 'y' column")
    y = np.loadtxt(data, delimiter=",", skiprows=1, usecols=header.index("y"), ndmin=1)
    if args.design:
        design = Design.from_csv(args.design)
    else:
        design = cfg.build_design(y.size) if cfg.design.csv is None else cfg.build_design()
        present = [c for c in design.labels if c in header]
        if present and len(present) != design.d:
            raise ValidationError(f"{data}: design columns {design.labels} only partly present")
        if present:
            design = Design.from_csv(data, columns=design.labels)
    return RegressionSample(design, y)


def cmd_estimate(args, cfg: ExperimentConfig) -> int:
    sample = _load_sample(args, cfg)
    methods = cfg.build_methods(sample.design.T)
    records = []
    for m in methods:
        if m.kind == "ols":
            fit = ols(sample)
        elif m.kind == "gls_time":
            fit = gls_time(sample, m.acvf)
        elif m.kind == "gls_frequency":
            fit = gls_frequency(sample, m.sdf)
        else:
            fit = fgls_ar(sample, m.order, m.fit_method)
        records.append({"label": m.label, **fit.to_dict()})
    out = _out_dir(args, cfg)
    dump_json(out / "fits.json", "igls.fit/1", {"records": records})
    log.info("wrote %s", out / "fits.json")
    return EXIT_OK


def _check_tolerances(cfg: ExperimentConfig, result) -> list[str]:
    tol = cfg.tolerances
    failures = []
    for label, rep in result.covariance.items():
        if tol.variance_rel is not None:
            err = float(rep.variance_rel_error().max())
            if not err <= tol.variance_rel:
                failures.append(f"{label}: variance relative error {err:.4g} > {tol.variance_rel:g}")
        if tol.matrix_spectral_rel is not None and rep.cv_spectral is not None:
            scale = float(np.abs(rep.cv_spectral).max())
            for T, cm in rep.cv_matrix.items():
                gap = float(np.abs(cm - rep.cv_spectral).max()) / scale
                if not gap <= tol.matrix_spectral_rel:
                    failures.append(f"{label}: matrix/spectral gap {gap:.4g} at T={T}")
        norm = result.normality.get(label)
        if tol.require_normality and norm is not None and not norm.passed:
            failures.append(f"{label}: normality checks failed")
    return failures


def cmd_study(args, cfg: ExperimentConfig) -> int:
    out = _out_dir(args, cfg)
    sizes = cfg.design.sizes() or [cfg.build_design().T]
    multi = len(sizes) > 1
    variance_rows, failures = [], []
    for T in sizes:
        study = cfg.study(T, seed=args.seed)
        tol = cfg.tolerances
        result = mc_study(study, workers=args.workers, normality=False)
        norms = {
            label: normality_report(result.samples[label], rep.target, tol.ks_coef, tol.alpha)
            for label, rep in result.covariance.items()
        }
        result.normality.update(norms)
        sfx = f"_T{T}" if multi else ""
        qq = []
        for label, rep in result.covariance.items():
            result.samples_csv(label, out / f"samples_{label}{sfx}.csv")
            qq.extend((label, c, a, b) for c, a, b in qq_table(result.samples[label], rep.target))
            emp, tgt = np.diag(rep.cv_empirical), np.diag(rep.target)
            spec = np.diag(rep.cv_spectral) if rep.cv_spectral is not None else [None] * emp.size
            mat = np.diag(rep.cv_matrix[T]) if T in rep.cv_matrix else [None] * emp.size
            for i in range(emp.size):
                variance_rows.append((label, i, T, float(emp[i]), float(tgt[i]), spec[i], mat[i]))
        write_csv(out / f"qq{sfx}.csv", ["method", "component", "normal_quantile", "sample_quantile"], qq)
        dump_json(out / f"covariance{sfx}.json", "igls.covariance/1", {
            "T": T, "replicates": study.replicates, "seed": study.seed,
            "methods": {k: v.to_dict() for k, v in result.covariance.items()},
        })
        dump_json(out / f"normality{sfx}.json", "igls.normality/1", {
            "T": T, "methods": {k: v.to_dict() for k, v in result.normality.items()},
        })
        failures.extend(f"T={T} {f}" for f in _check_tolerances(cfg, result))
    write_csv(out / "variance.csv",
              ["method", "component", "T", "empirical", "target", "spectral", "matrix"],
              ([("" if v is None else v) for v in row] for row in variance_rows))
    if failures:
        raise ToleranceViolation("; ".join(failures))
    return EXIT_OK


def cmd_diagnose(args, cfg: ExperimentConfig) -> int:
    grid = cfg.design.T_grid
    if not grid:
        raise ValidationError("diagnose needs design.T_grid with at least 3 sizes")
    report = grenander_diagnose(cfg.design_family(), grid, cfg.diagnose.k_max, cfg.thresholds())
    out = _out_dir(args, cfg)
    dump_json(out / "grenander.json", "igls.grenander/1", {"report": report.to_dict()})
    log.info("verdicts: %s", report.verdicts)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "study": cmd_study,
    "diagnose": cmd_diagnose,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="igls", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="YAML experiment file")
        sp.add_argument("--out", help="output directory (default: config 'output')")
        sp.add_argument("--workers", type=int, default=1, help="concurrent replicate workers")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "estimate":
            sp.add_argument("--data", help="CSV with a 'y' column (and optionally design columns)")
            sp.add_argument("--design", help="design CSV overriding the configured design")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="igls: %(message)s", stream=sys.stderr)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("igls: error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    if args.workers < 1:
        print("igls: error: --workers must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except ToleranceViolation as exc:
        print(f"igls: tolerance violated: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except NumericalError as exc:
        print(f"igls: numerical failure in {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValidationError, ValueError, OSError) as exc:
        print(f"igls: invalid input for {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
