"""Versioned JSON report formats and CSV writers.

Every JSON file carries a ``schema`` identifier; `validate_file` looks the
identifier up and checks the document against the matching JSON Schema.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import jsonschema
import numpy as np

__all__ = ["SCHEMAS", "dump_json", "validate_document", "validate_file", "write_csv"]

_num = {"type": ["number", "null"]}
_vec = {"type": "array", "items": _num}
_mat = {"type": "array", "items": _vec}

SCHEMAS = {
    "igls.fit/1": {
        "type": "object",
        "required": ["schema", "records"],
        "properties": {
            "schema": {"const": "igls.fit/1"},
            "records": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["method", "beta_hat", "aux"],
                    "properties": {
                        "method": {"enum": ["ols", "gls_time", "gls_frequency", "fgls_ar"]},
                        "label": {"type": "string"},
                        "beta_hat": _vec,
                        "scaled_dev": _vec,
                        "aux": {"type": "object"},
                    },
                },
            },
        },
    },
    "igls.covariance/1": {
        "type": "object",
        "required": ["schema", "T", "methods"],
        "properties": {
            "schema": {"const": "igls.covariance/1"},
            "T": {"type": "integer"},
            "methods": {
                "type": "object",
                "additionalProperties": {
                    "type": "object",
                    "required": ["cv_spectral", "cv_matrix", "cv_empirical", "discrepancy", "target"],
                    "properties": {
                        "cv_spectral": {"oneOf": [_mat, {"type": "null"}]},
                        "cv_matrix": {"type": "object", "additionalProperties": _mat},
                        "cv_empirical": _mat,
                        "target": _mat,
                        "target_route": {"enum": ["spectral", "matrix"]},
                        "discrepancy": {"type": "object", "additionalProperties": {"type": "number"}},
                        "variance_rel_error": _vec,
                    },
                },
            },
        },
    },
    "igls.normality/1": {
        "type": "object",
        "required": ["schema", "T", "methods"],
        "properties": {
            "schema": {"const": "igls.normality/1"},
            "T": {"type": "integer"},
            "methods": {
                "type": "object",
                "additionalProperties": {
                    "type": "object",
                    "required": ["R", "ks_stats", "ks_cutoff", "mardia", "passed"],
                },
            },
        },
    },
    "igls.grenander/1": {
        "type": "object",
        "required": ["schema", "report"],
        "properties": {
            "schema": {"const": "igls.grenander/1"},
            "report": {
                "type": "object",
                "required": ["T_grid", "labels", "s2", "gren2_limit", "rho_limit", "cond_R0", "verdicts"],
                "properties": {
                    "verdicts": {
                        "type": "object",
                        "required": ["Gren1", "Gren2", "Gren3", "Gren4"],
                        "additionalProperties": {"type": "boolean"},
                    },
                },
            },
        },
    },
}


def _clean(obj):
    """JSON-safe copy: arrays to lists, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def validate_document(doc: dict) -> None:
    schema_id = doc.get("schema")
    if schema_id not in SCHEMAS:
        raise jsonschema.ValidationError(f"unknown schema identifier {schema_id!r}")
    jsonschema.validate(doc, SCHEMAS[schema_id])


def dump_json(path, schema_id: str, body: dict) -> dict:
    """Write ``{"schema": schema_id, **body}`` after validating it."""
    doc = _clean({"schema": schema_id, **body})
    validate_document(doc)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n", encoding="utf-8")
    return doc


def validate_file(path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    validate_document(doc)
    return doc


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
