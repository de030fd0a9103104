"""Delimited-text input, tab-separated output tables, and the versioned JSON
model file.

Model files store original-scale coefficients sparsely, so a loaded model
predicts raw data directly without the training-time standardization step.
"""

from __future__ import annotations

import contextlib
import json
from dataclasses import dataclass

import numpy as np

from .model import PliableFit, predict
from .path import PathResult
from .preprocess import StandardizationMap

__all__ = [
    "MODEL_SCHEMA_VERSION",
    "DataFormatError",
    "read_delimited",
    "split_columns",
    "write_table",
    "save_model",
    "load_model",
    "LoadedModel",
]

MODEL_SCHEMA_VERSION = 1


class DataFormatError(ValueError):
    """Malformed input file; messages carry line and column positions."""


def _sniff_delimiter(header_line: str) -> str:
    return "\t" if "\t" in header_line else ","


def read_delimited(path):
    """Read a delimited text file with a header row.

    Tab or comma separated (sniffed from the header); lines starting with
    ``#`` and blank lines are skipped.  Returns ``(column_names, matrix)``.
    """
    names = None
    rows = []
    delim = "\t"
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if names is None:
                delim = _sniff_delimiter(line)
                names = [c.strip() for c in line.split(delim)]
                if len(set(names)) != len(names):
                    raise DataFormatError(f"{path}: duplicate column names in header")
                continue
            cells = line.split(delim)
            if len(cells) != len(names):
                raise DataFormatError(
                    f"{path}: line {ln}: expected {len(names)} fields, "
                    f"got {len(cells)}")
            row = np.empty(len(cells))
            for ci, cell in enumerate(cells):
                try:
                    row[ci] = float(cell)
                except ValueError:
                    raise DataFormatError(
                        f"{path}: line {ln}, column {names[ci]!r}: "
                        f"not a number: {cell.strip()!r}") from None
            rows.append(row)
    if names is None:
        raise DataFormatError(f"{path}: empty file")
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    return names, np.vstack(rows)


def split_columns(names, matrix, y_col=None, z_cols=()):
    """Partition file columns into response, predictors, and modifiers.

    ``y_col=None`` means the file has no response (prediction input).  Columns
    named in ``z_cols`` become Z, in the order given; everything else is X in
    file order.  Returns ``(y, X, Z, x_names)`` with y and Z possibly None.
    """
    index = {name: i for i, name in enumerate(names)}
    for col in ([y_col] if y_col else []) + list(z_cols):
        if col not in index:
            raise DataFormatError(
                f"no column named {col!r}; file has {', '.join(names)}")
    taken = set(z_cols) | ({y_col} if y_col else set())
    x_idx = [i for i, name in enumerate(names) if name not in taken]
    if not x_idx:
        raise DataFormatError("no predictor columns left after y/Z selection")
    y = matrix[:, index[y_col]] if y_col else None
    Z = matrix[:, [index[c] for c in z_cols]] if z_cols else None
    return y, matrix[:, x_idx], Z, [names[i] for i in x_idx]


def _format_cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_, int, np.integer)):
        return str(int(v))
    return repr(float(v))


@contextlib.contextmanager
def _open_out(path):
    if hasattr(path, "write"):
        yield path
    else:
        with open(path, "w") as fh:
            yield fh


def write_table(path, names, rows, invocation=None, comments=()):
    """Write a TSV table to a path or stream.

    ``#`` comment lines carry the invocation and any extra metadata so every
    output file is self-describing.  Floats are written with full round-trip
    precision.
    """
    with _open_out(path) as fh:
        if invocation:
            fh.write(f"# {invocation}\n")
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write("\t".join(names) + "\n")
        for row in rows:
            fh.write("\t".join(_format_cell(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# model file


def _fit_to_dict(fit: PliableFit) -> dict:
    theta = [[j, k, float(v)]
             for j, row in sorted(fit.theta_rows.items())
             for k, v in enumerate(row) if v != 0.0]
    return {
        "beta0": fit.beta0,
        "theta0": [float(v) for v in fit.theta0],
        "beta": [[j, float(v)] for j, v in enumerate(fit.beta) if v != 0.0],
        "theta": theta,
    }


def _fit_from_dict(d: dict, p: int, k: int, lam: float, alpha: float) -> PliableFit:
    beta = np.zeros(p)
    for j, v in d["beta"]:
        beta[int(j)] = v
    rows = {}
    for j, kk, v in d["theta"]:
        rows.setdefault(int(j), np.zeros(k))[int(kk)] = v
    return PliableFit(d["beta0"], np.asarray(d["theta0"], dtype=float),
                      beta, rows, lam, alpha)


def _smap_to_dict(smap: StandardizationMap) -> dict:
    return {
        "x_means": smap.x_means.tolist(), "x_scales": smap.x_scales.tolist(),
        "z_means": smap.z_means.tolist(), "z_scales": smap.z_scales.tolist(),
        "y_mean": smap.y_mean, "standardize_x": smap.standardize_x,
        "standardize_z": smap.standardize_z, "center_y": smap.center_y,
    }


def _smap_from_dict(d: dict) -> StandardizationMap:
    return StandardizationMap(
        np.asarray(d["x_means"], dtype=float), np.asarray(d["x_scales"], dtype=float),
        np.asarray(d["z_means"], dtype=float), np.asarray(d["z_scales"], dtype=float),
        d["y_mean"], d["standardize_x"], d["standardize_z"], d["center_y"])


def save_model(path, result: PathResult, cv=None, invocation=None,
               x_columns=None, z_columns=None):
    """Serialize a fitted path (original-scale coefficients) as JSON."""
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "alpha": result.alpha,
        "lambdas": [float(v) for v in result.lambdas],
        "n_predictors": result.fits[0].n_predictors,
        "n_modifiers": result.fits[0].n_modifiers,
        "standardization": _smap_to_dict(result.smap),
        "fits": [_fit_to_dict(result.fit_raw(i))
                 for i in range(result.n_lambdas)],
        "diagnostics": [
            {"n_passes": d.n_passes, "n_active_groups": d.n_active_groups,
             "n_active_theta_rows": d.n_active_theta_rows,
             "kkt_max": d.kkt_max} for d in result.diagnostics],
    }
    if x_columns is not None:
        doc["x_columns"] = list(x_columns)
    if z_columns is not None:
        doc["z_columns"] = list(z_columns)
    if cv is not None:
        doc["cv"] = {
            "cv_mean": [float(v) for v in cv.cv_mean],
            "cv_se": [float(v) for v in cv.cv_se],
            "idx_min": cv.idx_min, "idx_1se": cv.idx_1se,
        }
    if invocation:
        doc["invocation"] = invocation
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


@dataclass(frozen=True)
class LoadedModel:
    """Deserialized model file: original-scale fits plus selection metadata."""

    alpha: float
    lambdas: np.ndarray
    fits: tuple
    smap: StandardizationMap
    diagnostics: tuple
    x_columns: list | None
    z_columns: list | None
    cv: dict | None
    invocation: str | None

    @property
    def n_lambdas(self) -> int:
        return len(self.fits)

    @property
    def idx_min(self):
        return self.cv["idx_min"] if self.cv else None

    def default_index(self) -> int:
        """CV-minimizing penalty when present, else the end of the path."""
        return self.idx_min if self.cv else self.n_lambdas - 1

    def predict(self, X, Z=None, index=None) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if Z is not None:
            Z = np.asarray(Z, dtype=float)
        if index is None:
            index = self.default_index()
        return predict(self.fits[index], X, Z)


def load_model(path) -> LoadedModel:
    with open(path) as fh:
        doc = json.load(fh)
    version = doc.get("schema_version")
    if version != MODEL_SCHEMA_VERSION:
        raise DataFormatError(
            f"{path}: unsupported model schema {version!r}, "
            f"expected {MODEL_SCHEMA_VERSION}")
    p, k = doc["n_predictors"], doc["n_modifiers"]
    alpha = doc["alpha"]
    lambdas = np.asarray(doc["lambdas"], dtype=float)
    fits = tuple(_fit_from_dict(d, p, k, lam, alpha)
                 for d, lam in zip(doc["fits"], lambdas))
    return LoadedModel(
        alpha=alpha, lambdas=lambdas, fits=fits,
        smap=_smap_from_dict(doc["standardization"]),
        diagnostics=tuple(doc["diagnostics"]),
        x_columns=doc.get("x_columns"), z_columns=doc.get("z_columns"),
        cv=doc.get("cv"), invocation=doc.get("invocation"))
