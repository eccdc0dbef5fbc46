"""Run configuration, CSV ingestion and chain persistence."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import prior_model as pm
from . import tree_index as ti
from .errors import DataError, DomainError
from .generative import Dataset, GroundTruth, Params
from .gibbs.state import ChainConfig, ChainSample, ChainState
from .kernel_process import LoadingsState

CHAIN_SCHEMA = 1


@dataclass
class RunConfig:
    hyper: pm.HyperParams = field(default_factory=pm.HyperParams)
    chain: ChainConfig = field(default_factory=ChainConfig)
    data: str | None = None
    covariates: str | None = None
    out: str | None = None
    zeta_mu: float | None = None  # defaults to 0.05 * sqrt(p)
    zeta_sigma: float | None = None
    xi_mu: float = 0.95
    xi_sigma: float = 0.95

    def to_dict(self) -> dict:
        flat = {**self.hyper.to_dict(), **self.chain.to_dict()}
        for name in ("data", "covariates", "out", "zeta_mu", "zeta_sigma", "xi_mu", "xi_sigma"):
            flat[name] = getattr(self, name)
        return flat

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = ({f.name for f in fields(pm.HyperParams)} | {f.name for f in fields(ChainConfig)}
                 | {"data", "covariates", "out", "zeta_mu", "zeta_sigma", "xi_mu", "xi_sigma"})
        unknown = sorted(set(data) - known)
        if unknown:
            raise DomainError(f"unknown config fields: {', '.join(unknown)}")
        return cls(
            hyper=pm.HyperParams.from_dict(data),
            chain=ChainConfig.from_dict(data),
            **{k: data[k] for k in ("data", "covariates", "out", "zeta_mu", "zeta_sigma", "xi_mu", "xi_sigma")
               if k in data},
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise DataError(f"{path}: config must be a JSON object")
        cfg = cls.from_dict(data)
        base = Path(path).parent
        for name in ("data", "covariates"):
            value = getattr(cfg, name)
            if value is not None and not os.path.isabs(value) and not Path(value).exists():
                candidate = base / value
                if candidate.exists():
                    setattr(cfg, name, str(candidate))
        return cfg


# -- CSV ------------------------------------------------------------------------

def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_numeric_csv(path) -> np.ndarray:
    """Comma-separated numeric matrix; a non-numeric first row is taken as a header."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [(i, r) for i, r in enumerate(csv.reader(fh), start=1) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if rows and not all(_is_number(c.strip()) for c in rows[0][1]):
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(rows[0][1])
    out = np.empty((len(rows), width))
    for r, (line, cells) in enumerate(rows):
        if len(cells) != width:
            raise DataError(f"{path}:{line}: expected {width} columns, found {len(cells)}")
        for c, cell in enumerate(cells):
            try:
                out[r, c] = float(cell)
            except ValueError:
                raise DataError(f"{path}:{line}: column {c + 1} is not numeric: {cell!r}") from None
    if not np.all(np.isfinite(out)):
        raise DataError(f"{path}: missing or non-finite values")
    return out


def load_dataset(data_path, covariates_path=None) -> Dataset:
    """Observations and covariates; an intercept column is added unless a constant column exists."""
    Y = read_numeric_csv(data_path)
    if covariates_path is None:
        X = np.ones((Y.shape[0], 1))
    else:
        X = read_numeric_csv(covariates_path)
        if X.shape[0] != Y.shape[0]:
            raise DataError(f"row-count mismatch: data has {Y.shape[0]} rows, covariates have {X.shape[0]}")
        constant = np.all(X == X[0], axis=0) & (X[0] != 0)
        if not constant.any():
            X = np.hstack([np.ones((X.shape[0], 1)), X])
    return Dataset(Y, X)


def write_matrix_csv(path, mat, header: list[str] | None = None) -> None:
    with Path(path).open("w", newline="") as fh:
        if header:
            fh.write(",".join(header) + "\n")
        for row in np.atleast_2d(mat):
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


# -- chain persistence ------------------------------------------------------------

_MATS = ("Theta", "Lambda", "LambdaTilde", "phi", "psi", "psi_tilde")
_STARS = ("theta_star", "lambda_star", "lambda_tilde_star")


def params_to_dict(params: Params) -> dict:
    L = params.loadings
    out = {name: getattr(L, name).tolist() for name in _MATS}
    out.update({name: getattr(params, name).tolist() for name in _STARS})
    out["gamma"] = L.gamma.tolist()
    out["varsigma"] = L.varsigma.tolist()
    out["B"] = params.B.tolist()
    out["nu"] = params.shrinkage.nu.tolist()
    out["zeta"] = params.shrinkage.zeta.astype(int).tolist()
    return out


def params_from_dict(d: dict) -> Params:
    arr = {k: np.asarray(d[k], dtype=float) for k in (*_MATS, *_STARS, "gamma", "varsigma", "B", "nu")}
    loadings = LoadingsState(*(arr[k] for k in _MATS), arr["gamma"], arr["varsigma"])
    shrink = pm.ShrinkageState(arr["nu"], np.asarray(d["zeta"], dtype=int))
    return Params(loadings, arr["theta_star"], arr["lambda_star"], arr["lambda_tilde_star"], arr["B"], shrink)


def sample_to_json(sample: ChainSample) -> str:
    st = sample.state
    record = {
        "schema": CHAIN_SCHEMA,
        "iteration": sample.iteration,
        "k": st.k,
        "log_density": sample.log_density,
        "aligned": sample.aligned,
        "patterns": sample.labels(),
        **params_to_dict(st.params),
        "z": st.z.tolist(),
        "z_tilde": st.z_tilde.tolist(),
    }
    return json.dumps(record, separators=(",", ":"))


def sample_from_json(line: str) -> ChainSample:
    d = json.loads(line)
    if d.get("schema") != CHAIN_SCHEMA:
        raise DataError(f"unsupported chain schema {d.get('schema')!r}")
    k = int(d["k"])
    rho = np.array([ti.encode_node(ti.pattern_from_str(p), k) for p in d["patterns"]], dtype=np.int8)
    rho = rho.reshape(len(d["patterns"]), k)
    z = np.asarray(d["z"], dtype=float).reshape(rho.shape)
    zt = np.asarray(d["z_tilde"], dtype=float).reshape(rho.shape)
    state = ChainState(params_from_dict(d), rho, z, zt, int(d["iteration"]))
    return ChainSample(int(d["iteration"]), state, float(d["log_density"]), bool(d.get("aligned", True)))


def read_chain(path, repair: bool = False) -> list[ChainSample]:
    """Read a JSON-lines chain. A malformed final line (interrupted write) is
    dropped, and removed from the file when ``repair`` is set."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"chain file {path} does not exist")
    lines = path.read_text().splitlines(keepends=True)
    out = []
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            out.append(sample_from_json(line))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            if i == len(lines) - 1:
                if repair:
                    path.write_text("".join(lines[:i]))
                break
            raise DataError(f"{path}:{i + 1}: malformed chain record: {exc}") from exc
    return out


def truth_to_dict(truth: GroundTruth) -> dict:
    return {
        "patterns": [ti.pattern_to_str(p) for p in truth.patterns],
        "params": params_to_dict(truth.params),
        "z": truth.z.tolist(),
        "z_tilde": truth.z_tilde.tolist(),
    }


def dump_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, float) and math.isinf(o):
        return "inf"
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")
