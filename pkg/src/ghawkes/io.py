"""File formats: model configs (JSON), event CSVs, covariance grids, run metadata.

Component indices are 1-based in every file and 0-based in the Python API.
Floats are written with ``repr`` so values round-trip exactly.
"""

from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .estimate import CovEstimate
from .model import LINK_KINDS, EventStream, GammaKernel, HawkesModel, LinkSpec, build_block_model
from .wienerhopf import GridCurveSet


def fmt(x) -> str:
    """Shortest round-trip text for a number."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


# -- model configs ---------------------------------------------------------

def _parse_link(obj, where="link") -> LinkSpec:
    if isinstance(obj, str):
        obj = {"kind": obj}
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ConfigError(f"{where}: expected an object with a 'kind' field")
    kind = obj["kind"]
    if kind not in LINK_KINDS:
        raise ConfigError(f"{where}: unknown link kind {kind!r}; choose from {', '.join(LINK_KINDS)}")
    unknown = set(obj) - {"kind", "cap"}
    if unknown:
        raise ConfigError(f"{where}: unknown fields {sorted(unknown)}")
    try:
        return LinkSpec(kind, obj.get("cap"))
    except Exception as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _number(x, where):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {x!r}")
    if not math.isfinite(x):
        raise ConfigError(f"{where}: must be finite")
    return float(x)


def model_from_config(cfg: dict) -> HawkesModel:
    """Build a model from a parsed config mapping (see README for the schema)."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - {"p", "mu", "link", "kernels"}
    if unknown:
        raise ConfigError(f"unknown top-level fields {sorted(unknown)}")
    kernels = cfg.get("kernels", [])
    if isinstance(kernels, dict):
        if set(kernels) != {"block_model"}:
            raise ConfigError("kernels object must be {'block_model': {...}}")
        bm = kernels["block_model"]
        if not isinstance(bm, dict) or "p" not in bm:
            raise ConfigError("block_model needs at least 'p'")
        bp = bm["p"]
        if isinstance(bp, bool) or not isinstance(bp, int):
            raise ConfigError("block_model.p must be an integer")
        base = build_block_model(bp, _number(bm.get("gamma", 1.0), "block_model.gamma"))
        if "p" in cfg and cfg["p"] != base.p:
            raise ConfigError(f"p={cfg['p']} disagrees with block_model.p={base.p}")
        mu = cfg.get("mu", list(base.mu))
        links = cfg.get("link")
        links = base.links if links is None else links
        p = base.p
        kernel_map = base.kernels
        metadata = base.metadata
    else:
        if "p" not in cfg:
            raise ConfigError("missing field 'p'")
        p = cfg["p"]
        if isinstance(p, bool) or not isinstance(p, int) or p < 1:
            raise ConfigError(f"p must be a positive integer, got {p!r}")
        if not isinstance(kernels, list):
            raise ConfigError("kernels must be a list or a block_model object")
        kernel_map = {}
        for n, entry in enumerate(kernels):
            where = f"kernels[{n}]"
            if not isinstance(entry, dict) or not {"from", "to", "amplitude", "gamma"} <= set(entry):
                raise ConfigError(f"{where}: needs from, to, amplitude, gamma")
            k, j = entry["from"], entry["to"]
            for name, idx in (("from", k), ("to", j)):
                if isinstance(idx, bool) or not isinstance(idx, int) or not 1 <= idx <= p:
                    raise ConfigError(f"{where}.{name}: must be an integer in [1, {p}], got {idx!r}")
            if (k - 1, j - 1) in kernel_map:
                raise ConfigError(f"{where}: duplicate kernel {k}->{j}")
            try:
                kernel_map[(k - 1, j - 1)] = GammaKernel(_number(entry["amplitude"], f"{where}.amplitude"),
                                                         _number(entry["gamma"], f"{where}.gamma"))
            except ConfigError:
                raise
            except Exception as exc:
                raise ConfigError(f"{where}: {exc}") from exc
        mu = cfg.get("mu", 0.0)
        links = cfg.get("link")
        if links is None:
            raise ConfigError("missing field 'link'")
        metadata = {}
    if isinstance(mu, list):
        if len(mu) != p:
            raise ConfigError(f"mu has {len(mu)} entries for p={p}")
        mu = [_number(m, f"mu[{i}]") for i, m in enumerate(mu)]
    else:
        mu = [_number(mu, "mu")] * p
    if isinstance(links, (list, tuple)):
        links = [lk if isinstance(lk, LinkSpec) else _parse_link(lk, f"link[{i}]") for i, lk in enumerate(links)]
        if len(links) not in (1, p):
            raise ConfigError(f"link list has {len(links)} entries for p={p}")
    else:
        links = [_parse_link(links)]
    try:
        return HawkesModel(mu, links, kernel_map, metadata)
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(str(exc)) from exc


def _link_obj(link: LinkSpec) -> dict:
    out = {"kind": link.kind}
    if link.cap is not None:
        out["cap"] = link.cap
    return out


def model_to_config(model: HawkesModel) -> dict:
    """Inverse of :func:`model_from_config`; uses the block form when it reproduces the model."""
    mu = model.mu[0] if len(set(model.mu)) == 1 else list(model.mu)
    links = _link_obj(model.links[0]) if len(set(model.links)) == 1 else [_link_obj(lk) for lk in model.links]
    bm = model.metadata.get("block_model")
    if bm is not None:
        try:
            base = build_block_model(bm["p"], bm["gamma"])
        except Exception:
            base = None
        if base is not None and base.kernels == model.kernels:
            return {"p": model.p, "mu": mu, "link": links,
                    "kernels": {"block_model": {"p": bm["p"], "gamma": bm["gamma"]}}}
    kernels = [{"from": k + 1, "to": j + 1, "amplitude": ker.amplitude, "gamma": ker.decay}
               for (k, j), ker in model.kernels.items()]
    return {"p": model.p, "mu": mu, "link": links, "kernels": kernels}


def load_model(path) -> HawkesModel:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return model_from_config(cfg)


def save_model(model: HawkesModel, path):
    with open(path, "w") as fh:
        json.dump(model_to_config(model), fh, indent=2)
        fh.write("\n")


# -- event streams ---------------------------------------------------------

def write_events(stream: EventStream, path):
    with open(path, "w", newline="") as fh:
        fh.write("time,mark\n")
        for t, m in zip(stream.times, stream.marks):
            fh.write(f"{fmt(t)},{int(m) + 1}\n")


def read_events(path, horizon: float | None = None, p: int | None = None) -> EventStream:
    """Read a ``time,mark`` file. Horizon and dimension default to the data extent."""
    times, marks = [], []
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["time", "mark"]:
                raise ConfigError(f"{path}: expected header 'time,mark'")
            for n, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    times.append(float(row[0]))
                    marks.append(int(row[1]) - 1)
                except (ValueError, IndexError) as exc:
                    raise ConfigError(f"{path}:{n}: bad row {row!r}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read events {path}: {exc}") from exc
    times = np.array(times, dtype=float)
    marks = np.array(marks, dtype=np.int_)
    if marks.size and marks.min() < 0:
        raise ConfigError(f"{path}: marks are 1-based")
    if horizon is None:
        horizon = float(times.max()) if times.size else 1.0
    if p is None:
        p = int(marks.max()) + 1 if marks.size else 1
    order = np.lexsort((marks, times))
    try:
        return EventStream(horizon, times[order], marks[order], p)
    except Exception as exc:
        raise ConfigError(f"{path}: {exc}") from exc


# -- grid curves -----------------------------------------------------------

def _labels(p, prefix):
    return [f"{prefix}_{k + 1}_{j + 1}" for k in range(p) for j in range(p)]


def write_cov_estimate(est: CovEstimate, path):
    """``#``-prefixed JSON header, then ``delta,V_1_1,...`` rows in row-major ``(k, j)`` order."""
    p = est.p
    header = {"format": "cov-estimate", "p": p, "T": est.horizon, "h": est.bandwidth, "kernel": est.kernel,
              "grid": {"min": float(est.delta_grid.min()), "max": float(est.delta_grid.max()),
                       "points": int(est.delta_grid.size)},
              "lambda_hat": [float(x) for x in est.lambda_hat]}
    header.update({k: v for k, v in est.meta.items() if k not in header})
    cols = ["delta"] + _labels(p, "V") + (_labels(p, "SE") if est.se is not None else [])
    vals = est.values.reshape(p * p, -1)
    se = est.se.reshape(p * p, -1) if est.se is not None else None
    with open(path, "w") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        fh.write(",".join(cols) + "\n")
        for g, d in enumerate(est.delta_grid):
            row = [fmt(d)] + [fmt(v) for v in vals[:, g]]
            if se is not None:
                row += [fmt(v) for v in se[:, g]]
            fh.write(",".join(row) + "\n")


def _read_grid_file(path):
    meta = {}
    with open(path) as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            try:
                meta.update(json.loads(line[1:]))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: bad header line") from exc
        elif line.strip():
            body.append(line)
    if not body:
        raise ConfigError(f"{path}: no column header")
    cols = body[0].split(",")
    data = np.array([[float(x) for x in line.split(",")] for line in body[1:]], dtype=float)
    data = data.reshape(-1, len(cols))
    return meta, cols, data


def read_cov_estimate(path) -> CovEstimate:
    meta, cols, data = _read_grid_file(path)
    p = int(meta["p"])
    vcols = [cols.index(c) for c in _labels(p, "V")]
    values = data[:, vcols].T.reshape(p, p, -1)
    se = None
    if "SE_1_1" in cols:
        se = data[:, [cols.index(c) for c in _labels(p, "SE")]].T.reshape(p, p, -1)
    extra = {k: v for k, v in meta.items() if k not in ("format", "p", "T", "h", "kernel", "grid", "lambda_hat")}
    return CovEstimate(data[:, 0].copy(), values, float(meta["h"]), float(meta["T"]),
                       np.array(meta["lambda_hat"], dtype=float), meta.get("kernel", "epanechnikov"), se, extra)


def write_grid_curves(curves: GridCurveSet, path):
    p = curves.p
    prefix = "V" if curves.kind == "cov" else "W"
    header = {"format": f"grid-{curves.kind}", "p": p, "step": curves.step, "max_lag": curves.max_lag}
    header.update({k: v for k, v in curves.meta.items() if k not in header})
    vals = curves.values.reshape(p * p, -1)
    with open(path, "w") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        fh.write(",".join(["delta"] + _labels(p, prefix)) + "\n")
        for g, d in enumerate(curves.grid):
            fh.write(",".join([fmt(d)] + [fmt(v) for v in vals[:, g]]) + "\n")


def read_grid_curves(path) -> GridCurveSet:
    meta, cols, data = _read_grid_file(path)
    kind = meta.get("format", "grid-cov").split("-", 1)[1]
    p = int(meta["p"])
    prefix = "V" if kind == "cov" else "W"
    values = data[:, [cols.index(c) for c in _labels(p, prefix)]].T.reshape(p, p, -1)
    extra = {k: v for k, v in meta.items() if k not in ("format", "p", "step", "max_lag")}
    return GridCurveSet(float(meta["step"]), float(meta["max_lag"]), values, kind, extra)


# -- tables and metadata ---------------------------------------------------

def write_table(path, columns, rows):
    """CSV with a header row; numbers formatted with :func:`fmt`."""
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")


def write_meta(path, record: dict):
    with open(path, "w") as fh:
        json.dump(_jsonable(record), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def ensure_dir(path) -> Path:
    path = Path(path)
    os.makedirs(path, exist_ok=True)
    return path
