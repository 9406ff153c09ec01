"""CSV and JSON persistence for datasets, chain outputs and reports.

CSV layout: a header row of variable names, one row per observation, the
random-effect level as an integer "level" column (omitted when there is no
random effect) and the response in a final "y" column. JSON files carry a
schema_version field and keep timestamps inside a "meta" object so that
reruns with identical configs and seeds are byte-identical elsewhere.
"""

from __future__ import annotations

import csv
import json
import time

import numpy as np

from .blasso import LassoOutput
from .model import Dataset
from .ssvs import ChainOutput

SCHEMA_VERSION = 1


def save_dataset(path, data: Dataset):
    """Write a Dataset as CSV (variables, optional level column, y)."""
    q = data.q
    if q:
        one = (data.Z == 1.0).sum(axis=1)
        zero = (data.Z == 0.0).sum(axis=1)
        if not np.all(one == 1) or not np.all(zero == q - 1):
            raise ValueError("CSV export supports one-hot Z (single random effect)")
        levels = data.Z.argmax(axis=1) + 1  # 1-based in files
    header = list(data.variable_names) + (["level"] if q else []) + ["y"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(data.n):
            row = [repr(float(v)) for v in data.X[i]]
            if q:
                row.append(str(int(levels[i])))
            row.append(str(int(data.Y[i])))
            writer.writerow(row)


def load_dataset(path) -> Dataset:
    """Read a Dataset written by save_dataset."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    if not header or header[-1] != "y":
        raise ValueError(f"{path}: expected a trailing 'y' column")
    has_level = len(header) >= 2 and header[-2] == "level"
    n_vars = len(header) - (2 if has_level else 1)
    names = header[:n_vars]
    X = np.array([[float(v) for v in row[:n_vars]] for row in rows])
    Y = np.array([int(row[-1]) for row in rows])
    if has_level:
        levels = np.array([int(row[n_vars]) for row in rows])
        if levels.min() < 1:
            raise ValueError(f"{path}: levels must be positive integers")
        q = int(levels.max())
        Z = np.zeros((len(rows), q))
        Z[np.arange(len(rows)), levels - 1] = 1.0
        block = [q]
    else:
        Z = np.zeros((len(rows), 0))
        block = []
    return Dataset(X=X, Z=Z, Y=Y, block_sizes=block, variable_names=names)


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def save_json(path, payload: dict):
    """Write a JSON document with sorted keys (thus byte-deterministic)."""
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def chain_payload(output) -> dict:
    """Serializable document for a ChainOutput or LassoOutput."""
    base = {
        "schema_version": SCHEMA_VERSION,
        "method": output.method,
        "seed": output.seed,
        "stream_id": output.stream_id,
        "config": output.config,
        "meta": {"created_at": time.strftime("%Y-%m-%dT%H:%M:%S")},
    }
    if isinstance(output, ChainOutput):
        base.update(
            selection_counts=output.selection_counts,
            gamma_trace=[trace.tolist() for trace in output.gamma_trace],
            model_size_trace=output.model_size_trace,
            sigma2_trace=output.sigma2_trace,
            u_trace=output.u_trace,
            beta_mean=output.beta_mean,
            acceptance_rate=output.acceptance_rate,
            accept_count=output.accept_count,
            proposal_count=output.proposal_count,
        )
    elif isinstance(output, LassoOutput):
        base.update(
            beta_mean=output.beta_mean,
            lambda_mean=output.lambda_mean,
            delta_mean=output.delta_mean,
            beta_ci=output.beta_ci,
            ci_level=output.ci_level,
            sigma2_trace=output.sigma2_trace,
            u_trace=output.u_trace,
        )
    else:
        raise TypeError(f"unsupported output type: {type(output)!r}")
    return base


def save_chain(path, output):
    save_json(path, chain_payload(output))
