"""CSV and JSON readers/writers for patterns, observations and fits.

Floats are written with ``repr`` so files round-trip exactly and repeated
runs are byte-identical.
"""
import csv
import json
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .channel import Observations
from .estimator import CalibrationFit


@contextmanager
def open_out(path):
    """Open ``path`` for writing; ``-`` means stdout."""
    if str(path) == "-":
        yield sys.stdout
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        yield fh


def sidecar_path(path):
    return Path(path).with_suffix(".json")


def write_json(path, payload):
    with open_out(path) as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _fmt(x):
    return repr(float(x))


def _cell(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return _fmt(v)


def write_table(path, header, rows):
    with open_out(path) as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def read_table(path):
    """Read a headed numeric CSV into ``(header, array)``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return [h.strip() for h in header], data


def write_pattern(path, points):
    points = np.asarray(points, dtype=float)
    d = points.shape[1]
    write_table(path, [f"x{k + 1}" for k in range(d)], points)


def read_pattern(path):
    header, data = read_table(path)
    if not header or any(h != f"x{k + 1}" for k, h in enumerate(header)):
        raise ValueError(f"{path}: expected header x1,...,xd")
    return data


def observation_header(d):
    return [f"x{k + 1}" for k in range(d)] + ["P", "N"] + [f"theta{k + 1}" for k in range(d - 1)]


def write_observations(path, obs):
    d = obs.dimension
    rows = np.column_stack([obs.sensors, obs.rss, obs.inverse_rss, obs.angles]) if len(obs) else np.empty((0, 2 * d + 1))
    write_table(path, observation_header(d), rows)


def read_observations(path):
    header, data = read_table(path)
    # header length is 2d + 1
    d = (len(header) - 1) // 2
    if d < 2 or header != observation_header(d):
        raise ValueError(f"{path}: expected header x1..xd,P,N,theta1..theta(d-1)")
    return Observations(data[:, :d], data[:, d], data[:, d + 2:], inverse_rss=data[:, d + 1])


def write_calibration(path, rss, distance):
    write_table(path, ["P", "R"], np.column_stack([rss, distance]))


def read_calibration(path):
    header, data = read_table(path)
    if header != ["P", "R"]:
        raise ValueError(f"{path}: expected header P,R")
    return data[:, 0], data[:, 1]


def write_fit(path, fit):
    write_json(path, fit.to_dict())


def read_fit(path):
    with open(path) as fh:
        return CalibrationFit.from_dict(json.load(fh))
