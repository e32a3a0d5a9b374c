"""Deterministic CSV and JSON writers."""

from __future__ import annotations

import csv
import json
import math

import numpy as np

TRAJECTORY_COLUMNS = ("t", "x_s", "xdot_s", "h2_free", "h2_cong", "shock_dev", "V",
                      "V1", "V2", "V3", "V4", "V5", "V6", "rho_in", "z_in", "z_out")
SNAPSHOT_COLUMNS = ("region", "x_m", "rho", "v", "z")


def fmt(value):
    """Fixed 17-significant-digit text; empty for missing or non-finite values."""
    if value is None:
        return ""
    value = float(value)
    if not math.isfinite(value):
        return ""
    return format(value, ".17g")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_plain(obj), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def write_rows(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def trajectory_rows(record):
    for k, t in enumerate(record.t):
        extra = record.extras[k] if k < len(record.extras) else {}
        rho_in, z_in, z_out = record.controls[k]
        yield [t, record.x_s[k], record.xdot[k], extra.get("h2_free"), extra.get("h2_cong"),
               extra.get("shock_dev"), extra.get("V"), *(extra.get(f"V{i}") for i in range(1, 7)),
               rho_in, z_in, z_out]


def write_snapshot(path, snapshot, pressure):
    rows = []
    for region, x, rho, z in (("free", snapshot.x_free, snapshot.rho_free, snapshot.z_free),
                              ("congested", snapshot.x_cong, snapshot.rho_cong, snapshot.z_cong)):
        v = z / rho - pressure.p(rho)
        rows.extend([region, *vals] for vals in zip(x, rho, v, z))
    write_rows(path, SNAPSHOT_COLUMNS, rows)
