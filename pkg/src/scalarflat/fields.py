"""Scalar fields on the composite grid: quadrature, weights and weighted norms.

Fields are plain float arrays with one entry per composite node of a
:class:`~scalarflat.geometry.GluedGeometry`.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .geometry import GluedGeometry, smoothstep


def check_field(f, geom: GluedGeometry) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (geom.size,):
        raise ValueError(f"field has shape {f.shape}, geometry has {geom.size} nodes")
    if not np.all(np.isfinite(f)):
        raise ValueError("field contains non-finite values")
    return f


def weight(geom: GluedGeometry) -> np.ndarray:
    """Weight psi: eps*cosh(t) on T_alpha, 1 on the lumps, smoothstep blend between."""
    t = geom.t
    L, a, eps = geom.neck.L, geom.alpha, geom.eps
    inner = eps * np.cosh(t)
    s = smoothstep((L - np.abs(t)) / a)
    psi_neck = s * inner + (1.0 - s)
    return np.concatenate(([1.0], psi_neck, [1.0]))


def weighted_norm(f, gamma: float, psi) -> float:
    """sup |psi**gamma * f|."""
    return float(np.max(np.abs(np.asarray(psi) ** gamma * np.asarray(f))))


def integrate(f, geom: GluedGeometry) -> float:
    return float(np.dot(np.asarray(f, dtype=float), geom.vol_weight))


def project_mean_zero(f, geom: GluedGeometry) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    return f - integrate(f, geom) / geom.volume


def write_field_csv(path, f) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id", "value"])
        for i, v in enumerate(np.asarray(f, dtype=float)):
            w.writerow([i, repr(float(v))])
