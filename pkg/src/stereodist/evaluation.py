"""Disparity error statistics and uncertainty sparsification curves.

D1_all follows the KITTI 2015 outlier rule: error > 3 px AND > 5% of the
ground truth.  bad-1.0 is the ETH3D rule: error > 1 px.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateInputError, InputValidationError, StructuralError


@dataclass(frozen=True)
class ErrorStats:
    d1_all: float
    bad_1: float
    epe: float
    n_valid: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _valid(pred, gt, mask):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise StructuralError(f"prediction shape {pred.shape} != ground-truth shape {gt.shape}")
    mask = np.ones(pred.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != pred.shape:
        raise StructuralError(f"mask shape {mask.shape} != map shape {pred.shape}")
    return pred, gt, mask


def d1_outliers(err, gt):
    return (err > 3.0) & (err > 0.05 * np.abs(gt))


def error_stats(pred, gt, mask=None) -> ErrorStats:
    pred, gt, mask = _valid(pred, gt, mask)
    n = int(mask.sum())
    if n == 0:
        raise DegenerateInputError("validity mask has no valid pixels")
    err = np.abs(pred - gt)[mask]
    g = gt[mask]
    return ErrorStats(
        d1_all=100.0 * np.count_nonzero(d1_outliers(err, g)) / n,
        bad_1=100.0 * np.count_nonzero(err > 1.0) / n,
        epe=float(err.mean()),
        n_valid=n,
    )


@dataclass(frozen=True)
class RocCurve:
    density: tuple
    d1_all: tuple
    n_retained: tuple

    def __len__(self):
        return len(self.density)

    def at(self, density) -> float:
        k = int(np.argmin(np.abs(np.asarray(self.density) - density)))
        return self.d1_all[k]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["density", "d1_all", "n_retained"])
        for row in zip(self.density, self.d1_all, self.n_retained):
            w.writerow([repr(float(row[0])), repr(float(row[1])), int(row[2])])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {"density": [float(x) for x in self.density], "d1_all": [float(x) for x in self.d1_all],
             "n_retained": [int(x) for x in self.n_retained]},
            indent=2,
        )


def roc_sparsification(pred, gt, mask, unc, step=0.05) -> RocCurve:
    """D1_all of the retained pixels as the most uncertain ones are removed.

    Valid pixels are ranked by decreasing uncertainty (ties: row-major pixel
    order).  Level ``k`` removes ``floor(k * step * n)`` pixels and sits at
    nominal density ``1 - k * step``; the last level removes whatever is left
    and sits at density 0, where D1_all of the empty set is reported as 0.
    """
    if not (0 < step <= 0.5):
        raise InputValidationError(f"step must be in (0, 0.5], got {step}")
    pred, gt, mask = _valid(pred, gt, mask)
    unc = np.asarray(unc, dtype=np.float64)
    if unc.shape != pred.shape:
        raise StructuralError(f"uncertainty shape {unc.shape} != map shape {pred.shape}")
    n = int(mask.sum())
    if n == 0:
        raise DegenerateInputError("validity mask has no valid pixels")

    flat = np.flatnonzero(mask.ravel())
    u = unc.ravel()[flat]
    # lexsort: last key is primary -> descending uncertainty, then ascending pixel index
    order = flat[np.lexsort((flat, -u))]
    err = np.abs(pred.ravel() - gt.ravel())[order]
    bad = d1_outliers(err, gt.ravel()[order])
    # bad_from[k] = outliers among the pixels ranked k.. (i.e. retained after removing k)
    bad_from = np.concatenate([np.cumsum(bad[::-1])[::-1], [0]])

    levels = math.ceil(1.0 / step - 1e-9)
    dens, d1s, kept = [], [], []
    for k in range(levels + 1):
        removed = n if k == levels else min(int(math.floor(k * step * n + 1e-9)), n)
        retained = n - removed
        dens.append(max(1.0 - k * step, 0.0) if k < levels else 0.0)
        d1s.append(100.0 * bad_from[removed] / retained if retained else 0.0)
        kept.append(retained)
    return RocCurve(tuple(float(x) for x in dens), tuple(float(x) for x in d1s), tuple(kept))
