"""Rate-distortion and semantic scoring utilities.

Covers the composite three-level objective, accuracy of prediction
tables under per-level clusterings, mean Wu-Palmer similarity, and
Bjontegaard delta-rate between two rate-quality curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import (
    DataError,
    InsufficientPoints,
    NegativeRate,
    NoOverlap,
    UnmappedClass,
)
from .taxonomy import Clustering, Taxonomy, wup

# three-level weighting used throughout the shipped experiments
DEFAULT_LAMBDAS = (1e-4, 1e-3, 1e-2)
DEFAULT_GAMMAS = (0.5, 1.0, 2.0)


@dataclass(frozen=True)
class RDPoint:
    level: int
    bpp: float
    quality: float

    def __post_init__(self):
        if self.bpp <= 0.0:
            raise NegativeRate(f"bpp must be positive, got {self.bpp}")


@dataclass(frozen=True)
class PredictionRow:
    image_id: str
    level: int
    pred_class: str
    true_class: str


def composite_loss(
    per_level,
    lambdas=DEFAULT_LAMBDAS,
    gammas=DEFAULT_GAMMAS,
) -> float:
    """Sum over levels of bpp + lambda * mse + gamma * ce."""
    if len(per_level) != 3 or len(lambdas) != 3 or len(gammas) != 3:
        raise ValueError("exactly three levels are required")
    total = 0.0
    for (bpp, mse, ce), lam, gam in zip(per_level, lambdas, gammas):
        if bpp < 0.0:
            raise NegativeRate(f"negative rate {bpp}")
        total += bpp + lam * mse + gam * ce
    return total


def hierarchical_accuracy(
    rows: list[PredictionRow], clusterings: dict[int, Clustering]
) -> dict[int, float]:
    """Per-level fraction of rows whose classes share a cluster.

    Every row counts at every level: a coarse clustering can score a
    prediction correct that a finer one rejects.
    """
    if not rows:
        raise DataError("no prediction rows")
    out: dict[int, float] = {}
    for level in sorted(clusterings):
        assignment = clusterings[level].assignment
        hits = 0
        for row in rows:
            for name in (row.pred_class, row.true_class):
                if name not in assignment:
                    raise UnmappedClass(f"class '{name}' unmapped at level {level}")
            hits += assignment[row.pred_class] == assignment[row.true_class]
        out[level] = hits / len(rows)
    return out


def wup_score(rows: list[PredictionRow], t: Taxonomy) -> float:
    """Mean Wu-Palmer similarity of predictions to ground truth."""
    if not rows:
        raise DataError("no prediction rows")
    return sum(wup(t, r.pred_class, r.true_class) for r in rows) / len(rows)


def bd_rate(curve_a, curve_b, method: str = "cubic") -> float:
    """Average percent rate change of curve_b relative to curve_a.

    Fits log-rate as a function of quality on both curves, integrates
    over the common quality interval, and converts the mean log-rate
    difference to percent.  `method` selects the classical cubic
    polynomial fit or a piecewise-cubic (pchip) interpolation.
    """
    qa, ra = _curve_arrays(curve_a, "curve_a")
    qb, rb = _curve_arrays(curve_b, "curve_b")
    lo = max(qa.min(), qb.min())
    hi = min(qa.max(), qb.max())
    if not lo < hi:
        raise NoOverlap(f"quality ranges [{qa.min()}, {qa.max()}] and "
                        f"[{qb.min()}, {qb.max()}] do not overlap")
    int_a = _mean_log_rate(qa, ra, lo, hi, method)
    int_b = _mean_log_rate(qb, rb, lo, hi, method)
    return (math.exp(int_b - int_a) - 1.0) * 100.0


def _curve_arrays(points, name: str) -> tuple[np.ndarray, np.ndarray]:
    if len(points) < 4:
        raise InsufficientPoints(f"{name} has {len(points)} points, need at least 4")
    q = np.array([p.quality for p in points], dtype=np.float64)
    r = np.array([p.bpp for p in points], dtype=np.float64)
    order = np.argsort(q, kind="stable")
    q, r = q[order], r[order]
    if (np.diff(q) == 0.0).any():
        raise DataError(f"{name} repeats a quality value")
    return q, np.log(r)


def _mean_log_rate(q, log_r, lo, hi, method: str) -> float:
    if method == "cubic":
        poly = np.polyfit(q, log_r, 3)
        anti = np.polyint(poly)
        area = np.polyval(anti, hi) - np.polyval(anti, lo)
    elif method == "pchip":
        anti = PchipInterpolator(q, log_r).antiderivative()
        area = float(anti(hi) - anti(lo))
    else:
        raise ValueError(f"unknown method '{method}'")
    return float(area) / (hi - lo)


def export_rd(points) -> str:
    """Render `level,bpp,quality` CSV, sorted by level then bpp."""
    lines = ["level,bpp,quality"]
    for p in sorted(points, key=lambda p: (p.level, p.bpp)):
        lines.append(f"{p.level},{p.bpp!r},{p.quality!r}")
    return "\n".join(lines) + "\n"


def parse_rd(text: str) -> list[RDPoint]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "level,bpp,quality":
        raise DataError("RD CSV must start with 'level,bpp,quality'")
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 3:
            raise DataError(f"line {lineno}: expected 'level,bpp,quality'")
        try:
            out.append(RDPoint(level=int(parts[0]), bpp=float(parts[1]),
                               quality=float(parts[2])))
        except ValueError:
            raise DataError(f"line {lineno}: bad numeric field") from None
    return out


def export_predictions(rows: list[PredictionRow]) -> str:
    lines = ["image_id,level,pred_class,true_class"]
    for r in rows:
        lines.append(f"{r.image_id},{r.level},{r.pred_class},{r.true_class}")
    return "\n".join(lines) + "\n"


def parse_predictions(text: str) -> list[PredictionRow]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "image_id,level,pred_class,true_class":
        raise DataError(
            "predictions CSV must start with 'image_id,level,pred_class,true_class'"
        )
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 4:
            raise DataError(f"line {lineno}: expected four fields")
        try:
            level = int(parts[1])
        except ValueError:
            raise DataError(f"line {lineno}: bad level '{parts[1]}'") from None
        out.append(PredictionRow(image_id=parts[0], level=level,
                                 pred_class=parts[2], true_class=parts[3]))
    return out
