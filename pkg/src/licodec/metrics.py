"""PSNR, rate-distortion curves, and Bjontegaard delta metrics.

BD deltas use the classic construction: cubic least-squares fit of log-rate
as a function of PSNR (or PSNR as a function of log-rate), analytic
integration of the fitted polynomials over the overlapping interval, and the
average difference converted to percent rate (or left in dB).  Natural logs
throughout; computation refuses to extrapolate outside the overlap.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MetricsError

PSNR_CAP_DB = 99.0
_MIN_BD_POINTS = 4


@dataclass(frozen=True)
class PsnrResult:
    db: float
    exact: bool


def psnr_rgb(a: np.ndarray, b: np.ndarray) -> PsnrResult:
    """Peak signal-to-noise ratio between two 8-bit RGB images, MSE pooled
    over all three channels.  Identical images report the 99 dB cap with the
    exact-match flag set."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise MetricsError(f"image dims differ: {a.shape} vs {b.shape}")
    if a.ndim != 3 or a.shape[2] != 3 or a.dtype != np.uint8 or b.dtype != np.uint8:
        raise MetricsError("expected (H, W, 3) uint8 images")
    diff = a.astype(np.float64) - b.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return PsnrResult(db=PSNR_CAP_DB, exact=True)
    return PsnrResult(db=10.0 * math.log10(255.0**2 / mse), exact=False)


@dataclass(frozen=True)
class RDPoint:
    bpp: float
    psnr: float

    def __post_init__(self):
        if not (math.isfinite(self.bpp) and math.isfinite(self.psnr)):
            raise MetricsError("RD point values must be finite")
        if self.bpp <= 0:
            raise MetricsError("bpp must be positive")


@dataclass
class RDCurve:
    label: str
    points: list[RDPoint] = field(default_factory=list)

    def __post_init__(self):
        if not self.points:
            raise MetricsError(f"curve {self.label!r} has no points")
        bpps = [p.bpp for p in self.points]
        if any(b2 <= b1 for b1, b2 in zip(bpps, bpps[1:])):
            raise MetricsError(f"curve {self.label!r}: bpp must strictly increase")
        psnrs = [p.psnr for p in self.points]
        if any(q2 < q1 for q1, q2 in zip(psnrs, psnrs[1:])):
            warnings.warn(
                f"curve {self.label!r}: PSNR decreases along increasing rate",
                stacklevel=2,
            )

    @property
    def bpp(self) -> np.ndarray:
        return np.array([p.bpp for p in self.points])

    @property
    def psnr(self) -> np.ndarray:
        return np.array([p.psnr for p in self.points])


def _check_bd_inputs(test: RDCurve, anchor: RDCurve) -> None:
    for curve in (test, anchor):
        if len(curve.points) < _MIN_BD_POINTS:
            raise MetricsError(
                f"curve {curve.label!r} has {len(curve.points)} points, "
                f"BD metrics need >= {_MIN_BD_POINTS}"
            )


def _overlap(lo_a, hi_a, lo_b, hi_b, what: str) -> tuple[float, float]:
    lo = max(lo_a, lo_b)
    hi = min(hi_a, hi_b)
    if hi <= lo:
        raise MetricsError(f"curves do not overlap in {what}")
    return lo, hi


def _fit_integral(x: np.ndarray, y: np.ndarray, lo: float, hi: float) -> float:
    poly = np.polyfit(x, y, 3)
    integral = np.polyint(poly)
    return float(np.polyval(integral, hi) - np.polyval(integral, lo))


def bd_rate(test: RDCurve, anchor: RDCurve) -> float:
    """Average rate difference of ``test`` over ``anchor`` in percent
    (negative means the test curve needs less rate at equal quality)."""
    _check_bd_inputs(test, anchor)
    log_rate_t = np.log(test.bpp)
    log_rate_a = np.log(anchor.bpp)
    lo, hi = _overlap(
        test.psnr.min(), test.psnr.max(), anchor.psnr.min(), anchor.psnr.max(), "PSNR"
    )
    int_t = _fit_integral(test.psnr, log_rate_t, lo, hi)
    int_a = _fit_integral(anchor.psnr, log_rate_a, lo, hi)
    avg_log_diff = (int_t - int_a) / (hi - lo)
    return float((math.exp(avg_log_diff) - 1.0) * 100.0)


def bd_psnr(test: RDCurve, anchor: RDCurve) -> float:
    """Average PSNR difference of ``test`` over ``anchor`` in dB over the
    overlapping log-rate interval (positive means the test curve is better)."""
    _check_bd_inputs(test, anchor)
    log_rate_t = np.log(test.bpp)
    log_rate_a = np.log(anchor.bpp)
    lo, hi = _overlap(
        log_rate_t.min(), log_rate_t.max(), log_rate_a.min(), log_rate_a.max(),
        "log-rate",
    )
    int_t = _fit_integral(log_rate_t, test.psnr, lo, hi)
    int_a = _fit_integral(log_rate_a, anchor.psnr, lo, hi)
    return float((int_t - int_a) / (hi - lo))


CSV_HEADER = ("label", "bpp", "psnr")


def emit_rd(curves: list[RDCurve], path) -> None:
    """Write curves to CSV (one row per point); labels must be unique."""
    labels = [c.label for c in curves]
    if len(set(labels)) != len(labels):
        raise MetricsError("duplicate curve labels")
    path = Path(path)
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for curve in curves:
            for point in curve.points:
                writer.writerow([curve.label, repr(point.bpp), repr(point.psnr)])


def parse_rd(path) -> list[RDCurve]:
    """Read back an RD CSV losslessly (labels keep file order)."""
    path = Path(path)
    rows: dict[str, list[RDPoint]] = {}
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise MetricsError(f"{path}: not an RD CSV (bad header)")
        for row in reader:
            if len(row) != 3:
                raise MetricsError(f"{path}: malformed row {row!r}")
            label, bpp_s, psnr_s = row
            try:
                point = RDPoint(bpp=float(bpp_s), psnr=float(psnr_s))
            except ValueError:
                raise MetricsError(f"{path}: malformed row {row!r}") from None
            rows.setdefault(label, []).append(point)
    return [RDCurve(label=label, points=points) for label, points in rows.items()]
