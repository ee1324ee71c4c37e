"""Discretized Gaussian conditional model and integer frequency tables.

A symbol s under (mu, sigma) has interval probability
Phi((s + 0.5 - mu)/sigma) - Phi((s - 0.5 - mu)/sigma); over a finite symbol
range the two tail masses are folded into the edge symbols, so the folded PMF
sums to 1 exactly (up to float additions).

Determinism bridge: sigma is quantized to a log-spaced scale table and mu to
its nearest integer plus a fractional offset on a 1/4096 grid.  Frequency
tables are a pure function of (offset index, sigma index, symbol range,
precision), so encoder and decoder rebuild bit-identical tables from the same
inputs without trusting transcendental reproducibility across builds.

The normal CDF is evaluated with a documented, coefficient-free scheme:
* |x| < 2:  the odd Maclaurin series  erf(x) = 2/sqrt(pi) * x * exp(-x^2)
            * sum_n (2 x^2)^n / (1*3*...*(2n+1)), 56 terms;
* |x| >= 2: the classical continued fraction
            erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))),
            evaluated by 64 modified-Lentz iterations.
Both converge far below 1e-12 over their domains (verified against math.erf
in the test suite).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CodecError, CodingRangeError, ConfigError

_SQRT_PI = math.sqrt(math.pi)
_SQRT_2 = math.sqrt(2.0)
_SERIES_TERMS = 56
_LENTZ_ITERS = 64
_TINY = 1e-300

DEFAULT_PRECISION = 16
MU_OFFSET_GRID = 4096  # fractional mu offsets quantized to 1/4096

# scale-table registry: id -> (sigma_min, sigma_max, levels); id 0 is the
# default 64-entry log-spaced table over [0.04, 256]
SCALE_TABLE_REGISTRY: dict[int, tuple[float, float, int]] = {
    0: (0.04, 256.0, 64),
}


def make_scale_table(sigma_min: float, sigma_max: float, levels: int) -> np.ndarray:
    if not (0 < sigma_min < sigma_max) or levels < 2:
        raise ConfigError("scale table needs 0 < min < max and >= 2 levels")
    return np.exp(np.linspace(math.log(sigma_min), math.log(sigma_max), levels))


def scale_table_by_id(table_id: int) -> np.ndarray:
    try:
        lo, hi, levels = SCALE_TABLE_REGISTRY[table_id]
    except KeyError:
        raise ConfigError(f"unknown scale table id {table_id}") from None
    return make_scale_table(lo, hi, levels)


DEFAULT_SCALE_TABLE_ID = 0


def _erf_series(x: np.ndarray) -> np.ndarray:
    x2 = x * x
    term = np.ones_like(x)
    acc = np.ones_like(x)
    for n in range(1, _SERIES_TERMS):
        term = term * (2.0 * x2) / (2.0 * n + 1.0)
        acc += term
    return (2.0 / _SQRT_PI) * x * np.exp(-x2) * acc


def _erfc_cf(x: np.ndarray) -> np.ndarray:
    # modified Lentz on K = 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))), x > 0
    f = np.full_like(x, _TINY)
    c = f.copy()
    d = np.zeros_like(x)
    for j in range(1, _LENTZ_ITERS + 1):
        a = 1.0 if j == 1 else (j - 1) / 2.0
        d = x + a * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = x + a / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        f = f * c * d
    return np.exp(-x * x) / _SQRT_PI * f


def erf(x) -> np.ndarray:
    """Documented erf implementation (series + continued fraction)."""
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    ax = np.abs(x)
    out = np.empty_like(x)
    small = ax < 2.0
    if small.any():
        out[small] = _erf_series(x[small])
    big = ~small
    if big.any():
        out[big] = np.sign(x[big]) * (1.0 - _erfc_cf(ax[big]))
    return out[0] if scalar else out


def normal_cdf(x) -> np.ndarray:
    """Standard normal CDF; tails computed through erfc for relative accuracy."""
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    t = np.abs(x) / _SQRT_2
    out = np.empty_like(x)
    small = t < 2.0
    if small.any():
        out[small] = 0.5 * (1.0 + _erf_series(x[small] / _SQRT_2))
    big = ~small
    if big.any():
        half_erfc = 0.5 * _erfc_cf(t[big])
        out[big] = np.where(x[big] > 0.0, 1.0 - half_erfc, half_erfc)
    return out[0] if scalar else out


def symbol_probability(s: int, mu: float, sigma: float) -> float:
    """Interval probability of integer symbol s under N(mu, sigma^2)."""
    if sigma <= 0:
        raise CodecError(f"sigma must be positive, got {sigma!r}")
    hi = normal_cdf((s + 0.5 - mu) / sigma)
    lo = normal_cdf((s - 0.5 - mu) / sigma)
    return float(hi - lo)


def quantize_sigma(sigma: float, table: np.ndarray) -> int:
    """Index of the nearest table entry in log domain; ties go to the lower
    index; out-of-range values clamp to the ends.  Idempotent on table values.
    """
    return int(quantize_sigma_array(np.asarray([sigma]), table)[0])


def quantize_sigma_array(sigma: np.ndarray, table: np.ndarray) -> np.ndarray:
    table = np.asarray(table, dtype=np.float64)
    if table.ndim != 1 or len(table) < 2 or np.any(np.diff(table) <= 0):
        raise ConfigError("scale table must be 1-D, ascending, length >= 2")
    logs = np.log(table)
    mids = 0.5 * (logs[:-1] + logs[1:])
    s = np.clip(np.asarray(sigma, dtype=np.float64), table[0], table[-1])
    return np.searchsorted(mids, np.log(s), side="left").astype(np.int32)


def folded_pmf(mu_offsets: np.ndarray, sigmas: np.ndarray, smin: int, smax: int) -> np.ndarray:
    """Row-per-symbol-position folded PMFs over [smin, smax].

    Interior cell j is the interval probability of symbol smin+j; the two
    edge cells absorb their tails, so each row sums to 1.
    """
    mu_offsets = np.asarray(mu_offsets, dtype=np.float64).reshape(-1)
    sigmas = np.asarray(sigmas, dtype=np.float64).reshape(-1)
    edges = np.arange(smin, smax, dtype=np.float64) + 0.5  # interior edges
    z = (edges[None, :] - mu_offsets[:, None]) / sigmas[:, None]
    cdf = normal_cdf(z.reshape(-1)).reshape(z.shape)
    return np.diff(cdf, axis=1, prepend=0.0, append=1.0)


@dataclass(frozen=True)
class FrequencyTable:
    """Integer PMF for the range coder: freqs >= 1 summing to 2**precision."""

    smin: int
    smax: int
    precision: int
    freqs: tuple
    cum: tuple  # len(freqs)+1 cumulative counts, cum[-1] == total

    @property
    def total(self) -> int:
        return 1 << self.precision

    def __len__(self) -> int:
        return len(self.freqs)

    def slot(self, symbol: int) -> tuple[int, int]:
        """(cumulative, frequency) of a symbol; raises if out of range."""
        idx = symbol - self.smin
        if idx < 0 or idx >= len(self.freqs):
            raise CodingRangeError(
                f"symbol {symbol} outside table range [{self.smin}, {self.smax}]"
            )
        return self.cum[idx], self.freqs[idx]


def _apportion(pmf: np.ndarray, precision: int) -> np.ndarray:
    """Largest-remainder apportionment to integers summing to 2**precision.

    Every symbol is granted one count up front; the remaining mass is
    distributed by floor + largest remainder, ties broken toward the smaller
    symbol (stable sort order).  Fully deterministic.
    """
    n_rows, n_sym = pmf.shape
    total = 1 << precision
    if n_sym > total:
        raise ConfigError(
            f"precision {precision} cannot grant {n_sym} symbols a count >= 1"
        )
    q = pmf * float(total - n_sym)
    base = np.floor(q)
    rem = q - base
    deficit = (total - n_sym) - base.sum(axis=1).astype(np.int64)
    order = np.argsort(-rem, axis=1, kind="stable")
    ranks = np.argsort(order, axis=1, kind="stable")
    bonus = ranks < deficit[:, None]
    return base.astype(np.int64) + 1 + bonus


def _frequency_rows(
    off_int: np.ndarray,
    sig_idx: np.ndarray,
    smin: int,
    smax: int,
    precision: int,
    scale_table: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    offs = np.asarray(off_int, dtype=np.float64) / MU_OFFSET_GRID
    sigs = np.asarray(scale_table, dtype=np.float64)[np.asarray(sig_idx)]
    pmf = folded_pmf(offs, sigs, smin, smax)
    return _apportion(pmf, precision), pmf


def build_frequency_table(
    mu_offset: float,
    sigma_index: int,
    symbol_range: tuple[int, int],
    precision: int = DEFAULT_PRECISION,
    scale_table: np.ndarray | None = None,
) -> FrequencyTable:
    """Build one table from quantized (mu offset, sigma index).

    ``mu_offset`` must already lie on the 1/4096 grid inside [-0.5, 0.5);
    rebuilding from identical inputs is bit-identical.
    """
    smin, smax = symbol_range
    if smax - smin + 1 < 2:
        raise ConfigError("symbol range must cover at least 2 symbols")
    if not 8 <= precision <= 16:
        raise ConfigError("precision must be in [8, 16]")
    if not -0.5 <= mu_offset < 0.5:
        raise ConfigError(f"mu_offset {mu_offset!r} outside [-0.5, 0.5)")
    if scale_table is None:
        scale_table = scale_table_by_id(DEFAULT_SCALE_TABLE_ID)
    if not 0 <= sigma_index < len(scale_table):
        raise ConfigError(f"sigma index {sigma_index} outside scale table")
    off_int = int(round(mu_offset * MU_OFFSET_GRID))
    freqs, _ = _frequency_rows(
        np.array([off_int]), np.array([sigma_index]), smin, smax, precision, scale_table
    )
    row = freqs[0]
    cum = np.concatenate([[0], np.cumsum(row)])
    return FrequencyTable(
        smin=smin,
        smax=smax,
        precision=precision,
        freqs=tuple(int(f) for f in row),
        cum=tuple(int(c) for c in cum),
    )


def split_mu(mu: np.ndarray, symbol_bound: int) -> tuple[np.ndarray, np.ndarray]:
    """Coding-side mu transform: clamp, split into integer + grid offset.

    Returns (mu_round, off_int): mu is clamped to [-bound, bound], rounded
    with floor(mu + 0.5) so the raw offset lies in [-0.5, 0.5), and the offset
    is put on the 1/4096 grid (half away from zero); an offset quantizing to
    exactly +0.5 recenters to -0.5 with mu_round + 1.
    """
    mu = np.clip(np.asarray(mu, dtype=np.float64), -symbol_bound, symbol_bound)
    rnd = np.floor(mu + 0.5)
    off = mu - rnd
    scaled = off * MU_OFFSET_GRID
    off_int = np.trunc(scaled + np.copysign(0.5, scaled)).astype(np.int64)
    wrap = off_int == MU_OFFSET_GRID // 2
    rnd = rnd + wrap
    off_int = np.where(wrap, -(MU_OFFSET_GRID // 2), off_int)
    return rnd.astype(np.int64), off_int


class TablePool:
    """Session cache of frequency tables keyed by (offset index, sigma index).

    One pool per codec session; tables and PMF rows are immutable once built,
    so sharing within a session is safe.
    """

    def __init__(
        self,
        smin: int,
        smax: int,
        precision: int = DEFAULT_PRECISION,
        scale_table: np.ndarray | None = None,
    ):
        if smax - smin + 1 < 2:
            raise ConfigError("symbol range must cover at least 2 symbols")
        if not 8 <= precision <= 16:
            raise ConfigError("precision must be in [8, 16]")
        self.smin = smin
        self.smax = smax
        self.precision = precision
        self.scale_table = (
            scale_table_by_id(DEFAULT_SCALE_TABLE_ID)
            if scale_table is None
            else np.asarray(scale_table, dtype=np.float64)
        )
        self._cache: dict[tuple[int, int], tuple[FrequencyTable, np.ndarray]] = {}

    def _fill(self, off_int: np.ndarray, sig_idx: np.ndarray) -> None:
        keys = [(int(o), int(s)) for o, s in zip(off_int, sig_idx)]
        missing = sorted({k for k in keys if k not in self._cache})
        if not missing:
            return
        offs = np.array([k[0] for k in missing], dtype=np.int64)
        sigs = np.array([k[1] for k in missing], dtype=np.int64)
        freq_rows, pmf_rows = _frequency_rows(
            offs, sigs, self.smin, self.smax, self.precision, self.scale_table
        )
        for key, frow, prow in zip(missing, freq_rows, pmf_rows):
            cum = np.concatenate([[0], np.cumsum(frow)])
            table = FrequencyTable(
                smin=self.smin,
                smax=self.smax,
                precision=self.precision,
                freqs=tuple(int(f) for f in frow),
                cum=tuple(int(c) for c in cum),
            )
            self._cache[key] = (table, prow)

    def tables(self, off_int: np.ndarray, sig_idx: np.ndarray) -> list[FrequencyTable]:
        self._fill(off_int, sig_idx)
        return [
            self._cache[(int(o), int(s))][0] for o, s in zip(off_int, sig_idx)
        ]

    def estimate_bits(
        self, residuals: np.ndarray, off_int: np.ndarray, sig_idx: np.ndarray
    ) -> float:
        """Sum of -log2 p over residual symbols, using the same folded PMFs as
        table construction, floored at 2**-precision (the >= 1 count those
        tables guarantee)."""
        residuals = np.asarray(residuals, dtype=np.int64)
        if residuals.size == 0:
            return 0.0
        if residuals.min() < self.smin or residuals.max() > self.smax:
            raise CodingRangeError("residual symbol outside the coding range")
        self._fill(off_int, sig_idx)
        floor = 2.0 ** (-self.precision)
        bits = 0.0
        for r, o, s in zip(residuals, off_int, sig_idx):
            p = self._cache[(int(o), int(s))][1][int(r) - self.smin]
            bits += -math.log2(max(p, floor))
        return bits


def rate_estimate(
    symbols: np.ndarray,
    mu: np.ndarray,
    sigma: np.ndarray,
    symbol_bound: int,
    precision: int = DEFAULT_PRECISION,
    scale_table: np.ndarray | None = None,
) -> float:
    """Estimated bits to code integer ``symbols`` under per-symbol (mu, sigma).

    Follows the coding transform exactly: mu is clamped and split, sigma is
    clamped and quantized to the scale table, and probabilities are the folded
    interval PMFs floored at 2**-precision.
    """
    symbols = np.asarray(symbols, dtype=np.int64).reshape(-1)
    mu = np.asarray(mu, dtype=np.float64).reshape(-1)
    sigma = np.asarray(sigma, dtype=np.float64).reshape(-1)
    if not (symbols.shape == mu.shape == sigma.shape):
        raise ConfigError("rate_estimate: symbols, mu, sigma shapes differ")
    pool = TablePool(
        -2 * symbol_bound, 2 * symbol_bound, precision, scale_table
    )
    mu_round, off_int = split_mu(mu, symbol_bound)
    sig_idx = quantize_sigma_array(sigma, pool.scale_table)
    return pool.estimate_bits(symbols - mu_round, off_int, sig_idx)
