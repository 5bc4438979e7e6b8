"""Chain summaries: autocorrelation, effective sample size, moments.

Everything here is a pure function over finished draws. Autocovariances
use the biased (full-n denominator) normalization, which keeps the
autocorrelation sequence well behaved at large lags; the effective
sample size truncates its sum at the first non-positive adjacent-lag
pair, after which estimates are dominated by noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DegenerateSeriesError(ValueError):
    """A constant series has no autocorrelation structure to estimate."""

    def __init__(self, name: str | None = None):
        self.name = name
        where = f"column {name!r}" if name is not None else "series"
        super().__init__(f"{where} is constant; autocorrelation is undefined")


def _validated(xs, max_lag: int, name: str | None):
    arr = np.asarray(xs, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D series, got shape {arr.shape}")
    if max_lag < 0:
        raise ValueError(f"max_lag must be nonnegative, got {max_lag}")
    if len(arr) < max_lag + 2:
        raise ValueError(f"series of length {len(arr)} is too short for max_lag {max_lag}")
    if np.all(arr == arr[0]):
        raise DegenerateSeriesError(name)
    return arr


def autocorrelation(xs, max_lag: int, name: str | None = None) -> np.ndarray:
    """Sample autocorrelations for lags 0..max_lag (lag 0 is always 1)."""
    arr = _validated(xs, max_lag, name)
    n = len(arr)
    d = arr - arr.mean()
    if float(np.dot(d, d)) == 0.0:
        # distinct values whose deviations all round to zero are
        # indistinguishable from a constant series
        raise DegenerateSeriesError(name)
    # Linear (non-circular) autocovariance via FFT with zero padding.
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(d, size)
    acov = np.fft.irfft(f * np.conj(f), size)[: max_lag + 1]
    return acov / acov[0]


def effective_sample_size(xs, name: str | None = None) -> float:
    """n over one plus twice the truncated autocorrelation sum."""
    arr = np.asarray(xs, dtype=np.float64)
    n = len(arr)
    rho = autocorrelation(arr, n - 2, name)
    total = 0.0
    k = 1
    while k + 1 <= n - 2:
        pair = rho[k] + rho[k + 1]
        if not pair > 0.0:  # also stops on a NaN from a wild series
            break
        total += pair
        k += 2
    ess = n / (1.0 + 2.0 * total)
    return float(min(ess, float(n)))


@dataclass(frozen=True)
class ParamSummary:
    name: str
    mean: float
    sd: float
    q2_5: float
    q25: float
    q50: float
    q75: float
    q97_5: float
    ess: float
    acf: tuple[float, ...]

    @property
    def quantiles(self) -> tuple[float, float, float, float, float]:
        return (self.q2_5, self.q25, self.q50, self.q75, self.q97_5)


@dataclass(frozen=True)
class ChainSummary:
    params: list[ParamSummary]
    sample_count: int


def summarize(draws, names: list[str] | None = None, max_lag: int = 20) -> ChainSummary:
    """Per-parameter statistics for a (draws, dim) matrix.

    Accepts a Chain-like object carrying ``draws`` and ``names`` or a
    bare matrix plus explicit names. Quantiles interpolate linearly
    between order statistics.
    """
    if hasattr(draws, "draws"):
        if names is None:
            names = list(draws.names)
        draws = draws.draws
    matrix = np.asarray(draws, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    n, dim = matrix.shape
    if n == 0:
        raise ValueError("no draws to summarize")
    if names is None or len(names) != dim:
        got = "none" if names is None else len(names)
        raise ValueError(f"need exactly {dim} parameter names, got {got}")

    out = []
    for j, name in enumerate(names):
        col = matrix[:, j]
        qs = np.quantile(col, [0.025, 0.25, 0.5, 0.75, 0.975])
        if n == 1:  # a single draw carries no correlation information
            ess, acf = 1.0, (1.0,)
        else:
            lag = min(max_lag, n - 2)
            acf = tuple(float(r) for r in autocorrelation(col, lag, name))
            ess = effective_sample_size(col, name)
        out.append(
            ParamSummary(
                name=name,
                mean=float(col.mean()),
                sd=float(col.std(ddof=1)) if n > 1 else 0.0,
                q2_5=float(qs[0]),
                q25=float(qs[1]),
                q50=float(qs[2]),
                q75=float(qs[3]),
                q97_5=float(qs[4]),
                ess=ess,
                acf=acf,
            )
        )
    return ChainSummary(params=out, sample_count=n)


def histogram(xs) -> tuple[np.ndarray, np.ndarray]:
    """Counts and bin edges with Freedman-Diaconis bin widths."""
    arr = np.asarray(xs, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("no values to bin")
    counts, edges = np.histogram(arr, bins="fd")
    return counts, edges
