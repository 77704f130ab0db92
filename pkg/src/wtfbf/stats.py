"""Estimators and property checks over batches of synthesized fields."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .params import FieldParams, GridSpec
from .synthesis import FieldSample

BOOTSTRAP_RESAMPLES = 200
BOOTSTRAP_SEED = 20240917


def _values(x) -> np.ndarray:
    return x.values if isinstance(x, (FieldSample, IncrementField)) else np.asarray(x, dtype=float)


@dataclass(frozen=True)
class IncrementField:
    """Rectangular increments at fixed grid lags, indexed by their lower-left corner."""

    values: np.ndarray = field(repr=False)
    lags: tuple


def rectangular_increment(sample, lag1: int, lag2: int) -> IncrementField:
    """Four-corner increments ``X(k+L) - X(k1, k2+L2) - X(k1+L1, k2) + X(k)``."""
    v = _values(sample)
    n1, n2 = v.shape
    if not (1 <= lag1 < n1 and 1 <= lag2 < n2):
        raise ValueError(f"lags {(lag1, lag2)} must lie in [1, M] for a field of shape {v.shape}")
    r1, r2 = n1 - lag1, n2 - lag2
    d = v[lag1:, lag2:] - v[:r1, lag2:] - v[lag1:, :r2] + v[:r1, :r2]
    return IncrementField(d, (int(lag1), int(lag2)))


def rescaled_field(sample, a: int, params: FieldParams | None = None) -> np.ndarray:
    """Subsampled field at arguments ``a*k/M`` divided by ``a**(2H)``.

    With anisotropy the strides are ``a**beta1`` and ``a**beta2``; they must
    be integers (no interpolation is done).
    """
    params = params or getattr(sample, "params", None)
    if params is None:
        raise ValueError("params are required to rescale a bare array")
    v = _values(sample)
    m = v.shape[0] - 1
    if isinstance(a, bool) or int(a) != a or a < 1 or (int(a) & (int(a) - 1)):
        raise ValueError(f"rescale factor must be a positive power of two, got {a!r}")
    a = int(a)
    strides = []
    for beta in params.betas:
        s = a ** beta
        if abs(s - round(s)) > 1e-9:
            raise ValueError(f"stride {a}**{beta} = {s:.6g} is not an integer")
        s = int(round(s))
        if m % s:
            raise ValueError(f"stride {s} does not divide the grid resolution {m}")
        strides.append(s)
    return v[:: strides[0], :: strides[1]] * a ** (-2.0 * params.hurst)


@dataclass
class MomentReport:
    mean: float
    variance: float
    skewness: float
    standard_error_mean: float
    standard_error_variance: float
    standard_error_skewness: float
    count: int
    n_values: int

    def to_dict(self) -> dict:
        return asdict(self)


def _central_sums(arrays, center):
    sums = np.empty((len(arrays), 4))
    for i, arr in enumerate(arrays):
        d = arr.ravel() - center
        d2 = d * d
        sums[i] = (d.size, d.sum(), d2.sum(), (d2 * d).sum())
    return sums


def _pooled(totals):
    n, s1, s2, s3 = totals.T if totals.ndim > 1 else totals
    m1 = s1 / n
    m2 = s2 / n - m1 ** 2
    m3 = s3 / n - 3 * m1 * s2 / n + 2 * m1 ** 3
    return m1, m2, m3


def moments(batch: Iterable, bootstrap: int = BOOTSTRAP_RESAMPLES,
            seed: int = BOOTSTRAP_SEED) -> MomentReport:
    """Pooled mean, variance and skewness over all entries of all arrays.

    Standard errors treat arrays (not entries) as independent replicates;
    the skewness error comes from a bootstrap over arrays.  Skewness of a
    constant batch is ``nan``.
    """
    arrays = [_values(x).astype(float, copy=False) for x in batch]
    if not arrays:
        raise ValueError("empty batch")
    n_values = sum(a.size for a in arrays)
    center = math.fsum(math.fsum(a.ravel()) for a in arrays) / n_values
    sums = _central_sums(arrays, center)
    totals = np.array([math.fsum(col) for col in sums.T])
    m1, m2, m3 = _pooled(totals)
    mean = center + m1
    variance = max(m2, 0.0)
    skew = m3 / variance ** 1.5 if variance > 0 else math.nan

    k = len(arrays)
    if k >= 2:
        per_mean = sums[:, 1] / sums[:, 0]
        se_mean = float(np.std(per_mean, ddof=1) / math.sqrt(k))
        per_var = sums[:, 2] / sums[:, 0]
        se_var = float(np.std(per_var, ddof=1) / math.sqrt(k))
    else:
        se_mean = se_var = math.nan
    se_skew = math.nan
    if k >= 3 and variance > 0 and bootstrap > 0:
        rng = np.random.Generator(np.random.Philox(key=seed))
        counts = rng.multinomial(k, np.full(k, 1.0 / k), size=bootstrap).astype(float)
        b1, b2, b3 = _pooled(counts @ sums)
        with np.errstate(invalid="ignore", divide="ignore"):
            bs = b3 / b2 ** 1.5
        se_skew = float(np.nanstd(bs, ddof=1))
    return MomentReport(float(mean), float(variance), float(skew), se_mean, se_var, se_skew,
                        k, n_values)


def _variance_with_se(x: np.ndarray):
    n = x.size
    c = x - x.mean()
    var = float(np.sum(c * c) / (n - 1))
    m4 = float(np.mean(c ** 4))
    se = math.sqrt(max(m4 - (var * (n - 1) / n) ** 2, 0.0) / n)
    return var, se


def _increments_at(arrays, origin, lags):
    (o1, o2), (l1, l2) = origin, lags
    return np.array([a[o1 + l1, o2 + l2] - a[o1, o2 + l2] - a[o1 + l1, o2] + a[o1, o2]
                     for a in arrays])


@dataclass
class StationarityReport:
    rows: list  # dicts: lag, origin, variance, se
    flags: list  # (lag, origin_i, origin_j, z)
    threshold: float

    @property
    def ok(self) -> bool:
        return not self.flags


def stationarity_check(batch, lags: Sequence, origins: Sequence, threshold: float = 4.0,
                       labels: Sequence | None = None) -> StationarityReport:
    """Compare per-origin variances of rectangular increments across a batch.

    ``labels`` (optional, one origin index per sample) assigns each sample to
    a single origin instead of evaluating every origin on every sample; it is
    used for shuffled-label controls.
    """
    arrays = [_values(x) for x in batch]
    if len(arrays) < 30:
        raise ValueError(f"stationarity_check needs at least 30 samples, got {len(arrays)}")
    rows, flags = [], []
    for lag in lags:
        lag = tuple(int(v) for v in lag)
        per = []
        for j, origin in enumerate(origins):
            origin = tuple(int(v) for v in origin)
            if labels is None:
                vals = _increments_at(arrays, origin, lag)
            else:
                chosen = [a for a, lab in zip(arrays, labels) if lab == j]
                vals = _increments_at(chosen, origin, lag)
            var, se = _variance_with_se(vals)
            per.append((origin, var, se))
            rows.append({"lag": lag, "origin": origin, "variance": var, "se": se,
                         "n": int(vals.size)})
        for i in range(len(per)):
            for j in range(i + 1, len(per)):
                (oi, vi, si), (oj, vj, sj) = per[i], per[j]
                z = abs(vi - vj) / math.hypot(si, sj)
                if z > threshold:
                    flags.append({"lag": lag, "origins": (oi, oj), "z": z})
    return StationarityReport(rows, flags, threshold)


def increment_bound(params: FieldParams, h1: float, h2: float, c1: float) -> float:
    """``c1 * (max(|h|)**(1-alpha) * min(|h|)**(1+alpha))**(2H)``."""
    hi, lo = max(abs(h1), abs(h2)), min(abs(h1), abs(h2))
    if lo == 0.0:
        return 0.0
    return c1 * (hi ** (1 - params.alpha) * lo ** (1 + params.alpha)) ** (2 * params.hurst)


@dataclass
class BoundReport:
    rows: list  # dicts: lag, h, empirical, se, bound, ratio, ok

    @property
    def ok(self) -> bool:
        return all(r["ok"] for r in self.rows)


def bound_check(batch, params: FieldParams, lags: Sequence, c1: float,
                slack: float = 3.0) -> BoundReport:
    """Empirical ``E|Delta X|^2`` against the variance bound for each lag.

    The empirical value pools all origins of every sample; its standard error
    treats samples as replicates.  A lag passes when the empirical value does
    not exceed the bound by more than ``slack`` standard errors.
    """
    arrays = [_values(x) for x in batch]
    m = arrays[0].shape[0] - 1
    rows = []
    for lag in lags:
        l1, l2 = (int(v) for v in lag)
        h1, h2 = l1 / m, l2 / m
        bound = increment_bound(params, h1, h2, c1)
        if l1 == 0 or l2 == 0:
            rows.append({"lag": (l1, l2), "h": (h1, h2), "empirical": 0.0, "se": 0.0,
                         "bound": bound, "ratio": math.nan, "ok": True})
            continue
        per = np.array([np.mean(rectangular_increment(a, l1, l2).values ** 2) for a in arrays])
        emp = float(per.mean())
        se = float(per.std(ddof=1) / math.sqrt(len(per))) if len(per) > 1 else math.nan
        rows.append({"lag": (l1, l2), "h": (h1, h2), "empirical": emp, "se": se,
                     "bound": bound, "ratio": bound / emp if emp > 0 else math.inf,
                     "ok": emp <= bound + slack * se})
    return BoundReport(rows)


def moment_populations(samples: Sequence[FieldSample], lag=None, rescale: int = 2):
    """The three reported populations: the field, its increments and the rescaled field."""
    m = samples[0].resolution
    lag = lag or (m // 2, m // 2)
    return {
        "X": [s.values for s in samples],
        "dX": [rectangular_increment(s, *lag).values for s in samples],
        "rescaled": [rescaled_field(s, rescale) for s in samples],
    }


def expected_pooled_variance(params: FieldParams, grid: GridSpec, population: str,
                             count: int, lag=None, rescale: int = 2) -> float:
    """Expectation of :func:`moments` ``variance`` for a population of ``count`` samples."""
    from .oracle import discrete_population_moments

    m = grid.resolution
    lag = lag or (m // 2, m // 2)
    if population == "X":
        k = np.arange(m + 1)
        mean_var, var_mean = discrete_population_moments(params, grid, k, k)
    elif population == "dX":
        p1, p2 = np.arange(m - lag[0] + 1), np.arange(m - lag[1] + 1)
        mean_var, var_mean = discrete_population_moments(params, grid, p1, p2, lags=lag)
    elif population == "rescaled":
        if params.is_anisotropic:
            raise ValueError("rescaled population oracle is isotropic only")
        k = np.arange(0, m + 1, rescale)
        mean_var, var_mean = discrete_population_moments(
            params, grid, k, k, scale=rescale ** (-2.0 * params.hurst))
    else:
        raise ValueError(f"unknown population {population!r}")
    return mean_var - var_mean / count
