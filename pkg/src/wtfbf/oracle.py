"""Independent ground truth for the generator and the continuous model.

* frequency-domain quadrature of covariances and rectangular-increment
  variances of the continuous field,
* the increment-variance constant ``c1``,
* the exact second-order law of the discrete generator,
* the closed-form covariance of the fractional Brownian sheet (``alpha = 0``),
* exact Gaussian sampling from a quadrature covariance on small point sets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate

from ._quadrature import (CosineSeries, QuadratureError, QuadratureResult,
                          QuadratureSpec, refine)
from .params import FieldParams, GridSpec
from .spectral import amplitude

__all__ = [
    "QuadratureSpec", "QuadratureResult", "QuadratureError", "CovarianceMatrix",
    "covariance_quadrature", "variance_quadrature", "increment_variance_quadrature",
    "c1_constant", "fbm_constant", "discrete_variance", "discrete_variance_grid",
    "discrete_increment_variance", "discrete_population_moments", "fbs_covariance",
    "assemble_covariance", "exact_sample",
]

JITTER_FACTOR = 1e-8


def _exponents(params: FieldParams):
    return 2.0 * params.h_minus + 1.0, 2.0 * params.h_plus + 1.0


def _cross_series(x: float, y: float, beta: float) -> CosineSeries:
    # Re[(e^{i x s} - 1)(e^{-i y s} - 1)]
    return CosineSeries.build([(1.0, 0.0), (-1.0, x), (-1.0, y), (1.0, x - y)], beta)


def _check_imaginary_part(x, y, params: FieldParams, n=7):
    """Four-quadrant sum of Im(K_x conj K_y) must vanish (odd integrand)."""
    grid = np.geomspace(0.05, 40.0, n)
    xi1, xi2 = np.meshgrid(grid, grid, indexing="ij")
    g2 = amplitude(params, xi1, xi2) ** 2
    total_im = np.zeros_like(xi1)
    scale = np.zeros_like(xi1)
    for s1 in (1.0, -1.0):
        for s2 in (1.0, -1.0):
            e1, e2 = s1 * xi1, s2 * xi2
            kx = (np.exp(1j * x[0] * e1) - 1) * (np.exp(1j * x[1] * e2) - 1)
            ky = (np.exp(1j * y[0] * e1) - 1) * (np.exp(1j * y[1] * e2) - 1)
            prod = kx * np.conj(ky) * g2
            total_im += prod.imag
            scale += np.abs(prod)
    bad = np.abs(total_im) > 1e-12 * np.maximum(scale, 1e-300)
    if np.any(bad):
        raise QuadratureError("imaginary part of the covariance integrand does not cancel")


def covariance_quadrature(x: Sequence[float], y: Sequence[float], params: FieldParams,
                          q: QuadratureSpec | None = None) -> QuadratureResult:
    """``E[X_x X_y]`` of the continuous field by frequency-domain quadrature.

    The real part of ``K_x conj(K_y)`` is integrated over the four quadrants
    at once; the imaginary part cancels between opposite quadrants, which is
    checked on a probe grid.
    """
    q = q or QuadratureSpec()
    x = (float(x[0]), float(x[1]))
    y = (float(y[0]), float(y[1]))
    beta1, beta2 = params.betas
    f1 = _cross_series(x[0], y[0], beta1)
    f2 = _cross_series(x[1], y[1], beta2)
    if f1.is_zero or f2.is_zero:
        return QuadratureResult(0.0, 0.0, [])
    _check_imaginary_part(x, y, params)
    a, b = _exponents(params)
    return refine(f1, f2, a, b, q)


def variance_quadrature(x: Sequence[float], params: FieldParams,
                        q: QuadratureSpec | None = None) -> QuadratureResult:
    return covariance_quadrature(x, x, params, q)


def increment_variance_quadrature(h1: float, h2: float, params: FieldParams,
                                  q: QuadratureSpec | None = None) -> QuadratureResult:
    """``E|Delta X|^2`` for a rectangle with sides ``(h1, h2)``; origin-free."""
    q = q or QuadratureSpec()
    beta1, beta2 = params.betas
    f1 = CosineSeries.build([(2.0, 0.0), (-2.0, h1)], beta1)
    f2 = CosineSeries.build([(2.0, 0.0), (-2.0, h2)], beta2)
    if f1.is_zero or f2.is_zero:
        return QuadratureResult(0.0, 0.0, [])
    a, b = _exponents(params)
    return refine(f1, f2, a, b, q)


def fbm_constant(k: float, epsrel: float = 1e-11) -> tuple[float, float]:
    """``int_R |e^{i t} - 1|^2 |t|^{-(2k+1)} dt`` for ``0 < k < 1`` with an error estimate.

    Adaptive quadrature on [0, 1] plus a Fourier-weighted rule on [1, inf).
    """
    if not 0.0 < k < 1.0:
        raise QuadratureError(f"integral diverges for exponent k={k!r} outside (0, 1)")
    p = 2.0 * k + 1.0
    head, e_head = integrate.quad(lambda t: 4.0 * math.sin(0.5 * t) ** 2 * t ** -p, 0.0, 1.0,
                                  epsabs=0.0, epsrel=epsrel, limit=200)
    osc, e_osc = integrate.quad(lambda t: t ** -p, 1.0, np.inf, weight="cos", wvar=1.0,
                                limlst=200)
    value = 2.0 * (head + 2.0 / (p - 1.0) - 2.0 * osc)
    return value, 2.0 * (e_head + 2.0 * e_osc)


def c1_constant(params: FieldParams, q: QuadratureSpec | None = None) -> QuadratureResult:
    """Constant of the rectangular-increment variance bound.

    ``int |e^{i e1}-1|^2 |e^{i e2}-1|^2 / (|e1|^{2H-+1} |e2|^{2H++1}) de``,
    which factorizes into two one-dimensional integrals.  Finite when
    ``H- > 0`` and ``H+ < 1``.
    """
    if params.is_anisotropic:
        raise ValueError("c1 is defined for the isotropic model only")
    q = q or QuadratureSpec()
    try:
        lo, e_lo = fbm_constant(params.h_minus)
        hi, e_hi = fbm_constant(params.h_plus)
    except QuadratureError as exc:
        raise QuadratureError(
            f"c1 is infinite for alpha={params.alpha}, hurst={params.hurst}: {exc}") from None
    trace = []
    for level, epsrel in enumerate((1e-8, 1e-11)):
        a, _ = fbm_constant(params.h_minus, epsrel)
        b, _ = fbm_constant(params.h_plus, epsrel)
        trace.append({"level": level, "epsrel": epsrel, "value": a * b,
                      "factor_h_minus": a, "factor_h_plus": b})
    value = lo * hi
    gap = abs(trace[0]["value"] - trace[1]["value"])
    if gap > q.target_rel_tol * value:
        raise QuadratureError(f"c1 did not converge: estimate {value!r}, gap {gap!r}",
                              estimate=value, gap=gap, trace=trace)
    error = gap + lo * e_hi + hi * e_lo
    return QuadratureResult(value, error, trace)


def fbs_covariance(x: Sequence[float], y: Sequence[float], hurst: float,
                   q: QuadratureSpec | None = None) -> QuadratureResult:
    """Covariance of the fractional Brownian sheet with equal indices ``hurst``."""
    c, err = fbm_constant(hurst)
    value = 1.0
    for xm, ym in zip(x, y):
        value *= 0.5 * c * (abs(xm) ** (2 * hurst) + abs(ym) ** (2 * hurst)
                            - abs(xm - ym) ** (2 * hurst))
    rel = 2.0 * err / c
    return QuadratureResult(value, abs(value) * rel, [{"c_hurst": c, "c_error": err}])


# --- discrete generator -------------------------------------------------------

def _noise_index(m: int) -> np.ndarray:
    return np.arange(-m + 1, m + 1)


def _axis_factors(m: int, positions: np.ndarray, lag: int = 0) -> np.ndarray:
    """Rows ``e^{-i pi n p / M} (e^{-i pi n L / M} - 1)`` (``lag=0`` gives the field itself)."""
    n = _noise_index(m)[None, :]
    p = np.asarray(positions, dtype=float)[:, None]
    if lag == 0:
        return np.exp(-1j * np.pi * n * p / m) - 1.0
    return np.exp(-1j * np.pi * n * p / m) * (np.exp(-1j * np.pi * n * lag / m) - 1.0)


def _squared_amplitudes(params: FieldParams, m: int) -> np.ndarray:
    freq = np.pi * _noise_index(m)
    return amplitude(params, freq[:, None], freq[None, :]) ** 2


def discrete_variance(params: FieldParams, grid: GridSpec, point_index) -> float:
    """Exact variance of the synthesized field at grid index ``(k1, k2)``.

    ``pi^2 sum g(pi n)^2 |e^{-i pi n1 k1/M} - 1|^2 |e^{-i pi n2 k2/M} - 1|^2``
    under unit-variance real and imaginary noise parts.
    """
    m = grid.resolution
    k1, k2 = point_index
    u1 = np.abs(_axis_factors(m, [k1])[0]) ** 2
    u2 = np.abs(_axis_factors(m, [k2])[0]) ** 2
    return float(np.pi ** 2 * u1 @ _squared_amplitudes(params, m) @ u2)


def discrete_variance_grid(params: FieldParams, grid: GridSpec) -> np.ndarray:
    """:func:`discrete_variance` at every grid point, shape ``(M+1, M+1)``."""
    m = grid.resolution
    u = np.abs(_axis_factors(m, np.arange(m + 1))) ** 2
    return np.pi ** 2 * u @ _squared_amplitudes(params, m) @ u.T


def discrete_increment_variance(params: FieldParams, grid: GridSpec, lags) -> float:
    """Exact variance of a rectangular increment with grid lags ``(L1, L2)``; origin-free."""
    m = grid.resolution
    l1, l2 = lags
    u1 = np.abs(_axis_factors(m, [0], l1)[0]) ** 2
    u2 = np.abs(_axis_factors(m, [0], l2)[0]) ** 2
    return float(np.pi ** 2 * u1 @ _squared_amplitudes(params, m) @ u2)


def discrete_population_moments(params: FieldParams, grid: GridSpec, positions1, positions2,
                                lags=(0, 0), scale: float = 1.0) -> tuple[float, float]:
    """Second-order summary of a rectangular block of generator outputs.

    The block holds ``scale * Z(p1, p2)`` for ``p1 in positions1``,
    ``p2 in positions2`` where ``Z`` is the field (``lags == (0, 0)``) or its
    rectangular increment with the given grid lags.  Returns
    ``(mean variance over the block, variance of the block average)``.
    """
    m = grid.resolution
    g2 = _squared_amplitudes(params, m)
    a1 = _axis_factors(m, positions1, lags[0])
    a2 = _axis_factors(m, positions2, lags[1])
    s2 = np.pi ** 2 * scale ** 2
    mean_var = s2 * np.mean(np.abs(a1) ** 2, axis=0) @ g2 @ np.mean(np.abs(a2) ** 2, axis=0)
    var_mean = s2 * np.abs(a1.mean(axis=0)) ** 2 @ g2 @ np.abs(a2.mean(axis=0)) ** 2
    return float(mean_var), float(var_mean)


# --- exact sampling -----------------------------------------------------------

@dataclass
class CovarianceMatrix:
    """Covariance of the continuous field on a finite point set."""

    points: np.ndarray
    entries: np.ndarray
    max_error: float = 0.0
    jitter: float = 0.0
    _factor: np.ndarray | None = field(default=None, repr=False)

    def factor(self) -> np.ndarray:
        """Symmetric square root ``L`` with ``L L^T = entries + jitter I``."""
        if self._factor is None:
            c = self.entries
            n = c.shape[0]
            lam, vec = np.linalg.eigh(c)
            lam_max = max(float(lam[-1]), 0.0)
            jitter = 0.0
            if lam[0] < -JITTER_FACTOR * lam_max:
                budget = JITTER_FACTOR * float(np.trace(c)) / n
                if lam[0] + budget < -JITTER_FACTOR * lam_max:
                    raise np.linalg.LinAlgError(
                        f"covariance is not positive semidefinite within the jitter budget "
                        f"{budget:.3e}: most negative eigenvalue {lam[0]:.6e}")
                jitter = budget
            self.jitter = jitter
            self._factor = vec * np.sqrt(np.clip(lam + jitter, 0.0, None))
        return self._factor

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries)[0])


def assemble_covariance(points, params: FieldParams,
                        q: QuadratureSpec | None = None) -> CovarianceMatrix:
    """Covariance matrix of the field at ``points`` from pairwise quadrature."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n > 400:
        raise ValueError(f"at most 400 points are supported, got {n}")
    c = np.zeros((n, n))
    max_err = 0.0
    for i in range(n):
        for j in range(i, n):
            r = covariance_quadrature(pts[i], pts[j], params, q)
            c[i, j] = c[j, i] = r.value
            max_err = max(max_err, r.error)
    return CovarianceMatrix(pts, c, max_err)


def exact_sample(points, params: FieldParams, q: QuadratureSpec | None = None,
                 seed: int = 0) -> np.ndarray:
    """One exact Gaussian draw of the continuous field at ``points``.

    ``points`` may be a precomputed :class:`CovarianceMatrix`.  The draw is
    ``L z`` with ``z`` from Philox4x64 keyed by ``seed``.
    """
    cov = points if isinstance(points, CovarianceMatrix) else assemble_covariance(points, params, q)
    z = np.random.Generator(np.random.Philox(key=int(seed) & ((1 << 64) - 1))).standard_normal(
        cov.entries.shape[0])
    return cov.factor() @ z
