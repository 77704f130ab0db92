"""Quadrature engine for the harmonizable second-moment integrals.

The integrals have the form

    4 * int_{(0,inf)^2} f1(xi1) f2(xi2) / phi(xi1, xi2)**2 dxi

where each ``f`` is a finite cosine series ``sum_k c_k cos(w_k s)`` vanishing
at ``s = 0``.  After the substitution ``u_m = xi_m**(1/beta_m)`` the squared
density is ``min(u)**a * max(u)**b`` with ``a = 2H- + 1``, ``b = 2H+ + 1``.
On each side of the diagonal the integrand factorizes, so the quadrant
integral equals

    int_0^inf P1(t) t**-b  F2(t) dt  +  int_0^inf P2(t) t**-b F1(t) dt,
    F(t) = int_0^t P(s) s**-a ds,   P(u) = f(u**beta) * beta * u**(beta-1).

Both are evaluated with Gauss-Legendre rules on a common partition made of
dyadic cells, each cut into sub-cells that resolve the local oscillation.
``F`` at the outer nodes comes from a Legendre integration matrix.  Below
``2**octave_min`` the leading small-argument term is integrated exactly;
beyond the oscillation cutoff ``U`` the cosine terms are dropped and the
remaining power-law tail is integrated exactly, with a bound on the dropped
part added to the error estimate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np


TAYLOR_RADIUS = 0.5
TAYLOR_TERMS = 10


class QuadratureError(ArithmeticError):
    """Successive refinements disagree beyond the requested tolerance."""

    def __init__(self, message, estimate=None, gap=None, trace=None):
        super().__init__(message)
        self.estimate = estimate
        self.gap = gap
        self.trace = trace or []


@dataclass(frozen=True)
class QuadratureSpec:
    """Truncation and resolution of the frequency-domain quadrature.

    ``periods`` is the number of oscillation periods of the slowest cosine
    term resolved before switching to the asymptotic tail;
    ``subcells_per_period`` sets how finely each period is cut.
    """

    octave_min: int = -24
    octave_max: int = 24
    nodes_per_cell: int = 16
    target_rel_tol: float = 1e-5
    periods: int = 256
    subcells_per_period: int = 1
    max_cells: int = 1 << 16
    max_refinements: int = 3

    def __post_init__(self):
        if not self.octave_min < self.octave_max:
            raise ValueError("octave_min must be < octave_max")
        if self.nodes_per_cell < 4:
            raise ValueError("nodes_per_cell must be >= 4")
        if not self.target_rel_tol > 0:
            raise ValueError("target_rel_tol must be > 0")
        if self.periods < 1 or self.subcells_per_period < 1:
            raise ValueError("periods and subcells_per_period must be >= 1")
        if self.max_cells < 64:
            raise ValueError("max_cells must be >= 64")
        if self.max_refinements < 1:
            raise ValueError("max_refinements must be >= 1")

    def refined(self) -> "QuadratureSpec":
        return QuadratureSpec(self.octave_min - 4, self.octave_max + 4,
                              self.nodes_per_cell, self.target_rel_tol,
                              4 * self.periods, 2 * self.subcells_per_period,
                              4 * self.max_cells, self.max_refinements)

    def to_dict(self) -> dict:
        return dict(octave_min=self.octave_min, octave_max=self.octave_max,
                    nodes_per_cell=self.nodes_per_cell, target_rel_tol=self.target_rel_tol,
                    periods=self.periods, subcells_per_period=self.subcells_per_period,
                    max_cells=self.max_cells, max_refinements=self.max_refinements)


@dataclass
class QuadratureResult:
    value: float
    error: float
    trace: list = field(default_factory=list)

    def __float__(self):
        return float(self.value)

    def to_dict(self) -> dict:
        return {"value": self.value, "tolerance": self.error, "trace": self.trace}


@dataclass(frozen=True)
class CosineSeries:
    """``f(s) = sum_k coef_k * cos(freq_k * s)``; composed with ``s = u**beta``."""

    terms: tuple  # ((coef, freq), ...), freq >= 0, merged
    beta: float = 1.0

    @classmethod
    def build(cls, pairs: Sequence[tuple], beta: float = 1.0) -> "CosineSeries":
        merged: dict = {}
        for c, w in pairs:
            w = abs(float(w))
            merged[w] = merged.get(w, 0.0) + float(c)
        terms = tuple((c, w) for w, c in sorted(merged.items()) if c != 0.0)
        return cls(terms, float(beta))

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def mean(self) -> float:
        return sum(c for c, w in self.terms if w == 0.0)

    @property
    def small_coef(self) -> float:
        # f(s) ~ small_coef * s**2 near zero (the series vanishes at 0)
        return -0.5 * sum(c * w * w for c, w in self.terms)

    @property
    def oscillating(self):
        return [(c, w) for c, w in self.terms if w > 0.0]

    def _taylor(self, s: np.ndarray) -> np.ndarray:
        # sum_k (-1)^k s^2k / (2k)! * sum_j c_j w_j^2k; the k = 0 moment is zero
        acc = np.zeros_like(s)
        s2 = s * s
        power = np.ones_like(s)
        for k in range(1, TAYLOR_TERMS + 1):
            power = power * s2
            moment = sum(c * w ** (2 * k) for c, w in self.terms)
            acc += (-1) ** k * moment / math.factorial(2 * k) * power
        return acc

    def weighted(self, u: np.ndarray) -> np.ndarray:
        """``P(u) = f(u**beta) * beta * u**(beta - 1)``."""
        s = u if self.beta == 1.0 else u ** self.beta
        acc = np.zeros_like(u)
        for c, w in self.terms:
            acc += c if w == 0.0 else c * np.cos(w * s)
        wmax = max((w for _, w in self.terms), default=0.0)
        small = s * wmax < TAYLOR_RADIUS
        if np.any(small):
            # the cosine sum cancels to O(s^2) near zero; expand instead
            acc[small] = self._taylor(s[small])
        if self.beta != 1.0:
            acc *= self.beta * u ** (self.beta - 1.0)
        return acc


@lru_cache(maxsize=8)
def _legendre_rule(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    # integration matrix: S[i, j] = int_{-1}^{x_i} l_j(s) ds for Lagrange basis l_j
    vander = np.polynomial.legendre.legvander(x, n - 1)
    q = np.empty((n, n))
    for k in range(n):
        coef = np.zeros(n)
        coef[k] = 1.0
        q[:, k] = np.polynomial.legendre.legval(x, np.polynomial.legendre.legint(coef, lbnd=-1))
    s = q @ np.linalg.inv(vander)
    return x, w, s


def _partition(series: Sequence[CosineSeries], spec: QuadratureSpec):
    """Cell edges on ``[2**octave_min, U]`` and the cutoff ``U``.

    ``U`` is where the slowest term has gone through ``periods`` periods,
    lowered if needed so that the partition stays within ``max_cells``.
    """
    lo_edge = 2.0 ** spec.octave_min
    top = 2.0 ** spec.octave_max
    cut = 0.0
    for f in series:
        for _, w in f.oscillating:
            cut = max(cut, (2.0 * math.pi * spec.periods / w) ** (1.0 / f.beta))
    cut = min(max(cut, 2.0 * lo_edge), top)

    edges = [lo_edge]
    j = spec.octave_min
    while edges[-1] < cut:
        a, b = edges[-1], min(2.0 ** (j + 1), cut)
        nu = 0.0  # largest local angular frequency on [a, b]
        for f in series:
            for _, w in f.oscillating:
                e = f.beta - 1.0
                nu = max(nu, w * f.beta * max(a ** e, b ** e))
        nsub = max(1, math.ceil((b - a) * nu / (2.0 * math.pi) * spec.subcells_per_period))
        if len(edges) + nsub > spec.max_cells + 1:
            break
        edges.extend(np.linspace(a, b, nsub + 1)[1:].tolist())
        j += 1
    return np.asarray(edges), edges[-1]


def _power_integral(lo, hi, p):
    """``int_lo^hi t**p dt`` for finite ``hi`` (or ``hi = inf`` with ``p < -1``)."""
    if abs(p + 1.0) < 1e-13:
        return math.log(hi / lo)
    if math.isinf(hi):
        return -lo ** (p + 1.0) / (p + 1.0)
    return (hi ** (p + 1.0) - lo ** (p + 1.0)) / (p + 1.0)


def nested_integral(outer: CosineSeries, inner: CosineSeries, a: float, b: float,
                    spec: QuadratureSpec, edges=None, cut=None):
    """``int_0^inf P_out(t) t**-b F_in(t) dt``; returns ``(value, tail_error_bound)``."""
    if outer.is_zero or inner.is_zero:
        return 0.0, 0.0
    if edges is None:
        edges, cut = _partition([outer, inner], spec)
    x, w, smat = _legendre_rule(spec.nodes_per_cell)
    left = edges[:-1, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    t = left + half * (x + 1.0)

    eps = edges[0]
    bi, bo = inner.beta, outer.beta
    # leading small-argument behaviour: P(u) ~ q * beta * u**(3 beta - 1)
    f_eps = inner.small_coef * bi * eps ** (3 * bi - a) / (3 * bi - a)

    p_in = inner.weighted(t) * t ** (-a)
    cell_tot = half[:, 0] * (p_in @ w)
    start = f_eps + np.concatenate(([0.0], np.cumsum(cell_tot)[:-1]))
    f_in = start[:, None] + half * (p_in @ smat.T)

    integrand = outer.weighted(t) * t ** (-b) * f_in
    body = float(np.sum(half[:, 0] * (integrand @ w)))

    e_head = 3 * bo + 3 * bi - a - b
    head = (outer.small_coef * bo * inner.small_coef * bi
            * eps ** e_head / ((3 * bi - a) * e_head))

    # tail beyond the cutoff with the oscillating terms dropped
    f_cut = f_eps + float(np.sum(cell_tot))
    c_in, c_out = inner.mean, outer.mean
    d = bo - b  # outer weight ~ t**(d - 1)
    e = bi - a  # inner weight ~ s**(e - 1)
    tail = f_cut * _power_integral(cut, math.inf, d - 1.0)
    if c_in != 0.0:
        if abs(e) < 1e-13:
            log_part = cut ** d / (d * d)
        else:
            log_part = (_power_integral(cut, math.inf, d + e - 1.0)
                        - cut ** e * _power_integral(cut, math.inf, d - 1.0)) / e
        tail += c_in * bi * log_part
    tail *= c_out * bo

    # dropped oscillations, first integration-by-parts term with a factor 2 margin
    osc_out = sum(abs(c) / w_ for c, w_ in outer.oscillating)
    osc_in = sum(abs(c) / w_ for c, w_ in inner.oscillating)
    abs_out = sum(abs(c) for c, _ in outer.terms)
    err = 2.0 * osc_out * cut ** (-b) * abs(f_cut)
    err += 2.0 * osc_in * cut ** (-a) * abs_out * bo * _power_integral(cut, math.inf, d - 1.0)

    return head + body + tail, err


def quadrant_integral(f1: CosineSeries, f2: CosineSeries, a: float, b: float,
                      spec: QuadratureSpec):
    """Full-plane integral ``4 * int_{(0,inf)^2} f1 f2 / phi**2``; ``(value, tail_error)``."""
    edges, cut = _partition([f1, f2], spec)
    v1, e1 = nested_integral(f1, f2, a, b, spec, edges, cut)
    v2, e2 = nested_integral(f2, f1, a, b, spec, edges, cut)
    return 4.0 * (v1 + v2), 4.0 * (e1 + e2), len(edges) - 1


def refine(f1: CosineSeries, f2: CosineSeries, a: float, b: float,
           spec: QuadratureSpec, abs_floor: float = 1e-14) -> QuadratureResult:
    """Refine ``spec`` until two successive levels agree; raise if they never do."""
    trace = []
    prev = None
    s = spec
    for level in range(spec.max_refinements + 1):
        v, tail_err, ncells = quadrant_integral(f1, f2, a, b, s)
        trace.append({"level": level, "periods": s.periods,
                      "subcells_per_period": s.subcells_per_period,
                      "octaves": [s.octave_min, s.octave_max],
                      "cells": ncells, "value": v, "tail_bound": tail_err})
        if prev is not None:
            gap = abs(v - prev)
            if gap <= spec.target_rel_tol * abs(v) + abs_floor:
                return QuadratureResult(v, gap + tail_err, trace)
        prev = v
        s = s.refined()
    raise QuadratureError(
        f"quadrature did not converge after {spec.max_refinements} refinements: "
        f"estimate {v!r}, refinement gap {gap!r}", estimate=v, gap=gap, trace=trace)
