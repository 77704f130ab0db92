"""Spectral-representation generator.

Noise ``W(n1, n2)`` for ``n1, n2 in {-M+1, ..., M}`` is weighted by the
amplitude at ``(pi*n1, pi*n2)``, then two discrete Fourier passes of length
``2M`` are applied, each followed by subtraction of the value at the origin;
the field is the real part of the result, on the grid ``k/M``, ``k = 0..M``.

Noise convention: real and imaginary parts are independent unit normals
(``E|W|^2 = 2``).  Row ``i`` of the noise array (``n1 = i - M + 1``) is drawn
from its own Philox4x64 stream keyed by ``seed + 2**64 * i``, so rows can be
generated in any order or concurrently.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft

from .params import FieldParams, GridSpec, validate
from .spectral import amplitude

NOISE_CONVENTION = "philox4x64/row-keyed/re-im-unit-normal/v1"

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class ComplexNoise:
    """``2M x 2M`` complex draws; ``values[i, j]`` is ``W(i-M+1, j-M+1)``."""

    values: np.ndarray = field(repr=False)
    seed: int
    resolution: int

    def indices(self) -> np.ndarray:
        return np.arange(-self.resolution + 1, self.resolution + 1)


@dataclass(frozen=True)
class FieldSample:
    """One synthesized ``(M+1) x (M+1)`` field; ``values[k1, k2]`` is X(k1/M, k2/M)."""

    values: np.ndarray = field(repr=False)
    params: FieldParams
    seed: int

    @property
    def resolution(self) -> int:
        return self.values.shape[0] - 1


def _row_normals(seed: int, row: int, n: int) -> np.ndarray:
    bitgen = np.random.Philox(key=(seed & _MASK64) | (row << 64))
    return np.random.Generator(bitgen).standard_normal(2 * n)


def sample_noise(resolution: int, seed: int, workers: int = 1) -> ComplexNoise:
    """Draw the complex Gaussian noise array for grid resolution ``M``."""
    m = int(resolution)
    if m < 2:
        raise ValueError(f"resolution must be >= 2, got {m}")
    seed = int(seed) & _MASK64
    n = 2 * m
    out = np.empty((n, n), dtype=np.complex128)

    def fill(row):
        z = _row_normals(seed, row, n)
        out[row].real = z[:n]
        out[row].imag = z[n:]

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(fill, range(n)))
    else:
        for row in range(n):
            fill(row)
    return ComplexNoise(out, seed, m)


@lru_cache(maxsize=16)
def _amplitude_grid(params: FieldParams, resolution: int) -> np.ndarray:
    # Laid out in FFT order: position p holds frequency index n with p = n mod 2M.
    n = 2 * resolution
    idx = np.fft.fftfreq(n, d=1.0 / n)  # 0, 1, ..., M-1, -M, ..., -1
    idx[resolution] = resolution  # -M and M are the same residue; the noise range ends at +M
    freq = np.pi * idx
    g = amplitude(params, freq[:, None], freq[None, :])
    g.setflags(write=False)
    return g


def amplitude_grid(params: FieldParams, grid: GridSpec) -> np.ndarray:
    """Amplitudes ``g(pi*n1, pi*n2)`` in FFT order (index ``n mod 2M``)."""
    return _amplitude_grid(params, grid.resolution)


def _to_fft_order(noise: np.ndarray, m: int) -> np.ndarray:
    # natural index i <-> n = i - M + 1; FFT position p = n mod 2M
    return np.roll(noise, (1 - m, 1 - m), axis=(0, 1))


def synthesize_from_noise(params: FieldParams, grid: GridSpec, noise: ComplexNoise,
                          workers: int = 1) -> np.ndarray:
    """Run the two Fourier passes on a given noise array."""
    m = grid.resolution
    if noise.resolution != m:
        raise ValueError(f"noise resolution {noise.resolution} != grid resolution {m}")
    weighted = _to_fft_order(noise.values, m) * amplitude_grid(params, grid)
    # pass 1 over n2, keep k2 = 0..M, remove the k2 = 0 column
    y1 = scipy.fft.fft(weighted, axis=1, workers=workers)[:, : m + 1]
    y1 -= y1[:, :1]
    # pass 2 over n1, keep k1 = 0..M, remove the k1 = 0 row
    y2 = np.pi * scipy.fft.fft(y1, axis=0, workers=workers)[: m + 1, :]
    y2 -= y2[:1, :]
    return np.ascontiguousarray(y2.real)


def synthesize(params, grid, seed: int, workers: int = 1) -> FieldSample:
    """Synthesize one field sample for ``params`` on ``grid`` from ``seed``."""
    if not isinstance(params, FieldParams):
        params = validate(*params)
    if isinstance(grid, int):
        grid = GridSpec(grid)
    noise = sample_noise(grid.resolution, seed, workers=workers)
    values = synthesize_from_noise(params, grid, noise, workers=workers)
    return FieldSample(values, params, noise.seed)


def derived_seed(base_seed: int, index: int) -> int:
    """Seed of sample ``index`` in a batch: first word of ``SeedSequence(base_seed, spawn_key=(index,))``."""
    ss = np.random.SeedSequence(int(base_seed) & _MASK64, spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def synthesize_batch(params, grid, base_seed: int, count: int,
                     workers: int = 1) -> list[FieldSample]:
    """Synthesize ``count`` samples with seeds ``derived_seed(base_seed, i)``.

    With ``workers > 1`` samples are produced concurrently; results do not
    depend on the worker count.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    seeds = [derived_seed(base_seed, i) for i in range(count)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda s: synthesize(params, grid, s), seeds))
    return [synthesize(params, grid, s) for s in seeds]
