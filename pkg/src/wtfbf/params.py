"""Model parameters and the synthesis grid."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

BETA_SUM_TOL = 1e-12


class ParameterError(ValueError):
    """Raised when a parameter set violates a model constraint."""


@dataclass(frozen=True)
class FieldParams:
    """Validated parameters of a weighted tensorized fractional Brownian field.

    ``anisotropy`` is ``None`` for the isotropic model, otherwise the pair
    ``(beta1, beta2)`` of the operator scaling exponents.
    """

    alpha: float
    hurst: float
    anisotropy: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        _check(self.alpha, self.hurst, self.anisotropy)

    @property
    def h_plus(self) -> float:
        return (1.0 + self.alpha) * self.hurst

    @property
    def h_minus(self) -> float:
        return (1.0 - self.alpha) * self.hurst

    @property
    def is_anisotropic(self) -> bool:
        return self.anisotropy is not None

    @property
    def betas(self) -> Tuple[float, float]:
        return self.anisotropy if self.anisotropy is not None else (1.0, 1.0)

    def to_dict(self) -> dict:
        beta1, beta2 = self.anisotropy if self.anisotropy else (None, None)
        return {"alpha": self.alpha, "hurst": self.hurst,
                "beta1": beta1, "beta2": beta2}


def _check(alpha, hurst, anisotropy):
    if not (math.isfinite(alpha) and 0.0 <= alpha <= 1.0):
        raise ParameterError(f"alpha must lie in [0, 1], got {alpha!r}")
    if not (math.isfinite(hurst) and 0.0 < hurst < 1.0):
        raise ParameterError(f"hurst must lie in (0, 1), got {hurst!r}")
    if anisotropy is None:
        return
    beta1, beta2 = anisotropy
    for name, b in (("beta1", beta1), ("beta2", beta2)):
        if not (math.isfinite(b) and 0.0 < b < 2.0):
            raise ParameterError(f"{name} must lie in (0, 2), got {b!r}")
    if abs(beta1 + beta2 - 2.0) > BETA_SUM_TOL:
        raise ParameterError(
            f"beta1 + beta2 must equal 2, got {beta1!r} + {beta2!r} = {beta1 + beta2!r}")
    lower = max(beta1, beta2) - 1.0
    upper = 3.0 * min(beta1, beta2) - 1.0
    if not lower < 2.0 * hurst:
        raise ParameterError(
            f"ill-defined field: need max(beta) - 1 < 2*hurst, got {lower!r} >= {2.0 * hurst!r}")
    if not 2.0 * hurst < upper:
        raise ParameterError(
            f"ill-defined field: need 2*hurst < 3*min(beta) - 1, got {2.0 * hurst!r} >= {upper!r}")


def validate(alpha, hurst=None, anisotropy=None) -> FieldParams:
    """Check raw scalars and return a :class:`FieldParams`.

    ``anisotropy`` may be ``None``, a ``(beta1, beta2)`` pair or an existing
    :class:`FieldParams` may be passed as ``alpha`` (returned unchanged).
    ``beta = (1, 1)`` is normalized to the isotropic model.
    """
    if isinstance(alpha, FieldParams):
        return alpha
    alpha = float(alpha)
    hurst = float(hurst)
    if anisotropy is not None:
        beta1, beta2 = (float(b) for b in anisotropy)
        anisotropy = (beta1, beta2)
    _check(alpha, hurst, anisotropy)
    if anisotropy is not None and anisotropy == (1.0, 1.0):
        anisotropy = None
    return FieldParams(alpha, hurst, anisotropy)


@dataclass(frozen=True)
class GridSpec:
    """Square synthesis grid with ``resolution + 1`` points per axis on [0, 1]."""

    resolution: int

    def __post_init__(self):
        m = self.resolution
        if isinstance(m, bool) or not isinstance(m, int):
            raise ParameterError(f"resolution must be an integer, got {m!r}")
        if m < 2 or m % 2:
            raise ParameterError(f"resolution must be an even integer >= 2, got {m}")

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.resolution + 1, self.resolution + 1)

    @property
    def noise_shape(self) -> Tuple[int, int]:
        return (2 * self.resolution, 2 * self.resolution)

    def coordinates(self):
        """Sample coordinates ``k / M`` for ``k = 0..M``."""
        import numpy as np
        return np.arange(self.resolution + 1) / self.resolution

    def index_of(self, coordinate: float) -> int:
        """Grid index of a coordinate in [0, 1]; it must fall on the grid."""
        k = coordinate * self.resolution
        ki = int(round(k))
        if abs(k - ki) > 1e-9 or not 0 <= ki <= self.resolution:
            raise ParameterError(f"coordinate {coordinate!r} is not a grid point of M={self.resolution}")
        return ki
