"""Spectral density root and synthesis amplitude.

All evaluations run in the log domain so that frequencies spanning many
octaves neither overflow nor underflow.
"""
from __future__ import annotations

import numpy as np

from .params import FieldParams


def _log_phi(log_min, log_max, params: FieldParams):
    return (params.h_minus + 0.5) * log_min + (params.h_plus + 0.5) * log_max


def _log_moduli(xi1, xi2, params: FieldParams, anisotropic: bool):
    l1 = np.log(np.abs(xi1))
    l2 = np.log(np.abs(xi2))
    if anisotropic:
        beta1, beta2 = params.betas
        l1 = l1 / beta1
        l2 = l2 / beta2
    return np.minimum(l1, l2), np.maximum(l1, l2)


def _require_off_axes(xi1, xi2):
    if np.any(np.asarray(xi1) == 0) or np.any(np.asarray(xi2) == 0):
        raise ValueError("phi is undefined on the frequency axes (xi1 == 0 or xi2 == 0); "
                         "use amplitude() for grids containing zeros")


def phi(params: FieldParams, xi1, xi2):
    """Square root of the inverse spectral density of the isotropic field.

    ``min(|xi1|,|xi2|)**(H- + 1/2) * max(|xi1|,|xi2|)**(H+ + 1/2)``; accepts
    scalars or broadcastable arrays. Both coordinates must be nonzero.
    """
    _require_off_axes(xi1, xi2)
    lo, hi = _log_moduli(xi1, xi2, params, anisotropic=False)
    out = np.exp(_log_phi(lo, hi, params))
    return out if np.ndim(out) else float(out)


def phi_aniso(params: FieldParams, xi1, xi2):
    """``phi`` evaluated at ``(|xi1|**(1/beta1), |xi2|**(1/beta2))``."""
    _require_off_axes(xi1, xi2)
    lo, hi = _log_moduli(xi1, xi2, params, anisotropic=True)
    out = np.exp(_log_phi(lo, hi, params))
    return out if np.ndim(out) else float(out)


def amplitude(params: FieldParams, xi1, xi2):
    """Synthesis weight: ``1/phi`` off the axes and exactly 0 on them.

    Uses the anisotropic density when ``params`` carries anisotropy.
    """
    xi1 = np.asarray(xi1, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)
    xi1, xi2 = np.broadcast_arrays(xi1, xi2)
    on_axis = (xi1 == 0) | (xi2 == 0)
    s1 = np.where(on_axis, 1.0, xi1)
    s2 = np.where(on_axis, 1.0, xi2)
    lo, hi = _log_moduli(s1, s2, params, anisotropic=params.is_anisotropic)
    out = np.where(on_axis, 0.0, np.exp(-_log_phi(lo, hi, params)))
    return out if out.ndim else float(out)
