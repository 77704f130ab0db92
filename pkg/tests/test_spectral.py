import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wtfbf.params import validate
from wtfbf.spectral import amplitude, phi, phi_aniso

alphas = st.floats(0, 1)
hursts = st.floats(0.01, 0.99)
freqs = st.floats(1e-6, 1e6).flatmap(lambda v: st.sampled_from([v, -v]))
scales = st.floats(1e-3, 1e3)


def test_identity_case():
    assert phi(validate(0, 0.5), 1.0, 1.0) == 1.0


def test_closed_form_value():
    # 2**0.5 * 3**1.1 at 40 digits
    assert phi(validate(1, 0.3), 2.0, 3.0) == pytest.approx(4.735309589992961787, rel=1e-14)


def test_amplitude_is_reciprocal_value():
    assert amplitude(validate(1, 0.3), 2.0, 3.0) == pytest.approx(0.2111794342049526535, rel=1e-14)
    assert amplitude(validate(0, 0.5), 1.0, 1.0) == 1.0


def test_anisotropic_closed_form_value():
    # 2**(0.9/0.7 + 0.9/1.3) at 40 digits
    p = validate(0, 0.4, (0.7, 1.3))
    assert phi_aniso(p, 2.0, 2.0) == pytest.approx(3.939525785876527696, rel=1e-14)


def test_anisotropic_at_unit_frequency():
    p = validate(0.3, 0.4, (0.7, 1.3))
    assert phi_aniso(p, 1.0, 1.0) == phi(p, 1.0, 1.0) == 1.0


def test_axes_rejected_by_phi():
    p = validate(0.5, 0.3)
    with pytest.raises(ValueError):
        phi(p, 0.0, 1.0)
    with pytest.raises(ValueError):
        phi_aniso(validate(0.4, 0.4, (0.7, 1.3)), 1.0, 0.0)


def test_amplitude_vanishes_on_axes():
    p = validate(0.5, 0.3)
    assert amplitude(p, 0.0, 5.0) == 0.0
    grid = np.linspace(-3, 3, 7)
    a = amplitude(p, grid[:, None], grid[None, :])
    assert np.all(a[3, :] == 0) and np.all(a[:, 3] == 0)
    assert np.all(a[np.ix_([0, 1, 2, 4, 5, 6], [0, 1, 2, 4, 5, 6])] > 0)


def test_amplitude_uses_anisotropic_density():
    p = validate(0.4, 0.4, (0.7, 1.3))
    assert amplitude(p, 2.0, 3.0) == pytest.approx(1 / phi_aniso(p, 2.0, 3.0), rel=1e-14)


@given(alphas, hursts, freqs, freqs, scales)
def test_homogeneity(alpha, hurst, x1, x2, a):
    p = validate(alpha, hurst)
    lhs = phi(p, a * x1, a * x2)
    rhs = a ** (2 * hurst + 1) * phi(p, x1, x2)
    assert lhs == pytest.approx(rhs, rel=1e-12)


@given(st.floats(0.3, 0.7), freqs, freqs, scales)
def test_anisotropic_homogeneity(hurst, x1, x2, a):
    p = validate(0.4, hurst, (0.85, 1.15))
    b1, b2 = p.betas
    lhs = phi_aniso(p, a ** b1 * x1, a ** b2 * x2)
    assert lhs == pytest.approx(a ** (2 * hurst + 1) * phi_aniso(p, x1, x2), rel=1e-12)


@given(alphas, hursts, freqs, freqs)
def test_symmetry(alpha, hurst, x1, x2):
    p = validate(alpha, hurst)
    v = phi(p, x1, x2)
    assert phi(p, x2, x1) == v
    assert phi(p, -x1, x2) == v and phi(p, x1, -x2) == v


@given(hursts, freqs, freqs)
def test_alpha_zero_factorizes(hurst, x1, x2):
    p = validate(0, hurst)
    expected = abs(x1) ** (hurst + 0.5) * abs(x2) ** (hurst + 0.5)
    assert phi(p, x1, x2) == pytest.approx(expected, rel=1e-12)


@given(alphas, hursts, freqs, freqs)
def test_amplitude_times_phi_is_one(alpha, hurst, x1, x2):
    p = validate(alpha, hurst)
    assert amplitude(p, x1, x2) * phi(p, x1, x2) == pytest.approx(1.0, rel=1e-13)


def test_unit_betas_reduce_to_isotropic():
    p = validate(0.3, 0.6)
    x = np.geomspace(1e-3, 1e3, 9)
    assert np.allclose(phi_aniso(p, x[:, None], x[None, :]), phi(p, x[:, None], x[None, :]),
                       rtol=1e-14, atol=0)


def test_log_domain_survives_extreme_octaves():
    p = validate(0.5, 0.3)
    tiny, huge = 2.0 ** -30, 2.0 ** 30
    assert math.isfinite(phi(p, tiny, tiny)) and phi(p, tiny, tiny) > 0
    assert math.isfinite(amplitude(p, huge, huge)) and amplitude(p, huge, huge) > 0
