import math

import numpy as np
import pytest

from conftest import FBM_CONSTANT
from wtfbf.oracle import (CovarianceMatrix, QuadratureError, QuadratureSpec, assemble_covariance,
                          c1_constant, covariance_quadrature, discrete_increment_variance,
                          discrete_population_moments, discrete_variance, discrete_variance_grid,
                          exact_sample, fbm_constant, fbs_covariance,
                          increment_variance_quadrature, variance_quadrature)
from wtfbf.params import GridSpec, validate
from wtfbf.spectral import amplitude
from wtfbf.stats import increment_bound

FOUR_PI_SQ = 39.47841760435743447534


@pytest.mark.parametrize("k", sorted(FBM_CONSTANT))
def test_fbm_constant_closed_form(k):
    value, err = fbm_constant(k)
    assert value == pytest.approx(FBM_CONSTANT[k], rel=1e-9)
    assert err < 1e-6


@pytest.mark.parametrize("k", [0.0, 1.0, 1.2])
def test_fbm_constant_diverges_outside_unit_interval(k):
    with pytest.raises(QuadratureError):
        fbm_constant(k)


@pytest.mark.parametrize("x, y", [((0, 0.5), (0.5, 0.5)), ((0.5, 0.5), (0.3, 0.0)),
                                  ((0.0, 0.0), (1.0, 1.0))])
def test_covariance_vanishes_on_axes(x, y):
    assert covariance_quadrature(x, y, validate(0.5, 0.3)).value == 0.0


def test_brownian_sheet_variance_is_four_pi_squared():
    r = covariance_quadrature((1, 1), (1, 1), validate(0, 0.5))
    assert r.value == pytest.approx(FOUR_PI_SQ, rel=1e-7)
    assert r.error < 1e-5 * r.value
    assert len(r.trace) >= 2


@pytest.mark.parametrize("hurst", [0.3, 0.45, 0.7])
@pytest.mark.parametrize("x", [(1.0, 1.0), (0.4, 0.9), (0.25, 0.6)])
def test_fbs_variance_is_product_of_one_dimensional_integrals(hurst, x):
    r = variance_quadrature(x, validate(0, hurst))
    expected = FBM_CONSTANT[hurst] ** 2 * (x[0] * x[1]) ** (2 * hurst)
    assert r.value == pytest.approx(expected, rel=2e-5)


def test_fbs_covariance_examples():
    assert fbs_covariance((1, 1), (1, 1), 0.5).value == pytest.approx(FOUR_PI_SQ, rel=1e-9)
    assert fbs_covariance((1, 1), (0.4, 0.0), 0.5).value == 0.0


@pytest.mark.parametrize("hurst", [0.3, 0.7])
def test_alpha_zero_matches_fbs_covariance(hurst):
    p = validate(0, hurst)
    pts = [(0.25, 0.5), (0.5, 1.0), (1.0, 0.75), (0.75, 0.25)]
    for i, x in enumerate(pts):
        for y in pts[i:]:
            q = covariance_quadrature(x, y, p)
            f = fbs_covariance(x, y, hurst)
            assert q.value == pytest.approx(f.value, rel=max(1e-4, q.error / abs(q.value)))


def test_covariance_is_symmetric(reference_params):
    a = covariance_quadrature((0.3, 0.8), (0.6, 0.2), reference_params).value
    b = covariance_quadrature((0.6, 0.2), (0.3, 0.8), reference_params).value
    assert a == pytest.approx(b, rel=1e-12)


@pytest.mark.parametrize("a", [0.7, 3.0])
@pytest.mark.parametrize("x", [(1.0, 1.0), (0.3, 0.7)])
def test_self_similarity_at_non_dyadic_scales(reference_params, a, x):
    v0 = variance_quadrature(x, reference_params)
    v1 = variance_quadrature((a * x[0], a * x[1]), reference_params)
    assert v1.value == pytest.approx(a ** (4 * reference_params.hurst) * v0.value, rel=1e-5)


def test_operator_scaling_non_dyadic(aniso_params):
    b1, b2 = aniso_params.betas
    x, a = (0.6, 0.4), 1.5
    v0 = variance_quadrature(x, aniso_params)
    v1 = variance_quadrature((a ** b1 * x[0], a ** b2 * x[1]), aniso_params)
    assert v1.value == pytest.approx(a ** (4 * aniso_params.hurst) * v0.value, rel=1e-5)


def test_increment_variance_examples():
    p = validate(0, 0.5)
    assert increment_variance_quadrature(0.0, 0.3, p).value == 0.0
    assert increment_variance_quadrature(1.0, 1.0, p).value == pytest.approx(FOUR_PI_SQ, rel=1e-7)


def test_increment_variance_symmetric_in_lags(reference_params):
    a = increment_variance_quadrature(0.1, 0.35, reference_params).value
    b = increment_variance_quadrature(0.35, 0.1, reference_params).value
    assert a == pytest.approx(b, rel=1e-12)


@pytest.mark.parametrize("origin", [(0.3, 0.2), (0.55, 0.7)])
def test_increment_variance_is_origin_free(reference_params, origin):
    """Four-corner expansion of E|dX|^2 from covariances at an arbitrary origin."""
    h = (0.25, 0.2)
    (x1, x2) = origin
    corners = [((x1 + h[0], x2 + h[1]), 1), ((x1, x2 + h[1]), -1),
               ((x1 + h[0], x2), -1), ((x1, x2), 1)]
    total = 0.0
    for i, (pi_, si) in enumerate(corners):
        for pj, sj in corners[i:]:
            c = covariance_quadrature(pi_, pj, reference_params).value
            total += si * sj * c * (1 if pj is pi_ else 2)
    direct = increment_variance_quadrature(*h, reference_params).value
    assert total == pytest.approx(direct, rel=1e-5)


def test_c1_closed_form(reference_params):
    r = c1_constant(reference_params)
    assert r.value == pytest.approx(FBM_CONSTANT[0.15] * FBM_CONSTANT[0.45], rel=1e-9)
    assert r.value > 0
    levels = [t["value"] for t in r.trace]
    assert abs(levels[0] - levels[1]) < 1e-3 * r.value


@pytest.mark.parametrize("alpha, hurst", [(1.0, 0.3), (0.5, 0.7)])
def test_c1_infinite_outside_range(alpha, hurst):
    with pytest.raises(QuadratureError, match="infinite"):
        c1_constant(validate(alpha, hurst))


def test_c1_rejects_anisotropy(aniso_params):
    with pytest.raises(ValueError):
        c1_constant(aniso_params)


def test_bound_holds_at_quadrature_level():
    rng = np.random.default_rng(11)
    for _ in range(20):
        alpha = rng.uniform(0, 0.9)
        hurst = rng.uniform(0.05, 0.95 / (1 + alpha))
        p = validate(alpha, hurst)
        h1, h2 = rng.uniform(0.01, 2.0, size=2)
        v = increment_variance_quadrature(h1, h2, p).value
        assert v <= increment_bound(p, h1, h2, c1_constant(p).value) * (1 + 1e-6)


def test_non_convergence_is_reported():
    spec = QuadratureSpec(periods=1, nodes_per_cell=4, target_rel_tol=1e-13, max_cells=64,
                          max_refinements=1)
    with pytest.raises(QuadratureError) as info:
        covariance_quadrature((0.9, 0.2), (0.3, 0.7), validate(0.5, 0.3), spec)
    assert info.value.estimate is not None and info.value.gap > 0
    assert len(info.value.trace) == 2


def test_refinement_stability(reference_params):
    base = variance_quadrature((0.6, 0.9), reference_params)
    finer = variance_quadrature((0.6, 0.9), reference_params,
                                QuadratureSpec(nodes_per_cell=24, octave_min=-30, octave_max=30))
    assert abs(base.value - finer.value) <= base.error + finer.error + 1e-9 * base.value


# --- discrete generator oracle ---------------------------------------------------------

def test_discrete_variance_zero_on_axes(reference_params):
    g = GridSpec(16)
    assert discrete_variance(reference_params, g, (0, 7)) == 0.0
    assert discrete_variance(reference_params, g, (5, 0)) == 0.0


def test_discrete_variance_grid_agrees_pointwise(reference_params):
    g = GridSpec(8)
    grid = discrete_variance_grid(reference_params, g)
    for k in [(1, 1), (8, 3), (5, 8)]:
        assert grid[k] == pytest.approx(discrete_variance(reference_params, g, k), rel=1e-12)


def _pixel_covariance(params, m, positions, lag=0):
    """Covariance of all block pixels from the explicit linear map of the noise."""
    n = np.arange(-m + 1, m + 1)
    g = amplitude(params, np.pi * n[:, None], np.pi * n[None, :])

    def axis(p):
        e = np.exp(-1j * np.pi * n * p / m)
        return e - 1 if lag == 0 else e * (np.exp(-1j * np.pi * n * lag / m) - 1)

    rows = [np.pi * g * np.outer(axis(p1), axis(p2)) for p1 in positions for p2 in positions]
    c = np.array([r.ravel() for r in rows])
    return (c @ c.conj().T).real


@pytest.mark.parametrize("lag", [0, 2])
def test_population_moments_match_explicit_covariance(reference_params, lag):
    m = 6
    positions = np.arange(m + 1 - lag)
    cov = _pixel_covariance(reference_params, m, positions, lag)
    mean_var, var_mean = discrete_population_moments(reference_params, GridSpec(m), positions,
                                                     positions, lags=(lag, lag))
    assert mean_var == pytest.approx(np.mean(np.diag(cov)), rel=1e-12)
    assert var_mean == pytest.approx(np.mean(cov), rel=1e-12)


def test_discrete_increment_variance_matches_population(reference_params):
    g = GridSpec(16)
    v = discrete_increment_variance(reference_params, g, (3, 5))
    mv, _ = discrete_population_moments(reference_params, g, [4], [7], lags=(3, 5))
    assert v == pytest.approx(mv, rel=1e-12)


def test_discrete_variance_gap_shrinks_with_resolution(reference_params):
    q = variance_quadrature((1.0, 1.0), reference_params).value
    gaps = [q - discrete_variance(reference_params, GridSpec(m), (m, m)) for m in (64, 128, 256)]
    assert gaps[0] > gaps[1] > gaps[2] > 0


# --- exact sampling ---------------------------------------------------------------------

def test_exact_sample_on_axes_is_zero(reference_params):
    pts = [(0.0, 0.5), (0.3, 0.0), (0.0, 0.0)]
    assert np.all(exact_sample(pts, reference_params, seed=3) == 0.0)


def test_exact_sample_deterministic(reference_params):
    cov = assemble_covariance([(0.5, 0.5), (1.0, 0.5), (1.0, 1.0)], reference_params)
    a = exact_sample(cov, reference_params, seed=5)
    b = exact_sample(cov, reference_params, seed=5)
    assert a.tobytes() == b.tobytes()


def test_factorization_failure_names_eigenvalue():
    bad = CovarianceMatrix(np.zeros((2, 2)), np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(np.linalg.LinAlgError, match="-1.0"):
        bad.factor()


@pytest.mark.slow
def test_exact_sampler_reproduces_its_covariance(reference_params):
    t = np.arange(1, 6) / 5
    pts = [(a, b) for a in t for b in t]
    cov = assemble_covariance(pts, reference_params)
    assert cov.min_eigenvalue() > -1e-8 * np.max(np.linalg.eigvalsh(cov.entries))
    n = 10_000
    draws = np.array([exact_sample(cov, reference_params, seed=s) for s in range(n)])
    emp = draws.T @ draws / n  # known zero mean
    c = cov.entries
    se = np.sqrt((c ** 2 + np.outer(np.diag(c), np.diag(c))) / n)
    z = np.abs(emp - c) / se
    assert np.max(z) < 4.5
    assert np.mean(z < 3) > 0.98


@pytest.mark.slow
def test_exact_sampler_brownian_sheet_variance():
    p = validate(0, 0.5)
    t = np.arange(1, 4) / 3
    cov = assemble_covariance([(a, b) for a in t for b in t], p)
    n = 10_000
    corner = np.array([exact_sample(cov, p, seed=s)[-1] for s in range(n)])
    assert abs(np.mean(corner ** 2) - FOUR_PI_SQ) < 3 * FOUR_PI_SQ * math.sqrt(2 / n)
