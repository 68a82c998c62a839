import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.core.exceptions import InvalidInputError
from app.schemas.medium import MediumParams
from app.services.quadrature import gauss_legendre, phase_moment_check


def test_two_point_rule():
    quad = gauss_legendre(1)
    assert_allclose(quad.mu, [1 / np.sqrt(3), -1 / np.sqrt(3)], rtol=1e-14)
    assert_allclose(quad.w, [1.0, 1.0], rtol=1e-14)


def test_four_point_rule():
    quad = gauss_legendre(2)
    assert_allclose(quad.mu_pos, [0.3399810435848563, 0.8611363115940526], rtol=1e-13)
    assert_allclose(quad.w_pos, [0.6521451548625461, 0.3478548451374538], rtol=1e-13)


@pytest.mark.parametrize("N", [1, 2, 5, 9, 16, 33, 64])
def test_ordering_and_symmetry(N):
    quad = gauss_legendre(N)
    assert quad.mu.size == quad.w.size == 2 * N
    assert np.all(np.diff(quad.mu_pos) > 1e-14)
    assert 0 < quad.mu_pos[0] and quad.mu_pos[-1] < 1
    assert_allclose(quad.mu[N:], -quad.mu[:N], rtol=0, atol=0)
    assert_allclose(quad.w[N:], quad.w[:N], rtol=0, atol=0)
    assert np.all(quad.w > 0)
    assert_allclose(quad.w.sum(), 2.0, rtol=1e-14)


@pytest.mark.parametrize("N", [1, 3, 9])
def test_polynomial_exactness(N):
    quad = gauss_legendre(N)
    for k in range(4 * N):
        exact = 2.0 / (k + 1) if k % 2 == 0 else 0.0
        assert_allclose(np.sum(quad.w * quad.mu ** k), exact, rtol=1e-13, atol=1e-13)


def test_invalid_order():
    with pytest.raises(InvalidInputError):
        gauss_legendre(0)


def test_rule_is_read_only():
    quad = gauss_legendre(4)
    with pytest.raises(ValueError):
        quad.mu[0] = 0.0


def test_moments_isotropic():
    params = MediumParams(mu_a=0.1, mu_s=0.9, g=0.0, l_max=0, N=4)
    m0, m1 = phase_moment_check(gauss_legendre(4), params)
    assert_allclose(m0, 1.0, rtol=1e-14)
    assert_allclose(m1, 0.0, atol=1e-14)


def test_moments_tissue(tissue_medium):
    m0, m1 = phase_moment_check(gauss_legendre(tissue_medium.N), tissue_medium)
    assert_allclose(m0, 1.0, atol=1e-10)
    assert_allclose(m1, 0.9, atol=1e-10)


def test_moments_two_point_exact():
    params = MediumParams(mu_a=0.2, mu_s=0.8, g=0.7, l_max=1, N=1)
    m0, m1 = phase_moment_check(gauss_legendre(1), params)
    assert_allclose((m0, m1), (1.0, 0.7), atol=1e-14)
