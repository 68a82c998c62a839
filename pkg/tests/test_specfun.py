import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.core.exceptions import InvalidInputError
from app.schemas.medium import MediumParams
from app.services.analytic import find_nu0
from app.services.quadrature import gauss_legendre
from app.services.specfun import (
    bessel_j0,
    chandrasekhar_backward,
    chandrasekhar_forward,
    chandrasekhar_table,
    h_coeff,
    j0_tail_correction,
    legendre_table,
    p_lm,
    rotated_spherical_harmonic,
    spherical_harmonic,
    wigner_d_column,
    wigner_d_continued,
)


class TestLegendre:
    def test_low_orders(self):
        assert_allclose(p_lm(0, 0, np.array([-0.7, 0.0, 0.4])), 1.0)
        assert_allclose(p_lm(1, 1, 0.3), 1 / np.sqrt(2), rtol=1e-15)
        assert_allclose(p_lm(1, 0, 0.3), 0.3, rtol=1e-15)

    def test_rejects_low_degree(self):
        with pytest.raises(InvalidInputError):
            p_lm(1, 2, 0.5)

    @pytest.mark.parametrize("m", [0, 1, 2, 3])
    def test_discrete_orthogonality(self, m):
        N = 4
        quad = gauss_legendre(N)
        top = 2 * N - 1 - m
        table = legendre_table(top, m, quad.mu)[m:]
        gram = (table * quad.w * (1 - quad.mu ** 2) ** m) @ table.T
        expected = np.diag([2.0 / (2 * l + 1) for l in range(m, top + 1)])
        assert_allclose(gram, expected, atol=1e-12)

    def test_negative_order_sign(self):
        mu = np.linspace(-0.9, 0.9, 7)
        assert_allclose(legendre_table(4, -3, mu), -legendre_table(4, 3, mu), rtol=1e-15)

    def test_complex_argument(self):
        w = 0.4 - 0.8j
        assert_allclose(p_lm(2, 0, w), 0.5 * (3 * w * w - 1), rtol=1e-14)

    def test_spherical_harmonic_addition(self):
        mu, phi, mu2, phi2 = 0.3, 0.4, -0.6, 2.1
        total = sum(
            spherical_harmonic(2, m, mu, phi) * np.conj(spherical_harmonic(2, m, mu2, phi2)) for m in range(-2, 3)
        )
        cos_gamma = mu * mu2 + np.sqrt((1 - mu * mu) * (1 - mu2 * mu2)) * np.cos(phi - phi2)
        assert_allclose(total, 5 / (4 * np.pi) * 0.5 * (3 * cos_gamma ** 2 - 1), atol=1e-14)


class TestChandrasekhar:
    def test_h_coefficients(self):
        params = MediumParams(mu_a=0.5, mu_s=0.5, g=0.9, l_max=1, N=2)
        assert_allclose(h_coeff(0, params), 0.5)
        assert_allclose(h_coeff(1, params), 1.65)
        assert h_coeff(2, params) == 5.0

    def test_forward_seeds(self, linear_medium):
        nu = 0.37
        table = chandrasekhar_forward(0, nu, 3, linear_medium)
        assert table[0] == 1.0
        assert_allclose(table[1], nu * (1 - linear_medium.albedo), rtol=1e-15)
        assert_allclose(chandrasekhar_forward(1, nu, 3, linear_medium)[1], 1 / np.sqrt(2), rtol=1e-15)
        assert_allclose(chandrasekhar_forward(-1, nu, 3, linear_medium)[1], -1 / np.sqrt(2), rtol=1e-15)

    def test_forward_at_zero(self, linear_medium):
        table = chandrasekhar_forward(0, 0.0, 4, linear_medium)
        assert_allclose(table[2], -0.5, rtol=1e-15)

    @pytest.mark.parametrize("m", [0, 1, 2])
    def test_recurrence_residual(self, tissue_medium, m):
        nu = 0.8
        g = chandrasekhar_forward(m, nu, 12, tissue_medium).values
        for l in range(m + 1, 12):
            residual = (
                np.sqrt((l + 1) ** 2 - m * m) * g[l + 1]
                + np.sqrt(l * l - m * m) * g[l - 1]
                - nu * h_coeff(l, tissue_medium) * g[l]
            )
            assert abs(residual) <= 1e-10 * max(abs(g[l]), 1.0)

    def test_backward_matches_forward_at_discrete_root(self, linear_medium):
        nu0 = find_nu0(linear_medium)
        backward = chandrasekhar_backward(0, nu0, 3, 40, linear_medium)
        forward = chandrasekhar_forward(0, nu0, 3, linear_medium)
        assert backward.seed_residual < 1e-10
        assert_allclose(backward.values, forward.values, rtol=1e-8)
        assert_allclose(backward[1], nu0 * (1 - linear_medium.albedo), rtol=1e-10)

    def test_dispatcher(self, linear_medium):
        assert chandrasekhar_table(0, 0.5, 3, linear_medium).method == "forward"
        nu0 = find_nu0(linear_medium)
        assert chandrasekhar_table(0, nu0, 3, linear_medium).method == "backward"
        # far from any discrete root the backward table is inconsistent
        assert chandrasekhar_table(0, 7.0, 3, linear_medium).method == "forward"

    def test_backward_needs_headroom(self, linear_medium):
        with pytest.raises(InvalidInputError):
            chandrasekhar_backward(0, 2.0, 5, 5, linear_medium)


class TestWigner:
    def test_identity_at_zero(self):
        table = wigner_d_continued(4, 0.0)
        for l in range(5):
            block = table.d[l, 4 - l: 4 + l + 1, 4 - l: 4 + l + 1]
            assert_allclose(block, np.eye(2 * l + 1), atol=0)

    def test_initial_terms(self):
        table = wigner_d_continued(1, 1.0)
        assert_allclose(table.entry(0, 0, 0), 1.0)
        assert_allclose(table.entry(1, 0, 0), np.sqrt(2), rtol=1e-15)
        assert_allclose(table.entry(1, 0, 1), 1j / np.sqrt(2), rtol=1e-15)
        assert_allclose(table.entry(1, 1, 1), (1 + np.sqrt(2)) / 2, rtol=1e-15)
        assert_allclose(table.entry(1, -1, -1), (1 + np.sqrt(2)) / 2, rtol=1e-15)
        assert_allclose(table.entry(1, 1, -1), (1 - np.sqrt(2)) / 2, rtol=1e-14)

    @pytest.mark.parametrize("x", [0.0, 0.1, 1.0, 10.0])
    def test_unitarity(self, x):
        table = wigner_d_continued(9, x)
        for l in range(10):
            assert table.unitarity_residual(l) <= 1e-12

    def test_symmetries(self):
        table = wigner_d_continued(5, 0.7)
        for l in range(6):
            for a in range(-l, l + 1):
                for b in range(-l, l + 1):
                    value = table.entry(l, a, b)
                    assert_allclose(value, table.entry(l, -b, -a), rtol=1e-13, atol=1e-15)
                    assert_allclose(value, (-1) ** (a + b) * table.entry(l, -a, -b), rtol=1e-13, atol=1e-15)
                    assert_allclose(value, (-1) ** (a + b) * table.entry(l, b, a), rtol=1e-13, atol=1e-15)

    def test_central_column(self):
        x = np.array([0.0, 0.3, 2.0])
        column = wigner_d_column(6, x)
        for k, value in enumerate(x):
            full = wigner_d_continued(6, value)
            assert_allclose(column[k], [full.entry(l, 0, 0).real for l in range(7)], rtol=1e-12)

    @pytest.mark.parametrize("x", [0.5, 2.0])
    def test_rotation_keeps_scalar_product(self, rng, x):
        table = wigner_d_continued(1, x)
        phi_khat = 0.9
        for _ in range(5):
            mu, mu2 = rng.uniform(-1, 1, 2)
            phi, phi2 = rng.uniform(0, 2 * np.pi, 2)
            rotated = sum(
                rotated_spherical_harmonic(1, m, mu, phi, table, phi_khat)
                * rotated_spherical_harmonic(1, m, mu2, phi2, table, phi_khat, conjugate=True)
                for m in (-1, 0, 1)
            )
            dot = mu * mu2 + np.sqrt((1 - mu * mu) * (1 - mu2 * mu2)) * np.cos(phi - phi2)
            assert_allclose(4 * np.pi / 3 * rotated, dot, atol=1e-12)

    def test_entry_bounds(self):
        with pytest.raises(InvalidInputError):
            wigner_d_continued(2, 1.0).entry(1, 2, 0)


class TestBessel:
    def test_values(self):
        assert bessel_j0(0.0) == 1.0
        assert abs(bessel_j0(2.4048255577)) < 1e-9
        assert_allclose(bessel_j0(1.0), 0.7651976865579666, rtol=1e-12)

    def test_tail_correction_is_small(self):
        d_near = abs(j0_tail_correction(1.0, 10.0))
        d_far = abs(j0_tail_correction(10.0, 10.0))
        assert d_near <= 1e-5
        assert d_far < d_near

    def test_tail_correction_definition(self):
        q, rho = np.array([0.2, 1.3]), 7.0
        s = q * rho
        phase = s - np.pi / 4
        direct = q * bessel_j0(s) - np.sqrt(2 * q / (np.pi * rho)) * (
            (1 - 9 / (128 * s ** 2)) * np.cos(phase) + (1 / (8 * s) - 75 / (1024 * s ** 3)) * np.sin(phase)
        )
        assert_allclose(j0_tail_correction(q, rho), direct, rtol=1e-14)

    def test_tail_correction_rejects_small_argument(self):
        with pytest.raises(InvalidInputError):
            j0_tail_correction(0.01, 1.0)
