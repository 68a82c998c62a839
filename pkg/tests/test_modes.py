import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.core.exceptions import InvalidInputError, PoleProximityError
from app.schemas.medium import MediumParams
from app.services.eigen import solve_families
from app.services.modes import (
    ModeFrame,
    homogeneous_residual,
    phase_kernel,
    phi_continued,
    rotated_bilinear_form,
    rotated_normalization,
    rotated_Phi,
    s_dot_khat,
    unrotated_Phi,
)
from app.services.specfun import p_lm, rotated_spherical_harmonic, spherical_harmonic, wigner_d_continued


def _pole_crossing(nu: float) -> float:
    """Smallest q at which nu - s.k vanishes somewhere on the unit sphere."""
    return np.sqrt(nu * nu - 1) / nu


def _pole_free_modes(families):
    """Modes whose rotated form stays analytic on the sphere for q below the crossing."""
    return [(family, n) for family in families.values() for n in range(family.size) if family.nu[n] > 1]


class TestModeFrame:
    def test_complex_unit_vector(self):
        frame = ModeFrame.from_q(1.7, 0.6, phi_q=0.4)
        assert_allclose((-1j * frame.nu * frame.q) ** 2 + frame.k_z_hat ** 2, 1.0, rtol=1e-15)
        assert frame.k_z_hat > 1
        assert_allclose(frame.phi_khat, 0.4 + np.pi)
        assert ModeFrame.from_q(-1.7, 0.6, phi_q=0.4).phi_khat == 0.4

    def test_laboratory_frame(self):
        frame = ModeFrame.from_q(1.2, 0.0)
        assert frame.k_z_hat == 1.0 and frame.x_arg == 0.0

    def test_negative_wave_number(self):
        with pytest.raises(InvalidInputError):
            ModeFrame.from_q(1.0, -0.1)


class TestDirectionCosine:
    def test_reductions(self):
        mu = np.array([-0.5, 0.2, 0.9])
        assert_allclose(s_dot_khat(mu, 1.3, ModeFrame.from_q(1.4, 0.0)), mu)
        frame = ModeFrame.from_q(1.4, 0.8)
        assert_allclose(s_dot_khat(1.0, 2.0, frame), frame.k_z_hat)

    def test_transverse_only(self):
        frame = ModeFrame.from_q(1.0, 1.0, phi_q=0.3)
        assert_allclose(s_dot_khat(0.0, 0.3, frame), -1j, atol=1e-15)


class TestContinuedPhi:
    def test_matches_eigenvectors(self, linear_families):
        family = linear_families[0]
        mu = family.quad.mu
        for n in range(family.size):
            values = phi_continued(0, family.nu[n], mu, family.chandrasekhar(n), family.params)
            assert_allclose(values.real, family.phi[n], rtol=1e-8, atol=1e-8 * np.abs(family.phi[n]).max())

    def test_conjugation(self, linear_families):
        family = linear_families[0]
        w = 0.3 - 0.7j
        value = phi_continued(0, family.nu[0], w, family.chandrasekhar(0), family.params)
        mirror = phi_continued(0, family.nu[0], np.conj(w), family.chandrasekhar(0), family.params)
        assert_allclose(mirror, np.conj(value), rtol=1e-14)

    def test_order_above_truncation(self, linear_families):
        family = linear_families[0]
        assert not phi_continued(2, family.nu[0], 0.2 + 0.1j, family.chandrasekhar(0), family.params).any()

    def test_pole(self, linear_families):
        family = linear_families[0]
        with pytest.raises(PoleProximityError):
            phi_continued(0, family.nu[0], family.nu[0], family.chandrasekhar(0), family.params)


class TestRotatedModes:
    @pytest.mark.parametrize("m", [-1, 0, 1])
    def test_laboratory_reduction(self, linear_families, m):
        family = linear_families[abs(m)]
        phi = np.linspace(0, 2 * np.pi, 9)
        mu = family.quad.mu[:, None]
        for n in range(family.size):
            frame = ModeFrame.from_q(float(family.nu[n]), 0.0)
            rotated = rotated_Phi(m, family, n, frame, mu, phi[None, :])
            expected = unrotated_Phi(m, family, n, phi)
            assert_allclose(rotated, expected, rtol=1e-8, atol=1e-8 * np.abs(expected).max())

    def test_order_above_truncation(self, linear_families):
        family = linear_families[1]
        with pytest.raises(InvalidInputError):
            rotated_Phi(2, family, 0, ModeFrame.from_q(float(family.nu[0]), 0.1), 0.5, 0.0)

    def test_beam_direction_projection(self):
        x = 0.8
        table = wigner_d_continued(3, x)
        phi_khat = 0.0
        for l in range(4):
            for m in range(-l, l + 1):
                value = rotated_spherical_harmonic(l, m, 1.0, 0.0, table, phi_khat)
                assert_allclose(value, np.sqrt((2 * l + 1) / (4 * np.pi)) * table.entry(l, 0, m), rtol=1e-13, atol=1e-15)

    @pytest.mark.parametrize("x", [0.1, 1.0, 5.0])
    def test_rotated_harmonics_are_biorthonormal(self, x):
        l_max = 2
        mu, w = np.polynomial.legendre.leggauss(6)
        phi = 2 * np.pi * np.arange(16) / 16
        table = wigner_d_continued(l_max, x)
        pairs = [(l, m) for l in range(l_max + 1) for m in range(-l, l + 1)]
        for l, m in pairs:
            left = rotated_spherical_harmonic(l, m, mu[:, None], phi[None, :], table, 0.7)
            for l2, m2 in pairs:
                right = rotated_spherical_harmonic(l2, m2, mu[:, None], phi[None, :], table, 0.7, conjugate=True)
                value = np.sum(w[:, None] * left * right) * 2 * np.pi / 16
                expected = 1.0 if (l, m) == (l2, m2) else 0.0
                assert abs(value - expected) <= 1e-9

    @pytest.mark.parametrize("m", [0, 1, 2])
    def test_laboratory_bilinear_form(self, m):
        params = MediumParams(mu_a=0.1, mu_s=0.9, g=0.6, l_max=2, N=5)
        family = solve_families(params)[m]
        for n in range(family.size):
            for k in range(family.size):
                value = rotated_bilinear_form(family, n, family, k, 0.0)
                expected = family.norm[n] if n == k else 0.0
                assert abs(value - expected) <= 1e-8 * abs(family.norm).max()

    @pytest.mark.parametrize("q", [0.1, 1.0, 5.0])
    def test_assembly_matches_continuation(self, linear_families, q):
        """r Phi^m = phi^m(nu, s.k) times the rotated azimuthal factor of Y_mm, for every mode."""
        phi = np.linspace(0, 2 * np.pi, 8, endpoint=False)[None, :]
        for m, family in linear_families.items():
            mu = family.quad.mu[:, None]
            constant = 1 / (np.sqrt((2 * m + 1) / (4 * np.pi)) * (-1.0) ** m * p_lm(m, m, 0.0))
            for n in range(family.size):
                frame = ModeFrame.from_q(float(family.nu[n]), q, phi_q=0.3)
                table = frame.wigner(family.params.l_max)
                w = s_dot_khat(mu, phi, frame)
                Ymm = rotated_spherical_harmonic(m, m, mu, phi, table, frame.phi_khat)
                continued = phi_continued(m, float(family.nu[n]), w, family.chandrasekhar(n), family.params)
                Phi = rotated_Phi(m, family, n, frame, mu, phi, wigner=table)
                assert_allclose(Phi, constant * continued * Ymm, rtol=1e-9, atol=1e-12 * np.abs(Phi).max())

    @pytest.mark.parametrize("q_fraction", [0.1, 0.25])
    def test_rotated_bilinear_form_off_the_pole(self, linear_families, q_fraction):
        modes = _pole_free_modes(linear_families)
        assert modes
        q = q_fraction * min(_pole_crossing(family.nu[n]) for family, n in modes)
        for family, n in modes:
            for other, k in modes:
                value = rotated_bilinear_form(family, n, other, k, q)
                if family is other and n == k:
                    assert_allclose(value, family.norm[n], rtol=1e-6)
                else:
                    assert abs(value) <= 1e-6 * abs(family.norm[n])

    def test_rotated_normalization(self, linear_families):
        family = linear_families[0]
        assert_allclose(rotated_normalization(family, 0, 0.0), 1.0, rtol=1e-8)
        assert_allclose(rotated_normalization(family, 0, 0.5 / family.nu[0]), 1.0, rtol=1e-6)


class TestHomogeneousEquation:
    @pytest.mark.parametrize("m", [0, 1])
    def test_laboratory_frame(self, linear_families, m):
        family = linear_families[m]
        for n in range(family.size):
            assert homogeneous_residual(family, n, 0.0) <= 1e-8

    @pytest.mark.parametrize("q_fraction", [0.1, 0.25])
    def test_rotated_frame_off_the_pole(self, linear_families, q_fraction):
        for family, n in _pole_free_modes(linear_families):
            q = q_fraction * _pole_crossing(family.nu[n])
            assert homogeneous_residual(family, n, q) <= 1e-6


class TestPhaseKernel:
    @pytest.mark.parametrize("x", [0.5, 2.0])
    def test_rotation_invariance(self, rng, x):
        params = MediumParams(mu_a=0.1, mu_s=0.9, g=0.7, l_max=3, N=4)
        table = wigner_d_continued(3, x)
        for _ in range(4):
            s = (rng.uniform(-1, 1), rng.uniform(0, 2 * np.pi))
            s_prime = (rng.uniform(-1, 1), rng.uniform(0, 2 * np.pi))
            plain = phase_kernel(params, s, s_prime)
            rotated = phase_kernel(params, s, s_prime, wigner=table, phi_khat=1.1)
            assert_allclose(rotated, plain, atol=1e-10)

    def test_legendre_series(self):
        params = MediumParams(mu_a=0.1, mu_s=0.9, g=0.7, l_max=2, N=4)
        s, s_prime = (0.3, 0.2), (-0.4, 1.9)
        cos_gamma = s[0] * s_prime[0] + np.sqrt((1 - s[0] ** 2) * (1 - s_prime[0] ** 2)) * np.cos(s[1] - s_prime[1])
        legendre = [1.0, cos_gamma, 0.5 * (3 * cos_gamma ** 2 - 1)]
        expected = sum((2 * l + 1) / (4 * np.pi) * params.g ** l * legendre[l] for l in range(3))
        assert_allclose(phase_kernel(params, s, s_prime), expected, rtol=1e-13)
        assert spherical_harmonic(0, 0, 0.1, 0.2) == pytest.approx(1 / np.sqrt(4 * np.pi))
