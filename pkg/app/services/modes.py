"""Plane-wave eigenmodes evaluated in rotated reference frames.

A mode of separation constant nu and transverse wave vector q lives in the
frame whose z-axis points along the complex unit vector
k = (-i nu q, sqrt(1 + (nu q)^2)). Rotation to that frame is carried by the
continued Wigner d-matrices of argument x = nu q.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from app.core.config import settings
from app.core.exceptions import InvalidInputError, PoleProximityError
from app.core.logger import logger
from app.schemas.medium import MediumParams
from app.services.eigen import EigenFamily, chandrasekhar_sum
from app.services.specfun import (
    ChandrasekharTable,
    WignerDTable,
    rotated_spherical_harmonic,
    spherical_harmonic,
    wigner_d_continued,
)

POLE_TOL = 1e-13


@dataclass(frozen=True)
class ModeFrame:
    nu: float
    q: float
    phi_q: float
    k_z_hat: float
    x_arg: float
    phi_khat: float

    @classmethod
    def from_q(cls, nu: float, q: float, phi_q: float = 0.0) -> "ModeFrame":
        if q < 0:
            raise InvalidInputError(f"transverse wave number must be >= 0, got {q}")
        x = nu * q
        if q == 0.0:
            phi_khat = 0.0
        else:
            phi_khat = phi_q + np.pi if nu > 0 else phi_q
        return cls(nu=nu, q=q, phi_q=phi_q, k_z_hat=float(np.sqrt(1 + x * x)), x_arg=x, phi_khat=phi_khat)

    def wigner(self, l_max: int) -> WignerDTable:
        return wigner_d_continued(l_max, abs(self.x_arg))


def k_z_hat(x):
    return np.sqrt(1.0 + np.square(x))


def s_dot_khat(mu, phi, frame: ModeFrame):
    mu = np.asarray(mu, dtype=float)
    transverse = np.sqrt(1 - mu * mu) * np.cos(np.asarray(phi) - frame.phi_q)
    return -1j * frame.nu * frame.q * transverse + frame.k_z_hat * mu


def phi_continued(m: int, nu: float, w, table: ChandrasekharTable, params: MediumParams):
    """(varpi nu/2) g^m(nu, w)/(nu - w) for complex w off the real pole."""
    w = np.asarray(w)
    if abs(m) > params.l_max:
        return np.zeros(w.shape, dtype=complex)
    gap = np.abs(nu - w)
    if np.any(gap < POLE_TOL):
        logger.error(f"phi_continued evaluated at its pole nu={nu}")
        raise PoleProximityError(f"eigenmode evaluated at its pole nu={nu:.15g}")
    g = chandrasekhar_sum(abs(m), table.values, w, params)
    return 0.5 * params.albedo * nu * g / (nu - w)


def rotated_Phi(
    m: int,
    family: EigenFamily,
    n: int,
    frame: ModeFrame,
    mu,
    phi,
    conjugate: bool = False,
    wigner: Optional[WignerDTable] = None,
):
    """r_k Phi^m_nu at (mu, phi); with ``conjugate`` the rotated Phi^{m*}.

    ``family`` supplies g_l^|m|(nu_n); g_l^{-m} = (-1)^m g_l^m.
    """
    params = family.params
    am = abs(m)
    if am > params.l_max:
        raise InvalidInputError(f"|m|={am} exceeds l_max={params.l_max}")
    nu = float(family.nu[n])
    if wigner is None:
        wigner = frame.wigner(params.l_max)
    w = s_dot_khat(mu, phi, frame)
    if np.any(np.abs(nu - w) < POLE_TOL):
        raise PoleProximityError(f"rotated mode evaluated at its pole nu={nu:.15g}")

    sign_m = (-1.0) ** am if m < 0 else 1.0
    total = 0.0
    for l in range(am, params.l_max + 1):
        coef = np.sqrt((2 * l + 1) * np.pi) * params.phase_moment(l) * sign_m * family.g_table[n, l]
        if coef == 0.0:
            continue
        total = total + coef * rotated_spherical_harmonic(l, m, mu, phi, wigner, frame.phi_khat, conjugate)
    return (-1.0) ** am * params.albedo * nu / (nu - w) * total


def unrotated_Phi(m: int, family: EigenFamily, n: int, phi):
    """Phi^m_nu(s_i) = phi^m(nu, mu_i)(1-mu_i^2)^(|m|/2) e^{i m phi} on the ordinates."""
    mu = family.quad.mu
    vec = family.phi[n] * (1 - mu * mu) ** (abs(m) / 2)
    return vec[:, None] * np.exp(1j * m * np.asarray(phi))[None, :]


def _azimuth_grid(n_phi: Optional[int]):
    n_phi = n_phi or settings.AZIMUTH_NODES
    return 2 * np.pi * np.arange(n_phi) / n_phi, 2 * np.pi / n_phi


def rotated_bilinear_form(
    family: EigenFamily, n: int, other: EigenFamily, n_other: int, q: float, n_phi: Optional[int] = None
) -> complex:
    """sum_i w_i mu_i int (r Phi^m_nu)(r Phi^{m'*}_nu') dphi, divided by 2 pi k_z(nu q)."""
    phi, dphi = _azimuth_grid(n_phi)
    quad = family.quad
    mu = quad.mu[:, None]
    frame = ModeFrame.from_q(float(family.nu[n]), q)
    frame_other = ModeFrame.from_q(float(other.nu[n_other]), q)
    a = rotated_Phi(family.m, family, n, frame, mu, phi[None, :])
    b = rotated_Phi(other.m, other, n_other, frame_other, mu, phi[None, :], conjugate=True)
    total = np.sum(quad.w[:, None] * mu * a * b) * dphi
    return complex(total / (2 * np.pi * frame.k_z_hat))


def rotated_normalization(family: EigenFamily, n: int, q: float, n_phi: Optional[int] = None) -> complex:
    """(1/2pi) sum_i w_i int phi^m(nu, s.k) [1 - (s.k)^2]^|m| dphi."""
    phi, dphi = _azimuth_grid(n_phi)
    quad = family.quad
    nu = float(family.nu[n])
    frame = ModeFrame.from_q(nu, q)
    w = s_dot_khat(quad.mu[:, None], phi[None, :], frame)
    values = phi_continued(family.m, nu, w, family.chandrasekhar(n), family.params) * (1 - w * w) ** family.m
    return complex(np.sum(quad.w[:, None] * values) * dphi / (2 * np.pi))


def homogeneous_residual(family: EigenFamily, n: int, q: float, n_phi: Optional[int] = None) -> float:
    """Relative residual of the Fourier-space homogeneous equation for one mode.

    LHS (1 - s.k/nu) r Phi(s_i) against the scattering integral with the
    phase function expanded as sum_l sum_m g^l Y_lm(s) Y*_lm(s').
    """
    phi, dphi = _azimuth_grid(n_phi)
    quad = family.quad
    params = family.params
    nu = float(family.nu[n])
    frame = ModeFrame.from_q(nu, q)
    mu = quad.mu[:, None]
    grid_phi = phi[None, :]
    Phi = rotated_Phi(family.m, family, n, frame, mu, grid_phi)
    lhs = (1 - s_dot_khat(mu, grid_phi, frame) / nu) * Phi

    rhs = np.zeros_like(lhs)
    for l in range(params.l_max + 1):
        gl = params.phase_moment(l)
        for mp in range(-l, l + 1):
            Y = spherical_harmonic(l, mp, mu, grid_phi)
            projection = np.sum(quad.w[:, None] * np.conj(Y) * Phi) * dphi
            rhs = rhs + params.albedo * gl * Y * projection
    scale = np.max(np.abs(lhs))
    return float(np.max(np.abs(lhs - rhs)) / scale)


def phase_kernel(params: MediumParams, s, s_prime, wigner: Optional[WignerDTable] = None, phi_khat: float = 0.0):
    """sum_l g^l sum_m (r Y_lm)(s) (r Y*_lm)(s'), rotated when ``wigner`` is given.

    ``s`` and ``s_prime`` are (mu, phi) pairs.
    """
    total = 0.0
    for l in range(params.l_max + 1):
        gl = params.phase_moment(l)
        for m in range(-l, l + 1):
            if wigner is None:
                a = spherical_harmonic(l, m, *s)
                b = np.conj(spherical_harmonic(l, m, *s_prime))
            else:
                a = rotated_spherical_harmonic(l, m, *s, wigner, phi_khat)
                b = rotated_spherical_harmonic(l, m, *s_prime, wigner, phi_khat, conjugate=True)
            total = total + gl * a * b
    return total
