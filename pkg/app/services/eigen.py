"""Analytical discrete-ordinates eigenproblem per azimuthal order.

For each m the half-range matrices W_+/W_- couple the positive ordinates;
the product E_- E_+ acting on Xi U has eigenvalues 1/nu^2.
"""
from dataclasses import dataclass
import functools
from typing import Dict, Tuple

import numpy as np
from scipy.linalg import eig

from app.core.config import settings
from app.core.exceptions import IllConditionedError, InvalidInputError, SpectralAssumptionError
from app.core.logger import logger
from app.schemas.medium import MediumParams
from app.services.quadrature import QuadratureSet, gauss_legendre
from app.services.specfun import ChandrasekharTable, chandrasekhar_forward, legendre_table


@dataclass(frozen=True)
class EigenFamily:
    """Eigenmodes of order m; ``phi[n]`` holds phi^m(nu_n, mu_i) for all 2N ordinates."""

    m: int
    nu: np.ndarray
    phi: np.ndarray
    norm: np.ndarray
    g_table: np.ndarray
    quad: QuadratureSet
    params: MediumParams

    @property
    def size(self) -> int:
        return self.nu.size

    @property
    def omega(self) -> np.ndarray:
        """Azimuthal weights w_i (1 - mu_i^2)^|m|."""
        return self.quad.w * (1 - self.quad.mu ** 2) ** self.m

    def chandrasekhar(self, n: int) -> ChandrasekharTable:
        return ChandrasekharTable(m=self.m, nu=float(self.nu[n]), L_top=self.params.l_max, values=self.g_table[n])


def build_W(m: int, quad: QuadratureSet, params: MediumParams) -> Tuple[np.ndarray, np.ndarray]:
    am = abs(m)
    mu = quad.mu_pos
    w = quad.w_pos * (1 - mu ** 2) ** am
    P_plus = legendre_table(params.l_max, am, mu)
    P_minus = legendre_table(params.l_max, am, -mu)
    coef = np.array([(2 * l + 1) * params.phase_moment(l) for l in range(params.l_max + 1)])
    W_plus = np.einsum("l,li,lj->ij", coef, P_plus, P_plus) * w[None, :]
    W_minus = np.einsum("l,li,lj->ij", coef, P_minus, P_plus) * w[None, :]
    return W_plus, W_minus


def chandrasekhar_sum(m: int, g_values: np.ndarray, mu, params: MediumParams) -> np.ndarray:
    """g^m(nu, mu) = sum_l (2l+1) g^l g_l^m(nu) p_l^m(mu) for real or complex mu."""
    P = legendre_table(params.l_max, m, mu)
    coef = np.array([(2 * l + 1) * params.phase_moment(l) for l in range(params.l_max + 1)])
    return np.tensordot(coef * g_values[: params.l_max + 1], P, axes=(0, 0))


def bilinear_form(family: EigenFamily, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """sum_i w_i mu_i (1-mu_i^2)^|m| a_i b_i for every pair of rows."""
    weight = family.omega * family.quad.mu
    return (left * weight) @ right.T


def _reorthogonalize(family_phi: np.ndarray, nu: np.ndarray, weight: np.ndarray) -> np.ndarray:
    phi = family_phi.copy()
    for n in range(1, nu.size):
        if abs(nu[n - 1] - nu[n]) < 1e-12 * nu[n - 1]:
            a, b = phi[n - 1], phi[n]
            phi[n] = b - (np.sum(weight * a * b) / np.sum(weight * a * a)) * a
            logger.debug(f"re-orthogonalized clustered eigenvalues {nu[n - 1]:.15g}, {nu[n]:.15g}")
    return phi


def solve_eigen_family(m: int, quad: QuadratureSet, params: MediumParams) -> EigenFamily:
    am = abs(m)
    N = quad.N
    mu = quad.mu_pos
    varpi = params.albedo
    W_plus, W_minus = build_W(am, quad, params)
    Xi_inv = np.diag(1.0 / mu)
    I = np.eye(N)
    S_plus = I - 0.5 * varpi * (W_plus + W_minus)
    S_minus = I - 0.5 * varpi * (W_plus - W_minus)
    A = (S_minus @ Xi_inv) @ (S_plus @ Xi_inv)

    lam, Y = eig(A)
    bad = np.abs(lam.imag) > settings.EIGEN_IMAG_TOL * np.abs(lam)
    if np.any(bad) or np.any(lam.real <= 0):
        logger.error(f"m={am}: eigenvalues of E_-E_+ not real positive: {lam[bad | (lam.real <= 0)]}")
        raise SpectralAssumptionError(
            f"spectral assumption violated for m={am} (albedo={varpi:.6g}): complex or non-positive eigenvalue"
        )
    lam = lam.real
    Y = Y.real

    nu = 1.0 / np.sqrt(lam)
    order = np.argsort(-nu, kind="stable")
    nu = nu[order]
    U = Xi_inv @ Y[:, order]
    V = nu[None, :] * (Xi_inv @ (S_plus @ U))
    phi = np.concatenate([(U + V) / 2, (U - V) / 2], axis=0).T

    omega = quad.w * (1 - quad.mu ** 2) ** am
    phi = _reorthogonalize(phi, nu, omega * quad.mu)
    total = phi @ omega
    if np.any(np.abs(total) < 1e-14 * np.abs(phi).max(axis=1)):
        raise IllConditionedError(f"m={am}: eigenvector with vanishing normalization integral")
    phi = phi / total[:, None]
    norm = (phi ** 2 * omega * quad.mu).sum(axis=1)

    g_table = np.array([chandrasekhar_forward(am, v, params.l_max, params).values for v in nu])
    phi.setflags(write=False)
    logger.debug(f"m={am}: nu = {np.array2string(nu, precision=6)}")
    return EigenFamily(m=am, nu=nu, phi=phi, norm=norm, g_table=g_table, quad=quad, params=params)


@functools.lru_cache(maxsize=32)
def solve_families(params: MediumParams) -> Dict[int, EigenFamily]:
    """Families m = 0..l_max for one medium (cached per medium)."""
    quad = gauss_legendre(params.N)
    return {m: solve_eigen_family(m, quad, params) for m in range(params.l_max + 1)}


def phi_values(family: EigenFamily, n: int) -> np.ndarray:
    """Stored eigenvector of mode n (0-based): phi^m(nu_n, mu_i), i over 2N ordinates."""
    if not 0 <= n < family.size:
        raise InvalidInputError(f"mode index {n} out of range 0..{family.size - 1}")
    return family.phi[n]


def closed_form_phi(family: EigenFamily, n: int) -> np.ndarray:
    """(varpi nu/2) g^m(nu, mu_i)/(nu - mu_i) from the Chandrasekhar polynomials."""
    nu = family.nu[n]
    g = chandrasekhar_sum(family.m, family.g_table[n], family.quad.mu, family.params)
    return 0.5 * family.params.albedo * nu * g / (nu - family.quad.mu)


def reversed_modes(family: EigenFamily) -> np.ndarray:
    """phi^m(-nu_n, mu_i) = phi^m(nu_n, -mu_i), i.e. Phi_+ and Phi_- swapped."""
    N = family.quad.N
    return np.concatenate([family.phi[:, N:], family.phi[:, :N]], axis=1)


def orthogonality_residual(family: EigenFamily) -> float:
    """Largest off-diagonal weighted bilinear form, relative to sqrt(|N_n N_n'|).

    Covers pairs among +nu modes and the cross pairs with the sign-reversed modes.
    """
    full = np.concatenate([family.phi, reversed_modes(family)], axis=0)
    B = bilinear_form(family, full, full)
    scale = np.sqrt(np.abs(np.diag(B)))
    rel = np.abs(B) / np.outer(scale, scale)
    np.fill_diagonal(rel, 0.0)
    return float(rel.max())
