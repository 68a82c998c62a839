"""Gauss-Legendre angular quadrature in the sign-split ordinate ordering.

Ordinates 1..N carry the positive cosines in increasing order and ordinates
N+1..2N their mirror images, so ``mu[N + i] == -mu[i]`` (0-based arrays).
"""
from dataclasses import dataclass
import functools
from typing import Tuple

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import eval_legendre

from app.core.exceptions import InvalidInputError
from app.core.logger import logger
from app.schemas.medium import MediumParams


@dataclass(frozen=True)
class QuadratureSet:
    N: int
    mu: np.ndarray
    w: np.ndarray

    @property
    def mu_pos(self) -> np.ndarray:
        return self.mu[: self.N]

    @property
    def w_pos(self) -> np.ndarray:
        return self.w[: self.N]


@functools.lru_cache(maxsize=64)
def gauss_legendre(N: int) -> QuadratureSet:
    """2N-point rule from the Jacobi matrix of the Legendre polynomials (Golub-Welsch)."""
    if N < 1:
        raise InvalidInputError(f"quadrature half-order must be >= 1, got {N}")

    n = 2 * N
    k = np.arange(1, n)
    offdiag = k / np.sqrt(4.0 * k * k - 1.0)
    nodes, vectors = eigh_tridiagonal(np.zeros(n), offdiag)
    weights = 2.0 * vectors[0, :] ** 2

    # Symmetrize: eigensolver round-off breaks exact mirror pairs
    pos = 0.5 * (nodes[N:] - nodes[:N][::-1])
    w_pos = 0.5 * (weights[N:] + weights[:N][::-1])
    if np.any(np.diff(pos) <= 1e-14):
        raise InvalidInputError(f"degenerate quadrature nodes for N={N}")

    mu = np.concatenate([pos, -pos])
    w = np.concatenate([w_pos, w_pos])
    mu.setflags(write=False)
    w.setflags(write=False)
    logger.debug(f"Gauss-Legendre N={N}: sum(w)-2 = {w.sum() - 2.0:.2e}")
    return QuadratureSet(N=N, mu=mu, w=w)


def phase_moment_check(quad: QuadratureSet, params: MediumParams) -> Tuple[float, float]:
    """Zeroth and first angular moments of the truncated phase function.

    Both moments are computed per incident ordinate with the azimuthal
    integral done exactly (addition theorem); the ordinate whose moment is
    furthest from the continuous value (1, g) is reported.
    """
    mu = quad.mu
    w = quad.w
    l_max = params.l_max
    # P_k at every node for k <= l_max + 1
    P = np.array([eval_legendre(k, mu) for k in range(l_max + 2)])
    # sum_j w_j P_k(mu_j) P_k(mu_i)
    proj = P * (P @ w)[:, None]

    m0 = np.zeros_like(mu)
    m1 = np.zeros_like(mu)
    for l in range(l_max + 1):
        gl = params.phase_moment(l)
        m0 += 0.5 * (2 * l + 1) * gl * proj[l]
        # s.s' P_l(s.s') = [(l+1) P_{l+1} + l P_{l-1}] / (2l+1)
        m1 += 0.5 * gl * (l + 1) * proj[l + 1]
        if l > 0:
            m1 += 0.5 * gl * l * proj[l - 1]

    i0 = int(np.argmax(np.abs(m0 - 1.0)))
    i1 = int(np.argmax(np.abs(m1 - params.g * (l_max >= 1))))
    return float(m0[i0]), float(m1[i1])
