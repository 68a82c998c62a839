"""Special-function kernels shared by the eigen, mode and Hankel services.

Normalized associated Legendre functions, Chandrasekhar polynomials,
Wigner d-matrices continued to imaginary rotation angles, spherical
harmonics and the Bessel function J0 with its asymptotic tail.
"""
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import j0

from app.core.exceptions import IllConditionedError, InvalidInputError
from app.core.logger import logger
from app.schemas.medium import MediumParams

ArrayLike = Union[float, complex, np.ndarray]

BACKWARD_SEED_TOL = 1e-6
BACKWARD_CONVERGENCE = 1e-12
BACKWARD_MAX_DOUBLINGS = 6


def _diagonal_seed(m: int) -> float:
    """(2m-1)!!/sqrt((2m)!) as a running product, free of factorial overflow."""
    value = 1.0
    for k in range(1, m + 1):
        value *= np.sqrt((2 * k - 1) / (2 * k))
    return value


# -- associated Legendre functions -------------------------------------------

def legendre_table(l_max: int, m: int, mu: ArrayLike) -> np.ndarray:
    """p_l^m(mu) for l = 0..l_max stacked on the first axis.

    Rows with l < |m| are zero. ``mu`` may be complex; the recurrence is a
    polynomial identity and continues to the complex plane unchanged.
    """
    mu = np.asarray(mu)
    am = abs(m)
    dtype = np.result_type(mu.dtype, float)
    table = np.zeros((l_max + 1,) + mu.shape, dtype=dtype)
    if am > l_max:
        return table

    sign = (-1.0) ** am if m < 0 else 1.0
    table[am] = _diagonal_seed(am)
    if am + 1 <= l_max:
        table[am + 1] = np.sqrt(2 * am + 1) * mu * table[am]
    for l in range(am + 1, l_max):
        table[l + 1] = (
            (2 * l + 1) * mu * table[l] - np.sqrt(l * l - am * am) * table[l - 1]
        ) / np.sqrt((l + 1) ** 2 - am * am)
    return sign * table


def p_lm(l: int, m: int, mu: ArrayLike) -> ArrayLike:
    """Normalized associated Legendre function p_l^m(mu).

    p_l^m = (-1)^m sqrt((l-m)!/(l+m)!) P_l^m(mu) (1-mu^2)^(-|m|/2); the
    factor (1-mu^2)^(|m|/2) is kept out so the function is a polynomial.
    """
    if l < abs(m):
        raise InvalidInputError(f"p_lm requires l >= |m|, got l={l}, m={m}")
    return legendre_table(l, m, mu)[l]


def spherical_harmonic(l: int, m: int, mu: ArrayLike, phi: ArrayLike) -> np.ndarray:
    """Y_lm(mu, phi) with the Condon-Shortley phase."""
    mu = np.asarray(mu)
    am = abs(m)
    norm = np.sqrt((2 * l + 1) / (4 * np.pi)) * (-1.0) ** m
    return norm * p_lm(l, m, mu) * (1 - mu * mu) ** (am / 2) * np.exp(1j * m * np.asarray(phi))


# -- Chandrasekhar polynomials -------------------------------------------------

def h_coeff(l: int, params: MediumParams) -> float:
    if l <= params.l_max:
        return (2 * l + 1) * (1 - params.albedo * params.g ** l)
    return 2.0 * l + 1


@dataclass(frozen=True)
class ChandrasekharTable:
    """g_l^m(nu) for l = 0..L_top (rows below |m| are zero)."""

    m: int
    nu: float
    L_top: int
    values: np.ndarray
    method: str = "forward"
    seed_residual: float = 0.0

    def __getitem__(self, l: int) -> float:
        return self.values[l]


def chandrasekhar_forward(m: int, nu: float, L_top: int, params: MediumParams) -> ChandrasekharTable:
    am = abs(m)
    values = np.zeros(L_top + 1)
    if am <= L_top:
        values[am] = _diagonal_seed(am)
        if am + 1 <= L_top:
            values[am + 1] = nu * h_coeff(am, params) * values[am] / np.sqrt(2 * am + 1)
        for l in range(am + 1, L_top):
            values[l + 1] = (
                nu * h_coeff(l, params) * values[l] - np.sqrt(l * l - am * am) * values[l - 1]
            ) / np.sqrt((l + 1) ** 2 - am * am)
    if m < 0:
        values *= (-1.0) ** am
    return ChandrasekharTable(m=m, nu=nu, L_top=L_top, values=values, method="forward")


def _backward_ratios(am: int, nu: float, L_start: int, params: MediumParams) -> np.ndarray:
    """Ratios g_{l+1}/g_l for l = |m|..L_start-1 from the minimal solution."""
    ratios = np.zeros(L_start + 1)
    for l in range(L_start, am, -1):
        denom = nu * h_coeff(l, params) - np.sqrt((l + 1) ** 2 - am * am) * ratios[l]
        if abs(denom) < 1e-300 or abs(denom) < 1e-14 * abs(nu * h_coeff(l, params)):
            logger.error(f"backward Chandrasekhar recursion hit a zero divisor at l={l}, nu={nu}")
            raise IllConditionedError(f"backward Chandrasekhar recursion is ill-conditioned at nu={nu:.6g}")
        ratios[l - 1] = np.sqrt(l * l - am * am) / denom
    return ratios


def chandrasekhar_backward(
    m: int, nu: float, L_top: int, L_start: int, params: MediumParams
) -> ChandrasekharTable:
    """Table built from ratios of the minimal (decaying) solution.

    The ratios are seeded with zero at ``L_start`` and ``L_start`` is doubled
    until the lowest ratio is stable. The table agrees with the forward one
    only where ``nu`` is a discrete eigenvalue; ``seed_residual`` measures the
    mismatch with the forward seed sqrt(2|m|+1) g_{|m|+1} = nu h_{|m|} g_{|m|}.
    """
    am = abs(m)
    if L_start <= max(L_top, am + 1):
        raise InvalidInputError(f"L_start={L_start} must exceed L_top={L_top}")

    ratios = _backward_ratios(am, nu, L_start, params)
    for _ in range(BACKWARD_MAX_DOUBLINGS):
        wider = _backward_ratios(am, nu, 2 * L_start, params)
        change = abs(wider[am] - ratios[am]) / max(abs(wider[am]), 1e-300)
        ratios = wider
        L_start *= 2
        if change <= BACKWARD_CONVERGENCE:
            break
        logger.debug(f"backward Chandrasekhar restart: L_start={L_start}, change={change:.2e}")

    values = np.zeros(L_top + 1)
    if am <= L_top:
        values[am] = _diagonal_seed(am)
        for l in range(am, L_top):
            values[l + 1] = ratios[l] * values[l]

    forward_ratio = nu * h_coeff(am, params) / np.sqrt(2 * am + 1)
    seed_residual = abs(ratios[am] - forward_ratio) / max(abs(forward_ratio), 1e-300)
    if m < 0:
        values *= (-1.0) ** am
    return ChandrasekharTable(
        m=m, nu=nu, L_top=L_top, values=values, method="backward", seed_residual=float(seed_residual)
    )


def chandrasekhar_table(m: int, nu: float, L_top: int, params: MediumParams) -> ChandrasekharTable:
    """Forward recurrence for |nu| <= 1, minimal-solution ratios above.

    Falls back to the forward table when the backward one is inconsistent
    with the seed identity, i.e. when nu is not a discrete eigenvalue of the
    continuous problem (ADO eigenvalues approximate those only loosely).
    """
    if abs(nu) <= 1.0:
        return chandrasekhar_forward(m, nu, L_top, params)
    L_start = max(2 * params.l_max, params.l_max + 20, L_top + 2)
    try:
        table = chandrasekhar_backward(m, nu, L_top, L_start, params)
    except IllConditionedError:
        table = None
    if table is None or table.seed_residual > BACKWARD_SEED_TOL:
        residual = float("nan") if table is None else table.seed_residual
        logger.warning(
            f"backward Chandrasekhar table for m={m}, nu={nu:.6g} inconsistent "
            f"(seed residual {residual:.2e}); using forward recurrence"
        )
        return chandrasekhar_forward(m, nu, L_top, params)
    return table


# -- Wigner d-matrices continued to imaginary angles -----------------------------

@dataclass(frozen=True)
class WignerDTable:
    """d^l_{m'm}[i tau(x)] with cos(i tau) = sqrt(1 + x^2).

    ``d`` has shape x.shape + (l_max+1, 2 l_max+1, 2 l_max+1); index
    [..., l, m' + l_max, m + l_max].
    """

    l_max: int
    x: np.ndarray
    d: np.ndarray

    def entry(self, l: int, mp: int, m: int) -> np.ndarray:
        if abs(mp) > l or abs(m) > l:
            raise InvalidInputError(f"Wigner index out of range: l={l}, m'={mp}, m={m}")
        return self.d[..., l, mp + self.l_max, m + self.l_max]

    def unitarity_residual(self, l: int) -> float:
        """max |sum_m (-1)^(m+m'') d_{m'm} d_{mm''} - delta| relative to sum of |terms|."""
        L = self.l_max
        idx = np.arange(-l, l + 1)
        block = self.d[..., l, L - l: L + l + 1, L - l: L + l + 1]
        sign = (-1.0) ** (idx[:, None] + idx[None, :])
        # terms[..., m', m, m''] = d_{m'm} * (-1)^(m+m'') d_{mm''}
        terms = block[..., :, :, None] * (sign * block)[..., None, :, :]
        total = terms.sum(axis=-2)
        scale = np.abs(terms).sum(axis=-2)
        residual = np.abs(total - np.eye(2 * l + 1)) / scale
        return float(np.max(residual))


def wigner_d_continued(l_max: int, x: ArrayLike) -> WignerDTable:
    """Pyramid construction of the continued d-matrices for every l <= l_max.

    Entries with first index a >= 0 and |b| <= a are built directly: rows
    a <= l-2 by the three-term recurrence in l, rows a = l and a = l-1 by
    descent from their diagonal corners. The rest follow from the symmetries
    d_ab = (-1)^(a+b) d_ba = d_{-b,-a} = (-1)^(a+b) d_{-a,-b}.
    """
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)):
        raise InvalidInputError("Wigner continuation argument must be finite")
    x = np.abs(x)
    L = l_max
    c = np.sqrt(1.0 + x * x)
    t = x / (1.0 + c)
    d = np.zeros(x.shape + (L + 1, 2 * L + 1, 2 * L + 1), dtype=complex)

    def put(l, a, b, value):
        d[..., l, a + L, b + L] = value

    def get(l, a, b):
        return d[..., l, a + L, b + L]

    put(0, 0, 0, 1.0)
    for l in range(1, L + 1):
        for a in range(0, l - 1):
            for b in range(-a, a + 1):
                coef = l * (2 * l - 1) / np.sqrt((l * l - a * a) * (l * l - b * b))
                lower = 0.0
                if l >= 2:
                    lower = (
                        np.sqrt(((l - 1) ** 2 - a * a) * ((l - 1) ** 2 - b * b))
                        / ((l - 1) * (2 * l - 1))
                        * get(l - 2, a, b)
                    )
                put(l, a, b, coef * ((c - a * b / (l * (l - 1))) * get(l - 1, a, b) - lower))

        # a = l: corner, then descent in b
        corner = get(l - 1, l - 1, l - 1) if l > 1 else 1.0
        put(l, l, l, 0.5 * (1 + c) * corner)
        for b in range(l - 1, -l - 1, -1):
            put(l, l, b, -1j * t * np.sqrt((l + b + 1) / (l - b)) * get(l, l, b + 1))

        # a = l - 1
        put(l, l - 1, l - 1, (l * c - l + 1) * corner)
        for b in range(l - 2, -l, -1):
            ratio = (l * c - b) / (l * c - b - 1) * np.sqrt((l + b + 1) / (l - b))
            put(l, l - 1, b, -1j * t * ratio * get(l, l - 1, b + 1))

        for a in range(-l, l + 1):
            for b in range(-l, l + 1):
                if a >= 0 and abs(b) <= a:
                    continue
                if abs(a) <= b:
                    put(l, a, b, (-1.0) ** (a + b) * get(l, b, a))
                elif b < 0 and abs(a) <= -b:
                    put(l, a, b, get(l, -b, -a))
                else:
                    put(l, a, b, (-1.0) ** (a + b) * get(l, -a, -b))

    zero = x == 0.0
    if np.any(zero):
        identity = np.zeros((L + 1, 2 * L + 1, 2 * L + 1), dtype=complex)
        for l in range(L + 1):
            for a in range(-l, l + 1):
                identity[l, a + L, a + L] = 1.0
        d[zero] = identity
    return WignerDTable(l_max=l_max, x=x, d=d)


def wigner_d_column(l_max: int, x: ArrayLike) -> np.ndarray:
    """d^l_00[i tau(x)] for l = 0..l_max on the last axis.

    The central column of the pyramid: the three-term recurrence with
    m' = m = 0, without materializing the full table.
    """
    x = np.abs(np.asarray(x, dtype=float))
    c = np.sqrt(1.0 + x * x)
    column = np.zeros(x.shape + (l_max + 1,))
    column[..., 0] = 1.0
    if l_max >= 1:
        column[..., 1] = c
    for l in range(2, l_max + 1):
        column[..., l] = ((2 * l - 1) * c * column[..., l - 1] - (l - 1) * column[..., l - 2]) / l
    return column


def rotated_spherical_harmonic(
    l: int,
    m: int,
    mu: ArrayLike,
    phi: ArrayLike,
    table: WignerDTable,
    phi_khat: float,
    conjugate: bool = False,
) -> np.ndarray:
    """(r Y_lm)(mu, phi) = sum_m' e^{-i m' phi_k} d^l_{m'm} Y_lm'(mu, phi).

    With ``conjugate`` the rotated Y*_lm is returned, i.e. the sum with
    e^{+i m' phi_k} and Y*_lm'. The d entries are not conjugated.
    """
    total = 0.0
    for mp in range(-l, l + 1):
        Y = spherical_harmonic(l, mp, mu, phi)
        if conjugate:
            total = total + np.exp(1j * mp * phi_khat) * table.entry(l, mp, m) * np.conj(Y)
        else:
            total = total + np.exp(-1j * mp * phi_khat) * table.entry(l, mp, m) * Y
    return total


# -- Bessel ----------------------------------------------------------------------

def bessel_j0(x: ArrayLike) -> ArrayLike:
    return j0(x)


def j0_tail_correction(q: ArrayLike, rho: float) -> ArrayLike:
    """d(q, rho) = q J0(q rho) minus its two-term asymptotic expansion."""
    q = np.asarray(q, dtype=float)
    s = q * rho
    if np.any(s < np.pi / 8):
        raise InvalidInputError("j0_tail_correction requires q*rho >= pi/8")
    phase = s - np.pi / 4
    asymptotic = np.sqrt(2 * q / (np.pi * rho)) * (
        (1 - 9 / (128 * s * s)) * np.cos(phase) + (1 / (8 * s) - 75 / (1024 * s ** 3)) * np.sin(phase)
    )
    return q * j0(s) - asymptotic
