"""Singular-eigenfunction oracle for phase functions truncated at l_max <= 1.

Closed forms of the m = 0 dispersion function Lambda(z), its derivative,
the discrete root nu_0 > 1 and the continuum normalization on (0, 1). The
analytic kernel F_a(q, z) is the discrete mode plus a Gauss-graded
continuum integral and plugs into the same Hankel inverter as the ADO
kernels.
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from numpy.polynomial import legendre as npleg
from numpy.polynomial import polynomial as nppoly
from scipy.optimize import brentq

from app.core.config import settings
from app.core.exceptions import InvalidInputError, QuadratureConvergenceError, RootNotFoundError
from app.core.logger import logger
from app.schemas.hankel import DEConfig
from app.schemas.medium import MediumParams
from app.services.halfspace import SpectralKernel, kernel_energy_density
from app.services.specfun import chandrasekhar_forward, legendre_table

ROOT_TOL = 1e-12
Z_CEILING = 1e6
SERIES_SWITCH = 4.0
CONTINUUM_BREAKS = (0.0, 0.01, 0.1, 0.5) + tuple(1.0 - 10.0 ** -k for k in range(1, 13)) + (1.0,)


def _require_closed_form(params: MediumParams) -> None:
    if params.l_max > 1:
        raise InvalidInputError("analytic engine requires lmax ≤ 1")


def _anisotropy(params: MediumParams) -> float:
    """a = 3 g (1 - varpi); zero when the phase function is isotropic."""
    return 3.0 * params.phase_moment(1) * (1.0 - params.albedo)


def _tanh_excess(z):
    """z artanh(1/z) - 1, summed as a series for large z to avoid cancellation."""
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = z * np.arctanh(1.0 / z) - 1.0
    u = 1.0 / (z * z)
    series = np.zeros_like(u)
    term = np.ones_like(u)
    for k in range(1, 40):
        term = term * u
        series = series + term / (2 * k + 1)
    return np.where(z > SERIES_SWITCH, series, direct)


def _check_outside(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if np.any(z <= 1.0):
        raise InvalidInputError("dispersion function is evaluated for z > 1 only")
    return z


def lambda_iso(nu, varpi: float):
    nu = np.asarray(nu, dtype=float)
    if np.any(np.abs(nu) >= 1.0):
        raise InvalidInputError("lambda(nu) requires |nu| < 1")
    return 1.0 - varpi * nu * np.arctanh(nu)


def Lambda_l0(z, varpi: float):
    z = _check_outside(z)
    return (1.0 - varpi) - varpi * _tanh_excess(z)


def Lambda_l1(z, params: MediumParams):
    """1 + 3 g varpi (1-varpi) z^2 - (1 + 3 g (1-varpi) z^2) varpi z artanh(1/z)."""
    _require_closed_form(params)
    z = _check_outside(z)
    a = _anisotropy(params)
    varpi = params.albedo
    return (1.0 - varpi) - varpi * _tanh_excess(z) * (1.0 + a * z * z)


def dLambda_dz(z, params: MediumParams):
    _require_closed_form(params)
    z = _check_outside(z)
    a = _anisotropy(params)
    s = _tanh_excess(z)
    ds = (s * (z * z - 1.0) - 1.0) / (z * (z * z - 1.0))
    return -params.albedo * (ds * (1.0 + a * z * z) + 2.0 * a * z * s)


def lambda_m(m: int, nu, params: MediumParams):
    """lambda^m(nu) = 1 - (varpi nu/2) PV int g^m(nu, mu)(1-mu^2)^|m|/(nu - mu) dmu on |nu| < 1.

    The numerator is a polynomial G(mu); with G(mu) = G(nu) + (mu - nu) H(mu)
    the principal value is 2 G(nu) artanh(nu) - int H.
    """
    am = abs(m)
    nu_values = np.atleast_1d(np.asarray(nu, dtype=float))
    if np.any(np.abs(nu_values) >= 1.0):
        raise InvalidInputError("lambda^m(nu) requires |nu| < 1")
    if am > params.l_max:
        return np.ones_like(nu_values) if np.ndim(nu) else 1.0

    degree = params.l_max + 2 * am
    nodes, _ = npleg.leggauss(degree + 1)
    weights = np.array([(2 * l + 1) * params.phase_moment(l) for l in range(params.l_max + 1)])
    P = legendre_table(params.l_max, am, nodes) * (1 - nodes * nodes) ** am
    out = np.empty_like(nu_values)
    for k, v in enumerate(nu_values):
        g_values = chandrasekhar_forward(am, v, params.l_max, params).values
        samples = (weights * g_values) @ P
        G = nppoly.polyfit(nodes, samples, degree)
        G_nu = nppoly.polyval(v, G)
        numerator = G.copy()
        numerator[0] -= G_nu
        H, _ = nppoly.polydiv(numerator, np.array([-v, 1.0]))
        H_int = nppoly.polyint(H)
        principal = 2.0 * G_nu * np.arctanh(v) - (nppoly.polyval(1.0, H_int) - nppoly.polyval(-1.0, H_int))
        out[k] = 1.0 - 0.5 * params.albedo * v * principal
    return out if np.ndim(nu) else float(out[0])


def find_nu0(params: MediumParams) -> float:
    """The discrete root of Lambda on (1, inf) by bracketing, Brent and a Newton polish."""
    _require_closed_form(params)
    lo = 1.0 + 1e-12
    if Lambda_l1(lo, params) >= 0:
        raise RootNotFoundError(f"no discrete root found (albedo={params.albedo:.6g} puts it within 1e-12 of 1)")
    hi = 2.0
    while Lambda_l1(hi, params) <= 0:
        hi *= 2.0
        if hi > Z_CEILING:
            logger.error(f"dispersion function has no sign change below z={Z_CEILING:g}")
            raise RootNotFoundError("no discrete root found")

    root = brentq(lambda z: float(Lambda_l1(z, params)), lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    for _ in range(3):
        value = float(Lambda_l1(root, params))
        if value == 0.0:
            break
        step = value / float(dLambda_dz(root, params))
        if root - step <= 1.0:
            break
        root -= step
        if abs(step) <= 4 * np.finfo(float).eps * root:
            break

    residual = abs(float(Lambda_l1(root, params)))
    if residual > ROOT_TOL:
        raise RootNotFoundError(f"no discrete root found to tolerance (|Lambda|={residual:.2e})")
    logger.debug(f"nu_0 = {root:.15g}, |Lambda(nu_0)| = {residual:.1e}")
    return root


def count_roots(params: MediumParams, samples: int = 20000) -> int:
    """Sign changes of Lambda on a log-spaced grid over (1, 1e6]."""
    z = 1.0 + np.logspace(-12, np.log10(Z_CEILING), samples)
    signs = np.sign(Lambda_l1(z, params))
    return int(np.count_nonzero(np.diff(signs)))


def N0_discrete(nu0: float, params: MediumParams) -> float:
    """(varpi nu0^2/2) g^0(nu0, nu0) Lambda'(nu0), g^0(nu0, nu0) = 1 + 3 g (1-varpi) nu0^2."""
    g_nn = 1.0 + _anisotropy(params) * nu0 * nu0
    return float(0.5 * params.albedo * nu0 * nu0 * g_nn * dLambda_dz(nu0, params))


def N0_continuum(nu, params: MediumParams):
    """nu |Lambda^+(nu)|^2 from the boundary values of Lambda on the cut."""
    _require_closed_form(params)
    nu = np.asarray(nu, dtype=float)
    if np.any(nu <= 0.0) or np.any(nu >= 1.0):
        raise InvalidInputError("continuum normalization is defined on 0 < nu < 1")
    a = _anisotropy(params)
    varpi = params.albedo
    real = (1.0 + a * nu * nu) * lambda_iso(nu, varpi) - a * (1.0 - varpi) * nu * nu
    imag = 0.5 * np.pi * varpi * nu * (1.0 + a * nu * nu)
    return nu * (real * real + imag * imag)


def continuum_rule(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Composite n-point Gauss on (0, 1), graded towards both ends."""
    x, w = npleg.leggauss(n)
    edges = np.asarray(CONTINUUM_BREAKS)
    left, width = edges[:-1], np.diff(edges)
    nodes = (left[:, None] + 0.5 * width[:, None] * (x[None, :] + 1)).ravel()
    weights = (0.5 * width[:, None] * w[None, :]).ravel()
    return nodes, weights


@dataclass(frozen=True)
class Dispersion:
    params: MediumParams
    nu0: float
    N0_discrete: float

    @classmethod
    def from_params(cls, params: MediumParams) -> "Dispersion":
        nu0 = find_nu0(params)
        return cls(params=params, nu0=nu0, N0_discrete=N0_discrete(nu0, params))

    def continuum_integral(self, q: float, z: float, n: int) -> float:
        """int_0^1 nu exp(-k_z(nu q) z/nu)/N0(nu) d nu with the n-point composite rule."""
        nodes, weights = continuum_rule(n)
        decay = np.exp(-np.sqrt(1.0 / nodes ** 2 + q * q) * z)
        return float(np.sum(weights * nodes * decay / N0_continuum(nodes, self.params)))

    def converged_rule(self, samples=((0.0, 0.0), (0.0, 1.0), (1.0, 1.0))) -> int:
        n = settings.CONTINUUM_RULE
        residual = np.inf
        for _ in range(settings.CONTINUUM_MAX_DOUBLINGS + 1):
            residual = max(
                abs(self.continuum_integral(q, z, 2 * n) - self.continuum_integral(q, z, n))
                / max(abs(self.continuum_integral(q, z, 2 * n)), 1e-300)
                for q, z in samples
            )
            if residual < settings.CONTINUUM_TOL:
                return n
            logger.debug(f"continuum rule {n} points/panel: residual {residual:.2e}, doubling")
            n *= 2
        logger.error("continuum quadrature of the analytic kernel did not converge")
        raise QuadratureConvergenceError("continuum quadrature did not converge", residual)


class AnalyticKernel(SpectralKernel):
    """F_a(q, z) = nu0 e^{-k_z(nu0 q) z/nu0}/N0(nu0) + int_0^1 nu e^{-k_z(nu q) z/nu}/N0(nu) d nu.

    The continuum nodes enter as extra modes with weights w_j nu_j/N0(nu_j).
    """

    engine = "analytic"

    def __init__(self, dispersion: Dispersion, rule: Optional[int] = None):
        params = dispersion.params
        super().__init__(params, 1.0 - params.albedo)
        self.dispersion = dispersion
        self.rule = rule or dispersion.converged_rule()
        nodes, weights = continuum_rule(self.rule)
        self.nu = np.concatenate([[dispersion.nu0], nodes])
        self.weights = np.concatenate(
            [[dispersion.nu0 / dispersion.N0_discrete], weights * nodes / N0_continuum(nodes, params)]
        )

    def mode_table(self, q: np.ndarray):
        R = np.sqrt(1.0 / self.nu[:, None] ** 2 + q[None, :] ** 2)
        A = np.broadcast_to(self.weights[:, None], R.shape)
        return A, R


def analytic_kernel(q, z, disp: Dispersion) -> np.ndarray:
    return AnalyticKernel(disp).evaluate(q, z)


def analytic_energy_density(rho_mm: float, z_mm, params: MediumParams, cfg: Optional[DEConfig] = None) -> np.ndarray:
    _require_closed_form(params)
    kernel = AnalyticKernel(Dispersion.from_params(params))
    return kernel_energy_density(kernel, rho_mm, z_mm, cfg)
