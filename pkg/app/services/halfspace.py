"""Half-space solution assembled from plane-wave eigenmodes.

Spectral kernels are sums F(q, z) = sum_n A_n(q) exp(-R_n(q) z) over the
m = 0 family; the Hankel inverter only needs ``evaluate``. Energy densities
are returned in physical units with the mu_t^2 factor folded in; lengths
are taken in mm and scaled by mu_t here and nowhere else.
"""
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Tuple, Union

import numpy as np
from numpy.polynomial import legendre as npleg
from numpy.polynomial import polynomial as nppoly

from app.core.config import settings
from app.core.exceptions import IllConditionedError, InvalidInputError, PoleProximityError
from app.core.logger import logger
from app.schemas.hankel import DEConfig
from app.schemas.medium import MediumParams
from app.schemas.source import BoundarySamples, Incidence, SourceKind, SourceSpec
from app.services.eigen import EigenFamily, solve_families
from app.services.hankel import invert_profile
from app.services.modes import ModeFrame, rotated_Phi
from app.services.specfun import wigner_d_column

ModeTable = Tuple[np.ndarray, np.ndarray]


def expansion_coefficients(family: EigenFamily, n: int, frame: ModeFrame) -> float:
    """a_n^m(q) = 1/(2 pi k_z(nu_n q) N^m(nu_n))."""
    norm = float(family.norm[n])
    if norm == 0.0:
        logger.error(f"m={family.m}, n={n}: normalization factor vanished")
        raise IllConditionedError(f"zero normalization factor for mode m={family.m}, n={n}")
    return 1.0 / (2 * np.pi * frame.k_z_hat * norm)


def _moment_coefficients(family: EigenFamily, n: int) -> np.ndarray:
    """(2l+1) g^l g_l^m(nu_n) for l = 0..l_max."""
    params = family.params
    weights = np.array([(2 * l + 1) * params.phase_moment(l) for l in range(params.l_max + 1)])
    return weights * family.g_table[n, : params.l_max + 1]


class SpectralKernel:
    """Base evaluator; subclasses provide the per-q mode table (A, R)."""

    engine = "spectral"

    def __init__(self, params: MediumParams, prefactor: float):
        self.params = params
        self.prefactor = prefactor
        self._tables: Dict[bytes, ModeTable] = {}

    def mode_table(self, q: np.ndarray) -> ModeTable:
        raise NotImplementedError

    def breakpoints(self) -> np.ndarray:
        return np.empty(0)

    def _cached_table(self, q: np.ndarray) -> ModeTable:
        key = q.tobytes()
        table = self._tables.get(key)
        if table is None:
            table = self.mode_table(q)
            if len(self._tables) >= settings.KERNEL_CACHE_SIZE:
                self._tables.pop(next(iter(self._tables)))
            self._tables[key] = table
        return table

    def evaluate(self, q, z) -> np.ndarray:
        """F at every (q, z) pair, shape (len(q), len(z))."""
        q = np.ascontiguousarray(np.atleast_1d(np.asarray(q, dtype=float)))
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if np.any(q < 0) or np.any(z < 0):
            raise InvalidInputError("kernel arguments q and z must be non-negative")
        A, R = self._cached_table(q)
        out = np.empty((q.size, z.size))
        with np.errstate(invalid="ignore", over="ignore"):
            for k, depth in enumerate(z):
                decay = np.exp(-R * depth)
                out[:, k] = np.where(decay > 0, A * decay, 0.0).sum(axis=0)
        return out


class IsoKernel(SpectralKernel):
    """F_iso(q, z) = sum_n nu_n/N(nu_n) exp(-k_z(nu_n q) z/nu_n).

    Unit source on all 2N ordinates. Projected onto the decaying modes only,
    the boundary intensity satisfies I(s) + I(s') = 1 with s' the mirror of s
    in the surface: the inward intensity is one minus the mirrored outward
    intensity.
    """

    engine = "ado-iso"

    def __init__(self, params: MediumParams):
        super().__init__(params, 1.0 - params.albedo)
        self.family = solve_families(params)[0]

    def mode_table(self, q: np.ndarray) -> ModeTable:
        nu = self.family.nu[:, None]
        k_hat = np.sqrt(1.0 + (nu * q[None, :]) ** 2)
        A = np.broadcast_to(nu / self.family.norm[:, None], k_hat.shape)
        return A, k_hat / nu


def averaged_incidence(family: EigenFamily, n: int, mu0: float, q: np.ndarray, n_phi: Optional[int] = None):
    """Azimuthal mean of phi^0(nu_n, s0.k) over the incident azimuth, with k_z(nu_n q).

    phi^0(nu, w) = (varpi nu/2)[g(nu, nu)/(nu - w) - Q(w)] with Q the
    polynomial quotient of g(nu, w) - g(nu, nu) by w - nu. The pole part
    averages to sign(A)/sqrt(A^2 + b^2) in closed form; the polynomial part
    is averaged on a uniform azimuth grid, exact for its degree.
    """
    params = family.params
    nu = float(family.nu[n])
    power = npleg.leg2poly(_moment_coefficients(family, n))
    g_nn = nppoly.polyval(nu, power)
    numerator = power.copy()
    numerator[0] -= g_nn
    quotient, _ = nppoly.polydiv(numerator, np.array([-nu, 1.0]))

    x = nu * q
    k_hat = np.sqrt(1.0 + x * x)
    A = nu - k_hat * mu0
    b = x * np.sqrt(1.0 - mu0 * mu0)
    radius = np.hypot(A, b)
    if np.any(radius < settings.POLE_GUARD):
        logger.error(f"incident ordinate mu0={mu0:.15g} sits on the pole of nu={nu:.15g}")
        raise PoleProximityError(f"eigenvalue nu={nu:.15g} coincides with incident cosine; perturb N")

    n_phi = n_phi or settings.AZIMUTH_NODES
    theta = 2 * np.pi * np.arange(n_phi) / n_phi
    w = (k_hat * mu0)[:, None] - 1j * b[:, None] * np.cos(theta)[None, :]
    smooth = -nppoly.polyval(w, quotient).mean(axis=1).real
    pole = g_nn * np.sign(A) / radius
    return 0.5 * params.albedo * nu * (smooth + pole), k_hat


class OrdinateKernel(SpectralKernel):
    """Response to a unit source at ordinate i0 (1-based), uniform in azimuth.

    K(q, z) = sum_n w0 mu0 <phi^0(nu_n, s0.k)>/(k_z N(nu_n)) exp(-k_z z/nu_n).
    For nu_n > mu0 > 0 the mean of the pole term jumps where nu_n = k_z mu0;
    those q are exposed as breakpoints for the Hankel inverter.
    """

    engine = "ordinate"

    def __init__(self, params: MediumParams, i0: int, prefactor: float = 1.0):
        super().__init__(params, prefactor)
        self.family = solve_families(params)[0]
        quad = self.family.quad
        if not 1 <= i0 <= 2 * quad.N:
            raise InvalidInputError(f"ordinate index i0={i0} out of range 1..{2 * quad.N}")
        self.i0 = i0
        self.mu0 = float(quad.mu[i0 - 1])
        self.w0 = float(quad.w[i0 - 1])

    def mode_table(self, q: np.ndarray) -> ModeTable:
        family = self.family
        A = np.empty((family.size, q.size))
        R = np.empty_like(A)
        for n in range(family.size):
            mean_phi, k_hat = averaged_incidence(family, n, self.mu0, q)
            A[n] = self.w0 * self.mu0 * mean_phi / (k_hat * family.norm[n])
            R[n] = k_hat / family.nu[n]
        return A, R

    def breakpoints(self) -> np.ndarray:
        if self.mu0 <= 0:
            return np.empty(0)
        nu = self.family.nu[self.family.nu > self.mu0]
        return np.sqrt((nu / self.mu0) ** 2 - 1.0) / nu


class PencilKernel(OrdinateKernel):
    """Pencil beam entering at ordinate i0 = N, the most normal one.

    ``incidence="normal"`` replaces the incident direction by the surface
    normal, prefactor varpi/(4 pi). Its factor 1/(nu_n - k_z) has a simple
    pole at q = sqrt(nu_n^2 - 1)/nu_n for every nu_n > 1; the poles are
    declared to the Hankel inverter, which takes the principal value.
    ``incidence="averaged"`` uses the azimuth-averaged response at any
    inward ordinate i0 instead, prefactor 1/(2 pi); it has jumps, no poles.
    """

    engine = "ado-pencil"

    def __init__(
        self,
        params: MediumParams,
        i0: Optional[int] = None,
        incidence: Union[Incidence, str] = Incidence.NORMAL,
    ):
        i0 = params.N if i0 is None else i0
        if not 1 <= i0 <= params.N:
            raise InvalidInputError(f"pencil beam must enter along an inward ordinate 1..{params.N}, got {i0}")
        try:
            incidence = Incidence(incidence)
        except ValueError:
            raise InvalidInputError(f"unknown incidence {incidence!r}") from None
        if incidence == Incidence.NORMAL and i0 != params.N:
            raise InvalidInputError("normal incidence is defined for i0 = N only")
        prefactor = 1.0 / (2 * np.pi) if incidence == Incidence.AVERAGED else params.albedo / (4 * np.pi)
        super().__init__(params, i0, prefactor)
        self.incidence = incidence

    def mode_table(self, q: np.ndarray) -> ModeTable:
        if self.incidence == Incidence.AVERAGED:
            return super().mode_table(q)
        family = self.family
        nu = family.nu[:, None]
        x = nu * q[None, :]
        k_hat = np.sqrt(1.0 + x * x)
        gap = nu - k_hat
        if np.any(np.abs(gap) < settings.POLE_GUARD):
            logger.error("normal-incidence pencil kernel evaluated next to a pole")
            raise PoleProximityError("pencil kernel denominator nu_n - k_z vanishes at a quadrature node; perturb N")
        coef = np.array([_moment_coefficients(family, n) for n in range(family.size)])
        series = np.einsum("kjl,kl->kj", wigner_d_column(self.params.l_max, x), coef)
        A = self.w0 * self.mu0 * nu * series / (k_hat * family.norm[:, None] * gap)
        return A, k_hat / nu

    def breakpoints(self) -> np.ndarray:
        return super().breakpoints() if self.incidence == Incidence.AVERAGED else np.empty(0)

    def poles(self) -> np.ndarray:
        if self.incidence == Incidence.AVERAGED:
            return np.empty(0)
        nu = self.family.nu[self.family.nu > 1.0]
        return np.sqrt(nu * nu - 1.0) / nu


def pencil_kernel(q, z, params: MediumParams, incidence: Union[Incidence, str] = Incidence.NORMAL) -> np.ndarray:
    return PencilKernel(params, incidence=incidence).evaluate(q, z)


def iso_kernel(q, z, params: MediumParams) -> np.ndarray:
    return IsoKernel(params).evaluate(q, z)


def ordinate_kernel(i0: int, q, z, params: MediumParams) -> np.ndarray:
    return OrdinateKernel(params, i0).evaluate(q, z)


def source_kernel(source: SourceSpec, params: MediumParams) -> SpectralKernel:
    if source.kind == SourceKind.PENCIL:
        if source.i0 in (None, params.N):
            return PencilKernel(params)
        return PencilKernel(params, i0=source.i0, incidence=Incidence.AVERAGED)
    if source.kind == SourceKind.ISOTROPIC:
        return IsoKernel(params)
    raise InvalidInputError("general sources have no single spectral kernel; use greens_convolution")


def intensity_fourier(
    q_vec: Tuple[float, float],
    z: float,
    i: int,
    phi,
    source: SourceSpec,
    params: MediumParams,
    m_orders: Optional[Iterable[int]] = None,
) -> np.ndarray:
    """Fourier-space specific intensity at ordinate i (1-based) and azimuths ``phi``.

    ``m_orders`` restricts the azimuthal sum (default -l_max..l_max).
    """
    if z < 0:
        raise InvalidInputError(f"depth must be non-negative, got {z}")
    families = solve_families(params)
    quad = families[0].quad
    if not 1 <= i <= 2 * quad.N:
        raise InvalidInputError(f"ordinate index {i} out of range 1..{2 * quad.N}")
    qx, qy = q_vec
    q = float(np.hypot(qx, qy))
    phi_q = float(np.arctan2(qy, qx))
    mu = quad.mu[i - 1]
    phi = np.asarray(phi, dtype=float)
    total = np.zeros(phi.shape, dtype=complex)

    if source.kind == SourceKind.PENCIL:
        i0 = params.N if source.i0 is None else source.i0
        if not 1 <= i0 <= 2 * quad.N:
            raise InvalidInputError(f"ordinate index i0={i0} out of range 1..{2 * quad.N}")
        mu0, w0 = quad.mu[i0 - 1], quad.w[i0 - 1]
        orders = range(-params.l_max, params.l_max + 1) if m_orders is None else m_orders
        for m in orders:
            if abs(m) > params.l_max:
                raise InvalidInputError(f"|m|={abs(m)} exceeds l_max={params.l_max}")
            family = families[abs(m)]
            for n in range(family.size):
                frame = ModeFrame.from_q(float(family.nu[n]), q, phi_q)
                wigner = frame.wigner(params.l_max)
                incident = rotated_Phi(m, family, n, frame, mu0, source.phi0, conjugate=True, wigner=wigner)
                outgoing = rotated_Phi(m, family, n, frame, mu, phi, wigner=wigner)
                decay = np.exp(-frame.k_z_hat * z / frame.nu)
                total += w0 * mu0 * expansion_coefficients(family, n, frame) * incident * outgoing * decay
        return total

    if source.kind == SourceKind.ISOTROPIC:
        family = families[0]
        for n in range(family.size):
            frame = ModeFrame.from_q(float(family.nu[n]), q, phi_q)
            outgoing = rotated_Phi(0, family, n, frame, mu, phi, wigner=frame.wigner(params.l_max))
            decay = np.exp(-frame.k_z_hat * z / frame.nu)
            total += (1 - params.albedo) * frame.nu / family.norm[n] * outgoing * decay
        return total

    raise InvalidInputError("intensity_fourier supports pencil and isotropic sources")


def kernel_energy_density(kernel: SpectralKernel, rho_mm: float, z_mm, cfg: Optional[DEConfig] = None) -> np.ndarray:
    """prefactor * mu_t^2 * int_0^inf q J0(q rho*) F(q, z*) dq at every depth."""
    if rho_mm <= 0:
        raise InvalidInputError(f"rho must be positive, got {rho_mm}")
    cfg = cfg or DEConfig()
    mu_t = kernel.params.mu_t
    z_star = mu_t * np.atleast_1d(np.asarray(z_mm, dtype=float))
    values = invert_profile(kernel, mu_t * rho_mm, z_star, cfg)
    return kernel.prefactor * mu_t ** 2 * values


def energy_density(
    source: SourceSpec, rho_mm: float, z_mm, params: MediumParams, cfg: Optional[DEConfig] = None
) -> np.ndarray:
    if source.kind == SourceKind.GENERAL:
        return greens_convolution(source.boundary, rho_mm, z_mm, params, cfg).u
    return kernel_energy_density(source_kernel(source, params), rho_mm, z_mm, cfg)


@dataclass(frozen=True)
class GreensResult:
    u: np.ndarray
    truncated: bool


def _trapezoid_weights(nodes: np.ndarray) -> np.ndarray:
    weights = np.zeros_like(nodes)
    half = 0.5 * np.diff(nodes)
    weights[:-1] += half
    weights[1:] += half
    return weights


def greens_convolution(
    boundary: BoundarySamples,
    rho_mm: Union[float, Tuple[float, float]],
    z_mm,
    params: MediumParams,
    cfg: Optional[DEConfig] = None,
) -> GreensResult:
    """Energy density of a boundary source g(x, y, mu_i0), uniform in azimuth.

    Sums the ordinate responses over the sampled grid (trapezoid weights,
    lengths in mm). ``rho_mm`` is a point (x, y) or a distance along x.
    """
    cfg = cfg or DEConfig()
    quad = solve_families(params)[0].quad
    values = boundary.values
    if values.shape[2] != 2 * quad.N:
        raise InvalidInputError(f"boundary samples carry {values.shape[2]} ordinates, medium has {2 * quad.N}")
    point = np.asarray(rho_mm, dtype=float)
    if point.ndim == 0:
        point = np.array([float(point), 0.0])
    z = np.atleast_1d(np.asarray(z_mm, dtype=float))
    mu_t = params.mu_t

    area = np.outer(_trapezoid_weights(boundary.x), _trapezoid_weights(boundary.y))
    X, Y = np.meshgrid(boundary.x, boundary.y, indexing="ij")
    distance = np.round(np.hypot(point[0] - X, point[1] - Y), 12)

    u = np.zeros(z.size)
    for index in range(values.shape[2]):
        weighted = area * values[..., index]
        support = weighted != 0
        if not np.any(support):
            continue
        if np.any(distance[support] < 1e-12):
            raise InvalidInputError("evaluation point coincides with a source sample; on-axis densities are not supported")
        kernel = OrdinateKernel(params, index + 1)
        radii, inverse = np.unique(distance[support], return_inverse=True)
        sums = np.bincount(inverse.ravel(), weights=weighted[support])
        for radius, weight in zip(radii, sums):
            u += weight * invert_profile(kernel, mu_t * radius, mu_t * z, cfg)
        logger.debug(f"ordinate {index + 1}: {radii.size} distinct source distances")

    reach = 3.0 * params.transport_length / mu_t
    truncated = boundary.extent < reach
    if truncated:
        logger.warning(f"boundary grid extent {boundary.extent:g} mm is below three transport lengths ({reach:g} mm)")
    return GreensResult(u=mu_t ** 2 * u, truncated=truncated)
