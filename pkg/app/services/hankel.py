"""Inverse Hankel transform u = int_0^inf J0(q rho) F(q, z) q dq.

The integral is split at a = pi/(4 rho) into a direct low-q piece, the
correction d(q, rho) against the two-term Bessel asymptotics, and the
asymptotic (oscillatory) remainder evaluated with the double-exponential
formula for Fourier-type integrals. Kernels are any object with an
``evaluate(q, z)`` method returning an array of shape (len(q), len(z)).

Kernels may declare ``breakpoints()`` (jumps) and ``poles()`` (simple
poles on the real q axis). Poles are integrated in the principal-value
sense: each sits at the centre of its own panel, where the symmetric
Gauss nodes cancel the odd part of 1/(q - p).
"""
import functools
from typing import Protocol, Tuple

import numpy as np

from app.core.config import settings
from app.core.exceptions import InvalidInputError, PoleProximityError, QuadratureConvergenceError
from app.core.logger import logger
from app.schemas.hankel import DEConfig
from app.services.specfun import j0_tail_correction, bessel_j0

EXP_LIMIT = 700.0
PV_GRADING_LEVELS = 6
POLE_MARGIN = 1.5


class Kernel(Protocol):
    def evaluate(self, q: np.ndarray, z: np.ndarray) -> np.ndarray:
        ...


@functools.lru_cache(maxsize=16)
def _gauss(n: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def split_point(rho_star: float) -> float:
    if rho_star <= 0:
        raise InvalidInputError(f"rho must be positive, got {rho_star}")
    return np.pi / (4 * rho_star)


def de_phi(tau):
    tau = np.asarray(tau, dtype=float)
    e = -6 * np.sinh(tau)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        value = tau / -np.expm1(np.minimum(e, EXP_LIMIT))
    value = np.where(tau == 0, 1.0 / 6.0, value)
    return np.where(e > EXP_LIMIT, 0.0, value)


def de_phi_prime(tau):
    tau = np.asarray(tau, dtype=float)
    e = -6 * np.sinh(tau)
    safe = np.minimum(e, EXP_LIMIT)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        denom = -np.expm1(safe)
        value = (denom - 6 * tau * np.cosh(tau) * np.exp(safe)) / denom ** 2
    value = np.where(tau == 0, 0.5, value)
    return np.where(e > EXP_LIMIT, 0.0, value)


def _asymptotic_factors(q: np.ndarray, rho_star: float, delta: float):
    """Weights of cos(s rho) and sin(s rho) in sqrt(q)[A cos(q rho - pi/4) + B sin(q rho - pi/4)]."""
    x = q * rho_star
    A = 1 - 9 / (128 * x * x)
    B = 1 / (8 * x) - 75 / (1024 * x ** 3)
    root = np.sqrt(q)
    c, s = np.cos(delta), np.sin(delta)
    return root * (A * c + B * s), root * (B * c - A * s)


def _de_sums(kernel: Kernel, rho_star: float, a: float, z: np.ndarray, h: float, N_k: int):
    """(S1 + S2, sum of |terms|) for the cosine (half-step) and sine (integer-step) sums."""
    delta = a * rho_star - np.pi / 4
    k = np.arange(-N_k, N_k + 1)
    scale = np.pi / (h * rho_star)

    t1 = k * h + h / 2
    s1 = scale * de_phi(t1)
    w1 = de_phi_prime(t1)
    q1 = s1 + a
    cos_weight, _ = _asymptotic_factors(q1, rho_star, delta)
    terms1 = (cos_weight * np.cos(s1 * rho_star) * w1)[:, None] * kernel.evaluate(q1, z)

    t2 = k * h
    s2 = scale * de_phi(t2)
    w2 = de_phi_prime(t2)
    q2 = s2 + a
    _, sin_weight = _asymptotic_factors(q2, rho_star, delta)
    terms2 = (sin_weight * np.sin(s2 * rho_star) * w2)[:, None] * kernel.evaluate(q2, z)

    prefactor = np.pi / rho_star
    total = prefactor * (terms1.sum(axis=0) + terms2.sum(axis=0))
    magnitude = prefactor * (np.abs(terms1).sum(axis=0) + np.abs(terms2).sum(axis=0))
    return total, magnitude


def oscillatory_sums(kernel: Kernel, rho_star: float, z_star, cfg: DEConfig, a: float = None) -> np.ndarray:
    """int_0^inf (f1 + f2) ds by the double-exponential sums, refined until stable."""
    z = np.atleast_1d(np.asarray(z_star, dtype=float))
    a = split_point(rho_star) if a is None else a
    total, magnitude = _de_sums(kernel, rho_star, a, z, cfg.h, cfg.N_k)
    current = cfg
    residual = np.inf
    for refinement in range(cfg.max_refinements):
        current = current.refined()
        refined, magnitude = _de_sums(kernel, rho_star, a, z, current.h, current.N_k)
        residual = float(np.max(np.abs(refined - total) / np.maximum(magnitude, 1e-300)))
        total = refined
        logger.debug(f"DE refinement {refinement + 1}: h={current.h:g}, N_k={current.N_k}, residual={residual:.2e}")
        if residual < cfg.convergence:
            return total
    if cfg.max_refinements == 0:
        return total
    logger.error(f"double-exponential sums did not converge at rho*={rho_star:g}")
    raise QuadratureConvergenceError(f"oscillatory Hankel sums did not converge at rho*={rho_star:g}", residual)


def _low_edges(rho_star: float, a: float, breakpoints: np.ndarray, poles: np.ndarray = None) -> np.ndarray:
    """Panel edges on [0, a]: one panel when a is the default split, else
    panels no wider than one period of J0 with the kernel's breakpoints added.

    Every pole p gets the panel [p - d, p + d], with d no larger than the
    distance to the nearest edge and half the distance to the nearest other
    pole. Edges at p +- 2^k d grade the neighbouring panels.
    """
    n_panels = max(1, int(np.ceil(a * rho_star / (2 * np.pi))))
    edges = np.linspace(0.0, a, n_panels + 1)
    inside = breakpoints[(breakpoints > 0) & (breakpoints < a)]
    edges = np.unique(np.concatenate([edges, inside]))
    if poles is None or poles.size == 0:
        return edges
    poles = np.unique(poles[(poles > 0) & (poles < a)])
    half_widths = np.abs(edges[None, :] - poles[:, None]).min(axis=1)
    if poles.size > 1:
        gaps = np.diff(poles)
        half_widths[:-1] = np.minimum(half_widths[:-1], 0.5 * gaps)
        half_widths[1:] = np.minimum(half_widths[1:], 0.5 * gaps)
    if np.any(half_widths < settings.POLE_GUARD):
        p = poles[np.argmin(half_widths)]
        logger.error(f"pole at q={p:.15g} has no room for a principal-value panel")
        raise PoleProximityError(f"kernel pole at q={p:.15g} collides with another panel edge; perturb N")

    added = [poles - half_widths, poles + half_widths]
    levels = 2.0 ** np.arange(1, PV_GRADING_LEVELS + 1)
    for p, d in zip(poles, half_widths):
        grading = np.concatenate([p - d * levels, p + d * levels])
        outside = np.all(np.abs(grading[:, None] - poles[None, :]) >= half_widths[None, :], axis=1)
        added.append(grading[outside & (grading > 0.0) & (grading < a)])
    return np.unique(np.concatenate([edges, *added]))


def _low_piece(kernel: Kernel, rho_star: float, edges: np.ndarray, z: np.ndarray, cfg: DEConfig) -> np.ndarray:
    x, w = _gauss(cfg.low_q_rule)
    left, width = edges[:-1], np.diff(edges)
    q = (left[:, None] + 0.5 * width[:, None] * (x[None, :] + 1)).ravel()
    weights = (0.5 * width[:, None] * w[None, :]).ravel() * q * bessel_j0(q * rho_star)
    return weights @ kernel.evaluate(q, z)


def _tail_piece(kernel: Kernel, rho_star: float, a: float, z: np.ndarray, cfg: DEConfig) -> np.ndarray:
    x, w = _gauss(cfg.tail_rule)
    width = 2 * np.pi / rho_star
    starts = a + width * np.arange(cfg.tail_periods)
    q = (starts[:, None] + 0.5 * width * (x[None, :] + 1)).ravel()
    weights = np.tile(0.5 * width * w, cfg.tail_periods)
    total = (weights * j0_tail_correction(q, rho_star)) @ kernel.evaluate(q, z)

    # remainder [q_c, inf) mapped onto t in [0, 1)
    q_c = a + width * cfg.tail_periods
    x, w = _gauss(cfg.tail_mapped_rule)
    t = 0.5 * (x + 1)
    q = q_c + t / (1 - t)
    weights = 0.5 * w / (1 - t) ** 2
    return total + (weights * j0_tail_correction(q, rho_star)) @ kernel.evaluate(q, z)


def _declared(kernel: Kernel, name: str) -> np.ndarray:
    getter = getattr(kernel, name, None)
    if getter is None:
        return np.empty(0)
    return np.asarray(getter(), dtype=float)


def kernel_breakpoints(kernel: Kernel) -> np.ndarray:
    """q locations where the kernel is not smooth (jumps), if it declares any."""
    return _declared(kernel, "breakpoints")


def kernel_poles(kernel: Kernel) -> np.ndarray:
    """q locations of simple poles of the kernel, if it declares any."""
    return _declared(kernel, "poles")


def invert_profile(kernel: Kernel, rho_star: float, z_stars, cfg: DEConfig, a: float = None) -> np.ndarray:
    """int_0^inf q J0(q rho*) F(q, z*) dq for every z* (engine prefactors excluded).

    When the kernel declares breakpoints or poles the split point moves past
    the last one, so the asymptotic pieces only see a smooth integrand.
    """
    z = np.atleast_1d(np.asarray(z_stars, dtype=float))
    if rho_star <= 0:
        raise InvalidInputError(f"rho must be positive, got {rho_star}")
    breakpoints = kernel_breakpoints(kernel)
    poles = kernel_poles(kernel)
    if a is None:
        a = split_point(rho_star)
        clear = max(
            1.05 * breakpoints.max() if breakpoints.size else 0.0,
            POLE_MARGIN * poles.max() if poles.size else 0.0,
        )
        if clear > a:
            a = clear
            logger.debug(f"split point moved to q={a:.6g} past kernel breakpoints and poles")
    elif poles.size and poles.max() >= a:
        raise InvalidInputError(f"split point q={a:g} must lie beyond every kernel pole")
    low = _low_piece(kernel, rho_star, _low_edges(rho_star, a, breakpoints, poles), z, cfg)
    tail = _tail_piece(kernel, rho_star, a, z, cfg)
    oscillatory = oscillatory_sums(kernel, rho_star, z, cfg, a=a)
    return low + tail + np.sqrt(2 / (np.pi * rho_star)) * oscillatory


def invert(kernel: Kernel, rho_star: float, z_star: float, cfg: DEConfig) -> float:
    return float(invert_profile(kernel, rho_star, [z_star], cfg)[0])
