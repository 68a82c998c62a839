"""Photon Monte Carlo reference for the half space z > 0.

Implicit capture: flights are exponential with rate mu_t, each collision
multiplies the weight by the albedo and deflects the photon with the full
Henyey-Greenstein phase function. Weights below the cutoff play Russian
roulette. Energy density is tallied with the path-length estimator on
annular (rho, z) bins centred on the requested grid. Photons crossing z = 0
leave for good under the vacuum boundary; under the mirrored boundary they
re-enter along the mirrored direction with negated weight, and roulette
acts on |weight|.

Batches draw from independent Philox streams spawned from one seed, so the
tally does not depend on how batches are spread over worker processes.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from app.core.config import settings
from app.core.exceptions import InvalidInputError
from app.core.logger import logger
from app.schemas.mc import McBoundary, McConfig
from app.schemas.source import SourceKind, SourceSpec

COSZERO = 1.0 - 1e-12
PIECES_PER_BIN = 4


def sample_hg(g: float, u):
    """Henyey-Greenstein deflection cosine for uniform deviates u in [0, 1)."""
    if not 0.0 <= g < 1.0:
        raise InvalidInputError(f"Henyey-Greenstein parameter must lie in [0, 1), got {g}")
    u = np.asarray(u, dtype=float)
    if g == 0.0:
        cos_theta = 2.0 * u - 1.0
    else:
        temp = (1.0 - g * g) / (1.0 - g + 2.0 * g * u)
        cos_theta = (1.0 + g * g - temp * temp) / (2.0 * g)
    return np.clip(cos_theta, -1.0, 1.0)


def _spin(direction: np.ndarray, cos_theta: np.ndarray, psi: np.ndarray) -> np.ndarray:
    ux, uy, uz = direction.T
    sin_theta = np.sqrt(1.0 - cos_theta * cos_theta)
    cos_psi, sin_psi = np.cos(psi), np.sin(psi)
    normal = np.abs(uz) > COSZERO
    temp = np.where(normal, 1.0, np.sqrt(np.maximum(1.0 - uz * uz, 0.0)))
    out = np.empty_like(direction)
    out[:, 0] = np.where(normal, sin_theta * cos_psi, sin_theta * (ux * uz * cos_psi - uy * sin_psi) / temp + ux * cos_theta)
    out[:, 1] = np.where(normal, sin_theta * sin_psi, sin_theta * (uy * uz * cos_psi + ux * sin_psi) / temp + uy * cos_theta)
    out[:, 2] = np.where(normal, cos_theta * np.sign(uz), -sin_theta * cos_psi * temp + uz * cos_theta)
    return out


@dataclass(frozen=True)
class TallyGrid:
    rho_mm: np.ndarray
    z_mm: np.ndarray
    rho_bin_mm: float
    z_bin_mm: float

    @classmethod
    def from_config(cls, cfg: McConfig) -> "TallyGrid":
        rho = np.asarray(cfg.rho_mm, dtype=float)
        z = np.asarray(cfg.z_mm, dtype=float)
        if cfg.z_bin_mm is not None:
            z_bin = cfg.z_bin_mm
        elif z.size > 1:
            z_bin = float(np.min(np.diff(z)))
        else:
            z_bin = settings.MC_Z_BIN_MM
        if z.size > 1 and z_bin > np.min(np.diff(z)) * (1 + 1e-12):
            raise InvalidInputError("depth bins overlap: z bin width exceeds the grid spacing")
        spacing = np.diff(np.sort(rho))
        if spacing.size and cfg.rho_bin_mm > spacing.min() * (1 + 1e-12):
            raise InvalidInputError("radial bins overlap: rho bin width exceeds the grid spacing")
        return cls(rho_mm=rho, z_mm=z, rho_bin_mm=cfg.rho_bin_mm, z_bin_mm=z_bin)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.rho_mm.size, self.z_mm.size

    @property
    def max_piece(self) -> float:
        return min(self.rho_bin_mm, self.z_bin_mm) / PIECES_PER_BIN

    @property
    def volume(self) -> np.ndarray:
        r_in = np.maximum(self.rho_mm - 0.5 * self.rho_bin_mm, 0.0)
        r_out = self.rho_mm + 0.5 * self.rho_bin_mm
        z_lo = np.maximum(self.z_mm - 0.5 * self.z_bin_mm, 0.0)
        z_hi = self.z_mm + 0.5 * self.z_bin_mm
        return np.pi * np.outer(r_out ** 2 - r_in ** 2, z_hi - z_lo)

    @property
    def z_range(self) -> Tuple[float, float]:
        return float(self.z_mm[0] - 0.5 * self.z_bin_mm), float(self.z_mm[-1] + 0.5 * self.z_bin_mm)

    def locate(self, points: np.ndarray) -> np.ndarray:
        """Flat bin index of every point, -1 outside all bins."""
        rho = np.hypot(points[:, 0], points[:, 1])
        z = points[:, 2]
        iz = np.clip(np.searchsorted(self.z_mm, z), 1, max(self.z_mm.size - 1, 1))
        if self.z_mm.size > 1:
            lower = self.z_mm[iz - 1]
            iz = np.where(np.abs(z - lower) <= np.abs(z - self.z_mm[iz]), iz - 1, iz)
        else:
            iz = np.zeros_like(iz)
        in_z = np.abs(z - self.z_mm[iz]) <= 0.5 * self.z_bin_mm

        ir = np.full(rho.shape, -1)
        for k, centre in enumerate(self.rho_mm):
            ir = np.where((ir < 0) & (np.abs(rho - centre) <= 0.5 * self.rho_bin_mm), k, ir)
        return np.where(in_z & (ir >= 0), ir * self.z_mm.size + iz, -1)


@dataclass
class _BatchResult:
    photons: int
    total: np.ndarray
    total_sq: np.ndarray
    absorbed: float
    escaped: float
    reinjected: float
    killed: float
    gained: float


@dataclass(frozen=True)
class McTally:
    """Energy density per unit source on the tally grid, with per-photon standard errors."""

    rho_mm: np.ndarray
    z_mm: np.ndarray
    u: np.ndarray
    stderr: np.ndarray
    launched: int
    absorbed: float
    escaped: float
    reinjected: float
    killed: float
    gained: float
    rho_bin_mm: float
    z_bin_mm: float

    @property
    def balance_residual(self) -> float:
        """(launched + re-injected + roulette gain - absorbed - escaped - roulette loss)/launched.

        Weights are signed; re-injected weight is non-zero under the mirrored boundary only.
        """
        return (self.launched + self.reinjected + self.gained - self.absorbed - self.escaped - self.killed) / self.launched

    @property
    def roulette_bias(self) -> float:
        return (self.killed - self.gained) / self.launched


def _launch(kind: SourceKind, n: int, rng: np.random.Generator) -> np.ndarray:
    direction = np.zeros((n, 3))
    if kind == SourceKind.PENCIL:
        direction[:, 2] = 1.0
        return direction
    # Lambertian: unit inward intensity, cos(theta) = sqrt(u)
    cos_theta = np.sqrt(rng.random(n))
    psi = 2.0 * np.pi * rng.random(n)
    sin_theta = np.sqrt(1.0 - cos_theta ** 2)
    direction[:, 0] = sin_theta * np.cos(psi)
    direction[:, 1] = sin_theta * np.sin(psi)
    direction[:, 2] = cos_theta
    return direction


def _deposit(tally: np.ndarray, grid: TallyGrid, ids, start, direction, flight, weight) -> None:
    """Path-length deposits at the midpoints of equal sub-segments of each flight."""
    z_lo, z_hi = grid.z_range
    z_end = start[:, 2] + flight * direction[:, 2]
    near = (np.maximum(start[:, 2], z_end) >= z_lo) & (np.minimum(start[:, 2], z_end) <= z_hi)
    if not np.any(near):
        return
    ids, start, direction, flight, weight = ids[near], start[near], direction[near], flight[near], weight[near]

    pieces = np.maximum(1, np.ceil(flight / grid.max_piece)).astype(np.int64)
    owner = np.repeat(np.arange(pieces.size), pieces)
    offset = np.arange(owner.size) - np.repeat(np.cumsum(pieces) - pieces, pieces)
    length = flight[owner] / pieces[owner]
    points = start[owner] + ((offset + 0.5) * length)[:, None] * direction[owner]
    flat = grid.locate(points)
    hit = flat >= 0
    np.add.at(tally, (ids[owner[hit]], flat[hit]), weight[owner[hit]] * length[hit])


def _run_batch(job) -> _BatchResult:
    cfg, grid, kind, seed, n = job
    rng = np.random.Generator(np.random.Philox(seed))
    mu_t = cfg.params.mu_t
    albedo = cfg.params.albedo
    g = cfg.params.g

    tally = np.zeros((n, grid.rho_mm.size * grid.z_mm.size))
    ids = np.arange(n)
    position = np.zeros((n, 3))
    direction = _launch(kind, n, rng)
    weight = np.ones(n)
    absorbed = escaped = reinjected = killed = gained = 0.0
    mirrored = cfg.boundary == McBoundary.MIRRORED

    while ids.size:
        step = rng.exponential(1.0 / mu_t, ids.size)
        uz = direction[:, 2]
        with np.errstate(divide="ignore"):
            exit_length = np.where(uz < 0, -position[:, 2] / uz, np.inf)
        leaving = step >= exit_length
        flight = np.where(leaving, exit_length, step)
        _deposit(tally, grid, ids, position, direction, flight, weight)
        position = position + flight[:, None] * direction
        escaped += weight[leaving].sum()

        if mirrored:
            position[leaving, 2] = 0.0
            direction[leaving, 2] = -direction[leaving, 2]
            weight[leaving] = -weight[leaving]
            reinjected += weight[leaving].sum()
            collide = ~leaving
        else:
            stay = ~leaving
            ids, position, direction, weight = ids[stay], position[stay], direction[stay], weight[stay]
            collide = np.ones(ids.size, dtype=bool)

        absorbed += (weight[collide] * (1.0 - albedo)).sum()
        weight[collide] = weight[collide] * albedo
        hits = int(collide.sum())
        cos_theta = sample_hg(g, rng.random(hits))
        direction[collide] = _spin(direction[collide], cos_theta, 2.0 * np.pi * rng.random(hits))

        low = np.abs(weight) < cfg.weight_cutoff
        if np.any(low):
            survive = np.ones(ids.size, dtype=bool)
            lucky = rng.random(int(low.sum())) < cfg.survival
            survive[low] = lucky
            low_weight = weight[low]
            killed += low_weight[~lucky].sum()
            gained += (low_weight[lucky] * (1.0 / cfg.survival - 1.0)).sum()
            weight[low] = np.where(lucky, low_weight / cfg.survival, 0.0)
            ids, position, direction, weight = ids[survive], position[survive], direction[survive], weight[survive]

    contributions = tally / grid.volume.ravel()[None, :]
    return _BatchResult(
        photons=n,
        total=contributions.sum(axis=0),
        total_sq=(contributions ** 2).sum(axis=0),
        absorbed=float(absorbed),
        escaped=float(escaped),
        reinjected=float(reinjected),
        killed=float(killed),
        gained=float(gained),
    )


def _batch_sizes(photons: int, batch_size: int) -> List[int]:
    full, rest = divmod(photons, batch_size)
    return [batch_size] * full + ([rest] if rest else [])


def simulate(cfg: McConfig, source: SourceSpec) -> McTally:
    if source.kind == SourceKind.GENERAL:
        raise InvalidInputError("Monte Carlo supports pencil and isotropic boundary sources only")
    grid = TallyGrid.from_config(cfg)
    sizes = _batch_sizes(cfg.photons, cfg.batch_size)
    seeds = np.random.SeedSequence(cfg.rng_seed).spawn(len(sizes))
    jobs = [(cfg, grid, source.kind, seed, n) for seed, n in zip(seeds, sizes)]
    logger.info(f"Monte Carlo: {cfg.photons} photons in {len(jobs)} batches, {cfg.workers} worker(s), {cfg.boundary.value} boundary")

    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_batch, jobs))
    else:
        results = [_run_batch(job) for job in jobs]

    N = cfg.photons
    total = np.sum(np.stack([r.total for r in results]), axis=0)
    total_sq = np.sum(np.stack([r.total_sq for r in results]), axis=0)
    mean = total / N
    variance = np.maximum(total_sq / N - mean ** 2, 0.0) * N / max(N - 1, 1)
    scale = np.pi if source.kind == SourceKind.ISOTROPIC else 1.0

    def merged(field: str) -> float:
        return float(np.sum([getattr(r, field) for r in results]))

    tally = McTally(
        rho_mm=grid.rho_mm,
        z_mm=grid.z_mm,
        u=scale * mean.reshape(grid.shape),
        stderr=scale * np.sqrt(variance / N).reshape(grid.shape),
        launched=N,
        absorbed=merged("absorbed"),
        escaped=merged("escaped"),
        reinjected=merged("reinjected"),
        killed=merged("killed"),
        gained=merged("gained"),
        rho_bin_mm=grid.rho_bin_mm,
        z_bin_mm=grid.z_bin_mm,
    )
    logger.debug(f"Monte Carlo balance residual {tally.balance_residual:.2e}")
    return tally
