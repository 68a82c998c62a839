"""Engine dispatch: every engine turns a RunConfig into a DensityProfile."""
from dataclasses import dataclass, field
from typing import Callable, Dict

import numpy as np
import pandas as pd

from app.core.logger import logger
from app.schemas.mc import McBoundary, McConfig
from app.schemas.medium import MediumParams
from app.schemas.run import Engine, RunConfig
from app.schemas.source import SourceKind, SourceSpec
from app.services.analytic import AnalyticKernel, Dispersion
from app.services.halfspace import IsoKernel, PencilKernel, SpectralKernel, kernel_energy_density
from app.services.mc import simulate


@dataclass
class DensityProfile:
    """Tabulated u(rho, z) with provenance; ``frame`` columns rho_mm, z_mm, u[, stderr]."""

    engine: str
    params: MediumParams
    frame: pd.DataFrame
    metadata: Dict[str, str] = field(default_factory=dict)
    summary: Dict[str, str] = field(default_factory=dict)


def _rows(rho_mm, z_mm, values) -> pd.DataFrame:
    rho = np.repeat(np.asarray(rho_mm, dtype=float), len(z_mm))
    z = np.tile(np.asarray(z_mm, dtype=float), len(rho_mm))
    return pd.DataFrame({"rho_mm": rho, "z_mm": z, "u": np.concatenate(values)})


def _kernel_profile(cfg: RunConfig, kernel: SpectralKernel) -> DensityProfile:
    z = cfg.z_grid
    values = []
    for rho in cfg.rho_mm:
        logger.info(f"{cfg.engine.value}: rho = {rho:g} mm, {z.size} depths")
        values.append(kernel_energy_density(kernel, rho, z, cfg.de))
    return DensityProfile(engine=cfg.engine.value, params=cfg.medium, frame=_rows(cfg.rho_mm, z, values))


def ado_pencil_profile(cfg: RunConfig) -> DensityProfile:
    kernel = PencilKernel(cfg.medium, incidence=cfg.incidence)
    profile = _kernel_profile(cfg, kernel)
    profile.metadata["source"] = f"pencil i0={cfg.medium.N} ({cfg.incidence.value} incidence)"
    if kernel.poles().size:
        profile.metadata["poles_q"] = ",".join(repr(float(p)) for p in kernel.poles())
    return profile


def ado_iso_profile(cfg: RunConfig) -> DensityProfile:
    profile = _kernel_profile(cfg, IsoKernel(cfg.medium))
    profile.metadata["source"] = "isotropic, unit intensity on every ordinate"
    return profile


def analytic_profile(cfg: RunConfig) -> DensityProfile:
    dispersion = Dispersion.from_params(cfg.medium)
    profile = _kernel_profile(cfg, AnalyticKernel(dispersion))
    profile.metadata["nu0"] = repr(dispersion.nu0)
    return profile


def mc_profile(cfg: RunConfig) -> DensityProfile:
    mc_cfg = McConfig(
        params=cfg.medium,
        photons=cfg.photons,
        rng_seed=cfg.seed,
        rho_mm=cfg.rho_mm,
        z_mm=cfg.z_grid.tolist(),
        boundary=cfg.mc_boundary,
    )
    tally = simulate(mc_cfg, SourceSpec(kind=SourceKind.ISOTROPIC))
    source = "Lambertian boundary source, unit inward intensity"
    if cfg.mc_boundary == McBoundary.MIRRORED:
        source += ", minus the mirrored outward intensity"
    frame = _rows(cfg.rho_mm, tally.z_mm, list(tally.u))
    frame["stderr"] = np.concatenate(list(tally.stderr))
    metadata = {
        "photons": str(tally.launched),
        "seed": str(cfg.seed),
        "source": source,
        "boundary": cfg.mc_boundary.value,
        "bins": f"rho_bin_mm={tally.rho_bin_mm!r} z_bin_mm={tally.z_bin_mm!r}",
    }
    return DensityProfile(engine=cfg.engine.value, params=cfg.medium, frame=frame, metadata=metadata)


ENGINES: Dict[Engine, Callable[[RunConfig], DensityProfile]] = {
    Engine.ADO_PENCIL: ado_pencil_profile,
    Engine.ADO_ISO: ado_iso_profile,
    Engine.ANALYTIC: analytic_profile,
    Engine.MC: mc_profile,
}


def _column(engine: Engine) -> str:
    return engine.value.replace("-", "_")


def compare(cfg: RunConfig) -> DensityProfile:
    """Side-by-side profiles of ``cfg.pair`` with rel_diff = |u_a - u_b|/|u_b|."""
    first, second = cfg.pair
    left = ENGINES[first](cfg.model_copy(update={"engine": first}))
    right = ENGINES[second](cfg.model_copy(update={"engine": second}))

    frame = left.frame[["rho_mm", "z_mm"]].copy()
    for engine, profile in ((first, left), (second, right)):
        frame[f"u_{_column(engine)}"] = profile.frame["u"].to_numpy()
        if "stderr" in profile.frame:
            frame[f"stderr_{_column(engine)}"] = profile.frame["stderr"].to_numpy()
    a = frame[f"u_{_column(first)}"].to_numpy()
    b = frame[f"u_{_column(second)}"].to_numpy()
    frame["rel_diff"] = np.abs(a - b) / np.abs(b)
    max_rel_diff = float(frame["rel_diff"].max())
    logger.info(f"compare {first.value} vs {second.value}: max relative difference {max_rel_diff:.3e}")

    metadata = {"pair": f"{first.value},{second.value}"}
    for profile in (left, right):
        metadata.update({f"{profile.engine}.{key}": value for key, value in profile.metadata.items()})
    return DensityProfile(
        engine=cfg.engine.value,
        params=cfg.medium,
        frame=frame,
        metadata=metadata,
        summary={"max_rel_diff": repr(max_rel_diff)},
    )


def compute_profile(cfg: RunConfig) -> DensityProfile:
    if cfg.engine == Engine.COMPARE:
        return compare(cfg)
    return ENGINES[cfg.engine](cfg)
