from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field, field_validator

from app.core.config import settings
from app.schemas.medium import MediumParams


class McBoundary(str, Enum):
    """What happens to a photon crossing z = 0 outwards.

    ``vacuum``: it leaves for good. ``mirrored``: it re-enters at the same
    point along the mirrored direction with its weight negated, so the
    inward intensity is the source minus the mirrored outward intensity.
    """

    VACUUM = "vacuum"
    MIRRORED = "mirrored"


class McConfig(BaseModel):
    params: MediumParams
    photons: int = Field(..., ge=1, description="Number of launched photons")
    rng_seed: int = Field(0, ge=0, description="Root seed of the per-batch streams")
    rho_mm: List[float] = Field(..., min_length=1, description="Radial tally positions (mm)")
    z_mm: List[float] = Field(..., min_length=1, description="Depth tally positions (mm)")
    rho_bin_mm: float = Field(settings.MC_RHO_BIN_MM, gt=0, description="Radial bin width (mm)")
    z_bin_mm: Optional[float] = Field(None, gt=0, description="Depth bin width; defaults to grid spacing")
    weight_cutoff: float = Field(settings.MC_WEIGHT_CUTOFF, gt=0, lt=1, description="Roulette threshold")
    survival: float = Field(settings.MC_SURVIVAL, gt=0, le=1, description="Roulette survival chance")
    batch_size: int = Field(settings.MC_BATCH_SIZE, ge=1, description="Photons per batch")
    workers: int = Field(settings.MC_WORKERS, ge=1, description="Process-pool size")
    boundary: McBoundary = Field(McBoundary.VACUUM, description="vacuum | mirrored")

    class Config:
        frozen = True
        json_schema_extra = {
            "example": {
                "params": {"mu_a": 0.01, "mu_s": 10.0, "g": 0.9, "l_max": 9, "N": 9},
                "photons": 1000000,
                "rng_seed": 1,
                "rho_mm": [5.0],
                "z_mm": [1.0, 2.0, 3.0],
            }
        }

    @field_validator("rho_mm")
    @classmethod
    def positive_rho(cls, v: List[float]) -> List[float]:
        if any(r <= 0 for r in v):
            raise ValueError("rho positions must be positive")
        return v

    @field_validator("z_mm")
    @classmethod
    def increasing_z(cls, v: List[float]) -> List[float]:
        if any(b <= a for a, b in zip(v, v[1:])) or v[0] < 0:
            raise ValueError("z grid must be non-negative and strictly increasing")
        return v
