from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from app.schemas.hankel import DEConfig
from app.schemas.mc import McBoundary
from app.schemas.medium import MediumParams
from app.schemas.source import Incidence


class Engine(str, Enum):
    ADO_PENCIL = "ado-pencil"
    ADO_ISO = "ado-iso"
    ANALYTIC = "analytic"
    MC = "mc"
    COMPARE = "compare"


SINGLE_ENGINES = (Engine.ADO_PENCIL, Engine.ADO_ISO, Engine.ANALYTIC, Engine.MC)


class RunConfig(BaseModel):
    engine: Engine = Field(..., description="Engine producing the profile")
    medium: MediumParams
    rho_mm: List[float] = Field([5.0], min_length=1, description="Radial distances (mm)")
    z_min: float = Field(0.5, ge=0, description="First depth (mm)")
    z_max: float = Field(10.0, gt=0, description="Last depth (mm)")
    nz: int = Field(40, ge=1, description="Number of depths")
    de: DEConfig = Field(default_factory=DEConfig)
    photons: int = Field(1_000_000, ge=1, description="Monte Carlo photons")
    seed: int = Field(1, ge=0, description="Monte Carlo root seed")
    out: Optional[str] = Field(None, description="CSV output path; stdout when omitted")
    pair: Tuple[Engine, Engine] = Field((Engine.ADO_ISO, Engine.ANALYTIC), description="Engines of `compare`")
    incidence: Incidence = Field(Incidence.NORMAL, description="Incident factor of the ado-pencil engine")
    mc_boundary: McBoundary = Field(McBoundary.MIRRORED, description="Boundary of the mc engine")

    class Config:
        frozen = True
        json_schema_extra = {
            "example": {
                "engine": "ado-iso",
                "medium": {"mu_a": 0.01, "mu_s": 10.0, "g": 0.9, "l_max": 9, "N": 9},
                "rho_mm": [5.0],
                "z_min": 0.5,
                "z_max": 10.0,
                "nz": 40,
                "out": "profile.csv",
            }
        }

    @field_validator("rho_mm")
    @classmethod
    def positive_rho(cls, v: List[float]) -> List[float]:
        if any(r <= 0 for r in v):
            raise ValueError("rho must be positive (on-axis densities are not supported)")
        return v

    @field_validator("pair")
    @classmethod
    def single_engine_pair(cls, v: Tuple[Engine, Engine]) -> Tuple[Engine, Engine]:
        if any(e not in SINGLE_ENGINES for e in v):
            raise ValueError("compare pair must name two non-compare engines")
        return v

    @model_validator(mode="after")
    def check_engine(self):
        if self.nz > 1 and self.z_max <= self.z_min:
            raise ValueError("z grid must be strictly increasing (zmax > zmin)")
        engines = self.pair if self.engine == Engine.COMPARE else (self.engine,)
        if Engine.ANALYTIC in engines and self.medium.l_max > 1:
            raise ValueError("analytic engine requires lmax ≤ 1")
        return self

    @property
    def z_grid(self) -> np.ndarray:
        return np.linspace(self.z_min, self.z_max, self.nz)
