from enum import Enum
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator


class SourceKind(str, Enum):
    PENCIL = "pencil"
    ISOTROPIC = "isotropic"
    GENERAL = "general"


class Incidence(str, Enum):
    """Pencil-beam incident factor: the surface normal, or the azimuthal mean at ordinate i0."""

    NORMAL = "normal"
    AVERAGED = "averaged"


class BoundarySamples(BaseModel):
    """Boundary source g(x, y, mu_i0) sampled on a Cartesian grid.

    ``values`` has shape (len(x), len(y), 2N); the last axis follows the
    quadrature ordering. Lengths are in mm.
    """

    x: Any = Field(..., description="Strictly increasing x nodes")
    y: Any = Field(..., description="Strictly increasing y nodes")
    values: Any = Field(..., description="Samples, shape (nx, ny, 2N)")

    class Config:
        frozen = True
        arbitrary_types_allowed = True
        json_schema_extra = {
            "example": {
                "x": [-1.0, 0.0, 1.0],
                "y": [-1.0, 0.0, 1.0],
                "values": "array of shape (3, 3, 2N)",
            }
        }

    @model_validator(mode="after")
    def check_grid(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or y.ndim != 1 or x.size < 2 or y.size < 2:
            raise ValueError("x and y must be 1-D with at least two nodes")
        if np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0):
            raise ValueError("x and y must be strictly increasing")
        if values.ndim != 3 or values.shape[:2] != (x.size, y.size) or values.shape[2] % 2:
            raise ValueError("values must have shape (len(x), len(y), 2N)")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "values", values)
        return self

    @property
    def extent(self) -> float:
        """Smallest half-width of the grid around the origin."""
        return float(min(-self.x[0], self.x[-1], -self.y[0], self.y[-1]))


class SourceSpec(BaseModel):
    kind: SourceKind = Field(..., description="pencil | isotropic | general")
    i0: Optional[int] = Field(None, ge=1, description="Incidence ordinate (1-based), pencil defaults to N")
    phi0: float = Field(0.0, description="Incidence azimuth (rad)")
    boundary: Optional[BoundarySamples] = None

    class Config:
        frozen = True
        json_schema_extra = {"example": {"kind": "pencil", "i0": 9, "phi0": 0.0}}

    @model_validator(mode="after")
    def check_kind(self):
        if self.kind == SourceKind.GENERAL and self.boundary is None:
            raise ValueError("general source requires boundary samples")
        return self
