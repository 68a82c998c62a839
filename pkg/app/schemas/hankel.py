from pydantic import BaseModel, Field, field_validator

from app.core.config import settings


class DEConfig(BaseModel):
    h: float = Field(settings.DE_MESH, gt=0, description="Mesh size of the double-exponential sums")
    N_k: int = Field(settings.DE_HALF_WIDTH, ge=8, description="Half-width of the double-exponential sums")
    low_q_rule: int = Field(settings.LOW_Q_RULE, ge=2, description="Gauss nodes per panel on [0, a], even")
    tail_rule: int = Field(settings.TAIL_RULE, ge=2, description="Gauss nodes per period of the tail correction")
    tail_periods: int = Field(settings.TAIL_PERIODS, ge=1, description="Periods covered by panelled tail quadrature")
    tail_mapped_rule: int = Field(settings.TAIL_MAPPED_RULE, ge=2, description="Gauss nodes of the mapped remainder")
    convergence: float = Field(settings.DE_CONVERGENCE, gt=0, description="Relative refinement tolerance")
    max_refinements: int = Field(settings.DE_MAX_REFINEMENTS, ge=0, description="Cap on (h/2, 2N_k) refinements")

    class Config:
        frozen = True
        json_schema_extra = {
            "example": {
                "h": 0.1,
                "N_k": 60,
                "low_q_rule": 32,
                "tail_rule": 16,
                "convergence": 1e-8,
            }
        }

    @field_validator("low_q_rule")
    @classmethod
    def even_rule(cls, v: int) -> int:
        if v % 2:
            raise ValueError("low_q_rule must be even so that no node falls on a principal-value pole")
        return v

    def refined(self) -> "DEConfig":
        return self.model_copy(update={"h": self.h / 2, "N_k": 2 * self.N_k})
