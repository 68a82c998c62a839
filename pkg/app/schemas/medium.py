from pydantic import BaseModel, Field, model_validator


class MediumParams(BaseModel):
    mu_a: float = Field(..., gt=0, description="Absorption coefficient (1/mm)")
    mu_s: float = Field(..., gt=0, description="Scattering coefficient (1/mm)")
    g: float = Field(0.0, ge=0, lt=1, description="Anisotropy factor of the phase function")
    l_max: int = Field(0, ge=0, le=64, description="Phase-function truncation order")
    N: int = Field(1, ge=1, le=64, description="Quadrature half-order (2N ordinates)")

    class Config:
        frozen = True
        json_schema_extra = {
            "example": {
                "mu_a": 0.01,
                "mu_s": 10.0,
                "g": 0.9,
                "l_max": 9,
                "N": 9,
            }
        }

    @model_validator(mode="after")
    def check_albedo(self):
        if not 0.0 < self.albedo < 1.0:
            raise ValueError("albedo mu_s/(mu_a+mu_s) must lie in (0, 1)")
        return self

    @property
    def mu_t(self) -> float:
        return self.mu_a + self.mu_s

    @property
    def albedo(self) -> float:
        return self.mu_s / (self.mu_a + self.mu_s)

    @property
    def transport_length(self) -> float:
        """Transport mean free path in units of 1/mu_t."""
        return 1.0 / (1.0 - self.albedo * self.g)

    def phase_moment(self, l: int) -> float:
        """g^l for l <= l_max, zero above the truncation."""
        return self.g ** l if l <= self.l_max else 0.0
