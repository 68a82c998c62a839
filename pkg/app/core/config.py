from pathlib import Path

from pydantic_settings import BaseSettings
from dotenv import load_dotenv

load_dotenv()


class Settings(BaseSettings):
    PROJECT_NAME: str = "Rotated-Frame Transport Solver"
    LOG_LEVEL: str = "INFO"

    # Output settings
    CSV_FLOAT_FORMAT: str = "%.17g"

    # Default medium (mm^-1), the reference tissue-like configuration
    DEFAULT_MUA: float = 0.01
    DEFAULT_MUS: float = 10.0
    DEFAULT_G: float = 0.9
    DEFAULT_LMAX: int = 9
    DEFAULT_N: int = 9

    # Template Settings
    TEMPLATES_DIR: str = str(Path(__file__).resolve().parent.parent / "templates")
    TEMPLATE_CACHE_SIZE: int = 100

    # Hankel inversion (double-exponential) settings
    DE_MESH: float = 0.1
    DE_HALF_WIDTH: int = 60
    DE_MAX_REFINEMENTS: int = 3
    DE_CONVERGENCE: float = 1e-8
    LOW_Q_RULE: int = 32
    TAIL_RULE: int = 16
    TAIL_PERIODS: int = 40
    TAIL_MAPPED_RULE: int = 64
    KERNEL_CACHE_SIZE: int = 64

    # Eigen / mode settings
    POLE_GUARD: float = 1e-9
    EIGEN_IMAG_TOL: float = 1e-10
    AZIMUTH_NODES: int = 64

    # Analytic (singular eigenfunction) settings
    CONTINUUM_RULE: int = 32
    CONTINUUM_MAX_DOUBLINGS: int = 3
    CONTINUUM_TOL: float = 1e-8

    # Monte Carlo settings
    MC_WEIGHT_CUTOFF: float = 1e-4  # roulette threshold
    MC_SURVIVAL: float = 0.1  # chance of roulette survival
    MC_BATCH_SIZE: int = 10_000
    MC_WORKERS: int = 1
    MC_RHO_BIN_MM: float = 0.5
    MC_Z_BIN_MM: float = 0.25

    class Config:
        case_sensitive = True
        env_file = ".env"


settings = Settings()
