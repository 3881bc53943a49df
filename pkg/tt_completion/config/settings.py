from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Dense materialisation
    DENSE_CAP: int = 100_000_000
    RANK_TOL: float = 1e-12

    # Output locations
    OUTPUT_DIR: Path = Path("results")

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "%(asctime)s %(levelname)s %(name)s: %(message)s"

    # Execution
    WORKERS: int = 1
    CONTRACTION_CHUNK: int = 65536

    # Reports
    REPORT_SCHEMA_VERSION: str = "1.0"

    model_config = SettingsConfigDict(
        env_prefix="TTC_",
        env_file=Path(__file__).parent.parent / ".env",
        extra="ignore",
    )


settings = Settings()
