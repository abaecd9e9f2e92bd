"""
Application settings for the Keller-Segel laboratory.
"""

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings with sensible defaults."""

    # Application info (hardcoded - same across all environments)
    app_name: str = "Keller-Segel Quorum Lab"
    app_version: str = "0.1.0"
    app_description: str = (
        "Entropy-stable solvers and diagnostics for the hyperbolic "
        "Keller-Segel model with quorum sensing"
    )

    # Environment-specific settings (defaults provided, override via env vars)
    environment: str = "development"
    log_level: str = "INFO"
    log_to_file: bool = False
    output_dir: str = "runs"
    cors_origins: str | list[str] = [
        "http://localhost:3000",
        "http://localhost:5173",  # Vite default
    ]
    max_snapshot_size_mb: int = 50

    # Work limits for the HTTP surface and studies
    max_api_cells: int = 4096
    study_workers: int = 1

    # Server settings
    host: str = "0.0.0.0"
    port: int = 8000

    # Rate limiting settings (requests per minute)
    rate_limit_run: int = 10
    rate_limit_check: int = 50

    @property
    def max_snapshot_size_bytes(self) -> int:
        """Get max snapshot size in bytes."""
        return self.max_snapshot_size_mb * 1024 * 1024

    @property
    def cors_origins_list(self) -> list[str]:
        """Get CORS origins as a list, handling both string and list types."""
        if isinstance(self.cors_origins, str):
            return [
                origin.strip()
                for origin in self.cors_origins.split(",")
                if origin.strip()
            ]
        return list(self.cors_origins) if self.cors_origins else []

    model_config = SettingsConfigDict(
        case_sensitive=False,
        env_file=".env",
        extra="ignore",
    )


def get_settings() -> Settings:
    """Get application settings instance."""
    return Settings()
