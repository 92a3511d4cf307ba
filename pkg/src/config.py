from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="GVFL_", env_file=".env", extra="ignore")

    # Default location of converted datasets (edges.tsv, features.csv, labels.csv)
    data_dir: Path = Path("data")
    output_dir: Path = Path("runs")

    log_level: str = "INFO"
    jobs: int = 1

    def resolve_data_path(self, path: Path) -> Path:
        """Relative dataset paths are looked up under data_dir."""
        return path if path.is_absolute() else self.data_dir / path


settings = Settings()
