import os
from pathlib import Path

from dotenv import load_dotenv
from pydantic import BaseModel, Field

from chromalight.image_io import MedianMode


class Settings(BaseModel):
    """Runtime settings read from CHROMALIGHT_* environment variables (and a .env file)."""
    cache_dir: Path = Field(Path.home() / ".cache" / "chromalight", description="Transport matrix cache directory")
    jobs: int = Field(1, ge=1, description="Default worker count for evaluation")
    log_level: str = Field("INFO", description="Root logger level")
    external_timeout: float = Field(600.0, gt=0.0, description="Seconds allowed per external process call")
    median_mode: MedianMode = Field(MedianMode.CHANNEL_MEAN, description="Intensity whose median sets the exposure")

    @classmethod
    def from_env(cls, dotenv: bool = True) -> "Settings":
        if dotenv:
            load_dotenv()
        values = {
            "cache_dir": os.environ.get("CHROMALIGHT_CACHE_DIR"),
            "jobs": os.environ.get("CHROMALIGHT_JOBS"),
            "log_level": os.environ.get("CHROMALIGHT_LOG_LEVEL"),
            "external_timeout": os.environ.get("CHROMALIGHT_EXTERNAL_TIMEOUT"),
            "median_mode": os.environ.get("CHROMALIGHT_MEDIAN_MODE"),
        }
        return cls(**{k: v for k, v in values.items() if v})
