"""
Runtime settings loaded from the environment.

A `.env` file in the working directory is honoured through python-dotenv;
explicit environment variables win over the file.
"""

import os
from dataclasses import dataclass
from typing import Optional

from dotenv import load_dotenv

VERSION = "0.1.0"


@dataclass(frozen=True)
class Settings:
    environment: str = "development"
    log_level: str = "INFO"
    sentry_dsn: Optional[str] = None
    kv_url: Optional[str] = None
    kv_token: Optional[str] = None
    cache_namespace: str = "coc-meanfield"
    cache_ttl_hours: int = 24 * 30
    workers: int = 1

    @property
    def is_testing(self) -> bool:
        return self.environment == "testing"

    @classmethod
    def from_env(cls, dotenv: bool = True) -> "Settings":
        """Build settings from environment variables (and `.env` when present)."""
        if dotenv:
            load_dotenv(override=False)
        return cls(
            environment=os.getenv("ENVIRONMENT", "development"),
            log_level=os.getenv("LOG_LEVEL", "INFO"),
            sentry_dsn=os.getenv("SENTRY_DSN") or None,
            kv_url=os.getenv("KV_REST_API_URL") or None,
            kv_token=os.getenv("KV_REST_API_TOKEN") or None,
            cache_namespace=os.getenv("COC_CACHE_NAMESPACE", "coc-meanfield"),
            cache_ttl_hours=int(os.getenv("COC_CACHE_TTL_HOURS", str(24 * 30))),
            workers=max(1, int(os.getenv("COC_WORKERS", "1"))),
        )
