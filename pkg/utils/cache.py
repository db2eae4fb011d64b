"""
Cache management for solver results using Redis (Vercel KV compatible).

Speed ranges and fixed points are expensive to compute and are pure functions
of (config, numeric parameters), so they are memoised under keys derived from
the config hash. Falls back to an in-process dict when Redis is unavailable.
"""

import fnmatch
import json
import logging
import ssl
from datetime import timedelta
from typing import Any, Callable, Optional

try:
    import redis
except ImportError:
    redis = None

from utils.errors import CacheError
from utils.settings import Settings

logger = logging.getLogger(__name__)


class CacheManager:
    """
    Redis cache manager for solver outputs.

    Handles:
    - Connection management
    - Namespacing to prevent key collisions
    - TTL (time-to-live) support
    - JSON serialization
    - Error handling with in-memory fallback
    """

    # Default TTL values (hours)
    TTL_SPEED_RANGE = 24 * 30
    TTL_FIXED_POINT = 24 * 30
    TTL_REPORT = 24

    def __init__(self, namespace: str = None, enable_fallback: bool = True, settings: Settings = None):
        """
        Initialize cache manager.

        Args:
            namespace: Namespace prefix for all keys (defaults to settings)
            enable_fallback: If True, use in-memory dict if Redis unavailable
            settings: Runtime settings; read from the environment when omitted
        """
        self.settings = settings or Settings.from_env()
        self.namespace = namespace or self.settings.cache_namespace
        self.enable_fallback = enable_fallback
        self.redis_client = None
        self.fallback_cache = {} if enable_fallback else None

        self._connect()

    def _connect(self) -> None:
        """
        Establish Redis connection.

        Falls back to the in-memory cache if credentials are missing or the
        connection fails.
        """
        try:
            if not redis:
                raise ImportError("redis-py not installed. Install with: pip install redis>=5.0.1")

            if not self.settings.kv_url or not self.settings.kv_token:
                logger.debug("Redis credentials not configured, using fallback cache")
                return

            self.redis_client = redis.from_url(
                self.settings.kv_url,
                password=self.settings.kv_token,
                decode_responses=True,
                ssl_cert_reqs=ssl.CERT_REQUIRED,
            )
            self.redis_client.ping()
            logger.info("Connected to Redis cache")

        except Exception as e:
            logger.warning("Redis connection failed: %s. Using fallback cache", e)
            self.redis_client = None

    def _make_key(self, key: str) -> str:
        """Create namespaced cache key ``namespace:key``."""
        return f"{self.namespace}:{key}"

    def get(self, key: str) -> Optional[Any]:
        """
        Get value from cache.

        Returns:
            Cached value or None if not found

        Raises:
            CacheError: If cache operation fails (with details)
        """
        try:
            full_key = self._make_key(key)

            if self.redis_client:
                value = self.redis_client.get(full_key)
                if value:
                    return json.loads(value)
            elif self.fallback_cache is not None:
                if full_key in self.fallback_cache:
                    return json.loads(self.fallback_cache[full_key])

            return None

        except json.JSONDecodeError as e:
            raise CacheError(
                f"Failed to deserialize cached value for key {key}",
                error_code="CACHE_DECODE_ERROR",
                details={"key": key, "error": str(e)},
            )
        except Exception as e:
            raise CacheError(
                f"Cache get operation failed for key {key}: {str(e)}",
                error_code="CACHE_GET_ERROR",
                details={"key": key, "error": str(e)},
            )

    def set(self, key: str, value: Any, ttl_hours: int = 24) -> bool:
        """
        Set value in cache with TTL.

        The fallback stores the JSON text so both backends hand back fresh
        copies on `get`.

        Raises:
            CacheError: If cache operation fails
        """
        try:
            full_key = self._make_key(key)
            json_value = json.dumps(value)

            if self.redis_client:
                self.redis_client.setex(full_key, timedelta(hours=ttl_hours), json_value)
                logger.debug("Cached value for key %s (TTL: %sh)", key, ttl_hours)
            elif self.fallback_cache is not None:
                self.fallback_cache[full_key] = json_value

            return True

        except Exception as e:
            raise CacheError(
                f"Cache set operation failed for key {key}: {str(e)}",
                error_code="CACHE_SET_ERROR",
                details={"key": key, "ttl_hours": ttl_hours, "error": str(e)},
            )

    def get_or_compute(self, key: str, compute: Callable[[], Any], ttl_hours: int = 24) -> Any:
        """
        Return the cached JSON value for `key`, computing and storing it on a miss.

        Cache failures are logged and never fail the computation.
        """
        try:
            cached = self.get(key)
        except CacheError as e:
            logger.warning("Cache read failed, recomputing: %s", e)
            cached = None
        if cached is not None:
            logger.debug("Cache hit for %s", key)
            return cached

        value = compute()
        try:
            self.set(key, value, ttl_hours=ttl_hours)
        except CacheError as e:
            logger.warning("Cache write failed: %s", e)
        return value

    def delete(self, key: str) -> bool:
        """
        Delete key from cache.

        Raises:
            CacheError: If cache operation fails
        """
        try:
            full_key = self._make_key(key)

            if self.redis_client:
                self.redis_client.delete(full_key)
            elif self.fallback_cache is not None:
                self.fallback_cache.pop(full_key, None)

            return True

        except Exception as e:
            raise CacheError(
                f"Cache delete operation failed for key {key}: {str(e)}",
                error_code="CACHE_DELETE_ERROR",
                details={"key": key, "error": str(e)},
            )

    def clear(self, pattern: str = None) -> int:
        """
        Clear cache entries matching a glob pattern (whole namespace if None).

        Returns:
            Number of entries removed

        Raises:
            CacheError: If cache operation fails
        """
        try:
            search_pattern = self._make_key(pattern or "*")
            if self.redis_client:
                keys = self.redis_client.keys(search_pattern)
                if keys:
                    self.redis_client.delete(*keys)
                removed = len(keys)
            elif self.fallback_cache is not None:
                keys = [k for k in self.fallback_cache if fnmatch.fnmatch(k, search_pattern)]
                for k in keys:
                    del self.fallback_cache[k]
                removed = len(keys)
            else:
                removed = 0

            logger.info("Cleared %d cache entries matching %s", removed, search_pattern)
            return removed

        except Exception as e:
            raise CacheError(
                f"Cache clear operation failed: {str(e)}",
                error_code="CACHE_CLEAR_ERROR",
                details={"pattern": pattern, "error": str(e)},
            )

    def health(self) -> dict:
        """
        Check cache health status.

        Returns:
            {'status': 'healthy'|'degraded'|'unhealthy', 'connected': bool,
             'fallback_active': bool, 'backend': str}
        """
        try:
            if self.redis_client:
                self.redis_client.ping()
                return {"status": "healthy", "connected": True, "fallback_active": False, "backend": "redis"}
            if self.fallback_cache is not None:
                return {
                    "status": "degraded",
                    "connected": False,
                    "fallback_active": True,
                    "backend": "memory",
                    "entries": len(self.fallback_cache),
                }
            return {"status": "unhealthy", "connected": False, "fallback_active": False, "backend": "none"}

        except Exception as e:
            return {
                "status": "unhealthy",
                "connected": False,
                "fallback_active": self.fallback_cache is not None,
                "error": str(e),
            }


# Global cache instance
cache = CacheManager()
