"""Base client class for dataset downloads."""
import logging
import os
from typing import Optional

import requests
from ratelimit import limits, sleep_and_retry

from .errors import ConfigError, DataFormatError


class BaseDataClient:
    """Base class for dataset mirror clients: one session, rate-limited file fetches."""

    def __init__(self, base_url: str, calls_per_minute: int, timeout: float = 60.0):
        """Initialize the base client.

        Args:
            base_url: Base URL of the mirror
            calls_per_minute: Maximum number of downloads allowed per minute
            timeout: Per-request timeout in seconds
        """
        self.base_url = base_url.rstrip('/')
        self.session = requests.Session()
        self.calls_per_minute = calls_per_minute
        self.timeout = timeout

        self.logger = logging.getLogger(self.__class__.__name__)

        if calls_per_minute < 1:
            raise ConfigError(f"calls_per_minute must be at least 1, got {calls_per_minute}")
        self._fetch_bytes = sleep_and_retry(limits(calls=calls_per_minute, period=60)(self._fetch_bytes))

    def url_for(self, name: str) -> str:
        return f"{self.base_url}/{name.lstrip('/')}"

    def _fetch_bytes(self, name: str) -> bytes:
        """Download one file from the mirror, at most ``calls_per_minute`` times a minute.

        Raises:
            requests.exceptions.RequestException: If the request fails
        """
        try:
            response = self.session.get(self.url_for(name), timeout=self.timeout)
            response.raise_for_status()
            return response.content
        except requests.exceptions.RequestException as e:
            self.logger.error(f"Download of {name} failed: {str(e)}")
            raise

    def _validate_payload(self, payload: bytes) -> bool:
        return bool(payload)  # override in subclasses

    def fetch(self, name: str) -> bytes:
        payload = self._fetch_bytes(name)
        if not self._validate_payload(payload):
            self.logger.error(f"Unexpected payload for {name}")
            raise DataFormatError(f"Mirror {self.base_url} returned an unexpected payload for {name}")
        return payload

    def save(self, name: str, path: str, overwrite: bool = False) -> Optional[str]:
        """Fetch ``name`` into ``path``; returns None when the file exists and is kept."""
        if os.path.exists(path) and not overwrite:
            return None
        payload = self.fetch(name)
        partial = path + '.part'
        with open(partial, 'wb') as fh:
            fh.write(payload)
        os.replace(partial, path)
        self.logger.info(f"Saved {name} ({len(payload)} bytes) to {path}")
        return path

    def close(self):
        """Close the session."""
        self.session.close()
