"""MNIST mirror client."""
import os
from typing import Dict, Optional

from ..base_client import BaseDataClient
from ..config import LabConfig

GZIP_MAGIC = b'\x1f\x8b'
IDX_PREFIX = b'\x00\x00\x08'


class MnistClient(BaseDataClient):
    """Client for downloading the four MNIST IDX files."""

    def __init__(self, base_url: Optional[str] = None):
        """Initialize the MNIST client.

        Args:
            base_url: Optional mirror URL (will use GENEO_LAB_MNIST_URL if not provided)
        """
        super().__init__(
            base_url=base_url or LabConfig.MNIST_BASE_URL,
            calls_per_minute=LabConfig.MNIST_RATE_LIMIT
        )

    def _validate_payload(self, payload: bytes) -> bool:
        # gzip stream or raw unsigned-byte IDX
        return payload[:2] == GZIP_MAGIC or payload[:3] == IDX_PREFIX

    def download_all(self, directory: str, overwrite: bool = False) -> Dict[str, str]:
        """Download the train/test image and label files into a directory.

        Args:
            directory: Target directory (created if missing)
            overwrite: Download again even if a file exists

        Returns:
            Mapping from file role to local path
        """
        os.makedirs(directory, exist_ok=True)
        paths = {}
        for role, name in LabConfig.MNIST_FILES.items():
            path = os.path.join(directory, name)
            if self.save(name, path, overwrite) is None:
                self.logger.info(f"Keeping existing {path}")
            paths[role] = path
        return paths
