"""Configuration management for GENEO Lab."""
import os
from dotenv import load_dotenv
from .errors import ConfigError

# Load environment variables from .env file
load_dotenv()

class LabConfig:
    """Base configuration class for lab settings."""

    DATA_DIR = os.getenv('GENEO_LAB_DATA')
    THREADS = int(os.getenv('GENEO_LAB_THREADS', '1'))
    LOG_LEVEL = os.getenv('GENEO_LAB_LOG_LEVEL', 'INFO')

    # MNIST mirror
    MNIST_BASE_URL = os.getenv('GENEO_LAB_MNIST_URL', 'https://ossci-datasets.s3.amazonaws.com/mnist')
    MNIST_FILES = {
        'train_images': 'train-images-idx3-ubyte.gz',
        'train_labels': 'train-labels-idx1-ubyte.gz',
        'test_images': 't10k-images-idx3-ubyte.gz',
        'test_labels': 't10k-labels-idx1-ubyte.gz',
    }

    # Rate limits (requests per minute)
    MNIST_RATE_LIMIT = 30

    # Validators
    METRIC_TOLERANCE = 1e-9
    DEFAULT_PROBE_BUDGET = 20000
    DEFAULT_SEED = 0

    @classmethod
    def validate_data_dir(cls):
        """Validate that the dataset directory is configured and exists."""
        if not cls.DATA_DIR:
            raise ConfigError("Missing setting: GENEO_LAB_DATA")
        if not os.path.isdir(cls.DATA_DIR):
            raise ConfigError(f"GENEO_LAB_DATA is not a directory: {cls.DATA_DIR}")

    @classmethod
    def resolve_data_path(cls, path: str, base_dir: str = '.') -> str:
        """Resolve a dataset path against a base directory, then GENEO_LAB_DATA.

        Args:
            path: Path as written in a config file
            base_dir: Directory of the config file

        Returns:
            The first candidate that exists, or the base-relative path if none does
        """
        if os.path.isabs(path):
            return path
        candidate = os.path.join(base_dir, path)
        if os.path.exists(candidate):
            return candidate
        if cls.DATA_DIR:
            fallback = os.path.join(cls.DATA_DIR, path)
            if os.path.exists(fallback):
                return fallback
        return candidate
