"""
Configuration Management for czforge
"""
import os
import logging
from pathlib import Path
from typing import Optional
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'


class Config:
    """Process-level settings read from the environment"""

    # Parallelism
    THREADS = os.getenv('CZFORGE_THREADS', '1')

    # Output Configuration
    OUTPUT_DIR = os.getenv('CZFORGE_OUTPUT_DIR', 'outputs')

    # Logging Configuration
    LOG_LEVEL = os.getenv('CZFORGE_LOG_LEVEL', 'INFO')
    LOG_FILE = os.getenv('CZFORGE_LOG_FILE', 'czforge.log')

    @classmethod
    def ensure_directories(cls, output_dir: Optional[str] = None) -> Path:
        """Create the output directory and return it"""
        directory = Path(output_dir or cls.OUTPUT_DIR)
        directory.mkdir(parents=True, exist_ok=True)
        return directory

    @classmethod
    def thread_cap(cls) -> int:
        try:
            return max(1, int(cls.THREADS))
        except ValueError:
            logger.warning(f"Ignoring non-integer CZFORGE_THREADS={cls.THREADS!r}; using 1")
            return 1

    @classmethod
    def thread_width(cls, requested: int) -> int:
        """Parallel width for sweeps, capped by CZFORGE_THREADS"""
        return max(1, min(int(requested), cls.thread_cap()))

    @classmethod
    def validate(cls) -> bool:
        """Validate configuration"""
        errors = []

        try:
            if int(cls.THREADS) < 1:
                errors.append(f"CZFORGE_THREADS must be >= 1, got {cls.THREADS}")
        except ValueError:
            errors.append(f"CZFORGE_THREADS must be an integer, got {cls.THREADS!r}")

        if logging.getLevelName(cls.LOG_LEVEL.upper()) not in (
                logging.DEBUG, logging.INFO, logging.WARNING, logging.ERROR, logging.CRITICAL):
            errors.append(f"CZFORGE_LOG_LEVEL is not a logging level: {cls.LOG_LEVEL!r}")

        if errors:
            for error in errors:
                logger.error(f"Configuration error: {error}")
            return False

        return True


def setup_logging(level: Optional[str] = None, log_file: Optional[str] = None) -> None:
    """Install root handlers: console always, file unless log_file is empty"""
    level_name = (level or Config.LOG_LEVEL).upper()
    log_file = Config.LOG_FILE if log_file is None else log_file

    handlers = [logging.StreamHandler()]
    if log_file:
        handlers.append(logging.FileHandler(log_file))

    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True
    )
