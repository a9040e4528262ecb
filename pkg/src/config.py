import logging
import os
import sys
from pathlib import Path

from dotenv import load_dotenv

from src.core.models import DEFAULT_TAU_S, Resolution

load_dotenv()

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class Config:
    """Application configuration read from the environment (.env supported)"""

    def __init__(self):
        self.log_level = os.getenv("LOG_LEVEL", "WARNING").upper()
        self.default_tau_s = float(os.getenv("DEFAULT_TAU_S", str(DEFAULT_TAU_S)))
        self.output_dir = Path(os.getenv("OUTPUT_DIR", "outputs"))
        self.cases_dir = Path(os.getenv("CASES_DIR", "cases"))

        # reproduction of the case study
        self.reproduce_tau_s = float(os.getenv("REPRODUCE_TAU_S", "1e-5"))
        self.reproduce_resolution = Resolution.parse(os.getenv("REPRODUCE_RESOLUTION", "91x180"))

        if self.default_tau_s <= 0 or self.reproduce_tau_s <= 0:
            raise ValueError("DEFAULT_TAU_S and REPRODUCE_TAU_S must be positive")

    @property
    def case_device(self) -> Path:
        return self.cases_dir / "kawakami2014.json"

    def setup_logging(self) -> None:
        """Route log records (warnings included) to stderr"""
        level = getattr(logging, self.log_level, logging.WARNING)
        logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)

    def get_settings(self):
        """Settings snapshot for reports"""
        return {
            "log_level": self.log_level,
            "default_tau_s": self.default_tau_s,
            "output_dir": str(self.output_dir),
            "cases_dir": str(self.cases_dir),
            "reproduce_tau_s": self.reproduce_tau_s,
            "reproduce_resolution": str(self.reproduce_resolution),
        }
