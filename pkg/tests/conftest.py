from pathlib import Path

import numpy as np
import pytest

from src.core.anisotropy import AnisotropyMap, direction_grid
from src.core.device import load_config
from src.core.geometry import longitudinal_forms, unit_vectors
from src.core.models import Quantity, Resolution

CASES_DIR = Path(__file__).resolve().parent.parent / "cases"


@pytest.fixture(scope="session")
def cases_dir():
    return CASES_DIR


@pytest.fixture(scope="session")
def device():
    return load_config(CASES_DIR / "kawakami2014.json")


@pytest.fixture
def small_resolution():
    return Resolution(n_theta=37, n_phi=72)


def quadratic_map(tensor, resolution: Resolution) -> AnisotropyMap:
    """n^T S n sampled on the sweep grid"""
    theta, phi = direction_grid(resolution)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    values = longitudinal_forms(unit_vectors(tt, pp), np.asarray(tensor, dtype=float))
    return AnisotropyMap(theta, phi, values, Quantity.T2)
