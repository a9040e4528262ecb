"""
Reference values and map configurations of the bundled case study
(Si/SiGe qubit with a micromagnet, operated at 12.9 GHz and 150 mK).
"""

import math
from typing import Dict, List, Optional, Tuple

from src.core.geometry import FieldDirection
from src.core.models import (
    ClusterDipoleModel,
    ClusterTrapModel,
    EWJNModel,
    HyperfineModel,
    UniformDipoleModel,
    UniformTrapModel,
)

REFERENCE_DIRECTION = FieldDirection(math.pi / 2, 0.0)
REFERENCE_T2_S = 840e-9

# measured T2* and the non-hyperfine share it is corrected by
MEASURED_T2_STAR_S = 1.83e-6
NON_HYPERFINE_T2_S = 20.4e-6
HYPERFINE_T2_S = 2.01e-6

SKIN_DEPTH_NM = 313.0
EWJN_TPHI_S = 0.22

RHO_V_PER_CM3 = 2.39e13
RHO_A_PER_CM2 = 5.33e7
T1_UD_S = 6.50e9
T1_UT_S = 1.72e10

SIGMA_SWEEP_S_PER_M = (2e8, 2e7, 2e6)
EWJN_MAP_NAMES = ("ewjn_2e8", "ewjn_2e7", "ewjn_2e6")
T1_RATIO_TAUS_S = (1e-6, 1e-5, 1e-4)
QUADRATURE_T_OVER_TAU = (0.01, 0.1, 1.0, 10.0, 1000.0)

# (n_max, n_min, n_saddle) as tabulated; None marks a line of higher-order critical points
TABULATED_CENSUS: Dict[str, Optional[Tuple[int, int, int]]] = {
    "ud": (2, 2, 2),
    "ut": (2, 2, 2),
    "cd_x": (2, 2, 2),
    "cd_y": (2, 2, 2),
    "ct_x": None,
    "ct_y": None,
    "ewjn_2e8": (1, 1, 0),
    "ewjn_2e7": (2, 2, 2),
    "ewjn_2e6": (2, 2, 2),
}

# a nearly axisymmetric map whose weak phi modulation sits close to the
# persistence cut, so the count is reported only
INFORMATIONAL_CENSUS = {"ewjn_2e8"}


def charge_configurations(tau_s: float) -> Dict[str, object]:
    """Uncalibrated charge model of each T2 map"""
    return {
        "ud": UniformDipoleModel(fit=True, tau_s=tau_s),
        "ut": UniformTrapModel(fit=True, tau_s=tau_s),
        "cd_x": ClusterDipoleModel(position_nm=(37, 0, 37), fit=True, tau_s=tau_s),
        "cd_y": ClusterDipoleModel(position_nm=(0, 37, 37), fit=True, tau_s=tau_s),
        "ct_x": ClusterTrapModel(position_nm=(37, 0, 137), fit=True, tau_s=tau_s),
        "ct_y": ClusterTrapModel(position_nm=(0, 37, 137), fit=True, tau_s=tau_s),
    }


def ewjn_configurations() -> Dict[str, Tuple[float, List[object]]]:
    """Conductivity and model list of each EWJN T1 map"""
    return {
        name: (sigma, [EWJNModel()])
        for name, sigma in zip(EWJN_MAP_NAMES, SIGMA_SWEEP_S_PER_M)
    }


def hyperfine_model() -> HyperfineModel:
    return HyperfineModel(rate_per_s=1.0 / HYPERFINE_T2_S)
