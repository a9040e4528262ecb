from typing import Any, Dict, List, Optional, TypedDict


class ReproductionState(TypedDict):
    """State carried between the nodes of the reproduction workflow"""
    # inputs
    device_path: str
    output_dir: str
    tau_s: float
    resolution: str

    # loaded and derived objects
    device: Optional[Any]
    models: Dict[str, List[Any]]
    calibration: Dict[str, Dict[str, Any]]
    maps: Dict[str, Any]
    censuses: Dict[str, Dict[str, Any]]

    # summary rows (AnchorCheck dumps)
    checks: List[Dict[str, Any]]

    # workflow metadata
    errors: List[str]
    current_step: str
    completed_steps: List[str]

    # final outputs
    output_files: List[str]
    exit_code: int


def initial_state(device_path: str, output_dir: str, tau_s: float, resolution: str) -> ReproductionState:
    return {
        "device_path": device_path,
        "output_dir": output_dir,
        "tau_s": tau_s,
        "resolution": resolution,
        "device": None,
        "models": {},
        "calibration": {},
        "maps": {},
        "censuses": {},
        "checks": [],
        "errors": [],
        "current_step": "start",
        "completed_steps": [],
        "output_files": [],
        "exit_code": 1,
    }
