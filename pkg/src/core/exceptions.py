from typing import Optional, Tuple


class SimulatorError(Exception):
    """Base class for every error raised by the simulator"""


class InvalidArgumentError(SimulatorError, ValueError):
    """Argument outside the domain of an operation"""


class ConfigError(SimulatorError):
    """Device or run configuration could not be parsed"""

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class SingularSourceError(SimulatorError, ValueError):
    """Noise source sits on top of the qubit"""


class SolverError(SimulatorError):
    """Dephasing equation could not be bracketed"""

    def __init__(self, message: str, grid_point: Optional[Tuple[float, float]] = None):
        self.grid_point = grid_point
        if grid_point is not None:
            message = f"{message} at (theta, phi) = ({grid_point[0]:.6g}, {grid_point[1]:.6g})"
        super().__init__(message)


class CalibrationError(SimulatorError):
    """Requested reference T2 cannot be reached by the fitted model"""


class MapFormatError(SimulatorError):
    """Exported map file is malformed"""
