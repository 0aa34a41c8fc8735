from typing import Optional


class SimulationError(Exception):
    """Base class for every error this package raises on purpose."""


class ScenarioParseError(SimulationError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class ScenarioValidationError(SimulationError):
    def __init__(self, message: str, entity_id: Optional[str] = None):
        text = f"{entity_id}: {message}" if entity_id else message
        super().__init__(text)
        self.entity_id = entity_id


class DegenerateGeometryError(SimulationError):
    pass


class GeometryError(SimulationError):
    pass


class NoPathError(SimulationError):
    def __init__(self, message: str = "no path between BS and PoI"):
        super().__init__(message)


class UnreachableError(SimulationError):
    def __init__(self, bs_id: int, poi_id: int, t: float):
        super().__init__(f"unreachable BS {bs_id} from PoI {poi_id} at t={t:g} s")
        self.bs_id = bs_id
        self.poi_id = poi_id
        self.t = t


class MeasurementError(SimulationError):
    pass


class ReportError(SimulationError):
    pass


class OutputError(SimulationError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
