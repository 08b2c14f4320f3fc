"""Exception hierarchy shared by every module."""


class SoenError(Exception):
    """Base class for all errors raised by the package."""

    kind = "error"

    def to_dict(self):
        return {"error": self.kind, "type": type(self).__name__, "message": str(self)}


class ConfigError(SoenError, ValueError):
    """A parameter is missing, mistyped, or violates a module invariant."""

    kind = "config"

    def __init__(self, message, key=None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key
        self.detail = message

    def to_dict(self):
        d = super().to_dict()
        d["key"] = self.key
        return d


class OrderingError(SoenError, ValueError):
    """A device update was requested at a time earlier than its last update."""

    kind = "ordering"


class CausalityError(SoenError, ValueError):
    """An event was scheduled before the current simulation time."""

    kind = "causality"


class InfeasibleLinkError(SoenError, ValueError):
    """A photonic link cannot deliver the required photon budget."""

    kind = "infeasible_link"


class InfeasibleDegreeError(SoenError, ValueError):
    """A degree quota exceeds the population it must be drawn from."""

    kind = "infeasible_degree"


class UndefinedMetricError(SoenError, ValueError):
    kind = "undefined_metric"


class PlacementError(SoenError, ValueError):
    """Neurons do not fit on the declared wafers."""

    kind = "placement"


class WhiteMatterOverflowError(PlacementError):
    """Long-range fiber demand exceeds what the tracts can carry."""

    kind = "white_matter_overflow"


class EndOfSimulation(SoenError):
    """Raised by ``Simulation.step`` when the event queue is empty."""

    kind = "end_of_simulation"
