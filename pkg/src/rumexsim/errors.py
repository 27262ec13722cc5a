"""Exception and warning types shared across the simulator."""


class SimulationError(Exception):
    """Base class for all errors raised by this package."""


class OutOfValidityRange(SimulationError):
    """Coordinates fall outside the field-scale validity bound of the local projection."""


class PixelOutOfBounds(SimulationError):
    """A pixel coordinate lies outside the image extent."""


class DegeneratePolygon(SimulationError):
    """A field polygon is too small or malformed for coverage planning."""


class UnknownImageId(SimulationError):
    """A bounding box references a capture that does not exist."""


class TooManyTargets(SimulationError):
    """Exhaustive route search was requested for an instance above its size limit."""


class PlantOutsideBoom(SimulationError):
    """A plant's lateral offset puts it beyond every nozzle's coverage interval."""


class NegativeTime(SimulationError):
    """A spray event would have to start before its pass begins."""


class EmptyTankAtStart(SimulationError):
    """The robot mission was asked to start with an empty herbicide tank."""


class UnknownParameter(SimulationError):
    """A sweep addressed a config field that does not exist or is not scalar."""


class ScenarioValidationError(SimulationError):
    """A scenario file or object violates a module invariant."""


class StageError(SimulationError):
    """A pipeline stage failed; carries the stage name for attribution.

    The original error is chained as ``__cause__``.
    """

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class InconsistentGeometry(UserWarning):
    """Boom geometry leaves coverage gaps (spray width below nozzle pitch)."""


class UnsupportedHardware(UserWarning):
    """A config names a hardware variant outside the known build options."""
