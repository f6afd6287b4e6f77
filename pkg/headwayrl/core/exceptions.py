from typing import Optional


class HeadwayError(Exception):
    """Base class for every error raised on purpose by headwayrl."""


class ConfigError(HeadwayError, ValueError):
    """A config or spec file does not match its schema."""


class DemandFormatError(HeadwayError, ValueError):
    """A demand file row is malformed or violates a record invariant."""

    def __init__(self, message: str, row: Optional[int] = None, field: Optional[str] = None):
        self.row = row
        self.field = field
        prefix = ""
        if row is not None:
            prefix = f"row {row}"
            if field:
                prefix += f", field {field}"
            prefix += ": "
        super().__init__(prefix + message)


class TimetableError(HeadwayError, ValueError):
    """A timetable is unsorted, out of window or breaks the interval bounds."""


class TravelTimeError(HeadwayError, ValueError):
    """A travel-time table has negative times or lets buses overtake."""


class SimulationError(HeadwayError, RuntimeError):
    """The trip engine was asked for something outside its window or state."""


class EpisodeError(HeadwayError, RuntimeError):
    """The environment was driven outside the episode lifecycle."""


class TrainingError(HeadwayError, RuntimeError):
    """Learner misuse (underfull buffer, incompatible checkpoint, ...)."""


class ArtifactError(HeadwayError, RuntimeError):
    """A required input file or method artifact is missing or changed."""
