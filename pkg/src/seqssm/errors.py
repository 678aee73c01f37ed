"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand shapes are incompatible; message names both shapes."""


class ArgumentError(ValueError):
    """A scalar argument is outside its legal range."""


class DomainError(ValueError):
    """A value falls outside the mathematical domain of a map."""


class ConfigError(ValueError):
    """A run config is malformed; message names the offending field."""


class IngestionError(ValueError):
    """A data file failed validation; message names file and location."""


class GenerationError(RuntimeError):
    """A synthetic data generator produced an invalid trajectory."""


class NumericError(RuntimeError):
    """A non-finite value appeared where the engine requires finite ones."""


class CheckpointVersionError(RuntimeError):
    """Checkpoint format version does not match the reader."""

    def __init__(self, found: int, expected: int):
        self.found = found
        self.expected = expected
        super().__init__(
            f"checkpoint format version {found}, this reader expects {expected}"
        )
