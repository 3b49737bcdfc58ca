"""Exception types shared across the package."""


class SplatError(Exception):
    """Base class; the CLI maps it to the data-error exit code."""


class SceneFormatError(SplatError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class InvariantError(SplatError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class DimensionError(SplatError):
    pass


class ProvenanceError(SplatError):
    """Inputs that were supposed to come from the same render do not agree."""


class ConfigError(SplatError):
    pass


class TechniqueError(SplatError):
    """A data error raised while running one technique's experiment."""

    def __init__(self, technique: str, cause: Exception):
        self.technique = technique
        super().__init__(f"[{technique}] {cause}")


class InternalInvariantError(Exception):
    """A property the implementation guarantees was observed broken."""
