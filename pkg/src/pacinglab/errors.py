"""Exception hierarchy shared by every pacinglab module."""


class PacingLabError(Exception):
    """Base class for all library errors."""

    kind = "error"

    def record(self) -> dict:
        """Machine-readable form used by the CLI error output."""
        return {"error": self.kind, "message": str(self)}


class InvalidInputError(PacingLabError, ValueError):
    kind = "invalid-input"


class ConfigurationError(PacingLabError, ValueError):
    kind = "configuration"


class ConfigParseError(ConfigurationError):
    kind = "parse"

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line

    def record(self) -> dict:
        return {**super().record(), "line": self.line}


class SchemaError(ConfigurationError):
    kind = "schema"

    def __init__(self, message: str, path: str):
        super().__init__(f"{path}: {message}")
        self.path = path

    def record(self) -> dict:
        return {**super().record(), "path": self.path}


class AssumptionError(ConfigurationError):
    """A policy or rule failed a monotonicity check; ``witness`` holds the sample."""

    kind = "assumption"

    def __init__(self, message: str, clause: str, witness: dict | None = None):
        super().__init__(f"{clause}: {message}")
        self.clause = clause
        self.witness = witness

    def record(self) -> dict:
        return {**super().record(), "clause": self.clause, "witness": self.witness}


class StateError(PacingLabError, RuntimeError):
    kind = "state"


class DegenerateSampleError(PacingLabError, ValueError):
    kind = "degenerate-sample"


class PreconditionError(PacingLabError, ValueError):
    kind = "precondition"


class CapacityError(PacingLabError, ValueError):
    kind = "capacity"
