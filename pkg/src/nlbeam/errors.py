"""Exception hierarchy for the package."""


class NlbeamError(Exception):
    """Base class for all package errors."""


class TemplateError(NlbeamError):
    """Malformed template file (bad slot syntax, unknown entity, ...)."""


class CorpusFormatError(NlbeamError):
    """Corpus file does not parse or carries an unsupported version."""


class ConfigError(NlbeamError):
    """Invalid configuration (bad split, empty category, bad flag value)."""


class ModelFormatError(NlbeamError):
    """Model file is truncated, corrupt, or from an incompatible registry."""


class ScriptError(NlbeamError):
    """Pseudo-script text failed to parse or validate."""

    def __init__(self, message: str, line: int | None = None,
                 column: int | None = None):
        super().__init__(message)
        self.line = line
        self.column = column

    def __str__(self) -> str:
        base = super().__str__()
        if self.line is not None:
            loc = f"line {self.line}"
            if self.column is not None:
                loc += f", column {self.column}"
            return f"{loc}: {base}"
        return base


class CompileError(NlbeamError):
    """Entity groups could not be assembled into a runnable script."""


class SimulationError(NlbeamError):
    """Script rejected or halted by the simulated beamline."""
