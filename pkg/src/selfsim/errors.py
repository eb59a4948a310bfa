"""Exception types shared across the package."""


class CapExceededError(RuntimeError):
    """An enumeration or atom-count cap would be exceeded.

    Caps are never silently truncated: the caller must either raise the cap
    or switch to the sampling code path named in ``suggestion``.
    """

    def __init__(self, message: str, needed=None, cap=None, suggestion: str | None = None):
        self.needed = needed
        self.cap = cap
        self.suggestion = suggestion
        if suggestion:
            message = f"{message} (suggestion: {suggestion})"
        super().__init__(message)


class ConfigError(ValueError):
    """Invalid run configuration; ``path`` names the offending JSON field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class DegenerateModelError(ValueError):
    """Raised when a random model carries no branching (every type has one atom)."""
