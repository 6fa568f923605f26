"""Exception types raised by the shell kernel."""


class ShellError(Exception):
    """Base class for all errors raised by this package."""


class MeshError(ShellError):
    """Invalid or unsupported control mesh.

    ``location`` names the offending entity (file line, face index or edge)
    when it is known.
    """

    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{message} (at {location})"
        super().__init__(message)


class UnsupportedPatchError(MeshError):
    """Patch topology the subdivision basis cannot evaluate."""


class DegenerateElementError(ShellError):
    def __init__(self, message, element=None):
        self.element = element
        if element is not None:
            message = f"{message} (element {element})"
        super().__init__(message)


class OrthotropyError(ShellError):
    """Preferred direction cannot be projected onto an element's tangent plane."""

    def __init__(self, message, element=None):
        self.element = element
        if element is not None:
            message = f"{message} (element {element})"
        super().__init__(message)


class MaterialError(ShellError, ValueError):
    pass


class ConfigError(ShellError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConvergenceError(ShellError):
    """Nonlinear solve failed; ``state`` holds the last converged state."""

    def __init__(self, message, state=None):
        self.state = state
        super().__init__(message)
