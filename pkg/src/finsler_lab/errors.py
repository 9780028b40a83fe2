"""Exception hierarchy.

The CLI maps each family to a stable exit code: parse/scene problems -> 2,
math-domain problems -> 3, degenerate immersions or frames -> 4.
"""


class FinslerLabError(Exception):
    """Base class for every error raised by this package."""


class InputError(FinslerLabError):
    """Malformed user input (scene files, expressions)."""


class SceneError(InputError):
    pass


class ExprSyntaxError(InputError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExprSyntaxError):
    pass


class MathDomainError(FinslerLabError):
    """A numerical precondition failed (domain of a function, convexity, ...)."""


class JetDomainError(MathDomainError):
    def __init__(self, fn: str, value: float, where: str = ""):
        loc = f" ({where})" if where else ""
        super().__init__(f"{fn} undefined at value {value!r}{loc}")
        self.fn = fn
        self.value = value


class ConvexityError(MathDomainError):
    pass


class DegenerateMetricError(MathDomainError):
    pass


class RankDeficiencyError(FinslerLabError):
    """Immersion rank loss, Gram-Schmidt breakdown or singular transition matrix."""
