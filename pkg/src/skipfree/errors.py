"""Exception hierarchy shared by all modules."""


class SkipFreeError(Exception):
    """Base class for every error raised by the package."""


class ModelError(SkipFreeError, ValueError):
    """An invalid rate profile."""


class EmptyPrefix(ModelError):
    pass


class Mu0NotZero(ModelError):
    pass


class NegativeRate(ModelError):
    pass


class NonFiniteRate(ModelError):
    pass


class RowShapeError(ModelError):
    pass


class TailRuleError(ModelError):
    pass


class ZeroDeathRate(ModelError):
    def __init__(self, site: int):
        super().__init__(f"mu must be positive at site {site} >= 1")
        self.site = site


class ZeroTotalRate(ModelError):
    def __init__(self, site: int):
        super().__init__(f"total jump rate is zero at site {site}")
        self.site = site


class NoConvergence(SkipFreeError, ArithmeticError):
    def __init__(self, iterations: int):
        super().__init__(f"power iteration did not converge in {iterations} iterations")
        self.iterations = iterations


class Diverged(SkipFreeError, ArithmeticError):
    pass


class NotPositiveRecurrent(SkipFreeError):
    """Raised by stationary quantities when positive recurrence is not certified."""


class BadWindow(SkipFreeError, ValueError):
    pass


class NotAnExcursion(SkipFreeError, ValueError):
    pass


class ExcursionBudgetExceeded(SkipFreeError, RuntimeError):
    def __init__(self, excursion: int, steps: int):
        super().__init__(
            f"excursion {excursion} did not return to 0 within {steps} steps"
        )
        self.excursion = excursion
        self.steps = steps


class TooSmall(SkipFreeError, ValueError):
    pass


class SingularSystem(SkipFreeError, ArithmeticError):
    pass


class ParseError(SkipFreeError, ValueError):
    def __init__(self, location: str, message: str):
        super().__init__(f"{location}: {message}")
        self.location = location
        self.message = message


class SchemaError(SkipFreeError, ValueError):
    def __init__(self, field: str, message: str = "invalid value"):
        super().__init__(f"{field}: {message}")
        self.field = field
