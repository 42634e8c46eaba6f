"""Exception hierarchy shared by every module."""


class QfiError(Exception):
    """Base class. ``context`` carries machine-readable details for the CLI."""

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.context = context

    def to_dict(self) -> dict:
        return {"error": type(self).__name__, "message": str(self), "context": self.context}


class QuadratureNotConverged(QfiError):
    pass


class IndexOutOfRange(QfiError):
    pass


class ZeroVector(QfiError):
    pass


class InvalidInput(QfiError):
    pass


class SolverFailure(QfiError):
    pass


class HorizonNotConverged(QfiError):
    pass


class StepTooSmall(QfiError):
    pass


class UnsupportedFamily(QfiError):
    pass


class EigenFailure(QfiError):
    pass


class NoImprovement(QfiError):
    pass


class BracketNotFound(QfiError):
    pass


class SweepMismatch(QfiError):
    pass


class UsageError(QfiError):
    pass
