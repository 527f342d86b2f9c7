"""Exception types raised across the package."""


class MocoError(Exception):
    pass


class ShapeError(MocoError, ValueError):
    pass


class UnknownMotion(MocoError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown motion"


class InvalidDuration(MocoError, ValueError):
    pass


class GeneratorUnavailable(MocoError, RuntimeError):
    pass


class InvalidSchedule(MocoError, ValueError):
    pass


class InvalidLength(MocoError, ValueError):
    pass


class InvalidQuery(MocoError, ValueError):
    pass


class NoData(MocoError, RuntimeError):
    pass


class NonFiniteLoss(MocoError, FloatingPointError):
    def __init__(self, message, batch_id=None, dump_path=None):
        super().__init__(message)
        self.batch_id = batch_id
        self.dump_path = dump_path


class NoMotionVerb(UserWarning):
    """Raised as a warning when a prompt contains no verb from the motion lexicon."""
