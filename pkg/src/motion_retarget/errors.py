"""Exception hierarchy shared across the package."""


class RetargetError(Exception):
    """Base class for all errors raised by this package."""


class InvalidSkeleton(RetargetError, ValueError):
    pass


class InvalidMotion(RetargetError, ValueError):
    pass


class DegenerateRotation(RetargetError, ValueError):
    pass


class NotARotation(RetargetError, ValueError):
    pass


class ZeroHeight(RetargetError, ValueError):
    pass


class ZeroRootHeight(RetargetError, ValueError):
    pass


class BvhError(RetargetError):
    pass


class BvhSyntaxError(BvhError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedChannel(BvhError, ValueError):
    pass


class FrameCountMismatch(BvhError, ValueError):
    pass


class RootEliminated(RetargetError, ValueError):
    pass


class InvalidRatio(RetargetError, ValueError):
    pass


class NotAChain(RetargetError, ValueError):
    pass


class UnclassifiableRoot(RetargetError, ValueError):
    pass


class ShapeMismatch(RetargetError, ValueError):
    pass


class HeadsDivisibility(RetargetError, ValueError):
    pass


class AllMaskedRow(RetargetError, ValueError):
    pass


class NoValidTokens(RetargetError, ValueError):
    pass


class NonFiniteGradient(RetargetError, FloatingPointError):
    pass


class NonFiniteLoss(RetargetError, FloatingPointError):
    pass


class OddDimension(RetargetError, ValueError):
    pass


class ConfigMismatch(RetargetError, ValueError):
    pass


class SkeletonMismatch(RetargetError, ValueError):
    pass


class WindowTooShort(RetargetError, ValueError):
    pass


class InsufficientData(RetargetError, ValueError):
    pass


class MissingGroundTruth(RetargetError, KeyError):
    pass
