class LpsgdException(Exception):
    pass


class DomainError(LpsgdException, ValueError):
    pass


class AtOptimum(LpsgdException):
    def __init__(self, *args, point=None, **kwargs):
        super().__init__(*args, **kwargs)
        self.point = point

    def __str__(self):
        return "No descent direction exists: the point is a minimizer"


class HypothesisViolation(DomainError):
    def __init__(self, *args, hypothesis="", **kwargs):
        super().__init__(*args, **kwargs)
        self.hypothesis = hypothesis

    def __str__(self):
        details = super().__str__()
        return f"Hypothesis violated ({self.hypothesis}): {details}"


class DegenerateStepSize(LpsgdException):
    def __str__(self):
        return "The bound decreases as eta -> 0: no positive optimal step size"


class NonFiniteLoss(LpsgdException):
    def __init__(self, *args, step=None, trajectory=None, **kwargs):
        super().__init__(*args, **kwargs)
        self.step = step
        self.trajectory = trajectory

    def __str__(self):
        return f"Non-finite loss encountered at step {self.step}; run aborted"


class ReferenceDivergence(LpsgdException):
    def __init__(self, *args, step=None, loss=None, best_loss=None, rate=None, **kwargs):
        super().__init__(*args, **kwargs)
        self.step = step
        self.loss = loss
        self.best_loss = best_loss
        self.rate = rate

    def __str__(self):
        return f"""
        Reference gradient descent diverged at step {self.step}
        Rate: {self.rate}
        Loss: {self.loss} (best seen: {self.best_loss})"""


class IdxParseError(LpsgdException):
    def __init__(self, *args, offset=0, path=None, **kwargs):
        super().__init__(*args, **kwargs)
        self.offset = offset
        self.path = path

    def __str__(self):
        reason = super().__str__()
        return f"{self.path or '<bytes>'}: byte offset {self.offset}: {reason}"


class ConfigError(LpsgdException):
    pass


class BoundViolation(LpsgdException):
    def __init__(self, *args, report=None, **kwargs):
        super().__init__(*args, **kwargs)
        self.report = report or {}

    def __str__(self):
        details = super().__str__()
        return f"A convergence bound was violated: {details}"
