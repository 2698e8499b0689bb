"""Exception types shared across the package."""


class MoebiusLabError(Exception):
    """Base class."""


class InvalidArgument(MoebiusLabError, ValueError):
    pass


class PointAtInfinity(MoebiusLabError):
    pass


class NotImmersed(MoebiusLabError):
    def __init__(self, msg, node=None):
        super().__init__(msg)
        self.node = node


class NotIsothermal(MoebiusLabError):
    def __init__(self, msg, deviation=None):
        super().__init__(msg)
        self.deviation = deviation


class GaugeError(MoebiusLabError):
    pass


class DegenerateCongruence(MoebiusLabError):
    def __init__(self, msg, nodes=None):
        super().__init__(msg)
        self.nodes = nodes


class InvalidCongruence(MoebiusLabError):
    pass


class NonFlatNormalBundle(MoebiusLabError):
    pass


class CriticalPoint(MoebiusLabError):
    pass


class IntegrabilityRefused(MoebiusLabError):
    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


class DomainError(MoebiusLabError, ValueError):
    pass


class SchemaError(MoebiusLabError, ValueError):
    pass
