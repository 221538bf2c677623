"""Exception hierarchy shared by all impnet modules."""


class ImpnetError(Exception):
    """Base class for every error raised by impnet."""


class DimensionMismatch(ImpnetError, ValueError):
    pass


class IrregularPencil(ImpnetError, ArithmeticError):
    pass


class SingularAtFrequency(ImpnetError, ArithmeticError):
    def __init__(self, s, cond=None):
        self.s = s
        self.cond = cond
        msg = f"shifted pencil is singular at s={s!r}"
        if cond is not None:
            msg += f" (condition estimate {cond:.3g})"
        super().__init__(msg)


class NonSquare(ImpnetError, ValueError):
    pass


class ContourTooCoarse(ImpnetError, ArithmeticError):
    pass


class PointOnLocus(ImpnetError, ArithmeticError):
    def __init__(self, msg, index=None, s=None):
        self.index = index
        self.s = s
        super().__init__(msg)


class WrongDomain(ImpnetError, ValueError):
    pass


class WrongShape(ImpnetError, ValueError):
    pass


class FrameMismatch(ImpnetError, ValueError):
    pass


class EmptyBranch(ImpnetError, ValueError):
    pass


class InvalidOperatingPoint(ImpnetError, ValueError):
    pass


class UnsupportedMode(ImpnetError, ValueError):
    pass


class RoleMismatch(ImpnetError, ValueError):
    pass


class NoConvergence(ImpnetError, ArithmeticError):
    pass


class UnsupportedTopology(ImpnetError, ValueError):
    pass


class UnsolvedOperatingPoint(ImpnetError, ValueError):
    pass


class DisconnectedBus(ImpnetError, ValueError):
    pass


class IntegratorDivergence(ImpnetError, ArithmeticError):
    def __init__(self, msg, growth_rate=None):
        self.growth_rate = growth_rate
        super().__init__(msg)


class ConfigError(ImpnetError, ValueError):
    def __init__(self, msg, key=None, line=None):
        self.key = key
        self.line = line
        where = ""
        if key is not None:
            where = f" [key '{key}'"
            where += f", line {line}]" if line is not None else "]"
        super().__init__(msg + where)
