class SRBLabError(Exception):
    """Base class; `kind` selects the CLI exit code."""
    kind = "numerical"


class NumericalError(SRBLabError):
    kind = "numerical"


class NonConvergence(NumericalError):
    pass


class ManifoldCollapse(NumericalError):
    pass


class NotIntegrable(NumericalError):
    pass


class HypothesisViolated(NumericalError):
    pass


class DomainCollapse(NumericalError):
    pass


class NoReturn(NumericalError):
    pass


class EmptySequence(NumericalError):
    pass


class TooFewSamples(NumericalError):
    pass


class PreconditionError(SRBLabError, ValueError):
    kind = "config"


class NotInOmega0(PreconditionError):
    pass


class BadItinerary(PreconditionError):
    pass


class DegenerateSeed(PreconditionError):
    pass
