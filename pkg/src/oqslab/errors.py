"""Exception hierarchy shared by every oqslab module."""


class OQSError(Exception):
    """Base class for all library errors."""


class ShapeError(OQSError, ValueError):
    pass


class SizeLimit(OQSError, ValueError):
    pass


class NumericalError(OQSError, ArithmeticError):
    pass


class NormalizationError(OQSError, ValueError):
    pass


class HermiticityError(OQSError, ValueError):
    pass


class WrongKind(OQSError, TypeError):
    pass


class QuadratureError(OQSError, ValueError):
    pass


class StepError(NumericalError):
    pass


class CutoffError(NumericalError):
    """Fock truncation did not converge to the requested drift bound."""


class IncommensurableError(OQSError, ValueError):
    pass


class UnsupportedOrder(OQSError, ValueError):
    pass


class NotAState(OQSError, ValueError):
    pass


class NotProduct(OQSError, ValueError):
    pass


class EmptyGrid(OQSError, ValueError):
    pass


class InsufficientData(OQSError, ValueError):
    pass


class CompletenessError(OQSError, ValueError):
    pass


class ContractError(OQSError, ValueError):
    pass
