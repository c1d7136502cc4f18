"""Exception hierarchy for the subradiant Markov-chain toolkit."""


class SubradiantError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParams(SubradiantError, ValueError):
    """Model parameters or a level lie outside the admissible range."""


class SingularOrNonUnique(SubradiantError):
    """The generator has no unique stationary distribution."""


class NotConverged(SubradiantError):
    """An iterative routine exhausted its iteration or step budget."""


class DivergentEntropy(SubradiantError):
    """An edge carries flux in one direction only, so the entropy rate is infinite."""


class DarkState(SubradiantError):
    """The emitted intensity vanishes, so a normalized correlation is undefined."""


class InsufficientData(SubradiantError, ValueError):
    """Too few events or an empty time window for a statistic."""
