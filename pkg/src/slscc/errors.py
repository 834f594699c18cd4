"""Exception hierarchy shared by the solver modules."""


class SlsccError(Exception):
    """Base class for all errors raised by this package."""


class InstanceError(SlsccError, ValueError):
    """Raised when an instance record fails validation.

    ``violations`` holds one message per problem found, each naming the
    offending field and index.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class Infeasible(SlsccError):
    """A plan violates the problem constraints."""


class InfeasiblePattern(Infeasible):
    """A setup pattern leaves positive demand with no earlier setup."""


class EmptySet(SlsccError, ValueError):
    """An occurred-scenario set was empty."""


class EmptyJz(EmptySet):
    """Every scenario is dropped by the indicator vector."""


class EmptyJ1(SlsccError, ValueError):
    """A node subproblem was requested with no scenario fixed to occur."""


class InfeasibleNode(SlsccError):
    """A branch-and-bound node has an empty relaxation."""


class AssumptionViolated(SlsccError):
    """The stronger Wagner-Whitin cost condition does not hold."""


class NumericalFailure(SlsccError):
    """The simplex engine exhausted its pivot budget."""


class EntryOutOfRange(SlsccError, ValueError):
    """A matrix handed to the TU checker has entries outside {-1, 0, 1}."""


class SizeCap(SlsccError, ValueError):
    """A TU check request exceeds the enumeration caps."""


class NoFractional(SlsccError, ValueError):
    """No indicator is strictly fractional."""


class FamilyTooLarge(SlsccError):
    """The admissible scenario family exceeds the configured cap."""


class TooLarge(SlsccError):
    """An instance is too big for exhaustive enumeration."""
