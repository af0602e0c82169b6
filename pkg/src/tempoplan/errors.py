"""Exception types shared across the library."""


class TempoplanError(Exception):
    """Base class for all library-specific errors."""


class DatasetFormatError(TempoplanError):
    """Raised when a dataset file violates the JSON schema or the domain
    invariants enforced at ingestion (uniqueness, ordering, positive lengths).

    ``violations`` lists one human-readable message per offending field.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class EmptyDataset(TempoplanError):
    """Dataset contains no demonstrations."""


class PairNeverCoOccurs(TempoplanError):
    """The two actions never appear together in any demonstration."""


class InfeasibleRegion(TempoplanError):
    """The requested Allen region is empty under the given margin."""


class NoFeasibleAssignment(TempoplanError):
    """No contradiction-free complete assignment exists."""


class NoSymbolicSolution(TempoplanError):
    """The bounded grid search found no plan satisfying the assignment."""


class InfeasibleConstraints(TempoplanError):
    """The plan optimization constraint set is empty."""


class SolverStall(TempoplanError):
    """The QP solver hit its iteration cap; carries the best feasible iterate."""

    def __init__(self, message, best=None):
        self.best = best
        super().__init__(message)


class ActionSetMismatch(TempoplanError):
    """Plan and demonstration do not contain the same action set."""


class SpecInfeasible(TempoplanError):
    """A ground-truth mode admits no symbolic witness."""


class BenchTimeout(TempoplanError):
    """Benchmark exceeded its wall-clock limit; carries the partial trace."""

    def __init__(self, message, trace=None):
        self.trace = trace
        super().__init__(message)
