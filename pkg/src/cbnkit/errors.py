"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front-end:
2 config, 3 data, 4 identification, 5 numerical/positivity.
"""


class CbnError(Exception):
    exit_code = 1


class ConfigError(CbnError):
    exit_code = 2


class DataError(CbnError):
    exit_code = 3


class GraphError(CbnError):
    exit_code = 4


class IdentificationError(GraphError):
    """No valid adjustment set, or a declared set fails the back-door check.

    ``witness`` holds an open back-door path when one is known.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NumericalError(CbnError):
    exit_code = 5


# graph
class CycleError(GraphError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("directed cycle: " + " -> ".join(map(str, self.cycle)))


class UnresolvedEdgeError(GraphError):
    pass


class UnknownNodeError(GraphError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class InvalidQueryError(GraphError, ValueError):
    pass


# data
class SchemaMismatchError(DataError):
    pass


class EmptyFileError(DataError):
    pass


class EmptyDatasetError(DataError):
    pass


class MissingColumnError(DataError):
    pass


class LatentWithoutDataError(DataError):
    pass


class UnmappedStateError(DataError):
    pass


class MissingWeightsError(DataError):
    pass


class NonMonotonicEdgesError(DataError, ValueError):
    pass


class CardinalityError(DataError):
    pass


class SubsampleTooSmallError(DataError):
    pass


# numerical
class NegativeAlphaError(NumericalError, ValueError):
    pass


class ZeroFrequencyError(NumericalError, ZeroDivisionError):
    pass


class ZeroEvidenceProbabilityError(NumericalError):
    pass


class IncompleteAssignmentError(NumericalError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class UnsupportedStratumError(NumericalError):
    """Positivity violation: a stratum with positive mass never sees the treatment level."""

    def __init__(self, message, stratum=None):
        super().__init__(message)
        self.stratum = stratum


class ZeroDenominatorError(NumericalError, ZeroDivisionError):
    pass


class EmptyGroupError(NumericalError, ValueError):
    pass


class ZeroMassGroupError(NumericalError):
    pass


class EmptySampleError(NumericalError, ValueError):
    pass


class RefutationError(NumericalError):
    """An estimation failure inside a refutation loop; ``iteration`` names the draw."""

    def __init__(self, message, iteration):
        super().__init__(message)
        self.iteration = iteration
