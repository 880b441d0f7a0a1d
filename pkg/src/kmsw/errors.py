"""Exception hierarchy shared across the package.

The CLI maps these onto its exit-code contract: usage errors -> 1, input
parsing -> 2, numerical preconditions -> 3, solver failures -> 4.
"""


class KmswError(Exception):
    """Base class for all library errors."""


class InputError(KmswError):
    """Malformed input files or un-parseable data."""


class PreconditionError(KmswError):
    """A numerical precondition failed (bad shapes, degenerate data, ...)."""


class AssemblyError(PreconditionError):
    """Gram block matrix could not be factorized (not positive definite)."""


class SolverError(KmswError):
    """An optimization routine failed to produce a usable result."""
