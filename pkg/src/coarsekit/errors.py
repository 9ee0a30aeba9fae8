"""Exception hierarchy shared by every module."""


class CoarseKitError(Exception):
    """Base class for all library errors."""


class MetricError(CoarseKitError):
    """A distance table violates the metric axioms (or a graph is disconnected)."""


class InputError(CoarseKitError):
    """Malformed descriptor, family, map, or tree input."""


class PreconditionError(CoarseKitError):
    """A documented operation precondition does not hold for the given input."""


class CertificateError(CoarseKitError):
    """A computed output fails its own certificate check.

    Carries a ``witness`` attribute describing the offending pair/set so the
    failure can be reproduced offline.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class Refusal(CoarseKitError):
    """A search concluded (or gave up on) infeasibility.

    ``proved`` is True when infeasibility was proved exhaustively and False
    when a node budget ran out first.  ``witness`` holds the residue or the
    offending subset when one exists.
    """

    def __init__(self, message, *, proved, witness=None):
        super().__init__(message)
        self.proved = proved
        self.witness = witness
