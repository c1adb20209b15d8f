"""Exception hierarchy shared by all aitrail modules."""


class AitrailError(Exception):
    """Base class for every error raised by this package."""


# --- ledger ---

class MalformedKey(AitrailError):
    pass


class LedgerClosed(AitrailError):
    pass


class SigningFailure(AitrailError):
    pass


# --- identity ---

class AlreadyRegistered(AitrailError):
    pass


class UnknownDid(AitrailError):
    pass


class DuplicateApplication(AitrailError):
    pass


class NotAuthorized(AitrailError):
    pass


class NoPendingApplication(AitrailError):
    pass


class UnknownVc(AitrailError):
    pass


class RangeViolation(AitrailError):
    pass


# --- trajectory ---

class IdentityUnverified(AitrailError):
    pass


class UnknownTrajectory(AitrailError):
    pass


class EmptyCallees(AitrailError):
    pass


# --- graph ---

class NotFound(AitrailError):
    pass


class UnknownNode(AitrailError):
    pass


class BadInterval(AitrailError):
    pass


# --- interface ---

class BadInput(AitrailError):
    pass
