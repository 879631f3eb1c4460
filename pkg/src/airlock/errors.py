"""Exception hierarchy shared across zones."""

from __future__ import annotations


class AirlockError(Exception):
    """Base class for every protocol-level failure."""


class IllegalTransition(AirlockError):
    """A lifecycle event that is not an edge of the job state graph.

    Signals a protocol violation or tampering; callers must audit and refuse.
    """

    def __init__(self, from_state, event):
        self.from_state = from_state
        self.event = event
        super().__init__(f"illegal transition: {from_state} on {event}")


class MalformedArchive(AirlockError):
    pass


# --- queue errors -----------------------------------------------------------


class UnknownQueue(AirlockError):
    pass


class StorageFull(AirlockError):
    pass


class OutOfOrderAck(AirlockError):
    pass


class CorruptInterior(AirlockError):
    """Checksum failure before the log tail: tampering, not a torn write."""


class QueueFrozen(AirlockError):
    """Queue refused service after interior corruption; manual intervention required."""


class RoleViolation(AirlockError):
    """A zone attempted a queue role it is not bound to."""


# --- attestation errors -----------------------------------------------------


class UnknownVetter(AirlockError):
    pass


class BadKey(AirlockError):
    pass


# --- vault errors -----------------------------------------------------------


class BadPassphrase(AirlockError):
    pass


class DigestMismatch(AirlockError):
    def __init__(self, dataset_id: str):
        self.dataset_id = dataset_id
        super().__init__(f"plaintext digest mismatch for dataset {dataset_id}")


class DuplicateVersion(AirlockError):
    pass


class VaultLocked(AirlockError):
    pass


class UnknownDataset(AirlockError):
    pass


class UnknownCredential(AirlockError):
    pass


class UnknownToken(AirlockError):
    pass


class AlreadyConsumed(AirlockError):
    pass


class Expired(AirlockError):
    pass


class Revoked(AirlockError):
    pass


# --- executor errors --------------------------------------------------------


class SignatureRejected(AirlockError):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f"signature rejected: {reason}")


class CredentialDenied(AirlockError):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f"credential denied: {reason}")


class RunnerFailure(AirlockError):
    pass


class CollectionFailure(AirlockError):
    pass


# --- gateway errors -----------------------------------------------------------


class Unauthorised(AirlockError):
    pass


class MalformedBundle(AirlockError):
    pass


class HashMismatch(AirlockError):
    """Client-claimed code hash differs from the server's recomputation."""


class TooLarge(AirlockError):
    pass


class NotFound(AirlockError):
    """Job unknown to this principal; deliberately also covers other
    principals' jobs so the API yields no existence oracle."""


class NotReleased(AirlockError):
    pass


class CaseClosed(AirlockError):
    """A vetting decision is immutable once recorded."""


class SignatureInvalid(AirlockError):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f"signature invalid: {reason}")
