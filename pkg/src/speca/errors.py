"""Exception types shared across the auditing pipeline."""


class SpecaError(Exception):
    """Base class for all pipeline errors."""


# --- document parsing / extraction ---

class EmptyDocument(SpecaError):
    pass


class InvalidDocId(SpecaError):
    pass


class NoPseudocode(SpecaError):
    pass


class WriteFailed(SpecaError):
    pass


# --- pattern database ---

class DuplicatePattern(SpecaError):
    pass


class InvalidCategory(SpecaError):
    pass


class NotValidated(SpecaError):
    pass


# --- code index ---

class IndexFailure(SpecaError):
    def __init__(self, impl_id: str, message: str = ""):
        self.impl_id = impl_id
        super().__init__(message or f"failed to index implementation {impl_id!r}")


class UnknownImplementation(SpecaError):
    pass


# --- checklist / findings lifecycle ---

class IllegalTransition(SpecaError):
    pass


class NotFound(SpecaError):
    pass


class PoCRequired(SpecaError):
    pass


# --- threat model ---

class DanglingEdge(SpecaError):
    pass


class DuplicateActor(SpecaError):
    pass


class UnknownActor(SpecaError):
    pass


# --- severity / scoring ---

class InvalidImpact(SpecaError):
    pass


class UnknownShare(SpecaError):
    pass


class NoBoundaries(SpecaError):
    pass


# --- evaluation ---

class InvalidInput(SpecaError):
    pass


# --- analyzer ---

class BackendUnavailable(SpecaError):
    pass


# --- service ---

class StartupFailure(SpecaError):
    pass
