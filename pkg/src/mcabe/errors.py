"""Exception hierarchy shared by the library, harness and CLI."""


class MCABEError(Exception):
    """Base class for all library errors."""

    #: process exit status used by the CLI
    exit_code = 1


class EncodingError(MCABEError, ValueError):
    exit_code = 3


class PolicySyntaxError(MCABEError, ValueError):
    exit_code = 4

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class WorkspaceError(MCABEError):
    exit_code = 5


class EpochRegression(MCABEError):
    exit_code = 6


class UnknownFile(MCABEError, KeyError):
    exit_code = 7

    def __str__(self) -> str:
        return Exception.__str__(self)


class UnknownDR(MCABEError, KeyError):
    exit_code = 8

    def __str__(self) -> str:
        return Exception.__str__(self)


class UnknownPrivilege(MCABEError, KeyError):
    exit_code = 9

    def __str__(self) -> str:
        return Exception.__str__(self)


class RevokedUser(MCABEError):
    exit_code = 10


class NotSatisfied(MCABEError):
    exit_code = 11


class PrivilegeDenied(MCABEError):
    exit_code = 12


class Expired(MCABEError):
    exit_code = 13


class StaleSignature(MCABEError):
    exit_code = 14


class BadMaskValue(MCABEError):
    exit_code = 15


class MissingSignature(MCABEError):
    exit_code = 16


class DuplicateFile(MCABEError):
    exit_code = 17
