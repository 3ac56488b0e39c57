"""
Exception taxonomy for the engine.

Each class carries the process exit code the CLI uses when it surfaces.
"""


class XlirError(Exception):
    """Base class for every error the engine raises on purpose."""

    exit_code: int = 1


class UsageError(XlirError):
    """Invalid command-line usage or configuration."""

    exit_code = 1


class InputFormatError(XlirError):
    """An input file does not follow its documented format."""

    exit_code = 2


class ContractError(XlirError):
    """A numeric precondition or contract does not hold."""

    exit_code = 3
