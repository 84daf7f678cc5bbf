"""Error hierarchy shared by every ontodraft module.

Each error carries the process exit code the CLI reports for it. Non-fatal
conditions are returned as :class:`app.models.common.Diagnostic` values instead.
"""

from typing import Optional


class OntodraftError(Exception):
    exit_code: int = 1


# -----------------------------
# Parsing
# -----------------------------


class TurtleSyntaxError(OntodraftError):
    """Malformed Turtle document, with a 1-based position in the source."""

    exit_code = 3

    def __init__(self, line: int, column: int, message: str) -> None:
        self.line = line
        self.column = column
        self.message = message
        super().__init__(f"line {line}, column {column}: {message}")


class QuerySyntaxError(OntodraftError):
    exit_code = 3


# -----------------------------
# Case loading
# -----------------------------


class CaseError(OntodraftError):
    exit_code = 3


class MissingFile(CaseError):
    def __init__(self, path: object) -> None:
        self.path = str(path)
        super().__init__(f"missing file: {self.path}")


class DanglingReference(CaseError):
    pass


class DuplicateCqId(DanglingReference):
    pass


class UnclassifiableTerm(CaseError):
    def __init__(self, iri: str) -> None:
        self.iri = iri
        super().__init__(f"query term {iri} is not in the gold signature")


class TemplateError(OntodraftError):
    exit_code = 4


# -----------------------------
# LLM gateway
# -----------------------------


class ConfigError(OntodraftError):
    exit_code = 4


class TransportError(OntodraftError):
    def __init__(self, message: str, status: Optional[int] = None, attempts: int = 0) -> None:
        self.status = status
        self.attempts = attempts
        super().__init__(message)


class AuthError(OntodraftError):
    exit_code = 4


class EmptyOutput(OntodraftError):
    pass


class NonOntologyOutput(OntodraftError):
    def __init__(self, parse_error: TurtleSyntaxError) -> None:
        self.parse_error = parse_error
        super().__init__(f"model output is not Turtle: {parse_error}")


# -----------------------------
# Evaluation and reporting
# -----------------------------


class EmptyInput(OntodraftError):
    exit_code = 2


class LengthMismatch(OntodraftError):
    exit_code = 2


class OverwriteRefused(OntodraftError):
    exit_code = 5

    def __init__(self, path: object) -> None:
        self.path = str(path)
        super().__init__(f"{self.path} already exists; pass --force to overwrite")
