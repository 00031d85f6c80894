"""Exception hierarchy.

Each pipeline stage raises a subclass of :class:`AuditError`; the CLI maps
:class:`ConfigError` to exit code 1 and everything else to exit code 2.
"""

from __future__ import annotations


class AuditError(Exception):
    """Base class for all recaudit errors."""


# catalog
class CatalogError(AuditError):
    pass


class MissingFile(CatalogError):
    pass


class MalformedRow(CatalogError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class DuplicateId(CatalogError):
    pass


class DuplicateNormalizedTitle(CatalogError):
    def __init__(self, ids: tuple[str, ...], normalized: str):
        super().__init__(f"items {', '.join(ids)} share normalized title {normalized!r}")
        self.ids = ids
        self.normalized = normalized


class EmptyCatalog(CatalogError):
    pass


# prompts
class UnknownCategory(AuditError):
    pass


class KTooLarge(AuditError):
    pass


class UnknownTemplate(AuditError):
    pass


# backends
class BackendError(AuditError):
    pass


class EndpointUnreachable(BackendError):
    pass


class AuthFailure(BackendError):
    pass


class RetriesExhausted(BackendError):
    pass


class FixtureMiss(BackendError):
    pass


# parsing / metrics / analysis
class EmptyParse(AuditError):
    pass


class EmptyList(AuditError):
    pass


class RankExceedsK(AuditError):
    pass


class EmptyInput(AuditError):
    pass


class MissingNeutral(AuditError):
    pass


class AttributeSetMismatch(AuditError):
    pass


# report
class IoFailure(AuditError):
    pass


class TooManyAxes(AuditError):
    pass


class SchemaViolation(AuditError):
    pass


# config
class ConfigError(AuditError):
    pass


class ParseError(ConfigError):
    def __init__(self, location: str, message: str):
        super().__init__(f"{location}: {message}")
        self.location = location


class InvalidField(ConfigError):
    def __init__(self, name: str, reason: str):
        super().__init__(f"invalid field {name!r}: {reason}")
        self.name = name
        self.reason = reason


class MissingCatalog(ConfigError):
    def __init__(self, path: str):
        super().__init__(f"catalog file not found: {path}")
        self.path = path
