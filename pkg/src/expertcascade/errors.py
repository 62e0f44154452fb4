"""Exception hierarchy shared across the package."""

from __future__ import annotations


class ExpertCascadeError(Exception):
    """Base class for all package errors."""


# --- rule DSL ---------------------------------------------------------------

class LexError(ExpertCascadeError):
    def __init__(self, line: int, column: int, char: str):
        self.line = line
        self.column = column
        self.char = char
        super().__init__(f"unexpected character {char!r} at line {line}, column {column}")


class ParseError(ExpertCascadeError):
    def __init__(self, line: int, column: int, expected: str, found: str):
        self.line = line
        self.column = column
        self.expected = expected
        self.found = found
        super().__init__(
            f"expected {expected} but found {found} at line {line}, column {column}"
        )


class ValidationError(ExpertCascadeError):
    def __init__(self, name: str, reason: str):
        self.name = name
        self.reason = reason
        super().__init__(f"{name}: {reason}")


# --- knowledge engine -------------------------------------------------------

class MissingFeature(ExpertCascadeError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"instance is missing feature column {column!r}")


class UnknownAtom(ExpertCascadeError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"no satisfaction value for atom {name!r}")


class WeightsNotFitted(ExpertCascadeError):
    def __init__(self, class_label: str):
        self.class_label = class_label
        super().__init__(f"weights not fitted for class {class_label!r}")


class EmptyDataset(ExpertCascadeError):
    pass


# --- imbalance metrics ------------------------------------------------------

class EmptyClass(ExpertCascadeError):
    pass


class NoClasses(ExpertCascadeError):
    pass


class EmptyPartition(ExpertCascadeError):
    pass


# --- classifier pool --------------------------------------------------------

class DuplicateId(ExpertCascadeError):
    def __init__(self, ident: str):
        self.ident = ident
        super().__init__(f"duplicate id {ident!r}")


class SchemaMismatch(ExpertCascadeError):
    pass


class UnknownInstance(ExpertCascadeError):
    def __init__(self, ident: str):
        self.ident = ident
        super().__init__(f"no stored scores for instance {ident!r}")


class ExternalScoreMissing(ExpertCascadeError):
    def __init__(self, ids: list[str]):
        self.ids = ids
        super().__init__(f"external score file missing {len(ids)} instance id(s): {ids[:5]}")


# --- cascade ----------------------------------------------------------------

class RareClassAbsent(ExpertCascadeError):
    pass


class PoolEmpty(ExpertCascadeError):
    pass


class LabelSetMismatch(ExpertCascadeError):
    pass


class VersionMismatch(ExpertCascadeError):
    pass


class FingerprintMismatch(ExpertCascadeError):
    pass


# --- resampling / harness ---------------------------------------------------

class TooFewSamples(ExpertCascadeError):
    pass


class InvalidConfig(ExpertCascadeError):
    pass


class DataParseError(ExpertCascadeError):
    def __init__(self, row: int, column: str, reason: str):
        self.row = row
        self.column = column
        self.reason = reason
        super().__init__(f"row {row}, column {column!r}: {reason}")


class UnlabeledData(ExpertCascadeError):
    pass
