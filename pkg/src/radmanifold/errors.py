"""Exception types shared across the package."""


class RadManifoldError(Exception):
    """Base class for all package errors."""


class MissingWeightsError(RadManifoldError, KeyError):
    """A named tensor required by an operation is absent from the parameters."""

    def __str__(self):
        return Exception.__str__(self)


class ModelFormatError(RadManifoldError, ValueError):
    """Parameter shapes disagree with the declared architecture."""


class DomainError(RadManifoldError, ValueError):
    """Argument lies outside the domain of a function (e.g. a tan pole)."""


class WeightFileError(RadManifoldError):
    """Base class for weight/map container decoding failures."""

    code = 1


class BadMagicError(WeightFileError):
    code = 10


class TruncatedFileError(WeightFileError):
    code = 11


class DuplicateNameError(WeightFileError):
    code = 12


class UnknownDtypeError(WeightFileError):
    code = 13


class UnsupportedVersionError(WeightFileError):
    code = 14


class ConfigError(RadManifoldError, ValueError):
    """Scene configuration failed to parse or validate."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
