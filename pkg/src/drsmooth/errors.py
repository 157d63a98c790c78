"""Exception types raised across the package."""


class DRError(Exception):
    """Base class for all package errors."""


class InvalidChoice(DRError, ValueError):
    """An appliance decision violates its window or duration."""


class MissingChoice(DRError, ValueError):
    """A household is missing a decision for one of its appliances."""


class DuplicateChoice(DRError, ValueError):
    """More than one decision was supplied for the same appliance."""


class ChoiceSpaceTooLarge(DRError, RuntimeError):
    """An exhaustive or oracle search would exceed its configured cap."""


class Infeasible(DRError, RuntimeError):
    """No joint choice satisfies the aggregator supply bounds."""


class VersionError(DRError, ValueError):
    """A persisted file carries an unsupported format version."""


class SchemaError(DRError, ValueError):
    """A persisted file does not match the expected structure."""


class NonFiniteDual(DRError, FloatingPointError):
    """The coordinator produced a non-finite dual value."""
