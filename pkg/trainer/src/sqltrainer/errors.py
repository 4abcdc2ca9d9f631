"""Error taxonomy: one base class, narrow subclasses per failure domain."""

from __future__ import annotations


class TrainerError(Exception):
    """Base class for every error this package raises on purpose."""


class SpecError(TrainerError):
    """A training specification field is out of range or inconsistent."""


class DataError(TrainerError):
    """A training file is malformed or unusable under the spec."""
