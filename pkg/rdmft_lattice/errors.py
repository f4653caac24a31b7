"""
Exceptions raised by the lattice functional toolkit.
"""

from __future__ import annotations

from typing import Any, Optional


class RdmftError(Exception):
    """
    Base error carrying a description and optional context values.
    """

    def __init__(self, description: str, context: Optional[dict[str, Any]] = None):
        super().__init__(description)
        self.description = description
        self.context = context or {}

    def __str__(self):
        ret = self.description
        if self.context:
            details = ", ".join(f"{k}={v!r}" for k, v in self.context.items())
            ret = ret + " (" + details + ")"
        return ret


class InvalidOrbitalError(RdmftError, ValueError):
    pass


class ModelError(RdmftError):
    pass


class PreconditionError(RdmftError):
    pass


class SymmetryError(RdmftError):
    pass


class NotDiagonalError(RdmftError):
    pass


class CapacityError(RdmftError):
    pass


class DimensionError(RdmftError, ValueError):
    pass


class NotSimplexError(RdmftError):
    pass


class OutsidePolytopeError(RdmftError):
    pass


class InfeasibleError(RdmftError):
    pass


class StepTooLargeError(RdmftError):
    pass


class UnsupportedFeatureError(RdmftError):
    pass


class ConfigError(RdmftError, ValueError):
    """
    Malformed run configuration. ``pointer`` is the JSON pointer of the
    offending value.
    """

    def __init__(self, description: str, pointer: str = ""):
        super().__init__(description, {"pointer": pointer} if pointer else None)
        self.pointer = pointer
