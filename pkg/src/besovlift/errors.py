"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class BesovLiftError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(BesovLiftError, ValueError):
    """Raised when an argument violates a documented precondition."""


class DimensionUnsupported(ValidationError):
    pass


class GridTooLarge(ValidationError):
    pass


class LevelOutOfRange(ValidationError):
    pass


class EpsOutOfRange(ValidationError):
    pass


class BadAxisSet(ValidationError):
    pass


class NonFiniteSample(ValidationError):
    pass


class MTooSmall(ValidationError):
    pass


class DeltaOutOfRange(ValidationError):
    pass


class DivisionByZeroSeminorm(BesovLiftError, ZeroDivisionError):
    pass


class SupportViolation(ValidationError):
    pass


class CenterOnNode(ValidationError):
    pass


class SpecInvalid(ValidationError):
    pass


class BSVGFormatError(ValidationError):
    pass


class OutOfValidityRange(UserWarning):
    """Emitted when a Haar-type norm is evaluated outside ``s*p < 1``."""


class DegenerateEdge(BesovLiftError):
    """Two adjacent samples are (almost) antipodal, so no principal increment exists."""

    def __init__(self, cell_a, cell_b, gap: float):
        self.cell_a = tuple(int(c) for c in cell_a)
        self.cell_b = tuple(int(c) for c in cell_b)
        self.gap = float(gap)
        super().__init__(
            f"angular gap {self.gap:.6g} between cells {self.cell_a} and {self.cell_b} "
            "is too close to pi"
        )


class ModulusCollapse(BesovLiftError):
    """``|u * rho_eps| <= 1/2`` somewhere at the smallest mollification scale."""

    def __init__(self, eps: float, cell, modulus: float):
        self.eps = float(eps)
        self.cell = tuple(int(c) for c in cell)
        self.modulus = float(modulus)
        super().__init__(
            f"|F| = {self.modulus:.6g} <= 1/2 at cell {self.cell} for eps = {self.eps:.6g}"
        )


class ObstructionDetected(BesovLiftError):
    """A closed grid loop with nonzero winding prevents a continuous phase."""

    def __init__(self, witness):
        self.witness = witness
        super().__init__(
            f"loop of length {len(witness.loop)} has winding {witness.winding}"
        )
