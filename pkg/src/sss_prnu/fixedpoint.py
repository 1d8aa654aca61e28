"""Fixed-point encoding of real-valued noise data into field elements.

Reals are scaled by 10**d, rounded to the nearest integer (ties away
from zero), and mapped into Z_p with negatives represented as p - |m|.
Products of two encoded values therefore carry a 10**(2d) scale, which
`decode` removes via `denom_power`.

All of the encrypted-domain arithmetic is exact as long as every
intermediate integer stays within the signed range (-(p-1)/2, (p-1)/2];
`capacity_check` verifies that bound before any data is shared.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .field import PrimeField


class Centering(enum.Enum):
    """Where mean subtraction happens.

    PLAINTEXT: the data owner centers the matrix before encoding.
    ENCRYPTED: raw values are shared and each server centers its own
    shares homomorphically, clearing the 1/n mean denominator by
    multiplying everything by the element count.
    """

    PLAINTEXT = "plaintext"
    ENCRYPTED = "encrypted"


class OutOfRange(ValueError):
    """Value too large to encode at the requested scale."""


@dataclass(frozen=True)
class CapacityReport:
    """Outcome of a capacity check: the bound, the demand, and the margin."""

    bound: int
    required: float
    margin: float

    @property
    def ok(self) -> bool:
        return self.required < self.bound


class CapacityExceeded(ValueError):
    """Raised when intermediate sums could leave the signed range."""

    def __init__(self, report: CapacityReport):
        self.report = report
        super().__init__(
            f"capacity bound violated: need {report.required:.4g}, "
            f"bound {report.bound}"
        )


@dataclass(frozen=True)
class Scaling:
    """Decimal fixed-point parameters: keep d decimal places."""

    d: int = 4

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError("scaling exponent d must be >= 1")

    @property
    def scale(self) -> int:
        return 10**self.d


def round_half_away(x: float) -> int:
    """Round to nearest integer with ties away from zero."""
    if x >= 0:
        return math.floor(x + 0.5)
    return math.ceil(x - 0.5)


def encode(x: float, s: Scaling, field: PrimeField) -> int:
    """Encode a real as round(x * 10**d) mod p.

    Negative values land at p - |m| so the signed lift in `decode`
    recovers them exactly.
    """
    m = round_half_away(x * s.scale)
    if abs(m) > field.half:
        raise OutOfRange(
            f"|{x}| scaled by 10^{s.d} exceeds the signed field range"
        )
    return m % field.p


def decode(e: int, s: Scaling, field: PrimeField, denom_power: int = 1) -> float:
    """Decode a field element back to a real.

    denom_power is 1 for linear quantities and 2 for products of two
    encoded values (the cross and square sums each carry 10**(2d)).
    """
    return field.signed(e) / s.scale**denom_power


def capacity_check(
    num_elements: int,
    max_abs: float,
    s: Scaling,
    field: PrimeField,
    centering: Centering = Centering.PLAINTEXT,
) -> CapacityReport:
    """Verify that the correlation sums cannot overflow the signed range.

    max_abs is the largest centered magnitude in real units.  Each of
    the three sums is bounded by num_elements * (10**d * max_abs)**2.
    Encrypted-side centering multiplies every share by num_elements to
    clear the mean denominator, which squares into an extra
    num_elements**2 factor.

    Returns the report on success, raises CapacityExceeded otherwise.
    """
    per_element = s.scale * max_abs
    required = num_elements * per_element**2
    if centering is Centering.ENCRYPTED:
        required *= num_elements**2
    bound = field.half
    margin = math.inf if required == 0 else bound / required
    report = CapacityReport(bound=bound, required=required, margin=margin)
    if not report.ok:
        raise CapacityExceeded(report)
    return report
