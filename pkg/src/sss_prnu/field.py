"""Exact arithmetic in a prime field Z_p.

Field elements are canonical residues: plain Python ints in [0, p).
Every operation returns a canonical residue, so values coming out of a
PrimeField can be fed straight back in.  Keeping elements as bare ints
(rather than wrapper objects) keeps the share-vector hot loops cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

# Mersenne prime: fast to reduce, fits in 8 bytes, and (p-1)/2 ~ 1.15e18
# leaves ample headroom for the fixed-point capacity bound.
DEFAULT_PRIME = 2**61 - 1

# Deterministic Miller-Rabin witness set, valid for all n < 3.3e24 (> 2**64).
_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)

ELEMENT_BYTES = 8


class FieldError(ValueError):
    """Base class for field arithmetic errors."""


class NotPrime(FieldError):
    """Raised when a modulus fails the primality check."""


class ZeroInverse(FieldError):
    """Raised when inverting the zero element."""


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin primality test for n < 2**64."""
    if n < 2:
        return False
    for small in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n == small:
            return True
        if n % small == 0:
            return False
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class PrimeField:
    """Z_p with a validated prime modulus.

    The modulus must be prime and below 2**63 so every element
    serializes as an 8-byte unsigned integer.
    """

    p: int = DEFAULT_PRIME

    def __post_init__(self) -> None:
        if self.p >= 2**63:
            raise NotPrime(f"modulus {self.p} does not fit in 8 bytes")
        if not is_prime(self.p):
            raise NotPrime(f"modulus {self.p} is not prime")

    @property
    def half(self) -> int:
        """Largest magnitude representable as a signed residue: (p-1)/2."""
        return (self.p - 1) // 2

    def element(self, v: int) -> int:
        """Canonicalize an arbitrary int into [0, p)."""
        return v % self.p

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.p

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.p

    def neg(self, a: int) -> int:
        return -a % self.p

    def mul(self, a: int, b: int) -> int:
        # Python ints are arbitrary precision, so the double-width
        # intermediate needed for a 61-bit modulus is automatic.
        return a * b % self.p

    def inv(self, a: int) -> int:
        """Multiplicative inverse via Fermat: a**(p-2) mod p."""
        if a % self.p == 0:
            raise ZeroInverse("0 has no multiplicative inverse")
        return pow(a, self.p - 2, self.p)

    def pow(self, a: int, e: int) -> int:
        return pow(a, e, self.p)

    def signed(self, a: int) -> int:
        """Lift a canonical residue to the signed range (-(p-1)/2, (p-1)/2]."""
        return a if a <= self.half else a - self.p

    def rand(self, rng) -> int:
        """Uniform element from [0, p) drawn from the given RNG."""
        return rng.randrange(self.p)

    def to_bytes(self, a: int) -> bytes:
        """Serialize one element as an 8-byte big-endian unsigned int."""
        return a.to_bytes(ELEMENT_BYTES, "big")

    def from_bytes(self, raw: bytes) -> int:
        if len(raw) != ELEMENT_BYTES:
            raise ValueError(f"expected {ELEMENT_BYTES} bytes, got {len(raw)}")
        v = int.from_bytes(raw, "big")
        if v >= self.p:
            raise ValueError(f"{v} is not a canonical residue mod {self.p}")
        return v
