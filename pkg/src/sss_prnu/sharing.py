"""(l, n) threshold secret sharing with the homomorphisms the matcher uses.

A secret b0 is hidden as the constant term of a random polynomial
G(u) = b0 + b1*u + ... + b_{l-1}*u^(l-1) over Z_p; share i is the
evaluation at a public nonzero point u_i.  Any l shares recover b0 by
Lagrange interpolation at zero.

Share addition and multiplication by a public constant commute with
reconstruction.  Multiplying two share sets elementwise yields shares
of the product secret, but doubles the polynomial degree to 2l-2, so
the scheme supports exactly one multiplication and afterwards needs
2l-1 points to reconstruct.  `degree_hint` travels with every share so
that both limits are enforced locally.
"""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

from .field import ELEMENT_BYTES, PrimeField


class SharingError(Exception):
    """Base class for share manipulation errors."""


class InsufficientShares(SharingError):
    def __init__(self, given: int, required: int):
        self.given = given
        self.required = required
        super().__init__(f"need {required} shares to reconstruct, got {given}")


class DuplicatePoint(SharingError):
    """Two shares claim the same evaluation point."""


class PointMismatch(SharingError):
    """Elementwise operation across different evaluation points."""


class DegreeMismatch(SharingError):
    """Elementwise operation across different polynomial degrees."""


class LengthMismatch(SharingError):
    """Elementwise operation across vectors of different lengths."""


class DegreeOverflow(SharingError):
    """A second multiplication would make shares unreconstructible."""


# Module-level entropy source for unseeded share generation.
_SYSTEM_RNG = random.SystemRandom()


@dataclass(frozen=True)
class ShareScheme:
    """Parameters of one sharing instance.

    l fresh shares reconstruct a fresh secret; after the single allowed
    multiplication the threshold rises to the quorum 2l-1, which is why
    n >= 2l-1 is required.
    """

    l: int
    n: int
    field: PrimeField = dc_field(default_factory=PrimeField)
    evaluation_points: Optional[tuple[int, ...]] = None
    rng_seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.l < 2:
            raise ValueError("threshold l must be at least 2")
        if self.l > 128:
            raise ValueError("threshold l above 128 does not fit the wire format")
        if self.n < 2 * self.l - 1:
            raise ValueError(
                f"n={self.n} cannot support one multiplication; need n >= {2 * self.l - 1}"
            )
        if self.evaluation_points is None:
            object.__setattr__(
                self, "evaluation_points", tuple(range(1, self.n + 1))
            )
        pts = self.evaluation_points
        if len(pts) != self.n:
            raise ValueError(f"expected {self.n} evaluation points, got {len(pts)}")
        if any(not 0 < u < self.field.p for u in pts):
            raise ValueError("evaluation points must be nonzero residues")
        if len(set(pts)) != self.n:
            raise ValueError("evaluation points must be pairwise distinct")

    @property
    def fresh_degree(self) -> int:
        return self.l - 1

    @property
    def product_degree(self) -> int:
        return 2 * self.l - 2

    @property
    def quorum(self) -> int:
        """Shares needed to reconstruct after the one multiplication."""
        return 2 * self.l - 1

    def make_rng(self) -> random.Random:
        """Seeded RNG when rng_seed is set, system entropy otherwise."""
        if self.rng_seed is None:
            return random.SystemRandom()
        return random.Random(self.rng_seed)


@dataclass(frozen=True)
class Share:
    point: int
    value: int
    degree_hint: int


@dataclass
class ShareVector:
    """One server's share of a whole flattened matrix."""

    point: int
    values: list[int]
    degree_hint: int

    def __len__(self) -> int:
        return len(self.values)


def share(
    secret: int,
    scheme: ShareScheme,
    rng: Optional[random.Random] = None,
    coeffs: Optional[Sequence[int]] = None,
) -> list[Share]:
    """Split one secret into n shares.

    `coeffs` pins the l-1 random polynomial coefficients; it exists for
    tests that need a known polynomial and must not be used otherwise.
    """
    f = scheme.field
    secret = f.element(secret)
    if coeffs is None:
        rng = rng if rng is not None else _SYSTEM_RNG
        coeffs = [rng.randrange(f.p) for _ in range(scheme.l - 1)]
    elif len(coeffs) != scheme.l - 1:
        raise ValueError(f"expected {scheme.l - 1} coefficients")
    out = []
    for u in scheme.evaluation_points:
        acc = 0
        for c in reversed(coeffs):
            acc = (acc + c) * u % f.p
        out.append(Share(u, (acc + secret) % f.p, scheme.fresh_degree))
    return out


def share_vector(
    secrets: Sequence[int],
    scheme: ShareScheme,
    rng: Optional[random.Random] = None,
) -> list[ShareVector]:
    """Share every element of a vector, one fresh polynomial per element."""
    f = scheme.field
    p = f.p
    rng = rng if rng is not None else _SYSTEM_RNG
    coeff_cols = [
        [rng.randrange(p) for _ in range(len(secrets))]
        for _ in range(scheme.l - 1)
    ]
    out = []
    for u in scheme.evaluation_points:
        values = []
        for k, s in enumerate(secrets):
            # Horner evaluation of the k-th polynomial at u.
            acc = 0
            for col in reversed(coeff_cols):
                acc = (acc + col[k]) * u % p
            values.append((acc + s) % p)
        out.append(ShareVector(u, values, scheme.fresh_degree))
    return out


def lagrange_weights(
    points: Sequence[int], x: int, field: PrimeField
) -> list[int]:
    """Weights w_i with F(x) = sum_i y_i * w_i for any polynomial through
    the given points; w_i = prod_{j != i} (x - u_j) / (u_i - u_j).
    """
    p = field.p
    if len(set(points)) != len(points):
        raise DuplicatePoint("duplicate evaluation points")
    weights = []
    for i, ui in enumerate(points):
        num = 1
        den = 1
        for j, uj in enumerate(points):
            if j == i:
                continue
            num = num * (x - uj) % p
            den = den * (ui - uj) % p
        weights.append(num * field.inv(den) % p)
    return weights


def interpolate_at(
    points: Sequence[int], values: Sequence[int], x: int, field: PrimeField
) -> int:
    """Evaluate the unique interpolating polynomial at x."""
    weights = lagrange_weights(points, x, field)
    total = 0
    for w, y in zip(weights, values):
        total += w * y
    return total % field.p


def interpolate_at_zero(
    points: Sequence[int], values: Sequence[int], field: PrimeField
) -> int:
    """Lagrange interpolation at u = 0, where shared secrets live."""
    return interpolate_at(points, values, 0, field)


def reconstruct(shares: Sequence[Share], scheme: ShareScheme) -> int:
    """Recover the secret from degree_hint + 1 or more shares."""
    if not shares:
        raise InsufficientShares(0, 1)
    degree = shares[0].degree_hint
    if any(sh.degree_hint != degree for sh in shares):
        raise DegreeMismatch("shares carry mixed degree hints")
    points = [sh.point for sh in shares]
    if len(set(points)) != len(points):
        raise DuplicatePoint("duplicate evaluation points")
    required = degree + 1
    if len(shares) < required:
        raise InsufficientShares(len(shares), required)
    return interpolate_at_zero(points, [sh.value for sh in shares], scheme.field)


def reconstruct_vector(
    vectors: Sequence[ShareVector], scheme: ShareScheme
) -> list[int]:
    """Elementwise reconstruction across one ShareVector per server."""
    if not vectors:
        raise InsufficientShares(0, 1)
    degree = vectors[0].degree_hint
    if any(v.degree_hint != degree for v in vectors):
        raise DegreeMismatch("vectors carry mixed degree hints")
    length = len(vectors[0])
    if any(len(v) != length for v in vectors):
        raise LengthMismatch("vectors have different lengths")
    points = [v.point for v in vectors]
    if len(set(points)) != len(points):
        raise DuplicatePoint("duplicate evaluation points")
    if len(vectors) < degree + 1:
        raise InsufficientShares(len(vectors), degree + 1)
    f = scheme.field
    p = f.p
    # Lagrange basis at zero is shared by every element; compute once.
    weights = lagrange_weights(points, 0, f)
    out = []
    for k in range(length):
        acc = 0
        for w, v in zip(weights, vectors):
            acc += w * v.values[k]
        out.append(acc % p)
    return out


def add_shares(a: ShareVector, b: ShareVector, scheme: ShareScheme) -> ShareVector:
    """Elementwise share addition; reconstructs to the sum of secrets."""
    if a.point != b.point:
        raise PointMismatch(f"points {a.point} and {b.point} differ")
    if a.degree_hint != b.degree_hint:
        raise DegreeMismatch("cannot add shares of different degrees")
    if len(a) != len(b):
        raise LengthMismatch(f"lengths {len(a)} and {len(b)} differ")
    p = scheme.field.p
    values = [(x + y) % p for x, y in zip(a.values, b.values)]
    return ShareVector(a.point, values, a.degree_hint)


def scalar_mul(c: int, a: ShareVector, scheme: ShareScheme) -> ShareVector:
    """Multiply shares by a public constant; degree is unchanged."""
    f = scheme.field
    c = f.element(c)
    values = [c * x % f.p for x in a.values]
    return ShareVector(a.point, values, a.degree_hint)


def mul_shares(a: ShareVector, b: ShareVector, scheme: ShareScheme) -> ShareVector:
    """Elementwise share multiplication; the one allowed multiplication.

    The result carries degree 2l-2 and needs the 2l-1 quorum to
    reconstruct.  Inputs must both be fresh (degree l-1); anything else
    would push the degree past what n points can interpolate.
    """
    if a.point != b.point:
        raise PointMismatch(f"points {a.point} and {b.point} differ")
    if len(a) != len(b):
        raise LengthMismatch(f"lengths {len(a)} and {len(b)} differ")
    fresh = scheme.fresh_degree
    if a.degree_hint != fresh or b.degree_hint != fresh:
        raise DegreeOverflow(
            "shares already carry a product; only one multiplication is supported"
        )
    p = scheme.field.p
    values = [x * y % p for x, y in zip(a.values, b.values)]
    return ShareVector(a.point, values, scheme.product_degree)


_VEC_HEADER = struct.Struct(">QBI")


def serialize_share_vector(v: ShareVector) -> bytes:
    """point(8B) | degree_hint(1B) | count(4B) | elements(8B each), big-endian."""
    parts = [_VEC_HEADER.pack(v.point, v.degree_hint, len(v.values))]
    parts.extend(x.to_bytes(ELEMENT_BYTES, "big") for x in v.values)
    return b"".join(parts)


def deserialize_share_vector(raw: bytes) -> ShareVector:
    if len(raw) < _VEC_HEADER.size:
        raise ValueError("share vector header truncated")
    point, degree_hint, count = _VEC_HEADER.unpack_from(raw)
    body = raw[_VEC_HEADER.size :]
    if len(body) != count * ELEMENT_BYTES:
        raise ValueError(
            f"share vector body has {len(body)} bytes, expected {count * ELEMENT_BYTES}"
        )
    values = [
        int.from_bytes(body[i * ELEMENT_BYTES : (i + 1) * ELEMENT_BYTES], "big")
        for i in range(count)
    ]
    return ShareVector(point, values, degree_hint)
