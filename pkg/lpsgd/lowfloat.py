"""Bit-exact emulation of parameterized binary floating-point formats.

A format ``e<E>m<M>`` has ``E`` exponent bits, ``M`` explicit fraction bits and
an implicit leading bit, so its significand has ``t = M + 1`` digits and every
rounding into it has relative error at most ``2 ** (1 - t)``. Rounding is
round-to-nearest, ties-to-even; overflow saturates to the largest finite
value instead of producing an infinity.

Two code paths are provided:

* a scalar path on exact rationals (:func:`round_to_format`, :func:`lp_op`,
  :func:`lp_dot`), bit exact for every format up to binary64;
* a vectorized ``numpy`` path (:func:`quantize`, :func:`lp_matmul`) used by the
  optimizer pipelines. It agrees bit for bit with the scalar path whenever the
  operands' exact results fit in binary64 before the final rounding, which is
  the case for formats with at most 24 fraction bits.
"""
import math
from collections import namedtuple
from fractions import Fraction
from numbers import Real
from typing import FrozenSet, NamedTuple, Sequence

import numpy as np
from cached_property import cached_property

from . import logger
from .constants import FORMAT_RE, OP_ALIASES, Op, RoundingFlag
from .exceptions import DomainError

WORKING_EXPONENT_BITS = 11
WORKING_FRACTION_BITS = 52


def _divide_nearest(a, b):
    """Nearest integer to a / b (b > 0), ties rounded to the even integer."""
    q, r = divmod(a, b)
    twice = 2 * r
    if twice > b or (twice == b and q & 1):
        q += 1
    return q


def _floor_log2(value: Fraction) -> int:
    """Return E such that 2**E <= value < 2**(E + 1) for a positive rational."""
    num, den = value.numerator, value.denominator
    exponent = num.bit_length() - den.bit_length()
    if exponent >= 0:
        if num < den << exponent:
            exponent -= 1
    elif num << -exponent < den:
        exponent -= 1
    return exponent


def _pow2(exponent: int) -> Fraction:
    if exponent >= 0:
        return Fraction(1 << exponent)
    return Fraction(1, 1 << -exponent)


class RoundingOutcome(NamedTuple):
    value: float
    relative_error: float
    flags: FrozenSet[RoundingFlag]

    @property
    def exact(self):
        return RoundingFlag.EXACT in self.flags


_FormatFields = namedtuple("FloatFormat", "exponent_bits fraction_bits supports_subnormals")


class FloatFormat(_FormatFields):
    """An IEEE-style binary format with ``exponent_bits`` and ``fraction_bits``.

    The working format ``e11m52`` (binary64) is the widest accepted; rounding
    into it is the identity. Every other accepted format, ``e11m52fz`` and
    ``e11m<M>`` included, holds a strict subset of the binary64 values, so
    rounding into it is a genuine narrowing.
    """

    __slots__ = ()

    def __new__(cls, exponent_bits, fraction_bits, supports_subnormals=True):
        exponent_bits = int(exponent_bits)
        fraction_bits = int(fraction_bits)
        if exponent_bits < 2 or fraction_bits < 0:
            raise DomainError(
                f"Invalid format e{exponent_bits}m{fraction_bits}: "
                "need exponent_bits >= 2 and fraction_bits >= 0"
            )
        if exponent_bits > WORKING_EXPONENT_BITS or fraction_bits > WORKING_FRACTION_BITS:
            raise DomainError(
                f"Format e{exponent_bits}m{fraction_bits} is wider than the working "
                f"precision e{WORKING_EXPONENT_BITS}m{WORKING_FRACTION_BITS}"
            )
        return super().__new__(cls, exponent_bits, fraction_bits, bool(supports_subnormals))

    @classmethod
    def parse(cls, text):
        """Parse ``e<E>m<M>`` with an optional ``fz`` (flush-to-zero) suffix."""
        if isinstance(text, cls):
            return text
        match = FORMAT_RE.match(str(text).strip().lower())
        if not match:
            raise DomainError(f"Unrecognized float format descriptor: {text!r}")
        return cls(
            int(match["exponent"]),
            int(match["fraction"]),
            supports_subnormals=not match["ftz"],
        )

    def __str__(self):
        suffix = "" if self.supports_subnormals else "fz"
        return f"e{self.exponent_bits}m{self.fraction_bits}{suffix}"

    @property
    def digits(self):
        return self.fraction_bits + 1

    @property
    def e_max(self):
        return (1 << (self.exponent_bits - 1)) - 1

    @property
    def e_min(self):
        return 1 - self.e_max

    @property
    def width(self):
        return 1 + self.exponent_bits + self.fraction_bits

    @property
    def is_working(self):
        return (
            self.exponent_bits == WORKING_EXPONENT_BITS
            and self.fraction_bits == WORKING_FRACTION_BITS
            and self.supports_subnormals
        )

    @property
    def max_finite_exact(self) -> Fraction:
        return (2 - _pow2(-self.fraction_bits)) * _pow2(self.e_max)

    @property
    def max_finite(self):
        return float(self.max_finite_exact)

    @property
    def min_normal(self):
        return math.ldexp(1.0, self.e_min)

    @property
    def min_subnormal(self):
        return math.ldexp(1.0, self.e_min - self.fraction_bits)

    @property
    def unit_roundoff(self):
        return unit_roundoff(self)


def unit_roundoff(fmt: FloatFormat) -> float:
    return math.ldexp(1.0, 1 - (fmt.fraction_bits + 1))


def _check_finite(x):
    if isinstance(x, Fraction):
        return x
    if not isinstance(x, Real) or not math.isfinite(x):
        raise DomainError(f"Expected a finite real number, got {x!r}")
    return Fraction(x)


def _round_exact(value: Fraction, fmt: FloatFormat):
    """Round an exact rational into fmt, returning (rational result, flags)."""
    if value == 0:
        return Fraction(0), frozenset({RoundingFlag.EXACT})
    magnitude = abs(value)
    exponent = max(_floor_log2(magnitude), fmt.e_min)
    quantum = exponent - fmt.fraction_bits
    num, den = magnitude.numerator, magnitude.denominator
    if quantum >= 0:
        den <<= quantum
    else:
        num <<= -quantum
    units = _divide_nearest(num, den)
    result = units * _pow2(quantum)
    flags = set()
    if units * den != num:
        flags.add(RoundingFlag.INEXACT)
    if result > fmt.max_finite_exact:
        result = fmt.max_finite_exact
        flags |= {RoundingFlag.OVERFLOW, RoundingFlag.INEXACT}
    min_normal = _pow2(fmt.e_min)
    if magnitude < min_normal:
        if not fmt.supports_subnormals and result < min_normal:
            result = Fraction(0)
            flags |= {RoundingFlag.UNDERFLOW, RoundingFlag.INEXACT}
        elif RoundingFlag.INEXACT in flags:
            flags.add(RoundingFlag.UNDERFLOW)
    if not flags:
        flags.add(RoundingFlag.EXACT)
    if value < 0:
        result = -result
    return result, frozenset(flags)


def _outcome(exact_value: Fraction, fmt: FloatFormat, negative_zero=False):
    rounded, flags = _round_exact(exact_value, fmt)
    value = float(rounded)
    if value == 0 and (exact_value < 0 or negative_zero):
        value = -0.0
    relative_error = 0.0 if exact_value == 0 else float((rounded - exact_value) / exact_value)
    return RoundingOutcome(value, relative_error, flags)


def round_to_format(x, fmt: FloatFormat) -> RoundingOutcome:
    """Project a finite real onto the nearest value representable in fmt."""
    exact_value = _check_finite(x)
    negative_zero = isinstance(x, float) and x == 0 and math.copysign(1.0, x) < 0
    return _outcome(exact_value, fmt, negative_zero=negative_zero)


def is_representable(x, fmt: FloatFormat) -> bool:
    return RoundingFlag.EXACT in _round_exact(_check_finite(x), fmt)[1]


def _parse_op(op):
    if isinstance(op, Op):
        return op
    try:
        return Op(op)
    except ValueError:
        if op in OP_ALIASES:
            return OP_ALIASES[op]
        raise DomainError(f"Unsupported operation {op!r}") from None


def lp_op(a, b, op, fmt: FloatFormat) -> RoundingOutcome:
    """One elementary operation on representable operands, rounded once into fmt."""
    op = _parse_op(op)
    x, y = _check_finite(a), _check_finite(b)
    for operand in (x, y):
        if RoundingFlag.EXACT not in _round_exact(operand, fmt)[1]:
            raise DomainError(f"Operand {float(operand)!r} is not representable in {fmt}")
    if op is Op.ADD:
        exact_value = x + y
    elif op is Op.SUB:
        exact_value = x - y
    elif op is Op.MUL:
        exact_value = x * y
    else:
        if y == 0:
            raise DomainError("Division by zero")
        exact_value = x / y
    outcome = _outcome(exact_value, fmt)
    if RoundingFlag.OVERFLOW in outcome.flags:
        logger.debug("Overflow in %s %s %s (%s)", float(x), op.value, float(y), fmt)
    return outcome


def lp_dot(u: Sequence[float], v: Sequence[float], mul_fmt: FloatFormat, acc_fmt: FloatFormat) -> float:
    """Inner product with per-product rounding into mul_fmt and a left-to-right
    accumulator rounded into acc_fmt after every addition."""
    u, v = list(u), list(v)
    if len(u) != len(v) or not u:
        raise DomainError(f"Dimension mismatch: {len(u)} vs {len(v)}")
    accumulator = Fraction(0)
    for ui, vi in zip(u, v):
        product, _ = _round_exact(_check_finite(ui) * _check_finite(vi), mul_fmt)
        accumulator, _ = _round_exact(accumulator + product, acc_fmt)
    return float(accumulator)


def quantize(values, fmt: FloatFormat) -> np.ndarray:
    """Vectorized round_to_format on a float64 array, returning values only."""
    x = np.asarray(values, dtype=np.float64)
    if fmt.is_working:
        return x.copy()
    if not np.all(np.isfinite(x)):
        raise DomainError("Cannot round non-finite values")
    magnitude = np.abs(x)
    _, exponent = np.frexp(magnitude)
    quantum = np.maximum(exponent - 1, fmt.e_min) - fmt.fraction_bits
    with np.errstate(over="ignore"):
        rounded = np.ldexp(np.rint(np.ldexp(magnitude, -quantum)), quantum)
    rounded = np.minimum(rounded, fmt.max_finite)
    if not fmt.supports_subnormals:
        rounded = np.where(rounded < fmt.min_normal, 0.0, rounded)
    return np.copysign(rounded, x)


def lp_matmul(a, b, mul_fmt: FloatFormat, acc_fmt: FloatFormat) -> np.ndarray:
    """Matrix product where every entry is an lp_dot over the inner dimension.

    The accumulation loop runs over the inner index, vectorized across all
    output entries, so the summation order of each entry is left to right.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.asarray(b, dtype=np.float64)
    vector_rhs = b.ndim == 1
    if vector_rhs:
        b = b[:, None]
    if a.shape[1] != b.shape[0]:
        raise DomainError(f"Dimension mismatch: {a.shape} @ {b.shape}")
    if mul_fmt.is_working and acc_fmt.is_working:
        result = np.zeros((a.shape[0], b.shape[1]))
        for i in range(a.shape[1]):
            result += np.outer(a[:, i], b[i])
    else:
        result = np.zeros((a.shape[0], b.shape[1]))
        for i in range(a.shape[1]):
            products = quantize(np.outer(a[:, i], b[i]), mul_fmt)
            result = quantize(result + products, acc_fmt)
    return result[:, 0] if vector_rhs else result


class _Bits:
    def __init__(self, fmt):
        self.fmt = fmt

    @cached_property
    def bias(self):
        return self.fmt.e_max

    @cached_property
    def exponent_mask(self):
        return (1 << self.fmt.exponent_bits) - 1

    @cached_property
    def fraction_mask(self):
        return (1 << self.fmt.fraction_bits) - 1


def encode(x, fmt: FloatFormat) -> int:
    """Encode a representable value as the unsigned integer sign|exponent|fraction."""
    value = _check_finite(x)
    if RoundingFlag.EXACT not in _round_exact(value, fmt)[1]:
        raise DomainError(f"{x!r} is not representable in {fmt}")
    bits = _Bits(fmt)
    negative = value < 0 or (isinstance(x, float) and math.copysign(1.0, x) < 0)
    sign = int(negative) << (fmt.exponent_bits + fmt.fraction_bits)
    magnitude = abs(value)
    if magnitude == 0:
        return sign
    exponent = _floor_log2(magnitude)
    if exponent < fmt.e_min:
        fraction = magnitude / _pow2(fmt.e_min - fmt.fraction_bits)
        return sign | int(fraction)
    fraction = (magnitude / _pow2(exponent) - 1) * (1 << fmt.fraction_bits)
    return sign | ((exponent + bits.bias) << fmt.fraction_bits) | int(fraction)


def decode(word: int, fmt: FloatFormat) -> float:
    """Decode an unsigned integer of width 1 + E + M into its real value."""
    if word < 0 or word >> fmt.width:
        raise DomainError(f"{word:#x} does not fit in {fmt.width} bits")
    bits = _Bits(fmt)
    sign = -1.0 if word >> (fmt.exponent_bits + fmt.fraction_bits) else 1.0
    biased = (word >> fmt.fraction_bits) & bits.exponent_mask
    fraction = word & bits.fraction_mask
    if biased == bits.exponent_mask:
        raise DomainError(f"{word:#x} encodes an infinity or NaN in {fmt}")
    if biased == 0:
        magnitude = Fraction(fraction) * _pow2(fmt.e_min - fmt.fraction_bits)
    else:
        magnitude = (1 + Fraction(fraction, 1 << fmt.fraction_bits)) * _pow2(biased - bits.bias)
    return math.copysign(float(magnitude), sign)
