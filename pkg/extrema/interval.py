"""Outward-rounded interval arithmetic and box geometry"""

import math
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import EmptyOperand, ZeroInDivisor, DomainViolation
from .errors import UnboundedBox, DimensionMismatch

INF = math.inf
TWO_PI = 2.0 * math.pi
Real = Union[int, float, Fraction]


# Directed rounding
# Results are computed with round-to-nearest, the exact rounding error is
# recovered with error-free transformations and the endpoint is moved to the
# next representable float only when the nearest result is on the wrong side.
def next_down(x: float) -> float:
    return float(np.nextafter(x, -INF))


def next_up(x: float) -> float:
    return float(np.nextafter(x, INF))


def _two_sum(a: float, b: float) -> Tuple[float, float]:
    """Returns `s = fl(a + b)` and `err` with `a + b = s + err` exactly (nan if unknown)."""
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


_SPLITTER = 134217729.0  # 2**27 + 1
_PROD_MAX = 2.0 ** 995
_PROD_MIN = 2.0 ** -900


def _split(a: float) -> Tuple[float, float]:
    c = _SPLITTER * a
    high = c - (c - a)
    return high, a - high


def _two_prod(a: float, b: float) -> Tuple[float, float]:
    """Returns `p = fl(a * b)` and `err` with `a * b = p + err` exactly (nan if unknown)."""
    p = a * b
    if not (_PROD_MIN <= abs(p) < _PROD_MAX) or abs(a) >= _PROD_MAX or abs(b) >= _PROD_MAX:
        return p, math.nan
    ah, al = _split(a)
    bh, bl = _split(b)
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


def _round(value: float, err: float, direction: int) -> float:
    """Rounds a nearest result with exact error `err` towards -inf (-1) or +inf (+1)."""
    if err == 0:
        return value
    if direction < 0:
        return value if err > 0 else next_down(value)
    return value if err < 0 else next_up(value)


def _add_rounded(a: float, b: float, direction: int) -> float:
    return _round(*_two_sum(a, b), direction)


def _mul_rounded(a: float, b: float, direction: int) -> float:
    # 0 * inf is 0 in interval arithmetic
    if a == 0 or b == 0:
        return 0.0
    return _round(*_two_prod(a, b), direction)


def _div_rounded(a: float, b: float, direction: int) -> float:
    if a == 0:
        return 0.0
    if math.isinf(b):
        if math.isfinite(a):
            return 0.0
        # inf / inf: any quotient of the same sign
        positive = (a > 0) == (b > 0)
        if positive:
            return 0.0 if direction < 0 else INF
        return -INF if direction < 0 else 0.0
    q = a / b
    if not (math.isfinite(q) and math.isfinite(a)) or q == 0:
        return _round(q, math.nan, direction)
    p, e = _two_prod(q, b)
    if e != e:
        return _round(q, math.nan, direction)
    # a - q*b = (a - p) - e, the subtraction a - p is exact (Sterbenz)
    r = (a - p) - e
    return _round(q, r if b > 0 else -r, direction)


def _pow_rounded(m: float, k: int, direction: int) -> float:
    """Rounded `m**k` for `m >= 0`."""
    r = 1.0
    for _ in range(k):
        r = _mul_rounded(r, m, direction)
    return r


def _signed_pow(x: float, k: int, direction: int) -> float:
    """Rounded `x**k` for odd `k`."""
    if x >= 0:
        return _pow_rounded(x, k, direction)
    return -_pow_rounded(-x, k, -direction)


# Intervals
class Interval:
    """Closed real interval `[lo, hi]` with float endpoints.

    `lo` is finite or -inf, `hi` is finite or +inf. The empty interval is a
    separate sentinel (`Interval.empty()`) whose endpoints cannot be read.
    Instances are immutable.
    """
    __slots__ = ('_lo', '_hi', '_empty')

    def __init__(self, lo: float, hi: float = None):
        """
        Arguments:
            lo: Lower endpoint.
            hi: Upper endpoint. Defaults to `lo` (a point interval).
        """
        if hi is None:
            hi = lo
        lo, hi = float(lo), float(hi)
        if lo != lo or hi != hi:
            raise ValueError('Interval endpoints must not be NaN.')
        if lo > hi:
            raise ValueError(f'Interval needs lo <= hi, got [{lo!r}, {hi!r}].')
        if lo == INF or hi == -INF:
            raise ValueError(f'Interval [{lo!r}, {hi!r}] has no real member.')
        self._lo = lo
        self._hi = hi
        self._empty = False

    @classmethod
    def empty(cls) -> 'Interval':
        return EMPTY

    @classmethod
    def enclose(cls, value: Union['Interval', Real, str]) -> 'Interval':
        """Tightest interval with float endpoints containing an exact real.

        Arguments:
            value: Interval (returned as is), float, int, `Fraction` or a
                decimal string such as `'0.1'`.
        Returns:
            Point interval if `value` is a float, otherwise `[lo, hi]` with
            `lo` and `hi` adjacent floats around `value`.
        """
        if isinstance(value, Interval):
            return value
        if isinstance(value, float):
            return cls(value, value)
        q = Fraction(value)
        try:
            approx = float(q)
        except OverflowError:
            return cls(np.finfo(float).max, INF) if q > 0 else cls(-INF, -np.finfo(float).max)
        if math.isinf(approx):
            return cls(np.finfo(float).max, INF) if q > 0 else cls(-INF, -np.finfo(float).max)
        exact = Fraction(approx)
        if exact > q:
            return cls(next_down(approx), approx)
        if exact < q:
            return cls(approx, next_up(approx))
        return cls(approx, approx)

    @property
    def is_empty(self) -> bool:
        return self._empty

    @property
    def lo(self) -> float:
        if self._empty:
            raise EmptyOperand('The empty interval has no lower endpoint.')
        return self._lo

    @property
    def hi(self) -> float:
        if self._empty:
            raise EmptyOperand('The empty interval has no upper endpoint.')
        return self._hi

    @property
    def is_finite(self) -> bool:
        return not self._empty and math.isfinite(self._lo) and math.isfinite(self._hi)

    def mid(self) -> float:
        """Midpoint rounded to nearest, guaranteed to lie inside the interval."""
        _check_nonempty(self)
        if not self.is_finite:
            raise UnboundedBox(f'Interval {self} has no midpoint.')
        if self._lo == self._hi:
            return self._lo
        m = 0.5 * self._lo + 0.5 * self._hi
        return min(max(m, self._lo), self._hi)

    def width(self) -> float:
        return width(self)

    def __contains__(self, x: float) -> bool:
        return contains(self, x)

    def __eq__(self, other):
        if not isinstance(other, Interval):
            return NotImplemented
        if self._empty or other._empty:
            return self._empty and other._empty
        return self._lo == other._lo and self._hi == other._hi

    def __hash__(self):
        return hash((self._lo, self._hi, self._empty))

    def __repr__(self):
        if self._empty:
            return 'Interval.empty()'
        return f'Interval({self._lo!r}, {self._hi!r})'

    def __str__(self):
        if self._empty:
            return '[empty]'
        return f'[{self._lo!r}, {self._hi!r}]'

    def __neg__(self):
        return neg(self)

    def __add__(self, other):
        return add(self, Interval.enclose(other))

    def __radd__(self, other):
        return add(Interval.enclose(other), self)

    def __sub__(self, other):
        return sub(self, Interval.enclose(other))

    def __rsub__(self, other):
        return sub(Interval.enclose(other), self)

    def __mul__(self, other):
        return mul(self, Interval.enclose(other))

    def __rmul__(self, other):
        return mul(Interval.enclose(other), self)

    def __truediv__(self, other):
        return div(self, Interval.enclose(other))

    def __rtruediv__(self, other):
        return div(Interval.enclose(other), self)

    def __pow__(self, k: int):
        return pow_int(self, k)


EMPTY = object.__new__(Interval)
EMPTY._lo = 0.0
EMPTY._hi = 0.0
EMPTY._empty = True

ZERO = Interval(0.0)
ONE = Interval(1.0)


def _check_nonempty(*intervals: Interval):
    for a in intervals:
        if a.is_empty:
            raise EmptyOperand('Operation received the empty interval.')


# Arithmetic
def neg(a: Interval) -> Interval:
    _check_nonempty(a)
    return Interval(-a.hi, -a.lo)


def add(a: Interval, b: Interval) -> Interval:
    _check_nonempty(a, b)
    return Interval(_add_rounded(a.lo, b.lo, -1), _add_rounded(a.hi, b.hi, 1))


def sub(a: Interval, b: Interval) -> Interval:
    _check_nonempty(a, b)
    return Interval(_add_rounded(a.lo, -b.hi, -1), _add_rounded(a.hi, -b.lo, 1))


def mul(a: Interval, b: Interval) -> Interval:
    _check_nonempty(a, b)
    pairs = ((a.lo, b.lo), (a.lo, b.hi), (a.hi, b.lo), (a.hi, b.hi))
    lo = min(_mul_rounded(x, y, -1) for x, y in pairs)
    hi = max(_mul_rounded(x, y, 1) for x, y in pairs)
    return Interval(lo, hi)


def div(a: Interval, b: Interval) -> Interval:
    """Interval quotient. Raises `ZeroInDivisor` if `0 in b`."""
    _check_nonempty(a, b)
    if b.lo <= 0 <= b.hi:
        raise ZeroInDivisor(f'Divisor {b} contains zero.')
    pairs = ((a.lo, b.lo), (a.lo, b.hi), (a.hi, b.lo), (a.hi, b.hi))
    lo = min(_div_rounded(x, y, -1) for x, y in pairs)
    hi = max(_div_rounded(x, y, 1) for x, y in pairs)
    return Interval(lo, hi)


def pow_int(a: Interval, k: int) -> Interval:
    """Range of `x**k` over `a` for an integer `k`.

    Even powers are evaluated as a range (the result starts at 0 whenever
    `0 in a`), never as repeated interval multiplication.
    """
    _check_nonempty(a)
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)):
        raise ValueError(f'pow_int needs an integer exponent, got {k!r}.')
    k = int(k)
    if k == 0:
        return ONE
    if k < 0:
        return div(ONE, pow_int(a, -k))
    if k == 1:
        return a
    if k % 2 == 0:
        if a.lo <= 0 <= a.hi:
            small = 0.0
        else:
            small = min(abs(a.lo), abs(a.hi))
        large = max(abs(a.lo), abs(a.hi))
        return Interval(_pow_rounded(small, k, -1), _pow_rounded(large, k, 1))
    return Interval(_signed_pow(a.lo, k, -1), _signed_pow(a.hi, k, 1))


def sqr(a: Interval) -> Interval:
    return pow_int(a, 2)


# Transcendental functions: nearest-rounded libm values widened by one ulp
def exp(a: Interval) -> Interval:
    _check_nonempty(a)
    return Interval(max(0.0, next_down(_exp(a.lo))), next_up(_exp(a.hi)))


def _exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return INF


def ln(a: Interval) -> Interval:
    _check_nonempty(a)
    if a.lo <= 0:
        raise DomainViolation(f'ln is undefined on {a}.')
    return Interval(next_down(math.log(a.lo)), next_up(math.log(a.hi)))


def _attains(a: Interval, phase: float) -> bool:
    """Whether `phase + 2*k*pi` may lie in `a` for some integer k (conservative)."""
    slack = 1e-9 * max(1.0, abs(a.lo), abs(a.hi))
    k_lo = math.ceil((a.lo - slack - phase) / TWO_PI)
    k_hi = math.floor((a.hi + slack - phase) / TWO_PI)
    return k_lo <= k_hi


def _periodic(a: Interval, fn, peak: float, trough: float) -> Interval:
    _check_nonempty(a)
    if not a.is_finite or width(a) >= TWO_PI or max(abs(a.lo), abs(a.hi)) > 2.0 ** 50:
        return Interval(-1.0, 1.0)
    v1, v2 = fn(a.lo), fn(a.hi)
    lo, hi = min(v1, v2), max(v1, v2)
    if _attains(a, peak):
        hi = 1.0
    if _attains(a, trough):
        lo = -1.0
    return Interval(max(-1.0, next_down(lo)), min(1.0, next_up(hi)))


def sin(a: Interval) -> Interval:
    return _periodic(a, math.sin, 0.5 * math.pi, 1.5 * math.pi)


def cos(a: Interval) -> Interval:
    return _periodic(a, math.cos, 0.0, math.pi)


# Relations and set operations
def strictly_less(a: Interval, b: Interval) -> bool:
    """True iff every real in `a` is smaller than every real in `b`."""
    _check_nonempty(a, b)
    return a.hi < b.lo


def intersects(a: Interval, b: Interval) -> bool:
    """True iff `a` and `b` share at least one real (point contact counts)."""
    _check_nonempty(a, b)
    return max(a.lo, b.lo) <= min(a.hi, b.hi)


def intersection(a: Interval, b: Interval) -> Interval:
    _check_nonempty(a, b)
    lo, hi = max(a.lo, b.lo), min(a.hi, b.hi)
    if lo > hi:
        return EMPTY
    return Interval(lo, hi)


def hull(a: Interval, b: Interval) -> Interval:
    """Smallest interval containing `a` and `b`; the empty interval is neutral."""
    if a.is_empty:
        return b
    if b.is_empty:
        return a
    return Interval(min(a.lo, b.lo), max(a.hi, b.hi))


def width(a: Interval) -> float:
    """`hi - lo` rounded upward."""
    _check_nonempty(a)
    return _add_rounded(a.hi, -a.lo, 1)


def contains(a: Interval, x: float) -> bool:
    _check_nonempty(a)
    return a.lo <= x <= a.hi


def subset(a: Interval, b: Interval) -> bool:
    _check_nonempty(a, b)
    return b.lo <= a.lo and a.hi <= b.hi


def interior(a: Interval, b: Interval) -> bool:
    """True iff `a` lies in the interior of `b`."""
    _check_nonempty(a, b)
    return b.lo < a.lo and a.hi < b.hi


# Boxes
class Box:
    """Axis-aligned product of `n >= 1` non-empty intervals."""
    __slots__ = ('_coords',)

    def __init__(self, coords: Iterable[Union[Interval, Sequence[float]]]):
        """
        Arguments:
            coords: Iterable of `Interval`s or `(lo, hi)` pairs, one per axis.
        """
        coords = tuple(c if isinstance(c, Interval) else Interval(*c) for c in coords)
        if not coords:
            raise ValueError('Box needs at least one coordinate.')
        _check_nonempty(*coords)
        self._coords = coords

    @classmethod
    def from_point(cls, x: Sequence[float]) -> 'Box':
        return cls(Interval(float(v)) for v in x)

    @property
    def coords(self) -> Tuple[Interval, ...]:
        return self._coords

    @property
    def dim(self) -> int:
        return len(self._coords)

    def __len__(self):
        return len(self._coords)

    def __iter__(self):
        return iter(self._coords)

    def __getitem__(self, axis):
        return self._coords[axis]

    def __eq__(self, other):
        if not isinstance(other, Box):
            return NotImplemented
        return self._coords == other._coords

    def __hash__(self):
        return hash(self._coords)

    def __repr__(self):
        return 'Box(' + ' x '.join(str(c) for c in self._coords) + ')'

    def is_bounded(self) -> bool:
        return all(c.is_finite for c in self._coords)

    def widths(self) -> List[float]:
        return [width(c) for c in self._coords]

    def max_width(self) -> float:
        return max(self.widths())

    def widest_axis(self) -> int:
        """Axis of largest width, ties broken by the lowest index."""
        widths = self.widths()
        return widths.index(max(widths))

    def midpoint(self) -> List[float]:
        return midpoint(self)

    def replace(self, axis: int, interval: Interval) -> 'Box':
        coords = list(self._coords)
        coords[axis] = interval
        return Box(coords)

    def can_bisect(self, axis: int) -> bool:
        c = self._coords[axis]
        m = c.mid()
        return c.lo < m < c.hi

    def bisect(self, axis: int = None) -> Tuple['Box', 'Box']:
        """Splits the box at the midpoint of `axis` (default: widest axis)."""
        if axis is None:
            axis = self.widest_axis()
        c = self._coords[axis]
        m = c.mid()
        return self.replace(axis, Interval(c.lo, m)), self.replace(axis, Interval(m, c.hi))

    def hull(self, other: 'Box') -> 'Box':
        _check_dims(self, other)
        return Box(hull(a, b) for a, b in zip(self, other))

    def intersection(self, other: 'Box') -> Optional['Box']:
        """Common part of both boxes, `None` if they are disjoint."""
        _check_dims(self, other)
        coords = [intersection(a, b) for a, b in zip(self, other)]
        if any(c.is_empty for c in coords):
            return None
        return Box(coords)

    def subset(self, other: 'Box') -> bool:
        _check_dims(self, other)
        return all(subset(a, b) for a, b in zip(self, other))

    def interior(self, other: 'Box') -> bool:
        _check_dims(self, other)
        return all(interior(a, b) for a, b in zip(self, other))

    def contains_point(self, x: Sequence[Real]) -> bool:
        if len(x) != self.dim:
            raise DimensionMismatch(f'Point of dimension {len(x)} for a box of dimension {self.dim}.')
        return all(c.lo <= v <= c.hi for c, v in zip(self._coords, x))

    def touches(self, other: 'Box') -> bool:
        """Whether the boxes overlap or share a face, with one ulp of slack per axis."""
        _check_dims(self, other)
        return all(
            max(a.lo, b.lo) <= next_up(min(a.hi, b.hi))
            for a, b in zip(self, other)
        )

    def margin_to(self, domain: 'Box') -> float:
        """Infinity-norm distance from the midpoint to the nearest face of `domain`,
        rounded downward. Negative if the midpoint lies outside."""
        _check_dims(self, domain)
        center = midpoint(self)
        margins = []
        for x, c in zip(center, domain):
            margins.append(_add_rounded(x, -c.lo, -1))
            margins.append(_add_rounded(c.hi, -x, -1))
        return min(margins)


def _check_dims(a: Box, b: Box):
    if a.dim != b.dim:
        raise DimensionMismatch(f'Boxes of dimension {a.dim} and {b.dim}.')


def midpoint(b: Box) -> List[float]:
    """Per-axis midpoint rounded to nearest; lies inside the box."""
    if not b.is_bounded():
        raise UnboundedBox(f'{b} has no midpoint.')
    return [c.mid() for c in b]


def distance(a: Box, b: Box) -> float:
    """Infinity-norm distance between the midpoints, rounded downward."""
    _check_dims(a, b)
    dist = 0.0
    for x, y in zip(midpoint(a), midpoint(b)):
        d = _add_rounded(x, -y, -1) if x >= y else _add_rounded(y, -x, -1)
        dist = max(dist, d)
    return dist
