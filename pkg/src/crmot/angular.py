"""Wigner 3j symbols and Clebsch-Gordan coefficients.

Angular momenta are handled internally as integer twice-values so that
triangle and projection rules are exact. The public functions accept
ints, floats or ``Fraction`` values that are integer or half-integer.
"""

from fractions import Fraction
from functools import lru_cache
from math import factorial, sqrt
from numbers import Integral


class AngularMomentumError(ValueError):
    """Raised for arguments that are not integers or half-integers."""


def twice(x) -> int:
    """Return ``2*x`` as an int, checking that ``x`` is a half-integer."""
    if isinstance(x, (Integral, Fraction)):
        d = Fraction(x) * 2
        if d.denominator != 1:
            raise AngularMomentumError(f"{x!r} is not a half-integer")
        return int(d)
    try:
        xf = float(x)
    except (TypeError, ValueError):
        raise AngularMomentumError(f"{x!r} is not a number") from None
    r = round(2 * xf)
    if not abs(2 * xf - r) < 1e-9:
        raise AngularMomentumError(f"{x!r} is not a half-integer")
    return int(r)


def half(n2: int) -> Fraction:
    return Fraction(n2, 2)


def fmt_half(n2: int) -> str:
    """Render a twice-value as ``3`` or ``7/2``."""
    return str(n2 // 2) if n2 % 2 == 0 else f"{n2}/2"


def _triangle_ok(a2, b2, c2):
    return c2 <= a2 + b2 and c2 >= abs(a2 - b2) and (a2 + b2 + c2) % 2 == 0


@lru_cache(maxsize=65536)
def wigner3j_twice(j1, j2, j3, m1, m2, m3) -> float:
    """3j symbol with all arguments given as twice-values."""
    if m1 + m2 + m3 != 0:
        return 0.0
    if not _triangle_ok(j1, j2, j3):
        return 0.0
    for j, m in ((j1, m1), (j2, m2), (j3, m3)):
        if abs(m) > j or (j - m) % 2:
            return 0.0
    # Racah formula, everything below as (integer) plain values
    a = (j1 + j2 - j3) // 2
    b = (j1 - j2 + j3) // 2
    c = (-j1 + j2 + j3) // 2
    d = (j1 + j2 + j3) // 2 + 1
    t1 = (j2 - m1 - j3) // 2
    t2 = (j1 + m2 - j3) // 2
    t3 = a
    t4 = (j1 - m1) // 2
    t5 = (j2 + m2) // 2
    kmin = max(0, t1, t2)
    kmax = min(t3, t4, t5)
    s = Fraction(0)
    for k in range(kmin, kmax + 1):
        den = (factorial(k) * factorial(k - t1) * factorial(k - t2)
               * factorial(t3 - k) * factorial(t4 - k) * factorial(t5 - k))
        s += Fraction((-1) ** k, den)
    pref = Fraction(factorial(a) * factorial(b) * factorial(c), factorial(d))
    for j, m in ((j1, m1), (j2, m2), (j3, m3)):
        pref *= factorial((j + m) // 2) * factorial((j - m) // 2)
    sign = -1 if ((j1 - j2 - m3) // 2) % 2 else 1
    return sign * sqrt(pref) * float(s)


def wigner3j(j1, j2, j3, m1, m2, m3) -> float:
    """Wigner 3j symbol ``(j1 j2 j3; m1 m2 m3)``.

    Returns 0 when the triangle rule, the projection sum rule or
    ``|m| <= j`` fails.
    """
    return wigner3j_twice(twice(j1), twice(j2), twice(j3), twice(m1), twice(m2), twice(m3))


def clebsch_gordan_twice(j1, m1, j2, m2, J, M) -> float:
    if m1 + m2 != M:
        return 0.0
    w = wigner3j_twice(j1, j2, J, m1, m2, -M)
    if w == 0.0:
        return 0.0
    sign = -1 if ((j1 - j2 + M) // 2) % 2 else 1
    return sign * sqrt(J + 1) * w


def clebsch_gordan(j1, m1, j2, m2, J, M) -> float:
    """Clebsch-Gordan coefficient ``<j1 m1; j2 m2 | J M>`` (Condon-Shortley)."""
    return clebsch_gordan_twice(twice(j1), twice(m1), twice(j2), twice(m2), twice(J), twice(M))


def mean_squared_cg(j, jp) -> Fraction:
    """Average of ``<j m; 1 q | jp m+q>**2`` over the 3(2j+1) pairs (m, q).

    This is the isotropic-light factor used in MOT fluorescence
    calibrations; it equals ``(2jp+1) / (3(2j+1))``.
    """
    j2, jp2 = twice(j), twice(jp)
    total = 0.0
    for m in range(-j2, j2 + 1, 2):
        for q in (-2, 0, 2):
            total += clebsch_gordan_twice(j2, m, 2, q, jp2, m + q) ** 2
    exact = Fraction(jp2 + 1, 3 * (j2 + 1))
    assert abs(total / (3 * (j2 + 1)) - float(exact)) < 1e-12
    return exact
