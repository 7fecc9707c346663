"""Exact polynomial pieces and slope-corridor blends.

Every piece of the map is a polynomial in the normalized coordinate
v = (x - a) / (b - a) on its domain [a, b]. Coefficients are kept as
Fractions in numpy object arrays so that breakpoint values and jets are
exact; a float copy of each derivative is used for fast evaluation.
"""
import logging
import math
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as P

from ..errors import ConstructionError

logger = logging.getLogger('MixMap.Blends')

Number = Union[int, float, Fraction]

GRID_POINTS = 64
GRID_TOLERANCE = 1e-9
BISECTION_STEPS = 12
MAX_HALVINGS = 40


def as_fraction(value: Number) -> Fraction:
    """Exact rational for ints, Fractions and floats (floats via their repr)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"Cannot convert {value} to a rational")
        return Fraction(repr(value))
    return Fraction(value)


def is_exact(value) -> bool:
    return isinstance(value, (Fraction, int)) and not isinstance(value, bool)


def exact_array(coefficients: Sequence[Number]) -> np.ndarray:
    arr = np.empty(len(coefficients), dtype=object)
    arr[:] = [as_fraction(c) for c in coefficients]
    return arr


def smoothstep(order: int) -> np.ndarray:
    """Odd-symmetric smoothstep S of the given order.

    S(0) = 0, S(1) = 1, S(v) + S(1 - v) = 1 and the derivatives of
    orders 1..order vanish at both ends. Degree is 2*order + 1.
    """
    coefficients = [Fraction(0)] * (2 * order + 2)
    for j in range(order + 1):
        coefficients[order + 1 + j] = Fraction(
            (-1) ** j * math.comb(order + j, j) * math.comb(2 * order + 1, order - j)
        )
    return exact_array(coefficients)


def compose_affine(coefficients: np.ndarray, alpha: Fraction, beta: Fraction) -> np.ndarray:
    """Coefficients of p(alpha + beta * v) by Horner's scheme."""
    linear = exact_array([alpha, beta])
    result = exact_array([coefficients[-1]])
    for c in coefficients[-2::-1]:
        result = P.polyadd(P.polymul(result, linear), exact_array([c]))
    return result


def definite_integral(coefficients: np.ndarray) -> Fraction:
    """Integral of the polynomial over [0, 1]."""
    return P.polyval(Fraction(1), P.polyint(coefficients))


class PolyPiece:
    """Monotone polynomial piece on [a, b] in the normalized coordinate."""

    def __init__(self, a: Number, b: Number, coefficients: Sequence[Number],
                 kind: str, monotonicity: int = 0):
        self.a = as_fraction(a)
        self.b = as_fraction(b)
        if self.b <= self.a:
            raise ConstructionError(f"Degenerate piece [{self.a}, {self.b}] ({kind})")
        self.width = self.b - self.a
        self.kind = kind
        self.monotonicity = monotonicity
        self.coefficients = exact_array(coefficients)
        self._exact_derivatives: Dict[int, np.ndarray] = {0: self.coefficients}
        self._float_derivatives: Dict[int, np.ndarray] = {}
        self._fa = float(self.a)
        self._fw = float(self.width)

    def __repr__(self):
        return f"PolyPiece({self.kind}, [{self.a}, {self.b}], deg={len(self.coefficients) - 1})"

    def _exact_coefficients(self, k: int) -> np.ndarray:
        if k not in self._exact_derivatives:
            self._exact_derivatives[k] = P.polyder(self.coefficients, k)
        return self._exact_derivatives[k]

    def _float_coefficients(self, k: int) -> np.ndarray:
        if k not in self._float_derivatives:
            self._float_derivatives[k] = np.array(
                [float(c) for c in self._exact_coefficients(k)], dtype=float
            )
        return self._float_derivatives[k]

    @property
    def left_value(self) -> Fraction:
        return Fraction(self.coefficients[0])

    @property
    def right_value(self) -> Fraction:
        return Fraction(sum(self.coefficients))

    def local(self, v, k: int = 0):
        """k-th derivative with respect to the outer variable at normalized v."""
        if is_exact(v):
            return P.polyval(Fraction(v), self._exact_coefficients(k)) / self.width ** k
        return P.polyval(v, self._float_coefficients(k)) / self._fw ** k

    def __call__(self, x, k: int = 0):
        if is_exact(x):
            return self.local((Fraction(x) - self.a) / self.width, k)
        return self.local((x - self._fa) / self._fw, k)

    def jet(self, at_right: bool, order: int) -> List[Fraction]:
        v = Fraction(1) if at_right else Fraction(0)
        return [self.local(v, k) for k in range(order + 1)]

    def derivative_in(self, a: Fraction, b: Fraction) -> np.ndarray:
        """First derivative of this piece continued onto [a, b], in that interval's coordinate."""
        derivative = P.polyder(self.coefficients, 1) / self.width
        return compose_affine(derivative, (a - self.a) / self.width, (b - a) / self.width)

    def rescaled(self, a: Number, b: Number, scale: Fraction, shift: Fraction,
                 kind: Optional[str] = None) -> 'PolyPiece':
        """Piece x -> shift + scale * p(v) on a new domain with the same normalized shape."""
        coefficients = self.coefficients * scale
        coefficients[0] = coefficients[0] + shift
        sign = self.monotonicity if scale > 0 else -self.monotonicity
        return PolyPiece(a, b, coefficients, kind or self.kind, sign)

    def grid(self, k: int, points: int = GRID_POINTS) -> np.ndarray:
        """Float k-th derivative on an inclusive uniform grid."""
        v = np.linspace(0.0, 1.0, points)
        return P.polyval(v, self._float_coefficients(k)) / self._fw ** k

    def sup_abs(self, k: int, points: int = GRID_POINTS) -> float:
        return float(np.max(np.abs(self.grid(k, points))))


class SlopeCorridor:
    """Admissible slope magnitudes [lo, hi] with a fixed sign."""

    def __init__(self, sign: int, lo: Number, hi: Number):
        self.sign = sign
        self.lo = as_fraction(lo)
        self.hi = as_fraction(hi)

    def __repr__(self):
        return f"SlopeCorridor({'+' if self.sign > 0 else '-'}, [{self.lo}, {self.hi}])"

    def admits(self, slope: Fraction) -> bool:
        return self.lo <= self.sign * slope <= self.hi

    def admits_grid(self, values: np.ndarray) -> bool:
        signed = self.sign * values
        lo = float(self.lo) * (1 - GRID_TOLERANCE)
        hi = float(self.hi) * (1 + GRID_TOLERANCE)
        return bool(np.all(signed >= lo) and np.all(signed <= hi))


class Blend:
    """Three pieces joining two neighbours inside a slope corridor.

    A smoothstep transition of width tau hands the slope over from the left
    neighbour's continued derivative to a constant slope gamma, and a mirrored
    transition hands it over to the right neighbour. Jets agree up to the
    smoothstep order plus one.
    """

    def __init__(self, pieces: List[PolyPiece], theta: Fraction, gamma: Fraction):
        self.pieces = pieces
        self.theta = theta
        self.gamma = gamma


def _blend_pieces(left: PolyPiece, right: PolyPiece, tau: Fraction, order: int,
                  corridor: SlopeCorridor, kind: str) -> Optional[Tuple[List[PolyPiece], Fraction]]:
    A, B = left.b, right.a
    length = B - A
    if 2 * tau >= length:
        return None
    S = smoothstep(order)
    one_minus_S = P.polysub(exact_array([1]), S)

    left_slope = left.derivative_in(A, A + tau)
    right_slope = right.derivative_in(B - tau, B)
    left_part = P.polymul(left_slope, one_minus_S)
    right_part = P.polymul(right_slope, S)

    rise = right.left_value - left.right_value
    gamma = (rise - tau * (definite_integral(left_part) + definite_integral(right_part))) / (length - tau)
    if not corridor.admits(gamma):
        return None

    g_left = P.polyadd(left_part, S * gamma)
    g_right = P.polyadd(right_part, one_minus_S * gamma)

    start = left.right_value
    first_coefficients = P.polyint(g_left) * tau
    first_coefficients[0] = first_coefficients[0] + start
    first = PolyPiece(A, A + tau, first_coefficients, kind, corridor.sign)

    middle_start = first.right_value
    middle_length = length - 2 * tau
    middle = PolyPiece(A + tau, B - tau, [middle_start, gamma * middle_length], kind, corridor.sign)

    last_coefficients = P.polyint(g_right) * tau
    last_coefficients[0] = last_coefficients[0] + middle.right_value
    last = PolyPiece(B - tau, B, last_coefficients, kind, corridor.sign)

    pieces = [first, middle, last]
    for piece in pieces:
        if not corridor.admits_grid(piece.grid(1)):
            return None
    return pieces, gamma


def build_blend(left: PolyPiece, right: PolyPiece, corridor: SlopeCorridor,
                tau_cap: Fraction, order: int, kind: str = 'blend') -> Blend:
    """Join two pieces with a monotone blend whose slope stays inside the corridor.

    The shape knob theta scales the transition width tau = theta * tau_cap.
    theta = 1 is tried first; otherwise theta is halved until admissible and
    then pushed back up by bisection for a fixed number of steps.

    Args:
        left: Piece ending where the blend starts.
        right: Piece starting where the blend ends.
        corridor: Required sign and magnitude bounds of the slope.
        tau_cap: Largest transition width considered.
        order: Smoothstep order (vanishing derivative orders at junctions).
        kind: Label stored on the produced pieces.

    Returns:
        The admissible Blend with the largest theta found.
    """
    def attempt(theta: Fraction):
        return _blend_pieces(left, right, theta * tau_cap, order, corridor, kind)

    theta = Fraction(1)
    result = attempt(theta)
    if result is not None:
        return Blend(result[0], theta, result[1])

    good, bad = None, theta
    for _ in range(MAX_HALVINGS):
        theta = theta / 2
        result = attempt(theta)
        if result is not None:
            good = (theta, result)
            break
        bad = theta
    if good is None:
        raise ConstructionError(
            f"No admissible {kind} between {float(left.b):.6g} and {float(right.a):.6g} "
            f"for {corridor} after {MAX_HALVINGS} halvings"
        )

    lo_theta = good[0]
    for _ in range(BISECTION_STEPS):
        mid = (lo_theta + bad) / 2
        result = attempt(mid)
        if result is not None:
            lo_theta, good = mid, (mid, result)
        else:
            bad = mid
    theta, (pieces, gamma) = good
    logger.debug(f"{kind}: theta={float(theta):.5f} gamma={float(gamma):.6f}")
    return Blend(pieces, theta, gamma)
