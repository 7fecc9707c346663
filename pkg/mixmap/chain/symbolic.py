"""Coding between points of [0, 4] and admissible vertex sequences.

`itinerary_of_point` reads the vertex visited at each step of an orbit;
`itinerary_point` inverts the branches of f along a code and returns the
midpoint of the nested cylinder intervals together with their diameter;
`point_of_itinerary` keeps only the point.
"""
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from ..errors import AdmissibilityError, ConvergenceError, DomainError, ExceptionalPoint
from ..construction.blends import is_exact
from ..construction.map_core import PiecewiseMap
from ..construction.params import MapParams, level_positions
from ..construction.verification import CheckReport
from .markov_graph import (SCALED_OSC, GAP, TAIL, Vertex, OscCount,
                           is_edge, standard_osc_count, vertex_interval)

logger = logging.getLogger('MixMap.Symbolic')

Number = Union[int, float, Fraction]

EXCEPTIONAL_TOLERANCE = 1e-12
DEPTH_CAP = 10 ** 4
EXACT_ORBIT_BITS = 4096
BRENT_XTOL = 1e-300
BRENT_RTOL = 4 * np.finfo(float).eps

HALF = Fraction(1, 2)


@dataclass(frozen=True)
class Itinerary:
    """Finite head followed by an optional repeating cycle."""
    head: Tuple[Vertex, ...]
    cycle: Tuple[Vertex, ...] = ()

    @property
    def periodic(self) -> bool:
        return bool(self.cycle)

    def __len__(self):
        return len(self.head) + len(self.cycle)

    def prefix(self, depth: int) -> Tuple[Vertex, ...]:
        """The first depth symbols, unrolling the cycle as needed."""
        if depth <= len(self.head) or not self.cycle:
            return self.head[:depth]
        extra = depth - len(self.head)
        reps = -(-extra // len(self.cycle))
        return (self.head + self.cycle * reps)[:depth]

    def validate(self, osc_count: OscCount) -> None:
        """Raise AdmissibilityError unless every consecutive pair is an edge."""
        symbols = list(self.head) + list(self.cycle)
        if not symbols:
            raise AdmissibilityError("empty itinerary")
        pairs = list(zip(symbols, symbols[1:]))
        if self.cycle:
            pairs.append((self.cycle[-1], self.cycle[0]))
        for v, w in pairs:
            try:
                ok = is_edge(v, w, osc_count)
            except DomainError as e:
                raise AdmissibilityError(str(e)) from e
            if not ok:
                raise AdmissibilityError(f"{v} -> {w} is not an edge")

    def to_json(self) -> List[Any]:
        out: List[Any] = [v.label for v in self.head]
        if self.cycle:
            out.append({"cycle": [v.label for v in self.cycle]})
        return out

    @classmethod
    def from_json(cls, document: Sequence[Any]) -> 'Itinerary':
        head, cycle = [], []
        for item in document:
            if isinstance(item, dict):
                cycle = [Vertex.from_label(label) for label in item["cycle"]]
            else:
                head.append(Vertex.from_label(item))
        return cls(tuple(head), tuple(cycle))

    def __str__(self):
        text = ' '.join(v.label for v in self.head)
        if self.cycle:
            text += ' (' + ' '.join(v.label for v in self.cycle) + ')^inf'
        return text.strip()


@dataclass
class Cylinder:
    """Points whose first len(symbols) iterates visit the given vertices."""
    symbols: Tuple[Vertex, ...]
    interval: Tuple[float, float]

    @property
    def diameter(self) -> float:
        return self.interval[1] - self.interval[0]

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.interval[0] + self.interval[1])

    def contains(self, x: float, slack: float = 0.0) -> bool:
        return self.interval[0] - slack <= x <= self.interval[1] + slack


# Vertices containing a point

def _scale_index(X: Fraction, params: MapParams, strict: bool) -> int:
    """Smallest k >= 1 with lambda^(-kr) <= X (strict: lambda^(-kr) < X)."""
    log_inverse = (math.log(X.denominator) - math.log(X.numerator)) / (params.r * math.log(params.lam))
    k = max(1, math.ceil(log_inverse))

    def below(j):
        s = params.scale(j)
        return s < X if strict else s <= X

    while k > 1 and below(k - 1):
        k -= 1
    while not below(k):
        k += 1
    return k


def _level_vertex(u: Fraction, k: int, side: str, osc_count: OscCount) -> Optional[Vertex]:
    """Vertex of the copy lambda^(-kr)(1, y_k] at the rescaled coordinate u."""
    if u <= 1:
        return None
    n = PiecewiseMap.level_index(u)
    if side == 'left' and u == level_positions(n + 1)[1]:
        n += 1
    x, y = level_positions(n)
    if (u < x) if side == 'right' else (u <= x):
        return Vertex.gap(n, k)
    if k:
        return Vertex.scaled(n, k)
    M = osc_count(n)
    position = (u - x) * M / (y - x)
    i = math.floor(position) + 1 if side == 'right' else math.ceil(position)
    return Vertex.osc(n, min(max(i, 1), M))


def vertex_at(params: MapParams, x: Number, side: str = 'right',
              osc_count: Optional[OscCount] = None) -> Optional[Vertex]:
    """Vertex containing [x, x + eps) (side='right') or (x - eps, x] (side='left').

    None where no single vertex does: at the accumulation points 0, 1 and
    lambda^(-kr), and outside [0, 4].
    """
    if side not in ('left', 'right'):
        raise DomainError(f"side must be 'left' or 'right', got {side!r}")
    osc_count = osc_count or standard_osc_count(params)
    X = Fraction(x)
    right = side == 'right'
    if (right and (X < 0 or X >= 4)) or (not right and (X <= 0 or X > 4)):
        return None
    if X == 0:
        return None
    y1 = level_positions(1)[1]
    left_hump_start = params.scale(1) * y1

    def past(bound):
        return X >= bound if right else X > bound

    if past(y1):
        return Vertex.special('Right')
    if past(1):
        return _level_vertex(X, 0, side, osc_count)
    if past(HALF):
        return Vertex.special('Hump')
    if past(left_hump_start):
        return Vertex.special('LeftHump')
    k = _scale_index(X, params, strict=not right)
    u = X / params.scale(k)
    y_k = level_positions(k)[1]
    if (u >= y_k) if right else (u > y_k):
        return Vertex.tail(k)
    return _level_vertex(u, k, side, osc_count)


def vertices_containing(params: MapParams, x: Number,
                        osc_count: Optional[OscCount] = None) -> List[Vertex]:
    """The (one or two) vertices whose closed interval contains x."""
    found = {v for v in (vertex_at(params, x, 'left', osc_count), vertex_at(params, x, 'right', osc_count))
             if v is not None}
    return sorted(found)


def is_exceptional(params: MapParams, x: Number, tol: float = EXCEPTIONAL_TOLERANCE,
                   osc_count: Optional[OscCount] = None) -> bool:
    """Whether x lies on (exact input) or within tol of (float input) a partition endpoint."""
    osc_count = osc_count or standard_osc_count(params)
    if is_exact(x):
        left = vertex_at(params, x, 'left', osc_count)
        right = vertex_at(params, x, 'right', osc_count)
        return left is None or right is None or left != right
    v = vertex_at(params, x, 'right', osc_count)
    if v is None:
        return True
    lo, hi = vertex_interval(v, params, osc_count)
    distance = min(x - float(lo), float(hi) - x)
    return distance <= tol * max(abs(x), 1e-300)


# Point to itinerary

def itinerary_of_point(f: PiecewiseMap, x: Number, length: int,
                       tol: float = EXCEPTIONAL_TOLERANCE) -> Itinerary:
    """The length-symbol code D_0 ... D_{length-1} with f^j(x) in D_j.

    Exact input is tested for exceptionality exactly at time 0; the orbit
    itself is iterated in floating point.

    Raises:
        ExceptionalPoint: an iterate lies on a partition endpoint within tol.
        DomainError: length < 1 or x outside [0, 4].
    """
    if length < 1:
        raise DomainError(f"itinerary length must be >= 1, got {length}")
    params = f.params
    osc_count = standard_osc_count(params)
    if is_exact(x):
        X = f._check_domain(x)
        if is_exceptional(params, X, osc_count=osc_count):
            raise ExceptionalPoint(x, 0)
    exact = is_exact(x)
    point = float(x)
    symbols = []
    for step in range(length):
        if (step > 0 or not exact) and is_exceptional(params, point, tol, osc_count):
            raise ExceptionalPoint(x, step)
        current = Fraction(x) if exact and step == 0 else point
        symbols.append(vertex_at(params, current, 'right', osc_count))
        if step + 1 < length:
            point = float(f.eval(point))
    return Itinerary(tuple(symbols))


# Itinerary to point

def _is_linear_branch(v: Vertex) -> bool:
    """Vertices inside [0, lambda^(-r) y_1] where f(x) = lambda^r x."""
    return v.family in (SCALED_OSC, TAIL) or (v.family == GAP and v.index >= 1)


def _invert_branch(f: PiecewiseMap, v: Vertex, target: Tuple[float, float],
                   osc_count: OscCount) -> Tuple[float, float]:
    """Preimage of target inside the vertex v, using the monotone branch of f on v."""
    lo_v, hi_v = (float(e) for e in vertex_interval(v, f.params, osc_count))
    t_lo, t_hi = target
    if _is_linear_branch(v):
        slope = float(f.params.lam_r)
        return max(lo_v, t_lo / slope), min(hi_v, t_hi / slope)

    f_lo, f_hi = float(f.eval(lo_v)), float(f.eval(hi_v))
    increasing = f_hi >= f_lo
    low_value, high_value = min(f_lo, f_hi), max(f_lo, f_hi)

    def solve(t):
        t = min(max(t, low_value), high_value)
        if t == f_lo:
            return lo_v
        if t == f_hi:
            return hi_v
        return brentq(lambda s: float(f.eval(s)) - t, lo_v, hi_v,
                      xtol=BRENT_XTOL, rtol=BRENT_RTOL, maxiter=200)

    a, b = solve(t_lo), solve(t_hi)
    return (a, b) if increasing else (b, a)


def cylinder(f: PiecewiseMap, symbols: Sequence[Vertex],
             tail_interval: Optional[Tuple[float, float]] = None) -> Cylinder:
    """Realized interval of a finite admissible symbol sequence.

    tail_interval, when given, is intersected with the last symbol before
    the branches are inverted.
    """
    if not symbols:
        raise DomainError("a cylinder needs at least one symbol")
    osc_count = standard_osc_count(f.params)
    last = tuple(float(e) for e in vertex_interval(symbols[-1], f.params, osc_count))
    if tail_interval is not None:
        last = (max(last[0], tail_interval[0]), min(last[1], tail_interval[1]))
    interval = last
    for v in reversed(symbols[:-1]):
        interval = _invert_branch(f, v, interval, osc_count)
    return Cylinder(tuple(symbols), interval)


def _cycle_map(f: PiecewiseMap, cycle: Sequence[Vertex], interval: Tuple[float, float],
               osc_count: OscCount) -> Tuple[float, float]:
    """One more lap around the cycle: preimage of interval through cycle[0] ... cycle[-1]."""
    for v in reversed(cycle):
        interval = _invert_branch(f, v, interval, osc_count)
    return interval


@dataclass(frozen=True)
class ItineraryPoint:
    point: float
    diameter: float
    depth: int

    def to_dict(self) -> Dict[str, Any]:
        return {"point": self.point, "diameter": self.diameter, "depth": self.depth}


def itinerary_point(f: PiecewiseMap, itinerary: Itinerary, tol: float = 1e-12,
                    depth_cap: int = DEPTH_CAP) -> ItineraryPoint:
    """Cylinder midpoint of an admissible itinerary with the diameter it was read from.

    For a finite code the cylinder of its symbols is used, whatever its
    diameter. For a periodic code the cycle is unrolled until the cylinder
    diameter drops below tol.

    Raises:
        AdmissibilityError: the code uses a non-edge.
        ConvergenceError: the diameter is still >= tol at depth_cap symbols.
    """
    osc_count = standard_osc_count(f.params)
    itinerary.validate(osc_count)
    if not itinerary.periodic:
        c = cylinder(f, itinerary.head)
        logger.debug(f"Cylinder of {len(itinerary.head)} symbols has diameter {c.diameter:.3e}")
        return ItineraryPoint(c.midpoint, c.diameter, len(itinerary.head))

    cycle = itinerary.cycle
    start = tuple(float(e) for e in vertex_interval(cycle[0], f.params, osc_count))
    interval = start
    depth = len(itinerary.head)
    while True:
        interval = _cycle_map(f, cycle, interval, osc_count)
        depth += len(cycle)
        if itinerary.head:
            c = cylinder(f, itinerary.head + (cycle[0],), interval)
            current = c.interval
        else:
            current = interval
        if current[1] - current[0] < tol:
            logger.debug(f"Periodic code converged at depth {depth}")
            return ItineraryPoint(0.5 * (current[0] + current[1]), current[1] - current[0], depth)
        if depth >= depth_cap:
            raise ConvergenceError(f"cylinder diameter {current[1] - current[0]:.3e} "
                                   f"still above {tol} at depth {depth}")


def point_of_itinerary(f: PiecewiseMap, itinerary: Itinerary, tol: float = 1e-12,
                       depth_cap: int = DEPTH_CAP) -> float:
    return itinerary_point(f, itinerary, tol, depth_cap).point


# Preimage codes

def _orbit_with_loop(f: PiecewiseMap, x: Number, depth: int) -> Tuple[List[Number], Optional[int]]:
    """Orbit points and the index where an exact orbit starts repeating (None if it does not)."""
    if not is_exact(x):
        return f.orbit(float(x), depth), None
    point = Fraction(x)
    points: List[Number] = [point]
    seen = {point: 0}
    for _ in range(depth):
        if point.denominator.bit_length() > EXACT_ORBIT_BITS:
            tail = f.orbit(float(point), depth - len(points) + 1)
            return points + tail[1:], None
        point = f.eval(point)
        if point in seen:
            return points, seen[point]
        seen[point] = len(points)
        points.append(point)
    return points, None


def preimage_codes(f: PiecewiseMap, x: Number, depth: int) -> Set[Itinerary]:
    """Admissible codes of at most depth symbols whose cylinders contain x.

    An exact periodic orbit yields eventually periodic codes; otherwise the
    codes are finite with depth symbols.
    """
    params = f.params
    osc_count = standard_osc_count(params)
    points, loop_start = _orbit_with_loop(f, x, depth)
    candidates = [vertices_containing(params, p, osc_count) for p in points]
    codes: Set[Itinerary] = set()

    def next_index(j):
        if j + 1 < len(points):
            return j + 1
        return loop_start

    def extend(path: List[Tuple[int, Vertex]]):
        j, v = path[-1]
        if loop_start is None and len(path) >= min(depth, len(points)):
            codes.add(Itinerary(tuple(w for _, w in path)))
            return
        following = next_index(j)
        if following is None:
            codes.add(Itinerary(tuple(w for _, w in path)))
            return
        for w in candidates[following]:
            if not is_edge(v, w, osc_count):
                continue
            state = (following, w)
            if state in path:
                q = path.index(state)
                symbols = [u for _, u in path]
                codes.add(Itinerary(tuple(symbols[:q]), tuple(symbols[q:])))
                continue
            if len(path) >= depth:
                codes.add(Itinerary(tuple(u for _, u in path)))
                continue
            extend(path + [state])

    for v in candidates[0]:
        extend([(0, v)])
    return codes


# Checks

@dataclass
class RoundtripReport:
    x: float
    depth: int
    point: float
    error: float
    diameter: float
    decay: List[Tuple[int, float]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.error <= self.diameter + 1e-12

    def to_dict(self) -> Dict[str, Any]:
        return {
            "x": self.x,
            "depth": self.depth,
            "point": self.point,
            "error": self.error,
            "diameter": self.diameter,
            "decay": [[d, v] for d, v in self.decay],
            "passed": self.passed,
        }


def roundtrip_check(f: PiecewiseMap, x: Number, m: int, tol: float = EXCEPTIONAL_TOLERANCE) -> RoundtripReport:
    """Code x to depth m, decode the code again and compare.

    The decay sequence lists cylinder diameters at depths 1, 2, 4, ... and m.
    """
    itinerary = itinerary_of_point(f, x, m, tol)
    depths = sorted({2 ** j for j in range(int(math.log2(m)) + 1)} | {m})
    decay = [(d, cylinder(f, itinerary.head[:d]).diameter) for d in depths]
    final = cylinder(f, itinerary.head)
    point = final.midpoint
    return RoundtripReport(x=float(x), depth=m, point=point, error=abs(point - float(x)),
                           diameter=final.diameter, decay=decay)


def contraction_depth(f: PiecewiseMap, x: float, target: float = 1e-9, max_depth: int = 200) -> Optional[int]:
    """Smallest depth at which the cylinder of x is narrower than target."""
    itinerary = itinerary_of_point(f, x, max_depth)
    if cylinder(f, itinerary.head).diameter >= target:
        return None
    lo, hi = 1, max_depth
    while lo < hi:
        mid = (lo + hi) // 2
        if cylinder(f, itinerary.head[:mid]).diameter < target:
            hi = mid
        else:
            lo = mid + 1
    return lo


def verify_conjugacy(f: PiecewiseMap, points: Iterable[float], depth: int = 30) -> CheckReport:
    """Shifting the code of x gives the code of f(x) on the computed prefix."""
    report = CheckReport(name=f"conjugacy[depth={depth}]")
    checked = skipped = 0
    for x in points:
        try:
            code = itinerary_of_point(f, x, depth + 1)
            image_code = itinerary_of_point(f, float(f.eval(float(x))), depth)
        except ExceptionalPoint:
            skipped += 1
            continue
        if code.head[1:] != image_code.head:
            report.fail(f"code of f({x}) is not the shifted code of {x}")
        checked += 1
    report.details = {"checked": checked, "exceptional": skipped}
    return report


def verify_coding(f: PiecewiseMap, n_max: int = 5, random_points: int = 100, seed: int = 7,
                  depth: int = 30) -> CheckReport:
    """Two codes at x_n and y_n, one at random points, and roundtrips at depth."""
    report = CheckReport(name=f"coding[n<={n_max}]")
    counts = {}
    for n in range(1, n_max + 1):
        x_n, y_n = level_positions(n)
        for name, point in (("x", x_n), ("y", y_n)):
            found = preimage_codes(f, point, 4 * (n + 2))
            counts[f"{name}_{n}"] = len(found)
            if len(found) != 2:
                report.fail(f"{name}_{n} has {len(found)} codes, expected 2")
    rng = np.random.default_rng(seed)
    worst = 0.0
    unique = skipped = 0
    for x in rng.uniform(0.0, 4.0, random_points):
        x = float(x)
        try:
            found = preimage_codes(f, x, depth)
            trip = roundtrip_check(f, x, depth)
        except ExceptionalPoint as e:
            logger.warning(f"Skipping random point {x}: {str(e)}")
            skipped += 1
            continue
        if len(found) == 1:
            unique += 1
        else:
            report.fail(f"random point {x} has {len(found)} codes")
        worst = max(worst, trip.error)
        if trip.error >= 1e-6:
            report.fail(f"roundtrip error {trip.error:.3e} at {x}")
    report.details = {"codes": counts, "unique_random": unique, "exceptional_random": skipped,
                      "max_roundtrip_error": worst}
    return report
