"""The piecewise map f_r : [0, 4] -> [0, 4].

The domain is split into three regions:

* [0, 1]: ten explicit pieces (linear start, glue, cap at 1/2, glue, power piece at 1).
* (1, y_1): the levels n >= 1, each [y_{n+1}, y_n) made of an affine gap piece,
  a bridge and the rescaled oscillator s_n. Levels are built on first use.
* [y_1, 4]: glue and the final affine piece.

Intervals are right-continuous except x = 4 (last piece) and x = 1, which
belongs to the power piece.
"""
import logging
import math
import threading
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import ConstructionError, DomainError, ParameterError
from .blends import PolyPiece, SlopeCorridor, build_blend, is_exact
from .oscillators import (Oscillator, Bridge, build_oscillator, build_bridge,
                          LAP_FIRST, LAP_RISE, LAP_FALL, LAP_LAST)
from .params import MapParams, LevelConstants, level_constants, level_positions

logger = logging.getLogger('MixMap.Map')

Number = Union[int, float, Fraction]

DEFAULT_MAX_LEVEL = 200
EXPANDED_LAP_LIMIT = 1000
# Above this many laps the float lap coordinate loses more than ~1e-6 of a lap
FLOAT_LAP_LIMIT = 2 ** 32
# Float evaluation needs lambda^n to stay well inside binary64
FLOAT_EXPONENT_LIMIT = 300 * math.log(10)

HALF = Fraction(1, 2)
FOUR = Fraction(4)


def _monotonicity_label(sign: int) -> str:
    return 'increasing' if sign > 0 else 'decreasing'


def _piece_record(piece: PolyPiece, **extra) -> Dict[str, Any]:
    record = {
        "domain": [piece.a.numerator, piece.a.denominator, piece.b.numerator, piece.b.denominator],
        "kind": piece.kind,
        "monotonicity": _monotonicity_label(piece.monotonicity),
        "coefficients": [str(Fraction(c)) for c in piece.coefficients],
    }
    record.update(extra)
    return record


class LevelBlock:
    """f_r on [y_{n+1}, y_n): gap piece, bridge, then the rescaled oscillator."""

    def __init__(self, params: MapParams, constants: LevelConstants,
                 oscillator: Oscillator, bridge: Bridge):
        self.params = params
        self.constants = constants
        self.n = constants.n
        self.oscillator = oscillator
        self.bridge = bridge
        lc = constants
        y_next = level_positions(self.n + 1)[1]
        self.start = y_next
        self.end = lc.y
        self.gap = PolyPiece(
            y_next, lc.w,
            [params.scale(self.n + 1) * y_next, 2 * params.scale(self.n) * (lc.w - y_next)],
            'gap', 1,
        )
        f_w = params.scale(self.n + 1) * lc.x
        self.bridge_pieces = [
            p.rescaled(lc.w + lc.l * p.a, lc.w + lc.l * p.b, lc.h, f_w, 'bridge')
            for p in bridge.pieces
        ]
        self._bridge_starts = [p.a for p in self.bridge_pieces]
        self._lap_rate = lc.M / lc.width
        # Exact and float factors of the oscillator branch per derivative order
        self._factors: Dict[int, Tuple[Fraction, float]] = {}
        self._x_hi = float(lc.x)
        self._x_lo = float(lc.x - Fraction(self._x_hi))
        self._w_float = float(lc.w)
        self._x_float = float(lc.x)

    def factor(self, k: int) -> Tuple[Fraction, float]:
        """lambda^(-nr) * width * (M / width)^k for k >= 1, lambda^(-nr) * width for k = 0."""
        if k not in self._factors:
            exact = self.constants.scale * self.constants.width * self._lap_rate ** k
            self._factors[k] = (exact, float(exact))
        return self._factors[k]

    def lap_coordinate(self, x: Fraction) -> Tuple[int, Fraction]:
        """Lap index (1-based) and exact local coordinate of x in [x_n, y_n]."""
        return self.oscillator.split(self._lap_rate * (x - self.constants.x))

    def _bridge_piece(self, x) -> PolyPiece:
        index = 0
        for i, start in enumerate(self._bridge_starts):
            if x >= start:
                index = i
        return self.bridge_pieces[index]

    def locate(self, x: Fraction) -> Tuple[str, Any]:
        if x < self.constants.w:
            return 'gap', self.gap
        if x < self.constants.x:
            return 'bridge', self._bridge_piece(x)
        i, local = self.lap_coordinate(x)
        return 'oscillator', (i, local)

    def evaluate(self, x: Number, k: int = 0):
        exact = is_exact(x)
        X = Fraction(x)
        region, target = self.locate(X)
        if region != 'oscillator':
            return target(X if exact else float(x), k)
        i, local = target
        template = self.oscillator.lap(i)
        if exact:
            s = template(local, k)
            if k == 0:
                return self.constants.scale * self.constants.x + self.factor(0)[0] * s
            return self.factor(k)[0] * s
        s = template(float(local), k)
        if k == 0:
            return float(self.constants.scale * self.constants.x) + self.factor(0)[1] * s
        return self.factor(k)[1] * s

    def piece_label(self, x: Fraction) -> str:
        region, target = self.locate(x)
        if region == 'gap':
            return f"n{self.n}:gap"
        if region == 'bridge':
            return f"n{self.n}:bridge{self.bridge_pieces.index(target)}"
        i, local = target
        return f"n{self.n}:lap{i}.{self.oscillator.lap(i).locate(local)}"

    def sample(self, xs: np.ndarray, k: int) -> np.ndarray:
        out = np.empty_like(xs, dtype=float)
        gap = xs < self._w_float
        bridge = ~gap & (xs < self._x_float)
        osc = ~gap & ~bridge
        if np.any(gap):
            out[gap] = self.gap(xs[gap], k)
        if np.any(bridge):
            starts = np.array([float(s) for s in self._bridge_starts])
            index = np.clip(np.searchsorted(starts, xs[bridge], side='right') - 1, 0, len(starts) - 1)
            values = np.empty(int(bridge.sum()))
            for j, piece in enumerate(self.bridge_pieces):
                mask = index == j
                if np.any(mask):
                    values[mask] = piece(xs[bridge][mask], k)
            out[bridge] = values
        if np.any(osc):
            out[osc] = self._sample_oscillator(xs[osc], k)
        return out

    def _sample_oscillator(self, xs: np.ndarray, k: int) -> np.ndarray:
        M = self.constants.M
        if M > FLOAT_LAP_LIMIT:
            # float64 cannot resolve the position inside a lap; go through the exact lap coordinate
            return np.array([self.evaluate(x, k) for x in xs.tolist()], dtype=float)
        # Two-term x_n keeps the lap coordinate accurate for large M_n
        u = ((xs - self._x_hi) - self._x_lo) * float(self._lap_rate)
        laps = np.clip(np.floor(u), 0, M - 1).astype(np.int64)
        local = np.clip(u - laps, 0.0, 1.0)
        lap_index = laps + 1
        kinds = np.where(lap_index == 1, 0, np.where(lap_index == M, 3, np.where(lap_index % 2 == 1, 1, 2)))
        s = np.empty_like(u)
        for code, kind in enumerate((LAP_FIRST, LAP_RISE, LAP_FALL, LAP_LAST)):
            mask = kinds == code
            if np.any(mask):
                s[mask] = self.oscillator.templates[kind].sample(local[mask], k)
        if k == 0:
            return float(self.constants.scale * self.constants.x) + self.factor(0)[1] * s
        return self.factor(k)[1] * s

    def records(self) -> List[Dict[str, Any]]:
        """Export records for the level; laps are expanded only for small M_n."""
        lc = self.constants
        records = [_piece_record(self.gap, level=self.n)]
        records += [_piece_record(p, level=self.n) for p in self.bridge_pieces]
        if lc.M <= EXPANDED_LAP_LIMIT:
            for i in range(1, lc.M + 1):
                for sub in self.oscillator.lap(i).pieces:
                    a = lc.x + lc.width * (i - 1 + sub.a) / lc.M
                    b = lc.x + lc.width * (i - 1 + sub.b) / lc.M
                    piece = sub.rescaled(a, b, self.factor(0)[0], lc.scale * lc.x, sub.kind)
                    records.append(_piece_record(piece, level=self.n, lap=i))
        else:
            records.append({
                "domain": [lc.x.numerator, lc.x.denominator, lc.y.numerator, lc.y.denominator],
                "kind": "oscillator",
                "level": self.n,
                "M": lc.M,
                "scale": str(self.factor(0)[0]),
                "shift": str(lc.scale * lc.x),
                "templates": {
                    kind: [_piece_record(p) for p in template.pieces]
                    for kind, template in sorted(self.oscillator.templates.items())
                },
            })
        return records


class PiecewiseMap:
    """f_r with exact breakpoints and lazily materialized levels.

    Calls with int or Fraction arguments are evaluated exactly and return a
    Fraction; float arguments are evaluated in binary64.
    """

    def __init__(self, params: MapParams, n_max: int = 12, max_level: int = DEFAULT_MAX_LEVEL):
        self.params = params
        self.n_max = n_max
        self.float_level_cap = min(max_level, int(FLOAT_EXPONENT_LIMIT / math.log(float(params.lam))))
        self.logger = logging.getLogger('MixMap.Map.PiecewiseMap')
        self._levels: Dict[int, LevelBlock] = {}
        self._lock = threading.Lock()

        self.y1 = level_positions(1)[1]
        self.left_pieces = self._build_left_pieces()
        self.right_pieces = self._build_right_pieces()
        self._left_starts = np.array([float(p.a) for p in self.left_pieces])
        self._right_starts = np.array([float(p.a) for p in self.right_pieces])

    # Construction

    def _build_left_pieces(self) -> List[PolyPiece]:
        p = self.params
        d = p.delta
        corridor_hi = p.lam_r
        linear = PolyPiece(0, 5 * d / 2, [0, Fraction(5, 2)], 'linear', 1)
        cap_left = PolyPiece(HALF - d, HALF, [4 - 3 * d / 2, 3 * d, -3 * d / 2], 'cap', 1)
        cap_right = PolyPiece(HALF, HALF + d, [4, 0, -3 * d / 2], 'cap', -1)
        exponent = 2 * p.r
        power_coefficients = [
            d * math.comb(exponent, j) * (-1) ** (exponent - j) for j in range(exponent + 1)
        ]
        power = PolyPiece(1 - d, 1, power_coefficients, 'power', -1)

        glue_a = build_blend(linear, cap_left, SlopeCorridor(1, Fraction(3, 2), corridor_hi),
                             (cap_left.a - linear.b) / 3, p.blend_order, kind='glue')
        glue_b = build_blend(cap_right, power, SlopeCorridor(-1, Fraction(3, 2), corridor_hi),
                             (power.a - cap_right.b) / 3, p.blend_order, kind='glue')
        return [linear] + glue_a.pieces + [cap_left, cap_right] + glue_b.pieces + [power]

    def _build_right_pieces(self) -> List[PolyPiece]:
        p = self.params
        d = p.delta
        block = self.level(1)
        lc = block.constants
        end = block.oscillator.templates[LAP_LAST].pieces[-1]
        a = lc.x + lc.width * (lc.M - 1 + end.a) / lc.M
        incoming = end.rescaled(a, lc.y, block.factor(0)[0], lc.scale * lc.x, 'affine')
        affine = PolyPiece(4 - 3 * d / 2, 4, [Fraction(5, 2), Fraction(3, 2)], 'affine', 1)
        glue_c = build_blend(incoming, affine, SlopeCorridor(1, Fraction(3, 2), p.lam_r),
                             (affine.a - incoming.b) / 3, p.blend_order, kind='glue')
        return glue_c.pieces + [affine]

    def level(self, n: int) -> LevelBlock:
        """The level-n block, built and cached on first use."""
        block = self._levels.get(n)
        if block is not None:
            return block
        with self._lock:
            block = self._levels.get(n)
            if block is None:
                try:
                    constants = level_constants(self.params, n)
                    block = LevelBlock(self.params, constants,
                                       build_oscillator(self.params, n),
                                       build_bridge(self.params, n))
                except ConstructionError as e:
                    self.logger.error(f"Failed to build level {n}: {str(e)}")
                    raise
                self._levels[n] = block
                self.logger.debug(f"Materialized level {n} (M_n={constants.M})")
        return block

    def materialize(self, n_max: Optional[int] = None) -> None:
        for n in range(1, (n_max or self.n_max) + 1):
            self.level(n)

    @property
    def levels(self) -> Dict[int, LevelConstants]:
        return {n: block.constants for n, block in sorted(self._levels.items())}

    # Location

    @staticmethod
    def level_index(x: Fraction) -> int:
        """Level n with y_{n+1} <= x < y_n for 1 < x < y_1."""
        n = max(1, math.floor(1 / (x - 1)) - 1)
        while x < level_positions(n + 1)[1]:
            n += 1
        while n > 1 and x >= level_positions(n)[1]:
            n -= 1
        return n

    def _check_domain(self, x) -> Fraction:
        try:
            X = Fraction(x)
        except (TypeError, ValueError, OverflowError) as e:
            raise DomainError(f"cannot evaluate at {x!r}") from e
        if X < 0 or X > 4:
            raise DomainError(f"x={x} outside [0, 4]")
        return X

    def _check_order(self, k: int) -> None:
        if not isinstance(k, (int, np.integer)) or k < 0 or k > self.params.k_max:
            raise DomainError(f"derivative order {k} outside [0, {self.params.k_max}]")

    @staticmethod
    def _find(pieces: List[PolyPiece], X: Fraction) -> PolyPiece:
        index = 0
        for i, piece in enumerate(pieces):
            if X >= piece.a:
                index = i
        return pieces[index]

    def locate(self, x: Number) -> Tuple[str, Any]:
        """('left', piece), ('right', piece) or ('level', n)."""
        X = self._check_domain(x)
        if X <= 1:
            if X == 1:
                return 'left', self.left_pieces[-1]
            return 'left', self._find(self.left_pieces, X)
        if X >= self.y1:
            return 'right', self._find(self.right_pieces, X)
        return 'level', self.level_index(X)

    def piece_label(self, x: Number) -> str:
        region, target = self.locate(x)
        if region == 'left':
            return f"L{self.left_pieces.index(target)}"
        if region == 'right':
            return f"R{self.right_pieces.index(target)}"
        return self.level(target).piece_label(Fraction(x))

    # Evaluation

    def eval(self, x: Number, k: int = 0):
        """f_r^(k)(x); exact for int/Fraction input.

        Raises:
            DomainError: x outside [0, 4], k outside [0, k_max], or a float
                argument in a level beyond the float cap.
        """
        self._check_order(k)
        exact = is_exact(x)
        region, target = self.locate(x)
        if region != 'level':
            return target(x if exact else float(x), k)
        if not exact and target > self.float_level_cap:
            raise DomainError(f"x={x} lies in level {target} beyond the float cap {self.float_level_cap}")
        return self.level(target).evaluate(x, k)

    __call__ = eval

    def eval_derivative(self, x: Number, k: int = 1):
        if k < 1:
            raise DomainError(f"derivative order must be >= 1, got {k}")
        return self.eval(x, k)

    def orbit(self, x: Number, steps: int) -> List[Any]:
        points = [x if is_exact(x) else float(x)]
        for _ in range(steps):
            points.append(self.eval(points[-1]))
        return points

    def sample(self, xs: Sequence[float], k: int = 0) -> np.ndarray:
        """Vectorized float evaluation; NaN beyond the float level cap."""
        self._check_order(k)
        xs = np.asarray(xs, dtype=float)
        if np.any((xs < 0) | (xs > 4)):
            raise DomainError("sample points must lie in [0, 4]")
        out = np.full(xs.shape, np.nan)
        left = xs <= 1.0
        right = xs >= float(self.y1)
        middle = ~left & ~right
        if np.any(left):
            out[left] = self._sample_region(self.left_pieces, self._left_starts, xs[left], k, at_one=True)
        if np.any(right):
            out[right] = self._sample_region(self.right_pieces, self._right_starts, xs[right], k)
        if np.any(middle):
            out[middle] = self._sample_levels(xs[middle], k)
        return out

    @staticmethod
    def _sample_region(pieces, starts, xs, k, at_one=False) -> np.ndarray:
        index = np.clip(np.searchsorted(starts, xs, side='right') - 1, 0, len(pieces) - 1)
        if at_one:
            index[xs == 1.0] = len(pieces) - 1
        out = np.empty_like(xs)
        for i, piece in enumerate(pieces):
            mask = index == i
            if np.any(mask):
                out[mask] = piece(xs[mask], k)
        return out

    def _sample_levels(self, xs: np.ndarray, k: int) -> np.ndarray:
        def y(n):
            n = n.astype(float)
            return 1.0 + 1.0 / n + 1.0 / (2.0 * n * n)

        d = xs - 1.0
        n = np.maximum(np.floor(1.0 / d).astype(np.int64) - 1, 1)
        for _ in range(8):
            below = xs < y(n + 1)
            if not np.any(below):
                break
            n = np.where(below, n + 1, n)
        for _ in range(8):
            above = (n > 1) & (xs >= y(n))
            if not np.any(above):
                break
            n = np.where(above, n - 1, n)

        out = np.full(xs.shape, np.nan)
        for level in np.unique(n):
            if level > self.float_level_cap:
                continue
            mask = n == level
            out[mask] = self.level(int(level)).sample(xs[mask], k)
        return out

    # Interval images

    def _endpoint_value(self, x: Number):
        if is_exact(x):
            return self.eval(x)
        try:
            return self.eval(x)
        except DomainError:
            # Levels past the float cap map below lambda^(-cap r)
            return 0.0

    def critical_values(self, a: Fraction, b: Fraction,
                        level_limit: Optional[int] = None) -> List[Fraction]:
        """Exact values of f at the turning points inside [a, b].

        Levels deeper than level_limit are skipped; their values lie below
        lambda^(-level_limit r).
        """
        values = []
        if a <= HALF <= b:
            values.append(FOUR)
        if a <= 1 <= b:
            values.append(Fraction(0))
        if b <= 1 or a >= self.y1:
            return values
        shallow = 1 if b >= self.y1 else self.level_index(b)
        deep = self.level_index(a) if a > 1 else None
        if level_limit is not None:
            if shallow > level_limit:
                return values
            if deep is not None and deep > level_limit:
                deep = level_limit
        candidates = {shallow, shallow + 1}
        if deep is not None:
            candidates |= {deep - 1, deep}
            candidates = {n for n in candidates if shallow <= n <= deep}
        for n in sorted(candidates):
            lc = level_constants(self.params, n)
            rate = lc.M / lc.width
            i_min = max(1, math.ceil(rate * (a - lc.x)))
            i_max = min(lc.M, math.floor(rate * (b - lc.x)))
            if i_min > i_max:
                continue
            if i_min % 2 == 1 or i_max > i_min:
                values.append(lc.scale * lc.y)
            lo, hi = max(i_min, 2), min(i_max, lc.M - 1)
            if lo <= hi and (lo % 2 == 0 or hi > lo):
                values.append(lc.scale * level_positions(n + 1)[1])
        return values

    def image(self, a: Number, b: Number) -> Tuple[Any, Any]:
        """Image f([a, b]) as (low, high); exact when both endpoints are exact."""
        A, B = self._check_domain(a), self._check_domain(b)
        if A > B:
            raise DomainError(f"empty interval [{a}, {b}]")
        exact = is_exact(a) and is_exact(b)
        critical = self.critical_values(A, B, None if exact else self.float_level_cap + 1)
        if exact:
            values = [self.eval(A), self.eval(B)] + critical
            return min(values), max(values)
        values = [float(self._endpoint_value(float(a))), float(self._endpoint_value(float(b)))]
        values += [float(c) for c in critical]
        return min(values), max(values)

    # Export

    def pieces(self, level_cap: Optional[int] = None) -> List[Dict[str, Any]]:
        """Ordered piece records of [0, 1], the levels up to level_cap (deepest first) and [y_1, 4]."""
        cap = level_cap or self.n_max
        records = [_piece_record(p, region='left') for p in self.left_pieces]
        for n in range(cap, 0, -1):
            records += self.level(n).records()
        records += [_piece_record(p, region='right') for p in self.right_pieces]
        return records

    def to_document(self) -> Dict[str, Any]:
        document = {
            "lambda": str(self.params.lam),
            "r": self.params.r,
            "k_max": self.params.k_max,
            "n_max": self.n_max,
            "pieces": self.pieces(),
        }
        return document

    def constants_table(self, n_max: Optional[int] = None) -> List[Dict[str, Any]]:
        return [self.level(n).constants.table_row() for n in range(1, (n_max or self.n_max) + 1)]

    def sample_rows(self, points: int = 401) -> List[List[Any]]:
        """Rows (x, f(x), f'(x), piece id) on a uniform grid of [0, 4]."""
        if not isinstance(points, int) or points < 2:
            raise ParameterError(f"sample grid needs at least 2 points, got {points!r}")
        xs = np.linspace(0.0, 4.0, points)
        values = self.sample(xs, 0)
        slopes = self.sample(xs, 1)
        rows = []
        for x, value, slope in zip(xs.tolist(), values.tolist(), slopes.tolist()):
            region, target = self.locate(x)
            if region == 'level' and target > self.float_level_cap:
                label = f"n{target}"
            else:
                label = self.piece_label(x)
            rows.append([x, value, slope, label])
        return rows


def build_map(params: MapParams, n_max: int = 12, max_level: int = DEFAULT_MAX_LEVEL) -> PiecewiseMap:
    """Construct f_r and materialize levels 1..n_max.

    Raises:
        ParameterError: n_max < 1.
        ConstructionError: a blend could not meet its slope corridor.
    """
    if not isinstance(n_max, int) or n_max < 1:
        raise ParameterError(f"n_max must be an integer >= 1, got {n_max!r}")
    logger.info(f"Building f_r for lambda={params.lam}, r={params.r}, k_max={params.k_max}, n_max={n_max}")
    try:
        f = PiecewiseMap(params, n_max, max_level)
        f.materialize(n_max)
    except ConstructionError as e:
        logger.error(f"Failed to build map: {str(e)}")
        raise
    logger.info(f"Built f_r with {len(f.left_pieces) + len(f.right_pieces)} outer pieces and {n_max} levels")
    return f


def load_map(document: Dict[str, Any]) -> PiecewiseMap:
    """Rebuild a map from an exported document and check that its pieces match."""
    params = MapParams.create(Fraction(document["lambda"]), int(document["r"]), int(document["k_max"]))
    f = build_map(params, int(document["n_max"]))
    rebuilt = f.pieces()
    if rebuilt != document["pieces"]:
        raise ConstructionError("map document does not match the rebuilt construction")
    return f
