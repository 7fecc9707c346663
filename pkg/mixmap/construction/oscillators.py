import csv
import logging
import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, Any, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConstructionError, DomainError
from .blends import (PolyPiece, SlopeCorridor, build_blend, is_exact, GRID_POINTS,
                     GRID_TOLERANCE)
from .params import MapParams, LevelConstants, level_constants

logger = logging.getLogger('MixMap.Oscillators')

LAP_FIRST = 'first'
LAP_RISE = 'rise'
LAP_FALL = 'fall'
LAP_LAST = 'last'

_CACHE: Dict[Tuple[str, MapParams, int, int], Any] = {}
_CACHE_LOCK = threading.Lock()


class LapTemplate:
    """One monotone lap of s_n on the local coordinate u in [0, 1]."""

    def __init__(self, kind: str, pieces: List[PolyPiece], theta: Fraction, gamma: Fraction):
        self.kind = kind
        self.pieces = pieces
        self.theta = theta
        self.gamma = gamma
        self.sign = pieces[2].monotonicity
        self._starts = [p.a for p in pieces]
        self._float_starts = np.array([float(p.a) for p in pieces])

    def locate(self, u) -> int:
        """Index of the sub-piece containing local u, right-continuous."""
        if is_exact(u):
            index = 0
            for i, start in enumerate(self._starts):
                if u >= start:
                    index = i
            return index
        return int(np.searchsorted(self._float_starts, u, side='right') - 1)

    def __call__(self, u, k: int = 0):
        piece = self.pieces[max(self.locate(u), 0)]
        return piece(u, k)

    def sample(self, u: np.ndarray, k: int = 0) -> np.ndarray:
        index = np.clip(np.searchsorted(self._float_starts, u, side='right') - 1, 0, len(self.pieces) - 1)
        out = np.empty_like(u, dtype=float)
        for i, piece in enumerate(self.pieces):
            mask = index == i
            if np.any(mask):
                out[mask] = piece(u[mask], k)
        return out


class Oscillator:
    """Normalized oscillation profile s_n on [0, M_n].

    Interior laps are exact copies of two templates (rising and falling);
    the first and last laps carry the affine end segments.
    """

    def __init__(self, params: MapParams, constants: LevelConstants,
                 templates: Dict[str, LapTemplate]):
        self.params = params
        self.constants = constants
        self.n = constants.n
        self.M = constants.M
        self.m = constants.m
        self.k = constants.k
        self.delta = params.delta
        self.C = params.C
        self.templates = templates
        self.derivative_bounds: Dict[int, float] = {}
        self.logger = logging.getLogger('MixMap.Oscillators.Oscillator')

    def lap_kind(self, i: int) -> str:
        if not 1 <= i <= self.M:
            raise DomainError(f"lap index {i} outside [1, {self.M}]")
        if i == 1:
            return LAP_FIRST
        if i == self.M:
            return LAP_LAST
        return LAP_RISE if i % 2 == 1 else LAP_FALL

    def lap(self, i: int) -> LapTemplate:
        return self.templates[self.lap_kind(i)]

    def split(self, u) -> Tuple[int, Any]:
        """Lap index (1-based) and local coordinate of u in [0, M]."""
        if is_exact(u):
            u = Fraction(u)
            i = math.floor(u) + 1
        else:
            i = int(math.floor(u)) + 1
        if i > self.M:
            i = self.M
        return i, u - (i - 1)

    def __call__(self, u, k: int = 0):
        """k-th derivative of s_n at u in [0, M_n]."""
        if u < 0 or u > self.M:
            raise DomainError(f"u={u} outside [0, {self.M}]")
        i, local = self.split(u)
        return self.lap(i)(local, k)

    def validate(self) -> None:
        """Check the structural properties on the templates and record derivative bounds."""
        p = self.params
        first, rise, fall, last = (self.templates[k] for k in (LAP_FIRST, LAP_RISE, LAP_FALL, LAP_LAST))
        quarter = Fraction(3, 4)
        failures = []

        if first.pieces[0].left_value != 0:
            failures.append("s_n(0) != 0")
        if last.pieces[-1].right_value != 1:
            failures.append("s_n(M_n) != 1")
        if first.pieces[0](self.delta) != self.k * self.delta:
            failures.append("s_n(delta) != k_n delta")
        if rise.pieces[-1].left_value != quarter or fall.pieces[0].right_value != quarter:
            failures.append("max cap does not reach 3/4 at distance delta")
        if rise.pieces[0].right_value != -self.m + Fraction(1, 4):
            failures.append("min cap does not reach -m_n + 1/4 at distance delta")

        # Jets across every internal and lap-to-lap junction
        order = p.k_max
        sequences = [first.pieces, rise.pieces, fall.pieces, last.pieces]
        for pieces in sequences:
            for left, right in zip(pieces, pieces[1:]):
                if left.jet(True, order) != right.jet(False, order):
                    failures.append(f"jet mismatch inside {left.kind} at u={left.b}")
        for left, right in ((first, fall), (rise, fall), (fall, rise), (fall, last)):
            if left.pieces[-1].jet(True, order) != right.pieces[0].jet(False, order):
                failures.append(f"jet mismatch between {left.kind} and {right.kind} laps")

        lam_r = float(p.lam_r)
        floor_slope = float(min(Fraction(1, 2), self.k))
        for template in self.templates.values():
            for index, piece in enumerate(template.pieces):
                slopes = piece.grid(1) * template.sign
                if np.any(slopes < -GRID_TOLERANCE):
                    failures.append(f"{template.kind} lap not monotone on piece {index}")
                if np.any(slopes > lam_r * (1 + GRID_TOLERANCE)):
                    failures.append(f"{template.kind} lap slope exceeds lambda^r on piece {index}")
                if piece.kind != 'cap' and np.any(slopes < floor_slope * (1 - GRID_TOLERANCE)):
                    failures.append(f"{template.kind} lap slope below min(1/2, k_n) on piece {index}")

        if failures:
            message = f"Oscillator n={self.n} failed validation: {'; '.join(failures)}"
            self.logger.error(message)
            raise ConstructionError(message)

        for k in range(order + 1):
            self.derivative_bounds[k] = max(
                piece.sup_abs(k) for template in self.templates.values() for piece in template.pieces
            )

    def chord_slopes(self) -> Dict[str, Fraction]:
        """Chord slope magnitudes between the cap boundaries of each lap template."""
        out = {}
        for kind, template in self.templates.items():
            a, b = template.pieces[0], template.pieces[-1]
            out[kind] = abs(b.left_value - a.right_value) / (b.a - a.b)
        return out

    def dump_csv(self, path: str, points_per_lap: int = GRID_POINTS, max_laps: int = 8) -> Path:
        """Write u, s_n(u), s_n'(u), lap_index for the first laps and the last one."""
        laps = list(range(1, min(self.M, max_laps) + 1))
        if self.M > max_laps:
            laps.append(self.M)
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        local = np.linspace(0.0, 1.0, points_per_lap, endpoint=False)
        with target.open('w', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(['u', 's_n(u)', "s_n'(u)", 'lap_index'])
            for i in laps:
                template = self.lap(i)
                values = template.sample(local, 0)
                slopes = template.sample(local, 1)
                for v, s, ds in zip(local, values, slopes):
                    writer.writerow([f"{i - 1 + v:.12g}", f"{s:.15g}", f"{ds:.15g}", i])
        self.logger.info(f"Wrote oscillator n={self.n} dump to {target}")
        return target


class Bridge:
    """Normalized bridge phi_n on [0, 1] with prescribed end slopes."""

    def __init__(self, n: int, endpoint_slopes: Tuple[Fraction, Fraction],
                 shape_parameter: Fraction, pieces: List[PolyPiece]):
        self.n = n
        self.endpoint_slopes = endpoint_slopes
        self.shape_parameter = shape_parameter
        self.pieces = pieces
        self._float_starts = np.array([float(p.a) for p in pieces])

    def locate(self, v) -> int:
        if is_exact(v):
            return max(i for i, p in enumerate(self.pieces) if v >= p.a or i == 0)
        return int(np.clip(np.searchsorted(self._float_starts, v, side='right') - 1, 0, 2))

    def __call__(self, v, k: int = 0):
        if v < 0 or v > 1:
            raise DomainError(f"bridge argument {v} outside [0, 1]")
        return self.pieces[self.locate(v)](v, k)

    def min_slope(self) -> float:
        return min(float(np.min(p.grid(1))) for p in self.pieces)

    def max_slope(self) -> float:
        return max(float(np.max(p.grid(1))) for p in self.pieces)


def _cached(kind: str, params: MapParams, n: int, extra: int, builder):
    key = (kind, params, n, extra)
    with _CACHE_LOCK:
        if key in _CACHE:
            return _CACHE[key]
    built = builder()
    with _CACHE_LOCK:
        # First writer wins; concurrent builders produce identical objects
        return _CACHE.setdefault(key, built)


def clear_cache() -> None:
    with _CACHE_LOCK:
        _CACHE.clear()


def _lap_templates(params: MapParams, lc: LevelConstants) -> Dict[str, LapTemplate]:
    delta = params.delta
    m, k = lc.m, lc.k
    q = Fraction(1, 4)
    order = params.blend_order
    tau_cap = min(delta, (1 - 2 * delta) / 3)
    floor_slope = min(Fraction(1, 2), k)

    min_cap_left = PolyPiece(0, delta, [-m, 0, q], 'cap', 1)
    max_cap_left = PolyPiece(0, delta, [1, 0, -q], 'cap', -1)
    affine_left = PolyPiece(0, delta, [0, k * delta], 'affine', 1)
    max_cap_right = PolyPiece(1 - delta, 1, [Fraction(3, 4), Fraction(1, 2), -q], 'cap', 1)
    min_cap_right = PolyPiece(1 - delta, 1, [-m + q, -Fraction(1, 2), q], 'cap', -1)
    affine_right = PolyPiece(1 - delta, 1, [1 - k * delta, k * delta], 'affine', 1)

    rising = SlopeCorridor(1, floor_slope, params.lam_r)
    falling = SlopeCorridor(-1, floor_slope, params.lam_r)
    layouts = {
        LAP_FIRST: (affine_left, max_cap_right, rising),
        LAP_RISE: (min_cap_left, max_cap_right, rising),
        LAP_FALL: (max_cap_left, min_cap_right, falling),
        LAP_LAST: (min_cap_left, affine_right, rising),
    }
    templates = {}
    for kind, (left, right, corridor) in layouts.items():
        try:
            blend = build_blend(left, right, corridor, tau_cap, order, kind='blend')
        except ConstructionError as e:
            logger.error(f"Failed to build {kind} lap at level {lc.n}: {str(e)}")
            raise
        templates[kind] = LapTemplate(kind, [left] + blend.pieces + [right], blend.theta, blend.gamma)
    return templates


def build_oscillator(params: MapParams, n: int, extra_oscillations: int = 0) -> Oscillator:
    """Build and validate s_n for level n (cached per parameters and level)."""
    def build():
        lc = level_constants(params, n, extra_oscillations)
        oscillator = Oscillator(params, lc, _lap_templates(params, lc))
        oscillator.validate()
        logger.debug(f"Built oscillator n={n} with M_n={lc.M}")
        return oscillator
    return _cached('oscillator', params, n, extra_oscillations, build)


def build_bridge(params: MapParams, n: int) -> Bridge:
    """Build phi_n with phi_n'(0) = 2 l_n lambda^(-nr) / h_n and phi_n'(1) = lambda^r phi_n'(0)."""
    def build():
        lc = level_constants(params, n)
        start_slope = 2 * lc.l * params.scale(n) / lc.h
        end_slope = 2 * lc.l * params.scale(n - 1) / lc.h
        before = PolyPiece(-1, 0, [-start_slope, start_slope], 'bridge-end', 1)
        after = PolyPiece(1, 2, [1, end_slope], 'bridge-end', 1)
        corridor = SlopeCorridor(1, Fraction(2, 3) * start_slope, params.lam_r)
        try:
            blend = build_blend(before, after, corridor, Fraction(1, 3), params.blend_order, kind='bridge')
        except ConstructionError as e:
            logger.error(f"Failed to build bridge at level {n}: {str(e)}")
            raise
        bridge = Bridge(n, (start_slope, end_slope), blend.theta, blend.pieces)
        if bridge.pieces[0].left_value != 0 or bridge.pieces[-1].right_value != 1:
            raise ConstructionError(f"bridge n={n} does not map [0,1] onto [0,1]")
        return bridge
    return _cached('bridge', params, n, 0, build)


@dataclass
class UniformBoundReport:
    order: int
    bound: float
    per_level: List[Tuple[int, float]] = field(default_factory=list)
    slope: float = 0.0
    passed: bool = True

    def to_dict(self) -> Dict[str, Any]:
        return {
            "order": self.order,
            "bound": self.bound,
            "per_level": [[n, v] for n, v in self.per_level],
            "slope": self.slope,
            "passed": self.passed,
        }


def validate_uniform_bounds(oscillators: Sequence[Oscillator], k: int) -> UniformBoundReport:
    """Sup over levels of the observed k-th derivative bound, with a growth-trend fit.

    Passes when the least-squares trend across the levels accounts for less
    than half of the mean bound.
    """
    if not oscillators:
        raise DomainError("validate_uniform_bounds needs at least one oscillator")
    k_max = oscillators[0].params.k_max
    if k > k_max:
        raise DomainError(f"order {k} exceeds k_max = {k_max}")
    per_level = [(o.n, o.derivative_bounds[k]) for o in oscillators]
    values = np.array([v for _, v in per_level])
    bound = float(values.max())
    slope = 0.0
    passed = True
    if len(per_level) >= 2:
        levels = np.array([n for n, _ in per_level], dtype=float)
        slope = float(np.polyfit(levels, values, 1)[0])
        growth = slope * (levels.max() - levels.min())
        passed = growth <= 0.5 * float(values.mean())
    if not passed:
        logger.warning(f"Derivative order {k} shows growth across levels (slope {slope:.4g})")
    return UniformBoundReport(order=k, bound=bound, per_level=per_level, slope=slope, passed=passed)
