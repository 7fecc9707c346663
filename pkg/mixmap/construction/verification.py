import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.stats import qmc
from tqdm import tqdm

from ..errors import ConstructionError, DomainError
from .map_core import PiecewiseMap
from .params import level_constants, level_positions

logger = logging.getLogger('MixMap.Verify')

GROWTH_FACTOR = Fraction(4, 3)
IMAGE_TOLERANCE = 1e-9
# Windows continue this many halvings past the power-piece width lambda^-r
SMOOTHNESS_EXTRA_WINDOWS = 3
LEVELS_PER_WINDOW = 9
REPRESENTATIVE_LAP_LIMIT = 1000


@dataclass
class CheckReport:
    """Outcome of one verification suite; never raised, always returned."""
    name: str
    passed: bool = True
    failures: List[str] = field(default_factory=list)
    details: Dict[str, Any] = field(default_factory=dict)

    def fail(self, reason: str) -> None:
        self.passed = False
        self.failures.append(reason)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "failures": list(self.failures),
            "details": self.details,
        }


# Smoothness at 1

def smoothness_window_count(params) -> int:
    """Halvings of [1 - 1/2, 1 + 1/2] needed to land three windows inside the power piece."""
    return math.ceil(params.r * math.log2(float(params.lam))) + SMOOTHNESS_EXTRA_WINDOWS


def verify_smoothness_at_one(f: PiecewiseMap, k: int, sample_count: int = 256) -> CheckReport:
    """Window maxima of |f^(k)| on [1 - 2^-j, 1 + 2^-j], j = 1..ceil(r log2 lambda) + 3.

    Samples come from the power piece on the left and from nine consecutive
    levels entering each window on the right. One fixed sample pool is used
    so the window maxima are nested.
    """
    report = CheckReport(name=f"smoothness_at_one[k={k}]")
    if k > f.params.r:
        raise DomainError(f"smoothness at 1 is only claimed up to order r = {f.params.r}, got {k}")

    delta = float(f.params.delta)
    radii = [2.0 ** -j for j in range(1, smoothness_window_count(f.params) + 1)]
    left = [1.0 - delta * np.linspace(0.0, 1.0, sample_count)]
    for radius in radii:
        left.append(1.0 - min(radius, delta) * np.linspace(0.0, 1.0, sample_count))
    left_points = np.unique(np.concatenate(left))

    levels = set()
    for radius in radii:
        n = 1
        while float(level_positions(n)[1]) > 1.0 + radius:
            n += 1
        levels.update(m for m in range(n, n + LEVELS_PER_WINDOW) if m <= f.float_level_cap)
    right = []
    for n in sorted(levels):
        start, end = float(level_positions(n + 1)[1]), float(level_positions(n)[1])
        right.append(np.linspace(start, end, sample_count, endpoint=False))
    right_points = np.concatenate(right)

    points = np.concatenate([left_points, right_points])
    values = np.abs(f.sample(points, k))
    windows = []
    for j, radius in enumerate(radii, start=1):
        mask = np.abs(points - 1.0) <= radius
        windows.append((j, radius, float(np.nanmax(values[mask]))))

    maxima = [m for _, _, m in windows]
    report.details = {"k": k, "windows": [list(w) for w in windows], "levels": sorted(levels)}
    for (j, _, prev), (_, _, cur) in zip(windows, windows[1:]):
        if cur > prev * (1 + 1e-12):
            report.fail(f"window maximum grows from j={j} to j={j + 1}")
    if not maxima[-1] < maxima[0]:
        report.fail("window maxima do not decrease toward 1")
    if not maxima[-1] < maxima[-4]:
        report.fail(f"window j={len(maxima)} is not strictly smaller than window j={len(maxima) - 3}")
    if k < 2 * f.params.r and f.eval(1, k) != 0:
        report.fail(f"f^({k})(1) is not 0")
    return report


# Monotone pieces and the endpoint table

def _representative_laps(M: int) -> List[int]:
    if M <= REPRESENTATIVE_LAP_LIMIT:
        return list(range(1, M + 1))
    return [1, 2, 3, M - 2, M - 1, M]


def verify_monotone_pieces(f: PiecewiseMap, n: int, points: int = 64) -> CheckReport:
    """Sign of f' on every lap of level n, the exact endpoint table and the gap/bridge slopes.

    Laps are congruent, so for M_n above a thousand only the first three and
    last three laps are sampled; the endpoint table is checked on the same laps.
    """
    report = CheckReport(name=f"monotone_pieces[n={n}]")
    block = f.level(n)
    lc = block.constants
    scale = lc.scale
    y_next = level_positions(n + 1)[1]
    laps = _representative_laps(lc.M)

    if f.eval(lc.t(0)) != scale * lc.x:
        report.fail(f"f(t_0) != lambda^(-nr) x_n at level {n}")
    for i in laps:
        expected = scale * lc.y if i % 2 == 1 else scale * y_next
        if f.eval(lc.t(i)) != expected:
            report.fail(f"f(t_{i}) has the wrong value at level {n}")
        a, b = lc.t(i - 1), lc.t(i)
        grid = np.linspace(float(a), float(b), points + 2)[1:-1]
        slopes = block.sample(grid, 1)
        sign = 1 if i % 2 == 1 else -1
        if np.any(sign * slopes < -IMAGE_TOLERANCE * float(scale)):
            report.fail(f"lap {i} at level {n} is not {'increasing' if sign > 0 else 'decreasing'}")

    low = float(GROWTH_FACTOR * scale) * (1 - 1e-9)
    high = float(f.params.lam_r) * (1 + 1e-9)
    grid = np.linspace(float(y_next), float(lc.x), 8 * points)
    slopes = block.sample(grid, 1)
    if np.any(slopes < low) or np.any(slopes > high):
        report.fail(f"slope on [y_(n+1), x_n] leaves [(4/3) lambda^(-nr), lambda^r] at level {n}")

    orbit = f.orbit(lc.x, n + 1)
    if orbit[1] != scale * lc.x or orbit[-1] != lc.x:
        report.fail(f"x_{n} is not periodic with period {n + 1}")

    report.details = {"n": n, "M": lc.M, "laps_checked": len(laps)}
    return report


def verify_partition(f: PiecewiseMap, level_cap: Optional[int] = None) -> CheckReport:
    """Exact tiling of [0, 1] and [y_(cap+1), 4] by piece domains."""
    report = CheckReport(name="partition")
    cap = level_cap or f.n_max

    def chain(pieces, start, end, label):
        cursor = start
        for piece in pieces:
            if piece.a != cursor:
                report.fail(f"{label}: gap or overlap at {piece.a}")
            cursor = piece.b
        if cursor != end:
            report.fail(f"{label}: ends at {cursor} instead of {end}")

    chain(f.left_pieces, Fraction(0), Fraction(1), "left region")
    for n in range(cap, 0, -1):
        block = f.level(n)
        lc = block.constants
        chain([block.gap] + block.bridge_pieces, level_positions(n + 1)[1], lc.x, f"level {n}")
        for kind, template in block.oscillator.templates.items():
            chain(template.pieces, Fraction(0), Fraction(1), f"level {n} {kind} lap")
    chain(f.right_pieces, f.y1, Fraction(4), "right region")
    report.details = {"level_cap": cap}
    return report


def torus_compatibility(f: PiecewiseMap, k: int) -> bool:
    """f^(j)(0+) == f^(j)(4-) for 1 <= j <= k and f(0) == f(4) mod 4."""
    if k > f.params.k_max:
        raise DomainError(f"order {k} exceeds k_max = {f.params.k_max}")
    if (f.eval(4) - f.eval(0)) % 4 != 0:
        return False
    return all(f.eval(0, j) == f.eval(4, j) for j in range(1, k + 1))


# Mixing

def contains_landmark(a: float, b: float) -> bool:
    """Whether (a, b) contains some x_n or y_n, or [a, b] contains 0."""
    if a <= 0.0:
        return True
    if b <= 1.0:
        return False
    d_lo, d_hi = a - 1.0, b - 1.0
    n = int(1.0 / d_hi) + 1
    if d_lo <= 0.0 or 1.0 / n > d_lo:
        return True
    n = max(1, int(1.0 / d_hi) - 1)
    while 1.0 + 1.0 / n + 1.0 / (2.0 * n * n) >= b:
        n += 1
    return 1.0 + 1.0 / n + 1.0 / (2.0 * n * n) > a


@dataclass
class MixingReport:
    interval: Tuple[float, float]
    steps: Optional[int]
    trace: List[Tuple[float, float]] = field(default_factory=list)
    growth: List[float] = field(default_factory=list)
    conditions: List[str] = field(default_factory=list)

    @property
    def covered(self) -> bool:
        return self.steps is not None

    @property
    def witnessed(self) -> bool:
        return any(c != 'none' for c in self.conditions)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "interval": list(self.interval),
            "steps": self.steps,
            "covered": self.covered,
            "witnessed": self.witnessed,
            "trace": [list(t) for t in self.trace],
            "growth": self.growth,
            "conditions": self.conditions,
        }


def mixing_probe(f: PiecewiseMap, a: float, b: float, max_steps: int = 500) -> MixingReport:
    """Iterate exact interval images of [a, b] until they cover [0, 4].

    Each step records the length ratio and which covering condition the
    current interval satisfies: 'growth' (ratio >= 4/3), 'landmark' (some
    x_n or y_n inside, or 0 in the interval) or 'none'.
    """
    if not 0 <= a < b <= 4:
        raise DomainError(f"probe interval [{a}, {b}] must be nondegenerate inside [0, 4]")
    lo, hi = float(a), float(b)
    report = MixingReport(interval=(lo, hi), steps=None, trace=[(lo, hi)])
    for step in range(1, max_steps + 1):
        new_lo, new_hi = f.image(lo, hi)
        if new_lo < -IMAGE_TOLERANCE or new_hi > 4 + IMAGE_TOLERANCE:
            raise ConstructionError(f"image [{new_lo}, {new_hi}] of [{lo}, {hi}] leaves [0, 4]")
        new_lo, new_hi = max(new_lo, 0.0), min(new_hi, 4.0)
        ratio = (new_hi - new_lo) / (hi - lo)
        report.growth.append(ratio)
        if ratio >= float(GROWTH_FACTOR):
            report.conditions.append('growth')
        elif contains_landmark(lo, hi):
            report.conditions.append('landmark')
        else:
            report.conditions.append('none')
        lo, hi = new_lo, new_hi
        report.trace.append((lo, hi))
        if lo == 0.0 and hi == 4.0:
            report.steps = step
            break
    return report


def random_mixing_trials(f: PiecewiseMap, trials: int = 100, seed: int = 7,
                         min_length: float = 1e-3, max_steps: int = 500) -> CheckReport:
    """Seeded probes on random intervals of length in [min_length, 100 min_length]."""
    report = CheckReport(name="mixing")
    rng = np.random.default_rng(seed)
    steps = []
    with tqdm(total=trials, desc="Mixing probes", unit="probe", colour="blue") as pbar:
        for _ in range(trials):
            length = min_length * 10 ** (2 * rng.random())
            start = rng.random() * (4.0 - length)
            probe = mixing_probe(f, start, start + length, max_steps)
            if not probe.covered:
                report.fail(f"[{start:.9g}, {start + length:.9g}] not covered within {max_steps} steps")
            elif not probe.witnessed:
                report.fail(f"[{start:.9g}, {start + length:.9g}] covered without a growth witness")
            steps.append(probe.steps)
            pbar.update(1)
    covered = [s for s in steps if s is not None]
    report.details = {
        "trials": trials,
        "seed": seed,
        "steps": steps,
        "max_steps": max(covered) if covered else None,
    }
    return report


# Periodic orbits and slopes

def verify_periodic_orbits(f: PiecewiseMap, n_max: int = 8, tol: float = 1e-9) -> CheckReport:
    """Periods of x_n and y_n, the value at w_n and the cap identity through the linear branch."""
    report = CheckReport(name="periodic_orbits")
    p = f.params
    rows = []
    for n in range(1, n_max + 1):
        lc = level_constants(p, n)
        x_err = abs(f.orbit(float(lc.x), n + 1)[-1] - float(lc.x))
        y_err = abs(f.orbit(float(lc.y), n + 1)[-1] - float(lc.y))
        if x_err > tol:
            report.fail(f"|f^(n+1)(x_{n}) - x_{n}| = {x_err:.3g}")
        if y_err > tol:
            report.fail(f"|f^(n+1)(y_{n}) - y_{n}| = {y_err:.3g}")
        if f.eval(lc.w) != p.scale(n + 1) * lc.x:
            report.fail(f"f(w_{n}) != lambda^(-(n+1)r) x_{n}")
        w_err = abs(f.orbit(float(lc.w), n + 2)[-1] - float(lc.x))
        if w_err > tol:
            report.fail(f"|f^(n+2)(w_{n}) - x_{n}| = {w_err:.3g}")

        # Quadratic cap at t_1^n pushed through n linear steps
        lap = lc.width / lc.M
        cap_error = 0.0
        for fraction in (Fraction(-1), Fraction(-1, 2), Fraction(1, 4), Fraction(1)):
            t = fraction * p.delta * lap
            value = f.orbit(lc.t(1) + t, n + 1)[-1]
            expected = lc.y - p.C * (lc.M * t) ** 2 / lc.width
            cap_error = max(cap_error, abs(float(value - expected)))
        if cap_error > tol:
            report.fail(f"cap identity off by {cap_error:.3g} at level {n}")
        rows.append({"n": n, "x_error": x_err, "y_error": y_err, "w_error": w_err, "cap_error": cap_error})
    report.details = {"levels": rows}
    return report


def verify_slope_bound(f: PiecewiseMap, samples: int = 10 ** 6, seed: int = 7) -> CheckReport:
    """|f'| <= lambda^r on a scrambled Halton sample, with equality only near the affine ends."""
    report = CheckReport(name="slope_bound")
    lam_r = float(f.params.lam_r)
    delta = float(f.params.delta)
    sampler = qmc.Halton(d=1, seed=seed)
    xs = 4.0 * sampler.random(samples)[:, 0]
    slopes = np.abs(f.sample(xs, 1))
    finite = np.isfinite(slopes)
    top = float(np.max(slopes[finite]))
    if top > lam_r * (1 + 1e-9):
        report.fail(f"sup |f'| = {top!r} exceeds lambda^r")
    near_top = finite & (slopes >= lam_r * (1 - 1e-9))
    allowed = (xs <= 2.5 * delta + 1e-4) | (xs >= 4 - 1.5 * delta - 1e-4)
    stray = xs[near_top & ~allowed]
    if stray.size:
        report.fail(f"|f'| reaches lambda^r outside the affine ends, e.g. at {stray[0]!r}")
    edge = np.abs(np.array([f.eval(0.0, 1), f.eval(4.0, 1)]))
    report.details = {
        "samples": samples,
        "seed": seed,
        "sup_ratio": top / lam_r,
        "endpoint_slopes": edge.tolist(),
        "skipped": int((~finite).sum()),
    }
    return report
