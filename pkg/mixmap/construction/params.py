import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Any, Optional, Tuple, Union

from ..errors import ParameterError, DomainError
from .blends import as_fraction

logger = logging.getLogger('MixMap.Params')

MIN_LAMBDA = 14


@dataclass(frozen=True)
class MapParams:
    """Slope base lambda, smoothness order r and highest tracked derivative order."""
    lam: Fraction
    r: int
    k_max: int

    @classmethod
    def create(cls, lam: Union[int, float, str, Fraction] = 14, r: int = 1,
               k_max: Optional[int] = None) -> 'MapParams':
        try:
            lam_exact = Fraction(lam) if isinstance(lam, str) else as_fraction(lam)
        except (ValueError, ZeroDivisionError) as e:
            raise ParameterError(f"lambda must be a real number, got {lam!r}") from e
        if lam_exact < MIN_LAMBDA:
            raise ParameterError(f"lambda must be at least {MIN_LAMBDA}, got {lam}")
        if not isinstance(r, int) or r < 1:
            raise ParameterError(f"r must be an integer >= 1, got {r!r}")
        if k_max is None:
            k_max = 2 * r
        if not isinstance(k_max, int) or k_max < r:
            raise ParameterError(f"k_max must be an integer >= r = {r}, got {k_max!r}")
        return cls(lam_exact, r, k_max)

    @property
    def lam_r(self) -> Fraction:
        return self.lam ** self.r

    @property
    def delta(self) -> Fraction:
        return 1 / self.lam_r

    @property
    def C(self) -> Fraction:
        """Cap curvature constant, 1/(4 delta^2)."""
        return 1 / (4 * self.delta ** 2)

    @property
    def blend_order(self) -> int:
        """Smoothstep order making every junction C^k_max."""
        return max(self.k_max - 1, 1)

    def scale(self, k: int) -> Fraction:
        """lambda^(-k r)."""
        return self.lam ** (-k * self.r)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambda": str(self.lam),
            "r": self.r,
            "k_max": self.k_max,
        }


def oscillation_count(lam: Fraction, n: int) -> int:
    """M_n = 2 * floor(lambda^n / (2 n^2)) - 1, exact for rational lambda."""
    return 2 * math.floor(Fraction(lam) ** n / (2 * n * n)) - 1


@dataclass(frozen=True)
class LevelConstants:
    """Exact constants of level n."""
    n: int
    x: Fraction
    y: Fraction
    M: int
    m: Fraction
    k: Fraction
    w: Fraction
    h: Fraction
    l: Fraction
    scale: Fraction
    extra_oscillations: int = 0

    @property
    def width(self) -> Fraction:
        return self.y - self.x

    @property
    def lap_width(self) -> Fraction:
        return self.width / self.M

    def t(self, i: int) -> Fraction:
        """Critical abscissa t_i^n for 0 <= i <= M_n."""
        if not 0 <= i <= self.M:
            raise DomainError(f"t_i^n index {i} outside [0, {self.M}] at level {self.n}")
        return self.x + i * self.width / self.M

    def table_row(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "x": str(self.x),
            "y": str(self.y),
            "M": self.M,
            "k": float(self.k),
            "w": float(self.w),
        }


def level_positions(n: int) -> Tuple[Fraction, Fraction]:
    x = 1 + Fraction(1, n)
    return x, x + Fraction(1, 2 * n * n)


@lru_cache(maxsize=4096)
def level_constants(params: MapParams, n: int, extra_oscillations: int = 0) -> LevelConstants:
    """Compute LevelConstants for level n.

    Args:
        params: Map parameters.
        n: Level index, n >= 1.
        extra_oscillations: Oscillations added on top of M_n (the extension map
            adds 2 at level 2).

    Returns:
        The exact constants.
    """
    if not isinstance(n, int) or n < 1:
        raise DomainError(f"level index must be an integer >= 1, got {n!r}")
    x, y = level_positions(n)
    M = oscillation_count(params.lam, n) + extra_oscillations
    m = 1 - Fraction(1, (n + 1) ** 2)
    k = 2 * params.lam_r / M
    # M_{n+1} k_{n+1} = 2 lambda^r
    y_next = level_positions(n + 1)[1]
    w = y_next + Fraction(n + 2, 2 * n * (n + 1) ** 2) / (2 * params.lam_r)
    scale = params.scale(n)
    h = scale * x - params.scale(n + 1) * x
    l = x - w
    return LevelConstants(n=n, x=x, y=y, M=M, m=m, k=k, w=w, h=h, l=l, scale=scale,
                          extra_oscillations=extra_oscillations)


def lambda_n_inequalities(lam: Union[int, Fraction], n: int) -> Dict[str, bool]:
    """Check the three growth inequalities for M_n with exact arithmetic.

    (i) lambda^n / n^2 >= lambda, (ii) lambda^n/(2n^2) <= M_n <= lambda^n/n^2,
    (iii) M_n >= lambda - 3. Stated for lambda >= 8.
    """
    lam = as_fraction(lam)
    power = lam ** n
    M = oscillation_count(lam, n)
    return {
        "i": power / (n * n) >= lam,
        "ii": power / (2 * n * n) <= M <= power / (n * n),
        "iii": M >= lam - 3,
        "odd": M % 2 == 1,
    }
