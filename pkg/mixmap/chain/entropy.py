"""Entropy estimators for f_r and its Markov graph.

All values are in nats; reports convert to bits on export when asked.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from tqdm import tqdm

from ..errors import ConvergenceError, DomainError, ParameterError
from ..construction.map_core import PiecewiseMap
from ..construction.params import MapParams, level_positions, oscillation_count
from ..construction.verification import CheckReport
from .markov_graph import (OSC, Vertex, TruncatedGraph, build_truncated_graph,
                           extension_graph, extra_vertices, subgraph_Hn)
from .symbolic import Itinerary, point_of_itinerary

logger = logging.getLogger('MixMap.Entropy')

METHODS = ('subgraph_exact', 'spectral_truncated', 'loop_count', 'separated_upper', 'separated_local_lower')
LOG2 = math.log(2)

POWER_ITERATIONS = 100000
POWER_TOLERANCE = 1e-12
SEPARATED_POINT_LIMIT = 10 ** 5
PAIRWISE_CHECK_LIMIT = 10 ** 4
STRICT_MARGIN = 1e-10


@dataclass
class EntropyReport:
    method: str
    value: float
    params: Dict[str, Any] = field(default_factory=dict)
    trace: List[Tuple[Any, float]] = field(default_factory=list)
    details: Dict[str, Any] = field(default_factory=dict)
    passed: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise DomainError(f"unknown entropy method {self.method!r}")

    def to_dict(self, bits: bool = False) -> Dict[str, Any]:
        scale = 1 / LOG2 if bits else 1.0
        return {
            "method": self.method,
            "params": self.params,
            "value_bits" if bits else "value_nats": self.value * scale,
            "trace": [[p, v * scale] for p, v in self.trace],
            "details": self.details,
            "passed": self.passed,
        }

    def trace_rows(self, bits: bool = False) -> List[List[Any]]:
        scale = 1 / LOG2 if bits else 1.0
        return [[p, v * scale] for p, v in self.trace]


def _check_level(n: int, name: str = 'n', minimum: int = 1) -> None:
    if not isinstance(n, int) or n < minimum:
        raise ParameterError(f"{name} must be an integer >= {minimum}, got {n!r}")


# Exact subgraph entropy

def subgraph_value(lam: Fraction, n: int) -> float:
    return math.log(oscillation_count(lam, n)) / (n + 1)


def entropy_subgraph_exact(params: MapParams, n: int) -> EntropyReport:
    """h(H_n) = log M_n / (n + 1); the trace runs over levels 1..n."""
    _check_level(n)
    trace = [(j, subgraph_value(params.lam, j)) for j in range(1, n + 1)]
    return EntropyReport(
        method='subgraph_exact',
        value=trace[-1][1],
        params={"lambda": str(params.lam), "r": params.r, "n": n},
        trace=trace,
        details={"M_n": oscillation_count(params.lam, n), "log_lambda": math.log(params.lam)},
    )


# Spectral estimates on truncations

def perron_root(matrix: sparse.csr_matrix, iterations: int = POWER_ITERATIONS,
                tol: float = POWER_TOLERANCE) -> Tuple[float, float, int]:
    """Spectral radius of an irreducible nonnegative matrix.

    Power iteration runs on B + I, which is primitive; the Collatz-Wielandt
    ratios bracket its Perron root. Returns (radius of B, bracket width, iterations).
    """
    size = matrix.shape[0]
    shifted = (matrix + sparse.identity(size, format='csr')).tocsr()
    x = np.ones(size)
    width = math.inf
    for iteration in range(1, iterations + 1):
        y = shifted @ x
        ratios = y / x
        lo, hi = float(ratios.min()), float(ratios.max())
        width = hi - lo
        if width <= tol * hi:
            return 0.5 * (lo + hi) - 1.0, width, iteration
        x = y / y.sum()
    raise ConvergenceError(f"power iteration did not converge in {iterations} steps (bracket {width:.3e})")


def entropy_spectral(graph: TruncatedGraph, iterations: int = POWER_ITERATIONS,
                     tol: float = POWER_TOLERANCE) -> EntropyReport:
    """log of the largest strongly-connected component radius of the lumped adjacency.

    details["core_value"] is the value on the component of the hump vertex
    (None when the graph has no hump).

    Raises:
        DomainError: the graph has no cycle.
        ConvergenceError: power iteration exceeded its cap.
    """
    quotient = graph.quotient()
    matrix = quotient.csr()
    count, labels = connected_components(matrix, directed=True, connection='strong')
    hump = Vertex.special('Hump')
    hump_label = labels[quotient.index[hump]] if hump in quotient.index else None

    components = []
    for label in range(count):
        members = np.flatnonzero(labels == label)
        sub = matrix[members][:, members].tocsr()
        if len(members) == 1 and sub.nnz == 0:
            continue
        radius, width, steps = perron_root(sub, iterations, tol)
        components.append({
            "classes": int(len(members)),
            "vertices": int(sum(quotient.sizes[i] for i in members)),
            "radius": radius,
            "bracket": width,
            "iterations": steps,
            "contains_hump": bool(label == hump_label),
        })
    if not components:
        raise DomainError(f"{graph} has no cycle")
    components.sort(key=lambda c: -c["radius"])
    top = components[0]
    core = next((c for c in components if c["contains_hump"]), None)
    value = math.log(top["radius"])
    graph.logger.info(f"Spectral entropy of {graph}: {value:.9f} over {len(components)} components")
    return EntropyReport(
        method='spectral_truncated',
        value=value,
        params={"lambda": str(graph.params.lam), "r": graph.params.r, "graph": graph.name,
                "kind": graph.kind, "N": graph.N},
        trace=[(graph.N, value)],
        details={
            "residual": top["bracket"],
            "core_value": math.log(core["radius"]) if core else None,
            "components": components,
            "vertex_count": graph.vertex_count(),
        },
    )


def spectral_trace(params: MapParams, N: int) -> EntropyReport:
    """entropy_spectral on truncations 1..N; the report value is the one at N."""
    _check_level(N, 'N')
    reports = [entropy_spectral(build_truncated_graph(params, level)) for level in range(1, N + 1)]
    final = reports[-1]
    final.trace = [(level, report.value) for level, report in enumerate(reports, start=1)]
    return final


# Loop counting

def entropy_loop_count(graph: TruncatedGraph, vertex: Vertex, length: int) -> EntropyReport:
    """(1/L) log of the number of closed paths of length L through vertex.

    Counts are exact integers propagated along the lumped adjacency; a
    merged oscillation class shares its closed paths equally among members.
    """
    _check_level(length, 'length')
    quotient = graph.quotient()
    start = quotient.class_of(vertex)
    rows: Dict[int, List[Tuple[int, int]]] = {}
    for (i, j), value in quotient.entries.items():
        rows.setdefault(i, []).append((j, int(value)))
    share = quotient.sizes[start] if vertex.family == OSC and vertex.index >= 2 else 1

    walks = {start: 1}
    trace = []
    count = 0
    for step in range(1, length + 1):
        following: Dict[int, int] = {}
        for i, weight in walks.items():
            for j, value in rows.get(i, ()):
                following[j] = following.get(j, 0) + weight * value
        walks = following
        count = walks.get(start, 0) // share
        if count:
            trace.append((step, math.log(count) / step))
    value = math.log(count) / length if count else float('-inf')
    return EntropyReport(
        method='loop_count',
        value=value,
        params={"graph": graph.name, "N": graph.N, "vertex": vertex.label, "length": length},
        trace=trace,
        details={"count": str(count)},
    )


# Separated sets

def separated_upper_bound(params: MapParams, n: int, eps: float) -> EntropyReport:
    """(1/n) log(lambda^n / eps + 1), the Lipschitz bound on (n, eps)-separated sets."""
    _check_level(n)
    if not eps > 0:
        raise ParameterError(f"epsilon must be positive, got {eps!r}")
    log_lam = math.log(params.lam)
    main = n * log_lam - math.log(eps)
    value = (main + math.log1p(math.exp(-main))) / n
    return EntropyReport(
        method='separated_upper',
        value=value,
        params={"lambda": str(params.lam), "n": n, "epsilon": eps},
        details={
            "log_lambda": log_lam,
            # The eps term dominates once log(1/eps)/n exceeds log lambda
            "eps_dominated": -math.log(eps) / n > log_lam,
        },
    )


def _lipschitz_bound(params: MapParams, n: int, eps: float) -> float:
    """lambda^n / eps + 1, infinite when it overflows."""
    try:
        return float(params.lam) ** n / eps + 1
    except OverflowError:
        return math.inf


@dataclass
class SeparatedCount:
    n: int
    eps: float
    grid: int
    count: int
    bound: float

    @property
    def value(self) -> float:
        return math.log(self.count) / self.n

    @property
    def within_bound(self) -> bool:
        return self.count <= self.bound

    def to_dict(self) -> Dict[str, Any]:
        return {"n": self.n, "epsilon": self.eps, "grid": self.grid, "count": self.count,
                "bound": self.bound, "value": self.value, "within_bound": self.within_bound}


def orbit_matrix(f: PiecewiseMap, points: np.ndarray, steps: int) -> np.ndarray:
    """Rows are float orbits x, f(x), ..., f^(steps-1)(x)."""
    orbits = np.empty((len(points), steps))
    current = np.asarray(points, dtype=float)
    for j in range(steps):
        orbits[:, j] = current
        if j + 1 < steps:
            current = np.clip(f.sample(current), 0.0, 4.0)
    return orbits


def greedy_separated_count(f: PiecewiseMap, n: int, eps: float, grid: int = 10 ** 5) -> SeparatedCount:
    """Size of a greedy (n, eps)-separated subset of a uniform grid on [0, 4]."""
    _check_level(n)
    if not eps > 0:
        raise ParameterError(f"epsilon must be positive, got {eps!r}")
    points = np.linspace(0.0, 4.0, grid)
    orbits = orbit_matrix(f, points, n)
    chosen = np.empty_like(orbits)
    size = 0
    for row in tqdm(orbits, total=grid, desc=f"Separated n={n}", unit="pt", colour="cyan", leave=False):
        # Only chosen points within eps at time 0 can be eps-close in the Bowen metric
        lo = np.searchsorted(chosen[:size, 0], row[0] - eps, side='left')
        if lo < size and np.any(np.max(np.abs(chosen[lo:size] - row), axis=1) <= eps):
            continue
        chosen[size] = row
        size += 1
    bound = _lipschitz_bound(f.params, n, eps)
    logger.debug(f"Greedy separated count n={n} eps={eps}: {size} (bound {bound:.3e})")
    return SeparatedCount(n=n, eps=eps, grid=grid, count=size, bound=bound)


@dataclass
class SeparatedSet:
    n: int
    p: int
    words: List[Tuple[int, ...]]
    points: np.ndarray
    delta_0: Fraction
    radius: Fraction

    def __len__(self):
        return len(self.points)


def build_separated_set(f: PiecewiseMap, n: int, p: int) -> SeparatedSet:
    """Points whose orbit visits lap i_j of level n at time (j - 1)(n + 1), i_j odd.

    Raises:
        ParameterError: more than SEPARATED_POINT_LIMIT points would be realized.
    """
    _check_level(n)
    _check_level(p, 'p')
    M = oscillation_count(f.params.lam, n)
    odd = list(range(1, M + 1, 2))
    if len(odd) ** p > SEPARATED_POINT_LIMIT:
        raise ParameterError(f"E_(n,p) would have {len(odd) ** p} points, limit {SEPARATED_POINT_LIMIT}")
    scaled = tuple(Vertex.scaled(n, k) for k in range(n, 0, -1))
    words = list(itertools.product(odd, repeat=p))
    points = np.empty(len(words))
    for index, word in enumerate(tqdm(words, desc=f"E({n},{p})", unit="pt", colour="green", leave=False)):
        head: Tuple[Vertex, ...] = ()
        for i in word:
            head += (Vertex.osc(n, i),) + scaled
        points[index] = point_of_itinerary(f, Itinerary(head))
    x, y = level_positions(n)
    return SeparatedSet(n=n, p=p, words=words, points=points,
                        delta_0=(y - x) / M, radius=y - x)


def local_entropy_lower(f: PiecewiseMap, n: int, p: int, delta: Optional[float] = None) -> EntropyReport:
    """log card E_(n,p) / ((n + 1) p) with direct Bowen-ball and separation checks.

    delta defaults to half the lap width delta_0. Failed checks set
    passed = False and are listed in details.
    """
    _check_level(n)
    _check_level(p, 'p')
    M = oscillation_count(f.params.lam, n)
    x_n, y_n = level_positions(n)
    delta_0 = (y_n - x_n) / M
    if delta is None:
        delta = float(delta_0 / 2)
    if not 0 < delta < float(delta_0):
        raise ParameterError(f"delta must lie in (0, {float(delta_0)}), got {delta!r}")

    separated = build_separated_set(f, n, p)
    steps = (n + 1) * p
    orbits = orbit_matrix(f, separated.points, steps)
    reference = np.array([float(v) for v in f.orbit(x_n, steps - 1)])
    deviation = float(np.max(np.abs(orbits - reference)))
    radius = float(separated.radius)
    bowen_ok = deviation <= radius + STRICT_MARGIN

    min_separation = None
    separation_ok = None
    count = len(separated)
    if count <= PAIRWISE_CHECK_LIMIT:
        min_separation = math.inf
        for a in range(count - 1):
            distances = np.max(np.abs(orbits[a + 1:] - orbits[a]), axis=1)
            min_separation = min(min_separation, float(distances.min()))
        separation_ok = bool(min_separation > delta + STRICT_MARGIN) if count > 1 else True

    card = (M + 1) // 2
    value = math.log(card) / (n + 1)
    report = EntropyReport(
        method='separated_local_lower',
        value=value,
        params={"lambda": str(f.params.lam), "r": f.params.r, "n": n, "p": p, "delta": delta},
        trace=[(j, math.log((oscillation_count(f.params.lam, j) + 1) // 2) / (j + 1))
               for j in range(1, n + 1)],
        details={
            "card": count,
            "delta_0": float(delta_0),
            "bowen_radius": radius,
            "max_orbit_deviation": deviation,
            "bowen_ok": bool(bowen_ok),
            "min_separation": min_separation,
            "separation_ok": separation_ok,
        },
    )
    if count != card ** p:
        report.passed = False
    if not bowen_ok or separation_ok is False:
        report.passed = False
        logger.warning(f"E({n},{p}) checks failed: bowen_ok={bowen_ok}, separation_ok={separation_ok}")
    return report


# Derivative growth

@dataclass
class DerivativeRadius:
    exact: Fraction
    sampled: float
    per_k: List[Tuple[int, float]]

    def to_dict(self) -> Dict[str, Any]:
        return {"exact": str(self.exact), "sampled": self.sampled,
                "per_k": [[k, v] for k, v in self.per_k]}


def spectral_radius_of_derivative(f: PiecewiseMap, k_max_iter: int = 5, samples: int = 2001) -> DerivativeRadius:
    """lambda^r, witnessed by f'(0) and the global slope bound, plus inf_k sup|(f^k)'|^(1/k) on a grid."""
    _check_level(k_max_iter, 'k_max_iter')
    points = np.linspace(0.0, 4.0, samples)
    current = points.copy()
    product = np.ones_like(points)
    per_k = []
    for k in range(1, k_max_iter + 1):
        product = product * np.abs(f.sample(current, 1))
        current = np.clip(f.sample(current), 0.0, 4.0)
        per_k.append((k, float(np.nanmax(product)) ** (1.0 / k)))
    return DerivativeRadius(exact=f.params.lam_r, sampled=min(v for _, v in per_k), per_k=per_k)


# The measures mu_n

@dataclass
class LevelMeasure:
    """Maximal-entropy Markov measure on H_n and its image on [0, 4].

    Oscillation vertices share one weight; their intervals tile [x_n, y_n].
    """
    n: int
    M: int
    weights: Dict[str, Fraction]
    intervals: List[Tuple[Fraction, Fraction, Fraction]]

    @property
    def entropy(self) -> float:
        """Each visit to ScaledOsc(n,1) chooses one of M_n laps uniformly."""
        return float(self.weights[Vertex.scaled(self.n, 1).label]) * math.log(self.M)

    def weight(self, v: Vertex) -> Fraction:
        if v.n != self.n:
            return Fraction(0)
        if v.family == OSC:
            return self.weights[f"Osc({self.n},*)"] if 1 <= v.index <= self.M else Fraction(0)
        return self.weights.get(v.label, Fraction(0))

    def is_stationary(self) -> bool:
        """Inflow equals weight at every vertex, in exact arithmetic."""
        n, M = self.n, self.M
        osc = self.weight(Vertex.osc(n, 1))
        scaled = [self.weight(Vertex.scaled(n, k)) for k in range(1, n + 1)]
        total = M * osc + sum(scaled)
        if total != 1:
            return False
        if scaled[0] / M != osc:
            return False
        if M * osc != scaled[n - 1]:
            return False
        return all(scaled[k] == scaled[k - 1] for k in range(1, n))

    def mass_below(self, eps) -> Fraction:
        """mu_n([0, eps]) with mass spread uniformly over each interval."""
        eps = Fraction(eps)
        mass = Fraction(0)
        for a, b, m in self.intervals:
            overlap = min(b, eps) - a
            if overlap > 0:
                mass += m * min(overlap / (b - a), 1)
        return mass

    def histogram(self, bins: int) -> Tuple[List[Fraction], List[Fraction]]:
        """Bin edges on [0, 4] and the exact mass of each bin."""
        if not isinstance(bins, int) or bins < 2:
            raise ParameterError(f"bins must be an integer >= 2, got {bins!r}")
        width = Fraction(4, bins)
        edges = [width * j for j in range(bins + 1)]
        masses = [Fraction(0)] * bins
        for a, b, m in self.intervals:
            first = min(int(a / width), bins - 1)
            last = min(int(b / width), bins - 1)
            for j in range(first, last + 1):
                overlap = min(b, edges[j + 1]) - max(a, edges[j])
                if overlap > 0:
                    masses[j] += m * overlap / (b - a)
        return edges, masses

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "M": self.M,
            "weights": {label: str(w) for label, w in self.weights.items()},
            "intervals": [[str(a), str(b), str(m)] for a, b, m in self.intervals],
            "entropy": self.entropy,
        }


def measure_mu_n(params: MapParams, n: int, bins: int = 100) -> LevelMeasure:
    """Stationary measure of the uniform-branching chain on H_n."""
    _check_level(n)
    if not isinstance(bins, int) or bins < 2:
        raise ParameterError(f"bins must be an integer >= 2, got {bins!r}")
    M = oscillation_count(params.lam, n)
    share = Fraction(1, n + 1)
    weights = {f"Osc({n},*)": share / M}
    for k in range(1, n + 1):
        weights[Vertex.scaled(n, k).label] = share
    x, y = level_positions(n)
    intervals = [(params.scale(k) * x, params.scale(k) * y, share) for k in range(n, -1, -1)]
    measure = LevelMeasure(n=n, M=M, weights=weights, intervals=intervals)
    logger.debug(f"mu_{n}: entropy {measure.entropy:.9f}, mass below 0.2 = {measure.mass_below(Fraction(1, 5))}")
    return measure


# Transience

@dataclass
class TransienceReport:
    levels: List[int]
    original: List[float]
    extended: List[float]
    extra_vertices: List[str]
    vertex_differences: List[int]
    bound: float

    @property
    def gaps(self) -> List[float]:
        return [h - g for g, h in zip(self.original, self.extended)]

    @property
    def passed(self) -> bool:
        gaps = self.gaps
        decreasing = all(b < a for a, b in zip(gaps, gaps[1:]))
        bounded = all(v <= self.bound + 1e-9 for v in self.original + self.extended)
        strict = all(d == len(self.extra_vertices) for d in self.vertex_differences)
        return decreasing and bounded and strict and all(g >= -1e-12 for g in gaps)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "levels": self.levels,
            "original": self.original,
            "extended": self.extended,
            "gaps": self.gaps,
            "extra_vertices": self.extra_vertices,
            "vertex_differences": self.vertex_differences,
            "bound": self.bound,
            "passed": self.passed,
        }


def transience_evidence(params: MapParams, N: int = 8, step: int = 2) -> TransienceReport:
    """Core spectral entropies of G_1 and of the extension graph at N, N - step, ... >= 3."""
    _check_level(N, 'N', minimum=3)
    levels = sorted(range(N, 2, -step))
    extension = extension_graph(params)
    original, extended, differences = [], [], []
    for level in levels:
        g = build_truncated_graph(params, level)
        h = extension(level)
        original.append(entropy_spectral(g).details["core_value"])
        extended.append(entropy_spectral(h).details["core_value"])
        differences.append(h.vertex_count() - g.vertex_count())
    report = TransienceReport(
        levels=levels,
        original=original,
        extended=extended,
        extra_vertices=[v.label for v in extra_vertices(params)],
        vertex_differences=differences,
        bound=math.log(params.lam),
    )
    logger.info(f"Transience gaps at N={levels}: {[f'{g:.3e}' for g in report.gaps]}")
    return report


# Ordering chain

def entropy_chain(f: PiecewiseMap, n_values: Sequence[int], eps: float = 1.0) -> CheckReport:
    """subgraph_exact(n) <= spectral(N = n) <= log lambda <= separated_upper(n, eps)."""
    report = CheckReport(name=f"entropy_chain[n={min(n_values)}..{max(n_values)}]")
    log_lam = math.log(f.params.lam)
    rows = []
    for n in n_values:
        exact = entropy_subgraph_exact(f.params, n).value
        spectral = entropy_spectral(build_truncated_graph(f.params, n)).value
        upper = separated_upper_bound(f.params, n, eps).value
        if not exact <= spectral + 1e-9:
            report.fail(f"n={n}: subgraph {exact:.9f} above spectral {spectral:.9f}")
        if not spectral <= log_lam + 1e-9:
            report.fail(f"n={n}: spectral {spectral:.9f} above log lambda")
        if not log_lam <= upper:
            report.fail(f"n={n}: separated bound {upper:.9f} below log lambda")
        rows.append({"n": n, "subgraph_exact": exact, "spectral_truncated": spectral, "separated_upper": upper})
    spectra = [row["spectral_truncated"] for row in rows]
    if any(b < a - 1e-12 for a, b in zip(spectra, spectra[1:])):
        report.fail("spectral estimates are not nondecreasing in N")
    report.details = {"rows": rows, "log_lambda": log_lam}
    return report


def mu_n_entropy_check(params: MapParams, n: int) -> CheckReport:
    """Entropy of mu_n against the growth rate of H_n, and exact stationarity."""
    report = CheckReport(name=f"mu_n[n={n}]")
    measure = measure_mu_n(params, n)
    spectral = entropy_spectral(subgraph_Hn(params, n)).value
    if not measure.is_stationary():
        report.fail("mu_n is not stationary")
    if abs(measure.entropy - spectral) > 1e-9:
        report.fail(f"entropy {measure.entropy:.12f} differs from spectral {spectral:.12f}")
    report.details = {"entropy": measure.entropy, "spectral": spectral,
                      "mass_below_0.2": str(measure.mass_below(Fraction(1, 5)))}
    return report
