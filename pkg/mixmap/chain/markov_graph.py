"""Countable Markov graph of f_r and its finite truncations.

Vertices come in five structural families. Edges are generated from closed
index rules; the map is only used to cross-check them.
"""
import logging
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse

from ..errors import DomainError, ParameterError
from ..export import dumps
from ..construction.params import MapParams, level_positions, oscillation_count
from ..construction.verification import CheckReport

logger = logging.getLogger('MixMap.Graph')

OSC, SCALED_OSC, GAP, TAIL, SPECIAL = range(5)
FAMILY_NAMES = ('Osc', 'ScaledOsc', 'Gap', 'Tail', 'Special')
SPECIAL_NAMES = ('LeftHump', 'Hump', 'Right')
LEFT_HUMP, HUMP, RIGHT = range(3)

EXPORT_VERTEX_LIMIT = 200000
MARKOV_LAP_SAMPLE = 3

_LABEL = re.compile(r'^(Osc|ScaledOsc|Gap|Tail)\((\d+)(?:,(\d+))?\)$|^S:(LeftHump|Hump|Right)$')


@dataclass(frozen=True, order=True)
class Vertex:
    """A member of the Markov partition, ordered by (family, n, index)."""
    family: int
    n: int = 0
    index: int = 0

    @classmethod
    def osc(cls, n: int, i: int) -> 'Vertex':
        return cls(OSC, n, i)

    @classmethod
    def scaled(cls, n: int, k: int) -> 'Vertex':
        return cls(SCALED_OSC, n, k)

    @classmethod
    def gap(cls, n: int, k: int) -> 'Vertex':
        return cls(GAP, n, k)

    @classmethod
    def tail(cls, n: int) -> 'Vertex':
        return cls(TAIL, n, 0)

    @classmethod
    def special(cls, name: str) -> 'Vertex':
        return cls(SPECIAL, 0, SPECIAL_NAMES.index(name))

    @classmethod
    def from_label(cls, label: str) -> 'Vertex':
        match = _LABEL.match(label.replace(' ', ''))
        if not match:
            raise DomainError(f"not a vertex label: {label!r}")
        family, n, index, special = match.groups()
        if special:
            return cls.special(special)
        if family == 'Tail':
            return cls.tail(int(n))
        if index is None:
            raise DomainError(f"vertex label {label!r} needs two indices")
        return cls(FAMILY_NAMES.index(family), int(n), int(index))

    @property
    def level(self) -> int:
        """Truncation level: n for the leveled families, 0 for the specials."""
        return self.n

    @property
    def label(self) -> str:
        if self.family == SPECIAL:
            return f"S:{SPECIAL_NAMES[self.index]}"
        if self.family == TAIL:
            return f"Tail({self.n})"
        return f"{FAMILY_NAMES[self.family]}({self.n},{self.index})"

    def __str__(self):
        return self.label


@dataclass(frozen=True)
class TruncationMarker:
    """Yielded last by successors() when out-neighbours beyond the level cap were dropped."""
    source: Vertex
    first_dropped_level: int


Successor = Union[Vertex, TruncationMarker]
OscCount = Callable[[int], int]


def standard_osc_count(params: MapParams) -> OscCount:
    return lru_cache(maxsize=None)(lambda n: oscillation_count(params.lam, n))


def extended_osc_count(params: MapParams) -> OscCount:
    """Oscillation counts of the modified map: two extra laps at level 2."""
    return lru_cache(maxsize=None)(lambda n: oscillation_count(params.lam, n) + (2 if n == 2 else 0))


def check_vertex(v: Vertex, osc_count: OscCount) -> None:
    ok = True
    if v.family == OSC:
        ok = v.n >= 1 and 1 <= v.index <= osc_count(v.n)
    elif v.family == SCALED_OSC:
        ok = v.n >= 1 and 1 <= v.index <= v.n
    elif v.family == GAP:
        ok = v.n >= 1 and 0 <= v.index <= v.n
    elif v.family == TAIL:
        ok = v.n >= 2
    elif v.family == SPECIAL:
        ok = 0 <= v.index < len(SPECIAL_NAMES)
    else:
        ok = False
    if not ok:
        raise DomainError(f"invalid vertex indices {v!r}")


def vertex_interval(v: Vertex, params: MapParams,
                    osc_count: Optional[OscCount] = None) -> Tuple[Fraction, Fraction]:
    """Exact closed interval of a vertex."""
    osc_count = osc_count or standard_osc_count(params)
    check_vertex(v, osc_count)
    if v.family == OSC:
        x, y = level_positions(v.n)
        M = osc_count(v.n)
        return x + (v.index - 1) * (y - x) / M, x + v.index * (y - x) / M
    if v.family == SCALED_OSC:
        x, y = level_positions(v.n)
        s = params.scale(v.index)
        return s * x, s * y
    if v.family == GAP:
        x = level_positions(v.n)[0]
        y_next = level_positions(v.n + 1)[1]
        s = params.scale(v.index)
        return s * y_next, s * x
    if v.family == TAIL:
        y = level_positions(v.n)[1]
        return params.scale(v.n) * y, params.scale(v.n - 1)
    if v.index == LEFT_HUMP:
        return params.scale(1) * level_positions(1)[1], Fraction(1, 2)
    if v.index == HUMP:
        return Fraction(1, 2), Fraction(1)
    return level_positions(1)[1], Fraction(4)


def _leveled_vertices(N: int, osc_count: OscCount) -> Iterator[Vertex]:
    for n in range(1, N + 1):
        for i in range(1, osc_count(n) + 1):
            yield Vertex.osc(n, i)
    for n in range(1, N + 1):
        for k in range(1, n + 1):
            yield Vertex.scaled(n, k)
    for n in range(1, N + 1):
        for k in range(0, n + 1):
            yield Vertex.gap(n, k)
    for n in range(2, N + 1):
        yield Vertex.tail(n)


def all_vertices(N: int, osc_count: OscCount) -> Iterator[Vertex]:
    """Every vertex of level <= N in deterministic order."""
    yield from _leveled_vertices(N, osc_count)
    for name in SPECIAL_NAMES:
        yield Vertex.special(name)


def _level_laps(n: int, osc_count: OscCount, lumped: bool) -> Iterator[Vertex]:
    M = osc_count(n)
    if lumped:
        yield Vertex.osc(n, 1)
        if M >= 2:
            yield Vertex.osc(n, 2)
        return
    for i in range(1, M + 1):
        yield Vertex.osc(n, i)


def successors(v: Vertex, params: MapParams, level_cap: int,
               osc_count: Optional[OscCount] = None, lumped: bool = False) -> Iterator[Successor]:
    """Out-neighbours of v with level <= level_cap, in vertex order.

    A TruncationMarker is yielded last when the out-neighbourhood continues
    past the cap (Gap(n, 0), the hump and the right special). With lumped=True
    each complete level of oscillation vertices is represented by Osc(n, 1)
    and Osc(n, 2) only.
    """
    osc_count = osc_count or standard_osc_count(params)
    check_vertex(v, osc_count)
    N = level_cap
    family, n, index = v.family, v.n, v.index
    truncated = False

    if family == OSC:
        yield Vertex.scaled(n, n)
        if index >= 2:
            yield Vertex.gap(n, n)
    elif family == SCALED_OSC:
        if index >= 2:
            yield Vertex.scaled(n, index - 1)
        else:
            yield from _level_laps(n, osc_count, lumped)
    elif family == GAP:
        if index >= 1:
            yield Vertex.gap(n, index - 1)
        else:
            # f([y_(n+1), x_n]) = Tail(n+1) + lambda^(-nr) [1, x_n]
            for m in range(n + 1, N + 1):
                yield Vertex.scaled(m, n)
            for k in range(n, N + 1):
                yield Vertex.gap(k, n)
            if n + 1 <= N:
                yield Vertex.tail(n + 1)
            truncated = True
    elif family == TAIL:
        if n >= 3:
            yield Vertex.scaled(n - 1, n - 1)
            yield Vertex.gap(n - 1, n - 1)
            yield Vertex.tail(n - 1)
        else:
            yield Vertex.scaled(1, 1)
            yield Vertex.gap(1, 1)
            yield Vertex.special('LeftHump')
            yield Vertex.special('Hump')
    elif index == LEFT_HUMP:
        yield Vertex.special('Right')
    elif index == HUMP:
        if lumped:
            yield from all_vertices(N, lambda m: min(osc_count(m), 2))
        else:
            yield from all_vertices(N, osc_count)
        truncated = True
    else:
        for n_ in range(1, N + 1):
            yield from _level_laps(n_, osc_count, lumped)
        for n_ in range(1, N + 1):
            yield Vertex.gap(n_, 0)
        for name in SPECIAL_NAMES:
            yield Vertex.special(name)
        truncated = True

    if truncated:
        yield TruncationMarker(v, N + 1)


def is_edge(v: Vertex, w: Vertex, osc_count: OscCount) -> bool:
    """Whether v -> w in the full (untruncated) graph, without enumerating successors."""
    check_vertex(v, osc_count)
    check_vertex(w, osc_count)
    n, index = v.n, v.index
    if v.family == OSC:
        return w == Vertex.scaled(n, n) or (index >= 2 and w == Vertex.gap(n, n))
    if v.family == SCALED_OSC:
        if index >= 2:
            return w == Vertex.scaled(n, index - 1)
        return w.family == OSC and w.n == n
    if v.family == GAP:
        if index >= 1:
            return w == Vertex.gap(n, index - 1)
        return ((w.family == SCALED_OSC and w.index == n and w.n >= n + 1)
                or (w.family == GAP and w.index == n and w.n >= n)
                or w == Vertex.tail(n + 1))
    if v.family == TAIL:
        if n >= 3:
            return w in (Vertex.scaled(n - 1, n - 1), Vertex.gap(n - 1, n - 1), Vertex.tail(n - 1))
        return w in (Vertex.scaled(1, 1), Vertex.gap(1, 1),
                     Vertex.special('LeftHump'), Vertex.special('Hump'))
    if index == LEFT_HUMP:
        return w == Vertex.special('Right')
    if index == HUMP:
        return True
    return w.family in (OSC, SPECIAL) or (w.family == GAP and w.index == 0)


class QuotientGraph:
    """Equitable partition of a truncation.

    Osc(n, i) for i >= 2 all have the same out-neighbours and are entered
    together, so they are merged into one class of size M_n - 1. The
    quotient matrix has the same spectral radius as the full adjacency.
    """

    def __init__(self, classes: List[Vertex], sizes: List[int], matrix: Dict[Tuple[int, int], int]):
        self.classes = classes
        self.sizes = sizes
        self.entries = matrix
        self.index = {c: i for i, c in enumerate(classes)}

    def __len__(self):
        return len(self.classes)

    def csr(self) -> sparse.csr_matrix:
        if not self.entries:
            return sparse.csr_matrix((len(self.classes), len(self.classes)))
        rows, cols = zip(*self.entries.keys())
        data = [float(v) for v in self.entries.values()]
        return sparse.csr_matrix((data, (rows, cols)), shape=(len(self.classes), len(self.classes)))

    def integer_matrix(self) -> np.ndarray:
        """Exact counts as a numpy object array of Python ints."""
        size = len(self.classes)
        out = np.zeros((size, size), dtype=object)
        out[:, :] = 0
        for (i, j), value in self.entries.items():
            out[i, j] = int(value)
        return out

    def class_of(self, v: Vertex) -> int:
        if v.family == OSC and v.index >= 2:
            v = Vertex.osc(v.n, 2)
        if v not in self.index:
            raise DomainError(f"{v} is not in this graph")
        return self.index[v]


class TruncatedGraph:
    """Finite subgraph of the Markov graph on vertices of level <= N.

    Vertex and edge enumeration is lazy; the counts and the lumped quotient
    are computed without listing the oscillation vertices.
    """

    kind = 'truncation'

    def __init__(self, params: MapParams, N: int, osc_count: Optional[OscCount] = None,
                 name: str = 'G'):
        if not isinstance(N, int) or N < 0:
            raise ParameterError(f"truncation level must be an integer >= 0, got {N!r}")
        self.params = params
        self.N = N
        self.osc_count = osc_count or standard_osc_count(params)
        self.name = name
        self.logger = logging.getLogger('MixMap.Graph.TruncatedGraph')
        self._quotient: Optional[QuotientGraph] = None

    def __repr__(self):
        return f"{type(self).__name__}({self.name}, N={self.N})"

    def contains(self, v: Vertex) -> bool:
        try:
            check_vertex(v, self.osc_count)
        except DomainError:
            return False
        return v.family == SPECIAL or v.level <= self.N

    def vertices(self) -> Iterator[Vertex]:
        return all_vertices(self.N, self.osc_count)

    def vertex_count(self) -> int:
        N = self.N
        leveled = sum(self.osc_count(n) + n + (n + 1) for n in range(1, N + 1))
        return leveled + max(0, N - 1) + len(SPECIAL_NAMES)

    def successors(self, v: Vertex) -> List[Vertex]:
        return [w for w in successors(v, self.params, self.N, self.osc_count)
                if isinstance(w, Vertex)]

    def is_truncated(self, v: Vertex) -> bool:
        return any(isinstance(w, TruncationMarker)
                   for w in successors(v, self.params, self.N, self.osc_count, lumped=True))

    def truncated_out(self) -> List[Vertex]:
        out = [Vertex.gap(n, 0) for n in range(1, self.N + 1)]
        return out + [Vertex.special('Hump'), Vertex.special('Right')]

    def edges(self) -> Iterator[Tuple[Vertex, Vertex]]:
        for v in self.vertices():
            for w in self.successors(v):
                yield v, w

    def edge_count(self) -> int:
        return sum(self.quotient().sizes[i] * count for (i, _), count in self.quotient().entries.items())

    def interval(self, v: Vertex) -> Tuple[Fraction, Fraction]:
        return vertex_interval(v, self.params, self.osc_count)

    def _class_vertices(self) -> Tuple[List[Vertex], List[int]]:
        classes, sizes = [], []
        for n in range(1, self.N + 1):
            M = self.osc_count(n)
            classes.append(Vertex.osc(n, 1))
            sizes.append(1)
            if M >= 2:
                classes.append(Vertex.osc(n, 2))
                sizes.append(M - 1)
        for v in all_vertices(self.N, lambda n: 0):
            classes.append(v)
            sizes.append(1)
        return classes, sizes

    def quotient(self) -> QuotientGraph:
        """Lumped adjacency: entry (c, d) counts edges from one member of c into class d."""
        if self._quotient is None:
            classes, sizes = self._class_vertices()
            index = {c: i for i, c in enumerate(classes)}
            entries: Dict[Tuple[int, int], int] = {}
            for c in classes:
                row = index[c]
                for w in self._lumped_successors(c):
                    col = index[w]
                    # Merged oscillation targets count once per member
                    weight = sizes[col] if w.family == OSC and w.index == 2 else 1
                    entries[(row, col)] = entries.get((row, col), 0) + weight
            self._quotient = QuotientGraph(classes, sizes, entries)
        return self._quotient

    def _lumped_successors(self, v: Vertex) -> Iterator[Vertex]:
        for w in successors(v, self.params, self.N, self.osc_count, lumped=True):
            if isinstance(w, Vertex):
                yield w

    def adjacency(self) -> sparse.csr_matrix:
        """Full CSR adjacency in vertex order; only for small truncations."""
        count = self.vertex_count()
        if count > EXPORT_VERTEX_LIMIT:
            raise ParameterError(f"{count} vertices is too many for a full adjacency matrix")
        order = {v: i for i, v in enumerate(self.vertices())}
        rows, cols = [], []
        for v, w in self.edges():
            rows.append(order[v])
            cols.append(order[w])
        return sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(count, count))


class LevelSubgraph(TruncatedGraph):
    """H_n: Osc(n, .) and ScaledOsc(n, .) with the three full-shift edge families."""

    kind = 'subgraph'

    def __init__(self, params: MapParams, n: int):
        if not isinstance(n, int) or n < 1:
            raise ParameterError(f"subgraph level must be an integer >= 1, got {n!r}")
        super().__init__(params, n, name=f'H{n}')
        self.n = n

    def contains(self, v: Vertex) -> bool:
        return v.n == self.n and (
            (v.family == OSC and 1 <= v.index <= self.osc_count(self.n))
            or (v.family == SCALED_OSC and 1 <= v.index <= self.n)
        )

    def vertices(self) -> Iterator[Vertex]:
        n = self.n
        for i in range(1, self.osc_count(n) + 1):
            yield Vertex.osc(n, i)
        for k in range(1, n + 1):
            yield Vertex.scaled(n, k)

    def vertex_count(self) -> int:
        return self.osc_count(self.n) + self.n

    def successors(self, v: Vertex) -> List[Vertex]:
        if not self.contains(v):
            raise DomainError(f"{v} is not a vertex of {self.name}")
        if v.family == OSC:
            return [Vertex.scaled(self.n, self.n)]
        if v.index >= 2:
            return [Vertex.scaled(self.n, v.index - 1)]
        return [Vertex.osc(self.n, i) for i in range(1, self.osc_count(self.n) + 1)]

    def truncated_out(self) -> List[Vertex]:
        return []

    def is_truncated(self, v: Vertex) -> bool:
        return False

    def _class_vertices(self) -> Tuple[List[Vertex], List[int]]:
        M = self.osc_count(self.n)
        classes = [Vertex.osc(self.n, 1), Vertex.osc(self.n, 2)]
        sizes = [1, M - 1]
        for k in range(1, self.n + 1):
            classes.append(Vertex.scaled(self.n, k))
            sizes.append(1)
        return classes, sizes

    def _lumped_successors(self, v: Vertex) -> Iterator[Vertex]:
        if v.family == SCALED_OSC and v.index == 1:
            return iter([Vertex.osc(self.n, 1), Vertex.osc(self.n, 2)])
        return iter(self.successors(v))


def build_truncated_graph(params: MapParams, N: int) -> TruncatedGraph:
    graph = TruncatedGraph(params, N)
    logger.info(f"Truncated graph N={N}: {graph.vertex_count()} vertices")
    return graph


def subgraph_Hn(params: MapParams, n: int) -> LevelSubgraph:
    return LevelSubgraph(params, n)


def extension_graph(params: MapParams) -> Callable[[int], TruncatedGraph]:
    """Truncation factory for the graph of the modified map with M_2 + 2 laps at level 2."""
    counts = extended_osc_count(params)

    def truncation(N: int) -> TruncatedGraph:
        graph = TruncatedGraph(params, N, counts, name='H')
        graph.kind = 'extension'
        return graph
    return truncation


def extra_vertices(params: MapParams) -> List[Vertex]:
    """The two level-2 oscillation vertices absent from the original graph."""
    M = oscillation_count(params.lam, 2)
    return [Vertex.osc(2, M + 1), Vertex.osc(2, M + 2)]


def restrict(graph: TruncatedGraph, removed: Sequence[Vertex]) -> Tuple[List[Vertex], List[Tuple[Vertex, Vertex]]]:
    """Vertex and edge lists of graph with the given vertices (and incident edges) removed."""
    dropped = set(removed)
    vertices = [v for v in graph.vertices() if v not in dropped]
    edges = [(v, w) for v, w in graph.edges() if v not in dropped and w not in dropped]
    return vertices, edges


# Cross-checks against the map

def _in_dropped_region(lo: Fraction, hi: Fraction, params: MapParams, N: int) -> bool:
    """Whether [lo, hi] lies inside the union of vertices of level > N."""
    y_cap = level_positions(N + 1)[1]
    if hi <= params.scale(N) * y_cap:
        return True
    for k in range(0, N):
        s = params.scale(k)
        if s <= lo and hi <= s * y_cap:
            return True
    return False


def _representative_vertices(graph: TruncatedGraph) -> Iterator[Vertex]:
    """All non-oscillation vertices plus the first and last few laps per level."""
    for v in graph.vertices():
        if v.family == OSC:
            M = graph.osc_count(v.n)
            if v.index > MARKOV_LAP_SAMPLE and v.index <= M - MARKOV_LAP_SAMPLE:
                continue
        yield v


def _successor_intervals(graph: TruncatedGraph, v: Vertex) -> List[Tuple[Fraction, Fraction]]:
    """Successor intervals with complete oscillation levels merged into [x_n, y_n]."""
    out = []
    for w in graph._lumped_successors(v):
        if w.family == OSC:
            if w.index == 1:
                out.append(level_positions(w.n))
            continue
        out.append(graph.interval(w))
    return sorted(out)


def verify_markov_property(f, N: int) -> CheckReport:
    """The exact image of every vertex interval is the union of its successors' intervals.

    Out-neighbourhoods cut by the truncation may leave holes only where the
    dropped vertices lie; the hump image additionally contains the point 0.
    Oscillation laps are congruent, so only the first and last three laps per
    level are imaged.
    """
    report = CheckReport(name=f"markov[N={N}]")
    graph = TruncatedGraph(f.params, N)
    checked = 0
    for v in _representative_vertices(graph):
        a, b = graph.interval(v)
        lo, hi = f.image(a, b)
        pieces = _successor_intervals(graph, v)
        truncated = graph.is_truncated(v)
        cursor = lo
        for s_lo, s_hi in pieces:
            if s_lo < lo or s_hi > hi:
                report.fail(f"{v} -> interval [{s_lo}, {s_hi}] not inside f({v})")
            if s_lo > cursor and not (truncated and _in_dropped_region(cursor, s_lo, f.params, N)):
                report.fail(f"f({v}) has an uncovered hole [{cursor}, {s_lo}]")
            elif s_lo < cursor:
                report.fail(f"successors of {v} overlap at {s_lo}")
            cursor = max(cursor, s_hi)
        if cursor < hi and not (truncated and _in_dropped_region(cursor, hi, f.params, N)):
            report.fail(f"f({v}) is not covered up to {hi}")
        checked += 1
    report.details = {"N": N, "vertices_checked": checked}
    return report


def validate_edges(graph: TruncatedGraph, f, limit: int = 5000) -> CheckReport:
    """Check K inside f(J) with exact endpoints for up to limit edges in vertex order."""
    report = CheckReport(name=f"edges[{graph.name},N={graph.N}]")
    images: Dict[Vertex, Tuple[Fraction, Fraction]] = {}
    checked = 0
    for v, w in graph.edges():
        if checked >= limit:
            break
        if v not in images:
            images[v] = f.image(*graph.interval(v))
        lo, hi = images[v]
        w_lo, w_hi = graph.interval(w)
        if w_lo < lo or w_hi > hi:
            report.fail(f"edge {v} -> {w} is not an image inclusion")
        checked += 1
    report.details = {"edges_checked": checked}
    return report


# Export

def graph_document(graph: TruncatedGraph) -> Dict:
    count = graph.vertex_count()
    if count > EXPORT_VERTEX_LIMIT:
        raise ParameterError(f"graph with {count} vertices is too large to export")
    vertices = list(graph.vertices())
    order = {v: i for i, v in enumerate(vertices)}

    def interval(v):
        a, b = graph.interval(v)
        return [str(a), str(b)]

    return {
        "graph": graph.kind,
        "params": graph.params.to_dict(),
        "N": graph.N,
        "vertices": [
            {"family": FAMILY_NAMES[v.family], "n": v.n, "i_or_k": v.index,
             "label": v.label, "interval": interval(v)}
            for v in vertices
        ],
        "edges": [[order[v], order[w]] for v, w in graph.edges()],
        "truncated_out": [order[v] for v in graph.truncated_out() if v in order],
    }


def graph_from_document(document: Dict) -> TruncatedGraph:
    params_doc = document["params"]
    params = MapParams.create(Fraction(params_doc["lambda"]), int(params_doc["r"]), int(params_doc["k_max"]))
    kind = document.get("graph", "truncation")
    if kind == 'subgraph':
        return LevelSubgraph(params, int(document["N"]))
    if kind == 'extension':
        return extension_graph(params)(int(document["N"]))
    return TruncatedGraph(params, int(document["N"]))


def graph_dot(graph: TruncatedGraph) -> str:
    """DOT text with vertex labels like Osc(2,5) and S:Hump, in vertex order."""
    count = graph.vertex_count()
    if count > EXPORT_VERTEX_LIMIT:
        raise ParameterError(f"graph with {count} vertices is too large to export")
    lines = [f'digraph "{graph.name}_N{graph.N}" {{']
    for v in graph.vertices():
        shape = 'doubleoctagon' if v.family == SPECIAL else 'ellipse'
        lines.append(f'  "{v.label}" [shape={shape}];')
    truncated = set(graph.truncated_out())
    for v, w in graph.edges():
        lines.append(f'  "{v.label}" -> "{w.label}";')
    for v in sorted(truncated):
        if graph.contains(v):
            lines.append(f'  "{v.label}" -> "..." [style=dashed];')
    if any(graph.contains(v) for v in truncated):
        lines.append('  "..." [shape=plaintext];')
    lines.append('}')
    return '\n'.join(lines) + '\n'


def export_graph(graph: TruncatedGraph, fmt: str = 'dot') -> str:
    """Serialized graph: DOT text or the JSON document, both in vertex order."""
    if fmt == 'dot':
        return graph_dot(graph)
    if fmt == 'json':
        return dumps(graph_document(graph))
    raise ParameterError(f"graph export format must be 'dot' or 'json', got {fmt!r}")
