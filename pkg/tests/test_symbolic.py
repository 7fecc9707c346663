from fractions import Fraction

import pytest

from mixmap.errors import AdmissibilityError, DomainError, ExceptionalPoint
from mixmap.construction.params import level_positions
from mixmap.chain.markov_graph import OSC, Vertex, standard_osc_count, vertex_interval
from mixmap.chain.symbolic import (Itinerary, contraction_depth, cylinder, is_exceptional,
                                   itinerary_of_point, itinerary_point, point_of_itinerary,
                                   preimage_codes, roundtrip_check, verify_coding, verify_conjugacy,
                                   vertex_at, vertices_containing)

HUMP = Vertex.special('Hump')


@pytest.mark.parametrize('x, expected', [
    (0.75, Vertex.special('Hump')),
    (3.0, Vertex.special('Right')),
    (0.3, Vertex.special('LeftHump')),
    (0.1, Vertex.gap(2, 1)),
    (0.05, Vertex.tail(2)),
    (2.01, Vertex.osc(1, 1)),
    (Fraction(3, 20), Vertex.scaled(1, 1)),
])
def test_vertex_at(params14, x, expected):
    assert vertex_at(params14, x) == expected


def test_accumulation_points_have_no_vertex(params14):
    assert vertex_at(params14, 0) is None
    assert vertex_at(params14, Fraction(1)) is None
    assert vertex_at(params14, Fraction(1), 'left') == HUMP
    assert vertex_at(params14, Fraction(1, 14)) is None
    with pytest.raises(DomainError):
        vertex_at(params14, 1, 'up')


def test_exceptional_points(params14):
    assert is_exceptional(params14, Fraction(2))
    assert is_exceptional(params14, Fraction(1))
    assert not is_exceptional(params14, Fraction(201, 100))
    assert is_exceptional(params14, 2.0 + 1e-14)
    assert not is_exceptional(params14, 2.01)
    assert vertices_containing(params14, Fraction(2)) == [Vertex.osc(1, 1), Vertex.gap(1, 0)]


def test_itinerary_json_and_prefix():
    itinerary = Itinerary((HUMP,), (Vertex.osc(1, 3), Vertex.scaled(1, 1)))
    assert itinerary.periodic
    assert Itinerary.from_json(itinerary.to_json()) == itinerary
    assert itinerary.to_json()[-1] == {"cycle": ['Osc(1,3)', 'ScaledOsc(1,1)']}
    assert itinerary.prefix(4) == (HUMP, Vertex.osc(1, 3), Vertex.scaled(1, 1), Vertex.osc(1, 3))
    assert str(itinerary) == 'S:Hump (Osc(1,3) ScaledOsc(1,1))^inf'


def test_validate_rejects_non_edges(params14):
    osc_count = standard_osc_count(params14)
    Itinerary((Vertex.osc(1, 1), Vertex.scaled(1, 1))).validate(osc_count)
    with pytest.raises(AdmissibilityError):
        Itinerary((Vertex.osc(1, 1), Vertex.osc(1, 2))).validate(osc_count)
    with pytest.raises(AdmissibilityError):
        Itinerary(()).validate(osc_count)


def test_itinerary_of_point(f14):
    code = itinerary_of_point(f14, 2.01, 3)
    assert code.head[:2] == (Vertex.osc(1, 1), Vertex.scaled(1, 1))
    assert code.head[2].family == OSC and code.head[2].n == 1
    code.validate(standard_osc_count(f14.params))
    with pytest.raises(ExceptionalPoint):
        itinerary_of_point(f14, Fraction(2), 3)
    with pytest.raises(DomainError):
        itinerary_of_point(f14, 0.3, 0)


def test_single_symbol_cylinder(f14):
    c = cylinder(f14, [Vertex.osc(1, 1)])
    lo, hi = vertex_interval(Vertex.osc(1, 1), f14.params)
    assert c.interval == (float(lo), float(hi))
    assert c.contains(2.01)


def test_periodic_code_gives_periodic_point(f14):
    point = point_of_itinerary(f14, Itinerary((), (Vertex.osc(1, 3), Vertex.scaled(1, 1))))
    assert vertex_at(f14.params, point) == Vertex.osc(1, 3)
    assert f14.eval(f14.eval(point)) == pytest.approx(point, abs=1e-9)


def test_finite_code_point_lies_in_its_cylinder(f14):
    head = (Vertex.osc(1, 5), Vertex.scaled(1, 1), Vertex.osc(1, 2), Vertex.scaled(1, 1))
    point = point_of_itinerary(f14, Itinerary(head))
    assert cylinder(f14, head).contains(point)
    assert itinerary_of_point(f14, point, 3).head == head[:3]


@pytest.mark.parametrize('n', [1, 2])
def test_level_points_have_two_codes(f14, n):
    x, y = level_positions(n)
    assert len(preimage_codes(f14, x, 4 * (n + 2))) == 2
    assert len(preimage_codes(f14, y, 4 * (n + 2))) == 2


def test_generic_point_has_one_code(f14):
    assert len(preimage_codes(f14, 0.3, 12)) == 1


def test_roundtrip(f14):
    report = roundtrip_check(f14, 0.3, 16)
    assert report.passed
    assert [d for d, _ in report.decay] == [1, 2, 4, 8, 16]
    diameters = [v for _, v in report.decay]
    assert diameters[-1] < diameters[0]
    depth = contraction_depth(f14, 0.3, target=1e-6, max_depth=40)
    assert depth is not None and depth <= 40


def test_conjugacy(f14):
    report = verify_conjugacy(f14, [0.3, 0.7, 2.2, 3.3], depth=10)
    assert report.passed, report.failures
    assert report.details["checked"] + report.details["exceptional"] == 4


def test_coding_suite(f14):
    report = verify_coding(f14, n_max=2, random_points=5, seed=7)
    assert report.passed, report.failures
    assert report.details["codes"] == {"x_1": 2, "y_1": 2, "x_2": 2, "y_2": 2}


def _gap_cycle(n):
    return (Vertex.gap(n, 0),) + tuple(Vertex.gap(n, k) for k in range(n, 0, -1))


def _osc_cycle(n):
    return (Vertex.osc(n, 1),) + tuple(Vertex.scaled(n, k) for k in range(n, 0, -1))


@pytest.mark.parametrize('n', [1, 2])
@pytest.mark.parametrize('make_cycle', [_gap_cycle, _osc_cycle])
def test_level_cycles_decode_to_level_point(f14, n, make_cycle):
    x, _ = level_positions(n)
    assert point_of_itinerary(f14, Itinerary((), make_cycle(n))) == pytest.approx(float(x), abs=1e-9)


def test_right_fixed_code_decodes_to_four(f14):
    assert point_of_itinerary(f14, Itinerary((), (Vertex.special('Right'),))) == pytest.approx(4.0, abs=1e-9)


def test_itinerary_point_reports_diameter(f14):
    head = (Vertex.osc(1, 5), Vertex.scaled(1, 1), Vertex.osc(1, 2))
    finite = itinerary_point(f14, Itinerary(head))
    assert finite.depth == 3
    assert finite.diameter == pytest.approx(cylinder(f14, head).diameter)
    assert finite.diameter > 0
    assert finite.point == point_of_itinerary(f14, Itinerary(head))

    periodic = itinerary_point(f14, Itinerary((), (Vertex.osc(1, 3), Vertex.scaled(1, 1))))
    assert periodic.diameter < 1e-12
    assert periodic.depth % 2 == 0
    assert periodic.to_dict() == {"point": periodic.point, "diameter": periodic.diameter, "depth": periodic.depth}


@pytest.mark.parametrize('n', [3, 4, 5])
def test_deeper_level_points_have_two_codes(f14, n):
    x, y = level_positions(n)
    assert len(preimage_codes(f14, x, 4 * (n + 2))) == 2
    assert len(preimage_codes(f14, y, 4 * (n + 2))) == 2
