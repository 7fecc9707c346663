from fractions import Fraction

import numpy as np
import pytest

from mixmap.errors import DomainError, ParameterError
from mixmap.construction.map_core import PiecewiseMap, build_map, load_map
from mixmap.construction.params import level_constants, level_positions


def test_landmark_values_are_exact(f14):
    assert f14.eval(Fraction(0)) == 0
    assert f14.eval(Fraction(1)) == 0
    assert f14.eval(Fraction(1, 2)) == 4
    assert f14.eval(Fraction(4)) == 4


def test_linear_start(f14):
    for x in (Fraction(1, 100), Fraction(1, 14), Fraction(5, 28)):
        assert f14.eval(x) == 14 * x
        assert f14.eval(x, 1) == 14


def test_linear_start_r2(f14_r2):
    x = Fraction(1, 1000)
    assert f14_r2.eval(x) == 196 * x


def test_exact_input_gives_fraction(f14):
    value = f14(Fraction(3, 10))
    assert isinstance(value, Fraction)
    assert isinstance(f14(0.3), float)
    assert float(value) == pytest.approx(f14(0.3), rel=1e-12)


def test_oscillator_endpoints(f14):
    lc = level_constants(f14.params, 2)
    y_next = level_positions(3)[1]
    assert f14.eval(lc.t(0)) == lc.scale * lc.x
    assert f14.eval(lc.t(1)) == lc.scale * lc.y
    assert f14.eval(lc.t(2)) == lc.scale * y_next
    assert f14.eval(lc.y) == lc.scale * lc.y


@pytest.mark.parametrize('n', [1, 2, 3])
def test_level_points_are_periodic(f14, n):
    x, y = level_positions(n)
    assert f14.orbit(x, n + 1)[-1] == x
    assert f14.orbit(y, n + 1)[-1] == y


def test_value_at_w_n(f14):
    lc = level_constants(f14.params, 2)
    assert f14.eval(lc.w) == f14.params.scale(3) * lc.x


def test_domain_and_order_errors(f14):
    with pytest.raises(DomainError):
        f14.eval(Fraction(-1, 10))
    with pytest.raises(DomainError):
        f14.eval(4.5)
    with pytest.raises(DomainError):
        f14.eval(Fraction(1, 3), 3)
    with pytest.raises(DomainError):
        f14.eval_derivative(Fraction(1, 3), 0)


def test_build_map_rejects_bad_level_count(params14):
    with pytest.raises(ParameterError):
        build_map(params14, 0)


def test_level_index():
    assert PiecewiseMap.level_index(Fraction(21, 10)) == 1
    assert PiecewiseMap.level_index(Fraction(3, 2)) == 2
    assert PiecewiseMap.level_index(level_positions(5)[1]) == 5


def test_sample_matches_scalar_evaluation(f14):
    xs = np.array([0.01, 0.3, 0.75, 0.999, 1.2, 1.55, 2.1, 2.4, 3.0, 4.0])
    values = f14.sample(xs)
    for x, value in zip(xs, values):
        assert value == pytest.approx(f14.eval(float(x)), rel=1e-9, abs=1e-12)
    slopes = f14.sample(xs, 1)
    assert slopes[0] == pytest.approx(14.0)


def test_sample_rejects_points_outside(f14):
    with pytest.raises(DomainError):
        f14.sample([0.5, 4.1])


def test_images(f14):
    assert f14.image(Fraction(0), Fraction(1, 14)) == (0, 1)
    assert f14.image(Fraction(1, 4), Fraction(3, 4))[1] == 4
    x, y = level_positions(1)
    assert f14.image(x, y) == (f14.params.scale(1) * level_positions(2)[1], f14.params.scale(1) * y)
    with pytest.raises(DomainError):
        f14.image(Fraction(1), Fraction(1, 2))


def test_piece_labels(f14):
    assert f14.piece_label(Fraction(1, 100)) == 'L0'
    assert f14.piece_label(Fraction(4)).startswith('R')
    assert f14.piece_label(Fraction(201, 100)).startswith('n1:lap1')


def test_sample_rows(f14):
    rows = f14.sample_rows(9)
    assert [row[0] for row in rows] == pytest.approx([0.5 * i for i in range(9)])
    assert rows[0][1:3] == pytest.approx([0.0, 14.0]) and rows[0][3] == 'L0'
    assert rows[1][1] == pytest.approx(4.0)
    assert rows[2][1] == pytest.approx(0.0, abs=1e-12)
    assert rows[3][3].startswith('n2:')
    assert rows[4][1] == pytest.approx(1 / 7) and rows[4][3].startswith('n1:lap1')
    assert rows[5][3].startswith('R')
    assert rows[-1][1] == pytest.approx(4.0)
    with pytest.raises(ParameterError):
        f14.sample_rows(1)


def test_constants_table(f14):
    table = f14.constants_table(2)
    assert [row['M'] for row in table] == [13, 47]
    assert table[0]['x'] == '2' and table[0]['y'] == '5/2'


def test_document_roundtrip(params14):
    f = build_map(params14, 2)
    document = f.to_document()
    assert document['lambda'] == '14'
    assert document['pieces'][0]['kind'] == 'linear'
    rebuilt = load_map(document)
    assert rebuilt.eval(Fraction(7, 3)) == f.eval(Fraction(7, 3))


@pytest.mark.parametrize('n', [15, 20, 25, 30])
@pytest.mark.parametrize('k', [0, 1])
def test_sample_matches_eval_on_deep_oscillators(f14, n, k):
    x, y = level_positions(n)
    points = [float(x + (y - x) * Fraction(t, 17)) for t in (3, 8, 13)]
    sampled = f14.sample(points, k)
    expected = [float(f14.eval(p, k)) for p in points]
    assert sampled.tolist() == pytest.approx(expected, rel=1e-12)
