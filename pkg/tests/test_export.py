import csv
import json
from fractions import Fraction

import numpy as np
import pytest

from mixmap.export import PIECE_HEADER, dumps, piece_rows, write_csv, write_json, write_text


def test_dumps_handles_fractions_and_numpy():
    text = dumps({"x": Fraction(1, 3), "v": np.array([1.5, 2.0]), "n": np.int64(4)})
    assert json.loads(text) == {"x": "1/3", "v": [1.5, 2.0], "n": 4}
    assert text.endswith('\n')
    with pytest.raises(TypeError):
        dumps({"bad": object()})


def test_writers_create_folders(tmp_path):
    path = write_json(tmp_path / 'a' / 'b' / 'out.json', {"k": 1})
    assert json.loads(path.read_text()) == {"k": 1}
    path = write_text(tmp_path / 'c' / 'g.dot', 'digraph {}\n')
    assert path.read_text() == 'digraph {}\n'


def test_write_csv_is_deterministic(tmp_path):
    rows = [[Fraction(1, 2), 'a'], [3, 'b']]
    first = write_csv(tmp_path / 'one.csv', ['x', 'y'], rows).read_bytes()
    second = write_csv(tmp_path / 'two.csv', ['x', 'y'], rows).read_bytes()
    assert first == second == b'x,y\n1/2,a\n3,b\n'


def test_piece_rows(f14, tmp_path):
    records = f14.pieces(level_cap=1)
    rows = piece_rows(records)
    assert len(rows) == len(records)
    assert rows[0][:4] == ['0', '5/28', 'linear', 'increasing']
    path = write_csv(tmp_path / 'pieces.csv', PIECE_HEADER, rows)
    with open(path) as f:
        table = list(csv.reader(f))
    assert table[0] == PIECE_HEADER
    assert table[-1][1] == '4'
