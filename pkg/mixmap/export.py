"""Deterministic JSON, CSV and DOT writers.

Every writer creates missing parent folders and returns the written path.
"""
import csv
import json
import logging
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

logger = logging.getLogger('MixMap.Export')

PathLike = Union[str, Path]


def _prepare(path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _default(value: Any) -> Any:
    if isinstance(value, Fraction):
        return str(value)
    if hasattr(value, 'tolist'):
        return value.tolist()
    if hasattr(value, 'item'):
        return value.item()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps(data: Any) -> str:
    return json.dumps(data, indent=2, default=_default) + '\n'


def write_json(path: PathLike, data: Any) -> Path:
    path = _prepare(path)
    with path.open('w') as f:
        f.write(dumps(data))
    logger.debug(f"Wrote {path}")
    return path


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = _prepare(path)
    with path.open('w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([str(v) if isinstance(v, Fraction) else v for v in row])
    logger.debug(f"Wrote {path}")
    return path


def write_text(path: PathLike, text: str) -> Path:
    path = _prepare(path)
    with path.open('w') as f:
        f.write(text)
    logger.debug(f"Wrote {path}")
    return path


def piece_rows(pieces: List[Dict[str, Any]]) -> List[List[Any]]:
    """One CSV row per exported piece record; compact oscillator records keep their lap count."""
    rows = []
    for record in pieces:
        a_num, a_den, b_num, b_den = record["domain"]
        rows.append([
            str(Fraction(a_num, a_den)),
            str(Fraction(b_num, b_den)),
            record["kind"],
            record.get("monotonicity", ""),
            record.get("level", ""),
            record.get("lap", record.get("M", "")),
            ';'.join(record.get("coefficients", [])),
        ])
    return rows


PIECE_HEADER = ['a', 'b', 'kind', 'monotonicity', 'level', 'lap', 'coefficients']
SAMPLE_HEADER = ['x', 'f', 'df', 'piece']
