"""
CSV output: RFC 4180, ASCII, CRLF line endings, 17 significant digits.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence, Union

import pandas as pd

Table = Union[pd.DataFrame, Sequence[dict]]


def as_frame(table: Table, columns: Optional[Sequence[str]] = None) -> pd.DataFrame:
    if isinstance(table, pd.DataFrame):
        df = table
    else:
        df = pd.DataFrame(list(table))
    if columns is not None:
        df = df.reindex(columns=list(columns))
    return df


def emit_csv(table: Table, path: Path, columns: Optional[Sequence[str]] = None) -> Path:
    """
    Write a table as CSV. An empty table with known columns gives a
    header-only file.
    """
    df = as_frame(table, columns)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(
        path,
        index=False,
        float_format="%.17g",
        lineterminator="\r\n",
        encoding="ascii",
    )
    return path
