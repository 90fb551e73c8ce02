"""Запис CSV: кома як роздільник, крапка в дробах, LF, один рядок заголовка"""
import csv
import io
from typing import Any, Iterable, Optional, Sequence, TextIO

import numpy as np


def format_value(value: Any) -> str:
    """Значення комірки незалежно від локалі

    float пишеться через repr (найкоротше точне представлення),
    None - порожня комірка.
    """
    if isinstance(value, np.generic):
        value = value.item()
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(
    stream: TextIO,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    comment: Optional[str] = None,
) -> None:
    if comment:
        for line in comment.splitlines():
            stream.write(f"# {line}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])


def csv_text(
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    comment: Optional[str] = None,
) -> str:
    buffer = io.StringIO()
    write_csv(buffer, header, rows, comment=comment)
    return buffer.getvalue()
