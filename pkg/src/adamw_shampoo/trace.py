"""Per-step trace records, sinks, and their CSV form."""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Iterable, Protocol


@dataclass(frozen=True)
class TraceRecord:
    k: int
    f_value: float
    grad_fro: float
    grad_nuclear: float
    run_avg_grad_fro: float
    run_avg_grad_nuclear: float
    dist_to_opt: float
    update_op_norm: float
    x_op_norm: float
    trace_l_sqrt: float
    trace_r_sqrt: float


CSV_HEADER = tuple(f.name for f in fields(TraceRecord))


class TraceSink(Protocol):
    def push(self, record: TraceRecord) -> None: ...


class ListSink:
    def __init__(self):
        self.records: list[TraceRecord] = []

    def push(self, record: TraceRecord) -> None:
        self.records.append(record)


class NullSink:
    def push(self, record: TraceRecord) -> None:
        pass


def _fmt(value) -> str:
    if isinstance(value, int):
        return str(value)
    if math.isnan(value):
        return "nan"
    return f"{value:.17g}"


def write_trace_csv(records: Iterable[TraceRecord], path) -> None:
    records = list(records)
    if not records:
        raise ValueError("refusing to write an empty trace")
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for rec in records:
                writer.writerow([_fmt(v) for v in astuple(rec)])
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc}") from exc


def read_trace_csv(path) -> list[TraceRecord]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected trace header in {path}: {header}")
        return [TraceRecord(int(row[0]), *map(float, row[1:])) for row in reader]
