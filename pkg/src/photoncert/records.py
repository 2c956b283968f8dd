"""Text format for detection records: one ``<pulse_index> <c0><c1><c2><c3>`` per line.

The format is canonical (decimal index without leading zeros, a single space,
four ``0``/``1`` characters, ``\\n`` terminator) so that parsing and
re-serialising a file reproduces it byte for byte. Pulse indices must be
strictly increasing.
"""

from __future__ import annotations

import os
import re
from typing import IO, Iterable, Iterator

import numpy as np

from .errors import EmptyStream, ParseError
from .hbt_simulator import BATCH_SIZE, N_DETECTORS, DetectionBatch

_LINE = re.compile(rb"(0|[1-9][0-9]*) ([01]{4})")
_PATTERNS = [format(code, "04b") for code in range(16)]
_WEIGHTS = np.array([8, 4, 2, 1])
_MAX_INDEX = 2**64 - 1


def format_batch(batch: DetectionBatch) -> str:
    codes = (batch.clicks.astype(np.int64) @ _WEIGHTS).tolist()
    lines = [f"{i} {_PATTERNS[c]}\n" for i, c in zip(batch.pulse_index.tolist(), codes)]
    return "".join(lines)


def write_records(stream: Iterable[DetectionBatch], fh: IO[bytes]) -> int:
    """Serialise ``stream`` to a binary file handle; returns the record count."""
    n = 0
    for batch in stream:
        fh.write(format_batch(batch).encode("ascii"))
        n += len(batch)
    return n


def save_records(stream: Iterable[DetectionBatch], path: str | os.PathLike, force: bool = False) -> int:
    mode = "wb" if force else "xb"
    with open(path, mode) as fh:
        return write_records(stream, fh)


def parse_records(fh: IO[bytes], batch_size: int = BATCH_SIZE) -> Iterator[DetectionBatch]:
    """Parse a record file into batches; raises ``ParseError`` naming the bad line."""
    idx_buf: list[int] = []
    click_buf: list[bytes] = []
    last = -1
    lineno = 0
    for lineno, raw in enumerate(fh, start=1):
        if not raw.endswith(b"\n"):
            raise ParseError("missing newline terminator", lineno)
        m = _LINE.fullmatch(raw[:-1])
        if m is None:
            raise ParseError(f"expected '<pulse_index> <4 click bits>', got {raw[:-1][:40]!r}", lineno)
        idx = int(m.group(1))
        if idx > _MAX_INDEX:
            raise ParseError("pulse index exceeds 64 bits", lineno)
        if idx <= last:
            raise ParseError(f"pulse index {idx} does not increase (previous {last})", lineno)
        last = idx
        idx_buf.append(idx)
        click_buf.append(m.group(2))
        if len(idx_buf) >= batch_size:
            yield _to_batch(idx_buf, click_buf)
            idx_buf, click_buf = [], []
    if idx_buf:
        yield _to_batch(idx_buf, click_buf)
    elif lineno == 0:
        raise EmptyStream("record file is empty")


def _to_batch(idx: list[int], clicks: list[bytes]) -> DetectionBatch:
    bits = np.frombuffer(b"".join(clicks), dtype=np.uint8).reshape(-1, N_DETECTORS) == ord("1")
    return DetectionBatch(np.array(idx, dtype=np.uint64), bits)


def load_records(path: str | os.PathLike) -> list[DetectionBatch]:
    with open(path, "rb") as fh:
        return list(parse_records(fh))
