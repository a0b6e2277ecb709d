"""Binary PGM (P5) image I/O for 80x70 grayscale eye frames.

Only the P5 subset needed here is supported: maxval 255, single image per
file. The header parser accepts arbitrary whitespace and '#' comments, which
is enough for files written by common tooling.
"""

from __future__ import annotations

import os
import re
from pathlib import Path
from typing import Iterable, Iterator

from .core import FRAME_HEIGHT, FRAME_PIXELS, FRAME_WIDTH, Frame, timestamp_for_index

_FRAME_FILE = re.compile(r"frame_(\d{6})\.pgm$")


def encode(pixels: bytes, width: int = FRAME_WIDTH, height: int = FRAME_HEIGHT) -> bytes:
    """Serialize raw grayscale bytes to a P5 PGM file image."""
    if len(pixels) != width * height:
        raise ValueError(f"expected {width * height} pixels, got {len(pixels)}")
    return b"P5\n%d %d\n255\n" % (width, height) + pixels


def decode(data: bytes) -> tuple[bytes, int, int]:
    """Parse a P5 PGM file; returns (pixels, width, height).

    Raises ValueError on anything that is not an 8-bit binary PGM.
    """
    pos = 0

    def skip_separators(pos: int) -> int:
        while pos < len(data):
            c = data[pos:pos + 1]
            if c.isspace():
                pos += 1
            elif c == b"#":
                nl = data.find(b"\n", pos)
                pos = len(data) if nl < 0 else nl + 1
            else:
                break
        return pos

    def read_token(pos: int) -> tuple[bytes, int]:
        pos = skip_separators(pos)
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        return data[start:pos], pos

    magic, pos = read_token(pos)
    if magic != b"P5":
        raise ValueError(f"not a binary PGM (magic {magic!r})")
    fields = []
    for _ in range(3):
        tok, pos = read_token(pos)
        if not tok.isdigit():
            raise ValueError(f"bad PGM header token {tok!r}")
        fields.append(int(tok))
    width, height, maxval = fields
    if maxval != 255:
        raise ValueError(f"unsupported maxval {maxval}; only 255 is handled")
    if width <= 0 or height <= 0:
        raise ValueError(f"bad dimensions {width}x{height}")
    # Exactly one whitespace byte separates the header from the raster.
    pos += 1
    pixels = data[pos:pos + width * height]
    if len(pixels) != width * height:
        raise ValueError(
            f"raster truncated: expected {width * height} bytes, got {len(pixels)}"
        )
    return pixels, width, height


def write_pgm(path: str | os.PathLike, pixels: bytes,
              width: int = FRAME_WIDTH, height: int = FRAME_HEIGHT) -> None:
    Path(path).write_bytes(encode(pixels, width, height))


def read_pgm(path: str | os.PathLike) -> tuple[bytes, int, int]:
    return decode(Path(path).read_bytes())


def read_frame(path: str | os.PathLike, index: int, timestamp_ms: int) -> Frame:
    """Read one PGM file as a Frame, rejecting anything but 80x70."""
    pixels, width, height = read_pgm(path)
    if (width, height) != (FRAME_WIDTH, FRAME_HEIGHT):
        raise ValueError(
            f"{path}: expected {FRAME_WIDTH}x{FRAME_HEIGHT} frame, got {width}x{height}"
        )
    return Frame(pixels=pixels, timestamp_ms=timestamp_ms, index=index)


def frame_filename(index: int) -> str:
    return f"frame_{index:06d}.pgm"


def write_frames(directory: str | os.PathLike, frames: Iterable[bytes]) -> int:
    """Write raw pixel buffers as frame_NNNNNN.pgm files; returns the count."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    n = 0
    for i, pixels in enumerate(frames):
        write_pgm(directory / frame_filename(i), pixels)
        n += 1
    return n


def list_frame_files(directory: str | os.PathLike) -> list[Path]:
    """frame_NNNNNN.pgm files in a directory, ordered by frame number."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"{directory} is not a directory")
    found = []
    for entry in directory.iterdir():
        m = _FRAME_FILE.fullmatch(entry.name)
        if m:
            found.append((int(m.group(1)), entry))
    found.sort()
    return [p for _, p in found]


def read_frames(directory: str | os.PathLike, fps: int = 10) -> Iterator[Frame]:
    """Yield Frames from a directory in filename order.

    Timestamps are derived from the frame ordinal at the given fps, matching
    replay semantics. Frame indices are assigned by position, so gaps in the
    file numbering do not create gaps in the index sequence.
    """
    for i, path in enumerate(list_frame_files(directory)):
        yield read_frame(path, index=i, timestamp_ms=timestamp_for_index(i, fps))
