"""Append-only block log: u32 length-prefixed canonical blocks."""

import logging
import os
import struct
from pathlib import Path
from typing import Iterator

from ..core.codec import CodecError, decode_canonical, encode_canonical
from ..core.types import Block

logger = logging.getLogger(__name__)


class BlockLogError(Exception):
    """The log file is truncated or holds an undecodable record."""


class BlockLog:
    def __init__(self, path: Path) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def append(self, block: Block) -> None:
        """
        Append block and flush it to disk.

        Raises:
            OSError: If the write fails; callers treat this as fatal.
        """
        data = encode_canonical(block)
        with self.path.open("ab") as f:
            f.write(struct.pack(">I", len(data)) + data)
            f.flush()
            os.fsync(f.fileno())

    def __iter__(self) -> Iterator[Block]:
        return read_blocks(self.path)


def read_blocks(path: Path) -> Iterator[Block]:
    """
    Yield blocks from a log file in order.

    Raises:
        BlockLogError: On a truncated record or a record that fails to decode.
    """
    path = Path(path)
    if not path.exists():
        return
    with path.open("rb") as f:
        index = 0
        while True:
            prefix = f.read(4)
            if not prefix:
                return
            if len(prefix) < 4:
                raise BlockLogError(f"{path}: truncated length prefix at record {index}")
            (size,) = struct.unpack(">I", prefix)
            data = f.read(size)
            if len(data) < size:
                raise BlockLogError(f"{path}: truncated record {index}")
            try:
                yield decode_canonical(data, Block)
            except CodecError as e:
                raise BlockLogError(f"{path}: record {index} does not decode: {e}") from e
            index += 1
