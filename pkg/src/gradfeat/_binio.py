"""Little-endian binary reading helpers and atomic file writes."""

import os
import struct
import tempfile

import numpy as np

from .errors import BadMagicError, FormatError, TruncatedFileError, VersionMismatchError


class Reader:
    """Cursor over an in-memory byte string with offset-aware errors."""

    def __init__(self, data, what="file"):
        self.data = bytes(data)
        self.pos = 0
        self.what = what

    def take(self, n):
        if self.pos + n > len(self.data):
            raise TruncatedFileError(
                f"{self.what} truncated: needed {n} bytes, {len(self.data) - self.pos} left",
                offset=self.pos)
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, dtype, count):
        dtype = np.dtype(dtype)
        raw = self.take(dtype.itemsize * count)
        return np.frombuffer(raw, dtype=dtype).copy()

    def remaining(self):
        return len(self.data) - self.pos

    def expect_end(self):
        if self.pos != len(self.data):
            raise FormatError(
                f"{self.what} has {len(self.data) - self.pos} unexpected trailing bytes",
                offset=self.pos)


def check_magic(reader, magic):
    """Validate a 4-byte tag like ``b"DFN1"``: 3-letter family plus version digit."""
    got = reader.take(4) if reader.remaining() >= 4 else None
    if got is None:
        raise TruncatedFileError(f"{reader.what} too short for its magic bytes", offset=0)
    if got == magic:
        return
    if got[:3] == magic[:3]:
        raise VersionMismatchError(
            f"{reader.what} has version {got[3:]!r}, expected {magic[3:]!r}", offset=3)
    raise BadMagicError(f"{reader.what}: bad magic {got!r}, expected {magic!r}", offset=0)


def atomic_write(path, data, mode="wb"):
    """Write via a temporary file in the target directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
