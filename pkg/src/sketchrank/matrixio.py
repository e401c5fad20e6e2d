"""Dense matrix files: MatrixMarket (array and coordinate) and a raw binary format.

RawF64 layout, all little-endian::

    b"SKRK"  u32 version  u64 rows  u64 cols  rows*cols f64 (column-major)

MatrixMarket is read with a small parser of our own rather than
``scipy.io.mmread`` so that duplicate coordinate entries can be rejected
(scipy silently sums them) and so values are written with 17 significant
digits, which round-trips float64 exactly.
"""
import os
import struct

import numpy as np

from .errors import MatrixFormatError
from .linalg import as_dense

RAW_MAGIC = b"SKRK"
RAW_VERSION = 1
_RAW_HEADER = struct.Struct("<4sIQQ")

FORMATS = ("mm-array", "mm-coordinate", "raw")


def detect_format(path):
    """Format name from the file's first bytes, falling back to the extension."""
    with open(path, "rb") as fh:
        head = fh.read(64)
    if head.startswith(RAW_MAGIC):
        return "raw"
    if head.startswith(b"%%MatrixMarket"):
        words = head.split(b"\n", 1)[0].lower().split()
        if len(words) >= 3 and words[2] == b"coordinate":
            return "mm-coordinate"
        return "mm-array"
    ext = os.path.splitext(str(path))[1].lower()
    if ext in (".bin", ".raw", ".f64"):
        return "raw"
    if ext == ".mtx":
        return "mm-array"
    raise MatrixFormatError(f"cannot tell the format of {path}")


def format_for_path(path):
    """Format to write based on the extension: ``.mtx`` is MatrixMarket, else raw."""
    return "mm-array" if str(path).lower().endswith(".mtx") else "raw"


def read_matrix(path, fmt=None):
    fmt = fmt or detect_format(path)
    if fmt == "raw":
        return read_raw(path)
    if fmt in ("mm-array", "mm-coordinate"):
        return read_matrix_market(path)
    raise MatrixFormatError(f"unknown format {fmt!r}")


def write_matrix(path, a, fmt=None):
    fmt = fmt or format_for_path(path)
    if fmt == "raw":
        write_raw(path, a)
    elif fmt == "mm-array":
        write_matrix_market(path, a)
    elif fmt == "mm-coordinate":
        write_matrix_market(path, a, coordinate=True)
    else:
        raise MatrixFormatError(f"unknown format {fmt!r}")


# ------------------------------------------------------------------ raw f64

def write_raw(path, a):
    a = as_dense(a)
    rows, cols = a.shape
    with open(path, "wb") as fh:
        fh.write(_RAW_HEADER.pack(RAW_MAGIC, RAW_VERSION, rows, cols))
        fh.write(np.asarray(a, dtype="<f8").tobytes(order="F"))


def read_raw(path):
    with open(path, "rb") as fh:
        header = fh.read(_RAW_HEADER.size)
        if len(header) < _RAW_HEADER.size:
            raise MatrixFormatError(f"{path}: truncated header")
        magic, version, rows, cols = _RAW_HEADER.unpack(header)
        if magic != RAW_MAGIC:
            raise MatrixFormatError(f"{path}: bad magic {magic!r}")
        if version != RAW_VERSION:
            raise MatrixFormatError(f"{path}: unsupported version {version}")
        payload = fh.read()
    if len(payload) != 8 * rows * cols:
        raise MatrixFormatError(
            f"{path}: header says {rows}x{cols} but payload holds {len(payload)} bytes")
    data = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return data.reshape((rows, cols), order="F")


# ------------------------------------------------------------ MatrixMarket

def write_matrix_market(path, a, coordinate=False):
    a = as_dense(a)
    rows, cols = a.shape
    with open(path, "w", encoding="ascii") as fh:
        if coordinate:
            r, c = np.nonzero(a)
            order = np.lexsort((r, c))
            r, c = r[order], c[order]
            fh.write("%%MatrixMarket matrix coordinate real general\n")
            fh.write(f"{rows} {cols} {r.size}\n")
            for i, j in zip(r, c):
                fh.write(f"{i + 1} {j + 1} {a[i, j]:.17g}\n")
        else:
            fh.write("%%MatrixMarket matrix array real general\n")
            fh.write(f"{rows} {cols}\n")
            fh.write("\n".join(f"{v:.17g}" for v in a.ravel(order="F")))
            fh.write("\n")


def _data_lines(fh):
    for line in fh:
        line = line.strip()
        if line and not line.startswith("%"):
            yield line


def read_matrix_market(path):
    """Read a real general MatrixMarket file into a dense array."""
    with open(path, "r", encoding="ascii") as fh:
        banner = fh.readline().split()
        if len(banner) != 5 or banner[0] != "%%MatrixMarket" or banner[1].lower() != "matrix":
            raise MatrixFormatError(f"{path}: missing MatrixMarket banner")
        layout, field, symmetry = (w.lower() for w in banner[2:])
        if field not in ("real", "integer", "double") or symmetry != "general":
            raise MatrixFormatError(f"{path}: only real general matrices are supported")
        lines = _data_lines(fh)
        try:
            size = next(lines).split()
        except StopIteration:
            raise MatrixFormatError(f"{path}: missing size line") from None
        try:
            if layout == "array":
                rows, cols = (int(w) for w in size)
                values = [float(v) for v in lines]
                if len(values) != rows * cols:
                    raise MatrixFormatError(
                        f"{path}: expected {rows * cols} values, found {len(values)}")
                return np.array(values, dtype=np.float64).reshape((rows, cols), order="F")
            if layout != "coordinate":
                raise MatrixFormatError(f"{path}: unknown layout {layout!r}")
            rows, cols, nnz = (int(w) for w in size)
            out = np.zeros((rows, cols), order="F")
            seen = set()
            count = 0
            for line in lines:
                i, j, v = line.split()
                i, j = int(i) - 1, int(j) - 1
                if not (0 <= i < rows and 0 <= j < cols):
                    raise MatrixFormatError(f"{path}: entry ({i + 1}, {j + 1}) out of range")
                if (i, j) in seen:
                    raise MatrixFormatError(f"{path}: duplicate entry ({i + 1}, {j + 1})")
                seen.add((i, j))
                out[i, j] = float(v)
                count += 1
            if count != nnz:
                raise MatrixFormatError(f"{path}: expected {nnz} entries, found {count}")
            return out
        except ValueError as exc:
            if isinstance(exc, MatrixFormatError):
                raise
            raise MatrixFormatError(f"{path}: malformed entry ({exc})") from None
