"""Binary embedding store and CSV interchange.

Store layout (all little-endian):

    magic        4 bytes  b"F2FE"
    version      u16      currently 1
    dim          u32
    n_records    u64
    n_subjects   u32, then per subject: u32 byte length + UTF-8 bytes
    n_images     u32, then per image token: u32 byte length + UTF-8 bytes
    body         n_records * { u32 subject_index, u32 image_index, dim * f32 }

Id tables hold unique tokens in first-appearance order, so writing the result
of a read reproduces the original file byte for byte. Writes go to a
temporary file in the target directory followed by an atomic rename.

The CSV side uses columns subject_id,image_id,v0..v{dim-1} with a mandatory
header; values are written as the shortest decimal string that parses back
to the identical float32.
"""

from __future__ import annotations

import csv
import io
import math
import os
import struct
import tempfile

import numpy as np

from .core import EmbeddingSet
from .errors import (
    CorruptFileError,
    CsvShapeError,
    DataValidationError,
    FormatError,
)

STORE_MAGIC = b"F2FE"
STORE_VERSION = 1


def atomic_write_bytes(path, payload: bytes) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        # mkstemp creates 0600; restore the umask-derived mode regular opens get
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _pack_id_table(tokens: list[str]) -> bytes:
    parts = [struct.pack("<I", len(tokens))]
    for tok in tokens:
        raw = tok.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
    return b"".join(parts)


def store_bytes(embeddings: EmbeddingSet) -> bytes:
    subject_table: dict[str, int] = {}
    image_table: dict[str, int] = {}
    for s in embeddings.subjects:
        subject_table.setdefault(s, len(subject_table))
    for m in embeddings.images:
        image_table.setdefault(m, len(image_table))
    record_dtype = np.dtype(
        [("subject", "<u4"), ("image", "<u4"), ("vector", "<f4", (embeddings.dim,))]
    )
    body = np.empty(len(embeddings), dtype=record_dtype)
    body["subject"] = [subject_table[s] for s in embeddings.subjects]
    body["image"] = [image_table[m] for m in embeddings.images]
    body["vector"] = embeddings.vectors
    head = struct.pack("<4sHIQ", STORE_MAGIC, STORE_VERSION, embeddings.dim, len(embeddings))
    return (
        head
        + _pack_id_table(list(subject_table))
        + _pack_id_table(list(image_table))
        + body.tobytes()
    )


def write_store(embeddings: EmbeddingSet, path) -> None:
    atomic_write_bytes(path, store_bytes(embeddings))


def _unpack_id_table(blob: bytes, off: int, path, what: str):
    if len(blob) < off + 4:
        raise CorruptFileError(f"{path}: truncated {what} table header")
    (count,) = struct.unpack_from("<I", blob, off)
    off += 4
    tokens = []
    for _ in range(count):
        if len(blob) < off + 4:
            raise CorruptFileError(f"{path}: truncated {what} table")
        (length,) = struct.unpack_from("<I", blob, off)
        off += 4
        if len(blob) < off + length:
            raise CorruptFileError(f"{path}: truncated {what} table entry")
        try:
            tokens.append(blob[off : off + length].decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise CorruptFileError(f"{path}: invalid UTF-8 in {what} table") from exc
        off += length
    return tokens, off


def read_store(path) -> EmbeddingSet:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 18:
        raise CorruptFileError(f"{path}: truncated store header")
    magic, version, dim, n_records = struct.unpack_from("<4sHIQ", blob, 0)
    if magic != STORE_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {STORE_MAGIC!r}")
    if version != STORE_VERSION:
        raise FormatError(f"{path}: unsupported store version {version}")
    if dim < 1:
        raise CorruptFileError(f"{path}: nonpositive dim {dim}")
    subjects, off = _unpack_id_table(blob, 18, path, "subject")
    images, off = _unpack_id_table(blob, off, path, "image")
    record_dtype = np.dtype([("subject", "<u4"), ("image", "<u4"), ("vector", "<f4", (dim,))])
    need = n_records * record_dtype.itemsize
    if len(blob) - off < need:
        raise CorruptFileError(
            f"{path}: truncated body, need {need} bytes for {n_records} records, "
            f"have {len(blob) - off}"
        )
    if len(blob) - off > need:
        raise CorruptFileError(f"{path}: {len(blob) - off - need} trailing byte(s) after body")
    body = np.frombuffer(blob, dtype=record_dtype, count=n_records, offset=off)
    if n_records:
        if int(body["subject"].max()) >= len(subjects):
            raise CorruptFileError(f"{path}: subject index out of table bounds")
        if int(body["image"].max()) >= len(images):
            raise CorruptFileError(f"{path}: image index out of table bounds")
    vectors = np.array(body["vector"], dtype=np.float32).reshape(n_records, dim)
    if not np.all(np.isfinite(vectors)):
        raise DataValidationError(f"{path}: store holds NaN/Inf vector values")
    return EmbeddingSet.from_arrays(
        int(dim),
        [subjects[i] for i in body["subject"]],
        [images[i] for i in body["image"]],
        vectors,
    )


def format_float32(value) -> str:
    """Shortest decimal string that round-trips to the identical float32."""
    v = np.float32(value)
    if v == 0:
        return "0.0" if not np.signbit(v) else "-0.0"
    mag = abs(float(v))
    if 1e-4 <= mag < 1e16:
        return np.format_float_positional(v, unique=True, trim="0")
    return np.format_float_scientific(v, unique=True, trim="0")


def export_csv(embeddings: EmbeddingSet, path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["subject_id", "image_id"] + [f"v{i}" for i in range(embeddings.dim)])
    for rec in embeddings:
        writer.writerow([rec.subject, rec.image] + [format_float32(x) for x in rec.vector])
    atomic_write_text(path, buf.getvalue())


def import_csv(path, dim: int) -> EmbeddingSet:
    """Parse a delimited embedding table; the header row is mandatory.

    Ragged or unparsable rows raise CsvShapeError carrying the 1-based line
    number; non-finite values raise DataValidationError; repeated
    (subject, image) pairs raise DuplicateRecordError.
    """
    expected_header = ["subject_id", "image_id"] + [f"v{i}" for i in range(dim)]
    subjects: list[str] = []
    images: list[str] = []
    rows: list[list[float]] = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvShapeError(f"{path}: empty file, expected a header row") from None
        if header != expected_header:
            raise CsvShapeError(
                f"{path}: line 1: bad header for dim={dim}; expected "
                f"{','.join(expected_header[:3])},..."
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2 + dim:
                raise CsvShapeError(
                    f"{path}: line {lineno}: expected {2 + dim} fields, got {len(row)}"
                )
            try:
                values = [float(x) for x in row[2:]]
            except ValueError:
                raise CsvShapeError(f"{path}: line {lineno}: unparsable vector value") from None
            if not all(math.isfinite(v) for v in values):
                raise DataValidationError(f"{path}: line {lineno}: non-finite vector value")
            subjects.append(row[0])
            images.append(row[1])
            rows.append(values)
    vectors = np.array(rows, dtype=np.float32) if rows else np.empty((0, dim), dtype=np.float32)
    return EmbeddingSet.from_arrays(dim, subjects, images, vectors)
