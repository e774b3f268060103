"""Dataset model and on-disk formats for embeddings, labels and reports.

Binary layout (little-endian)::

    "AEMB" u16 version=1 u32 count u32 dim  count*dim float32 (row-major)
    "ALBL" u32 count  count*u8 labels          (omitted when count == 0)

Text layout: a header ``id,label,e0,...,e{d-1}`` followed by one row per
sample. Values are always stored as float32 and widened to float64 on read.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from augsel.errors import CorruptionError, DomainError, FormatError

EMB_MAGIC = b"AEMB"
LBL_MAGIC = b"ALBL"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHII")
_LBL_HEADER = struct.Struct("<4sI")
HEADER_SIZE = _HEADER.size  # 14

FORMATS = ("binary", "text")


@dataclass
class EmbeddingSet:
    """``n x d`` feature matrix held in float64, with one integer id per row."""

    values: np.ndarray
    ids: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DomainError(f"embedding matrix must be 2-D, got shape {values.shape}")
        if values.shape[1] < 1:
            raise DomainError("embedding dimension must be >= 1")
        if not np.all(np.isfinite(values)):
            raise DomainError("embedding values must be finite")
        self.values = values
        if self.ids is None:
            self.ids = np.arange(values.shape[0], dtype=np.int64)
        else:
            ids = np.asarray(self.ids, dtype=np.int64)
            if ids.shape != (values.shape[0],):
                raise DomainError(f"expected {values.shape[0]} ids, got {ids.shape}")
            self.ids = ids

    @property
    def count(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @classmethod
    def empty(cls, dim: int) -> EmbeddingSet:
        return cls(np.zeros((0, dim)))

    def take(self, index) -> EmbeddingSet:
        index = np.asarray(index, dtype=np.int64)
        return EmbeddingSet(self.values[index], self.ids[index])

    def __len__(self) -> int:
        return self.count


@dataclass
class LabelVector:
    labels: np.ndarray
    class_count: int = 4

    def __post_init__(self):
        if self.class_count < 2:
            raise DomainError(f"class_count must be >= 2, got {self.class_count}")
        labels = np.asarray(self.labels)
        if labels.size == 0:
            labels = labels.reshape(0).astype(np.int64)
        if labels.ndim != 1 or not np.issubdtype(labels.dtype, np.integer):
            raise DomainError("labels must be a 1-D integer sequence")
        labels = labels.astype(np.int64)
        if labels.size and (labels.min() < 0 or labels.max() >= self.class_count):
            bad = int(labels[(labels < 0) | (labels >= self.class_count)][0])
            raise DomainError(f"label {bad} outside 0..{self.class_count - 1}")
        self.labels = labels

    def take(self, index) -> LabelVector:
        return LabelVector(self.labels[np.asarray(index, dtype=np.int64)], self.class_count)

    def counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count)

    def __len__(self) -> int:
        return self.labels.shape[0]


@dataclass
class PoolTags:
    """Provenance of each pool sample: the generating class and truncation."""

    classes: np.ndarray
    psis: np.ndarray

    def __post_init__(self):
        self.classes = np.asarray(self.classes, dtype=np.int64).reshape(-1)
        self.psis = np.asarray(self.psis, dtype=np.float64).reshape(-1)
        if self.classes.shape != self.psis.shape:
            raise DomainError("provenance class and psi columns differ in length")

    def take(self, index) -> PoolTags:
        index = np.asarray(index, dtype=np.int64)
        return PoolTags(self.classes[index], self.psis[index])

    def __len__(self) -> int:
        return self.classes.shape[0]


@dataclass
class DatasetSplit:
    """Train / test / synthetic-pool partitions.

    ``base_ids`` optionally names the train rows (by position) that form the
    small labeled set the active loop starts from; when it is None the whole
    train partition is used.
    """

    train_x: EmbeddingSet
    train_y: LabelVector
    test_x: EmbeddingSet
    test_y: LabelVector
    pool_x: EmbeddingSet
    pool_y: LabelVector
    pool_tags: PoolTags
    base_ids: np.ndarray | None = field(default=None)

    def __post_init__(self):
        for x, y, name in (
            (self.train_x, self.train_y, "train"),
            (self.test_x, self.test_y, "test"),
            (self.pool_x, self.pool_y, "pool"),
        ):
            check_aligned(x, y, name)
        dims = {self.train_x.dim, self.test_x.dim, self.pool_x.dim}
        if len(dims) != 1:
            raise DomainError(f"partitions disagree on dimension: {sorted(dims)}")
        if len(self.pool_tags) != self.pool_x.count:
            raise DomainError("pool provenance length differs from pool size")
        if self.base_ids is not None:
            self.base_ids = np.asarray(self.base_ids, dtype=np.int64)

    @property
    def class_count(self) -> int:
        return self.train_y.class_count

    def base(self) -> tuple[EmbeddingSet, LabelVector]:
        if self.base_ids is None:
            return self.train_x, self.train_y
        return self.train_x.take(self.base_ids), self.train_y.take(self.base_ids)

    def disjoint(self) -> bool:
        parts = [self.train_x.ids, self.test_x.ids, self.pool_x.ids]
        merged = np.concatenate(parts)
        return np.unique(merged).size == merged.size


def check_aligned(x: EmbeddingSet, y: LabelVector, name: str = "set") -> None:
    if x.count != len(y):
        raise DomainError(f"{name}: {x.count} embeddings but {len(y)} labels")


# ---------------------------------------------------------------- embeddings


def _fmt_from_path(path: Path, fmt: str | None) -> str:
    if fmt is None:
        fmt = "text" if path.suffix.lower() in (".csv", ".txt") else "binary"
    if fmt not in FORMATS:
        raise DomainError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    return fmt


def write_embeddings(
    x: EmbeddingSet, y: LabelVector, path, fmt: str | None = None
) -> None:
    path = Path(path)
    check_aligned(x, y)
    fmt = _fmt_from_path(path, fmt)
    values32 = x.values.astype("<f4")
    if not np.all(np.isfinite(values32)):
        raise DomainError("values overflow float32")
    if fmt == "binary":
        if y.labels.size and y.labels.max() > 255:
            raise DomainError("binary format stores labels in one byte")
        parts = [_HEADER.pack(EMB_MAGIC, FORMAT_VERSION, x.count, x.dim), values32.tobytes()]
        if x.count:
            parts.append(_LBL_HEADER.pack(LBL_MAGIC, x.count))
            parts.append(y.labels.astype(np.uint8).tobytes())
        path.write_bytes(b"".join(parts))
    else:
        lines = [",".join(["id", "label"] + [f"e{j}" for j in range(x.dim)])]
        for sid, label, row in zip(x.ids, y.labels, values32):
            # str() of a float32 is the shortest string that round-trips it
            lines.append(",".join([str(int(sid)), str(int(label))] + [str(v) for v in row]))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_embeddings(
    path, fmt: str | None = None, class_count: int = 4
) -> tuple[EmbeddingSet, LabelVector]:
    path = Path(path)
    fmt = _fmt_from_path(path, fmt)
    if fmt == "binary":
        return _read_binary(path.read_bytes(), class_count)
    return _read_text(path.read_text(encoding="utf-8"), class_count)


def _read_binary(data: bytes, class_count: int) -> tuple[EmbeddingSet, LabelVector]:
    if len(data) < HEADER_SIZE:
        raise FormatError(f"file too short for header ({len(data)} bytes)")
    magic, version, count, dim = _HEADER.unpack_from(data, 0)
    if magic != EMB_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}")
    if dim < 1:
        raise CorruptionError("dimension is zero")
    payload = count * dim * 4
    end = HEADER_SIZE + payload
    if end > len(data):
        raise CorruptionError(f"payload truncated: need {end} bytes, have {len(data)}")
    values = np.frombuffer(data, dtype="<f4", count=count * dim, offset=HEADER_SIZE)
    values = values.reshape(count, dim).astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise CorruptionError("non-finite embedding value")

    if end == len(data) and count == 0:
        labels = np.zeros(0, dtype=np.int64)
    else:
        if end + _LBL_HEADER.size > len(data):
            raise CorruptionError("label block missing or truncated")
        lmagic, lcount = _LBL_HEADER.unpack_from(data, end)
        if lmagic != LBL_MAGIC:
            raise FormatError(f"bad label magic {lmagic!r}")
        if lcount != count:
            raise CorruptionError(f"label count {lcount} != embedding count {count}")
        lstart = end + _LBL_HEADER.size
        if lstart + lcount != len(data):
            raise CorruptionError("label block size does not match file length")
        labels = np.frombuffer(data, dtype=np.uint8, count=lcount, offset=lstart).astype(np.int64)
    return EmbeddingSet(values), LabelVector(labels, class_count)


def _read_text(text: str, class_count: int) -> tuple[EmbeddingSet, LabelVector]:
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty text file")
    header = lines[0].strip().split(",")
    if header[:2] != ["id", "label"] or len(header) < 3:
        raise FormatError(f"bad header {lines[0]!r}")
    dim = len(header) - 2
    if header[2:] != [f"e{j}" for j in range(dim)]:
        raise FormatError(f"bad feature columns in header {lines[0]!r}")
    ids, labels, rows = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != dim + 2:
            raise CorruptionError(f"line {lineno}: expected {dim + 2} fields, got {len(cells)}")
        try:
            ids.append(int(cells[0]))
            labels.append(int(cells[1]))
            rows.append([np.float32(float(c)) for c in cells[2:]])
        except ValueError as exc:
            raise CorruptionError(f"line {lineno}: {exc}") from None
    values = np.array(rows, dtype=np.float32).reshape(len(rows), dim).astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise CorruptionError("non-finite embedding value")
    return EmbeddingSet(values, np.array(ids, dtype=np.int64)), LabelVector(
        np.array(labels, dtype=np.int64), class_count
    )


# ---------------------------------------------------------------- sidecars


def write_provenance(tags: PoolTags, path) -> None:
    lines = ["index,class,psi"]
    lines += [f"{i},{int(c)},{float(p)!r}" for i, (c, p) in enumerate(zip(tags.classes, tags.psis))]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_provenance(path) -> PoolTags:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != "index,class,psi":
        raise FormatError(f"{path}: bad provenance header")
    classes, psis = [], []
    for expected, line in enumerate(lines[1:]):
        idx, cls, psi = line.split(",")
        if int(idx) != expected:
            raise CorruptionError(f"{path}: provenance index {idx} out of order")
        classes.append(int(cls))
        psis.append(float(psi))
    return PoolTags(classes, psis)


def write_ids(ids, path) -> None:
    Path(path).write_text("".join(f"{int(i)}\n" for i in ids), encoding="utf-8")


def read_ids(path) -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8").split()
    return np.array([int(t) for t in text], dtype=np.int64)


# ---------------------------------------------------------------- reports


def _normalize(obj: Any) -> Any:
    if hasattr(obj, "to_dict"):
        obj = obj.to_dict()
    if isinstance(obj, dict):
        return {str(k): _normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_normalize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_normalize(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if not math.isfinite(value):
            raise DomainError("reports may not contain non-finite numbers")
        return value
    return obj


def dumps_report(report) -> str:
    """Serialize a report (anything with ``to_dict`` or a plain dict)."""
    return json.dumps(_normalize(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_report(report, path) -> None:
    Path(path).write_text(dumps_report(report), encoding="utf-8")
