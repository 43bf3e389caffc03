"""Prediction traces, correctness masks and the ``.ldtr`` binary format.

A trace holds the label a classifier assigned to every instance at the end of
every training epoch. Rows are instances, columns are epochs (0-based here;
reports use 1-based epoch numbers).

File layout (little-endian, no padding)::

    magic      4s   b"LDTR"
    version    u16  1
    flags      u8   bit 0 = true labels present, other bits zero
    reserved   u8   0
    n          u32  instances
    k          u16  epochs
    n_classes  u16
    [n x u16 true labels]          if flags & 1
    n x k x u16 predictions        instance-major, epoch-minor
"""

from __future__ import annotations

import io
import os
import struct
from dataclasses import dataclass
from typing import BinaryIO, Optional, Sequence, Union

import numpy as np

MAGIC = b"LDTR"
VERSION = 1
FLAG_TRUE_LABELS = 0x01
HEADER = struct.Struct("<4sHBBIHH")

MAX_LABEL = 0xFFFF
MAX_EPOCHS = 0xFFFF
MAX_INSTANCES = 0xFFFFFFFF

PathOrFile = Union[str, os.PathLike, BinaryIO]


class TraceError(ValueError):
    """Raised when a trace violates its structural invariants."""


class TraceFormatError(TraceError):
    """Raised when a ``.ldtr`` byte stream is malformed."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TraceMatrix:
    predictions: np.ndarray
    n_classes: int
    true_labels: Optional[np.ndarray] = None

    @property
    def n_instances(self) -> int:
        return self.predictions.shape[0]

    @property
    def k_epochs(self) -> int:
        return self.predictions.shape[1]

    @property
    def has_true_labels(self) -> bool:
        return self.true_labels is not None

    def row(self, i: int) -> np.ndarray:
        return self.predictions[i]

    def final_predictions(self) -> np.ndarray:
        return self.predictions[:, -1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TraceMatrix):
            return NotImplemented
        if self.n_classes != other.n_classes:
            return False
        if self.predictions.shape != other.predictions.shape:
            return False
        if not np.array_equal(self.predictions, other.predictions):
            return False
        if (self.true_labels is None) != (other.true_labels is None):
            return False
        return self.true_labels is None or np.array_equal(self.true_labels, other.true_labels)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class CorrectnessMask:
    mask: np.ndarray

    @property
    def n_instances(self) -> int:
        return self.mask.shape[0]

    @property
    def k_epochs(self) -> int:
        return self.mask.shape[1]


def _as_label_array(values, name: str) -> np.ndarray:
    if isinstance(values, np.ndarray):
        arr = values
    else:
        try:
            arr = np.array(values)
        except ValueError as exc:  # ragged nested lists
            raise TraceError(f"{name}: rows have unequal lengths") from exc
        if arr.dtype == object:
            raise TraceError(f"{name}: rows have unequal lengths")
    if arr.size and not (np.issubdtype(arr.dtype, np.integer) or arr.dtype == bool):
        if not np.issubdtype(arr.dtype, np.floating) or not np.all(np.mod(arr, 1) == 0):
            raise TraceError(f"{name}: labels must be integers")
    return arr


def build_trace(
    predictions,
    true_labels: Optional[Sequence[int]] = None,
    n_classes: int = 2,
) -> TraceMatrix:
    """Validate a label grid and wrap it as an immutable :class:`TraceMatrix`."""
    if not isinstance(n_classes, (int, np.integer)) or n_classes < 2:
        raise TraceError(f"n_classes must be an integer >= 2, got {n_classes!r}")
    if n_classes - 1 > MAX_LABEL:
        raise TraceError(f"n_classes {n_classes} exceeds the 16-bit label range")
    grid = _as_label_array(predictions, "predictions")
    if grid.ndim != 2:
        raise TraceError(f"predictions must be a 2-D grid, got shape {grid.shape}")
    n, k = grid.shape
    if k == 0:
        raise TraceError("k_epochs must be >= 1")
    if k > MAX_EPOCHS:
        raise TraceError(f"k_epochs {k} exceeds {MAX_EPOCHS}")
    if n > MAX_INSTANCES:
        raise TraceError(f"n_instances {n} exceeds {MAX_INSTANCES}")
    if grid.size and (grid.min() < 0 or grid.max() >= n_classes):
        raise TraceError(f"prediction label out of range [0, {n_classes})")

    labels = None
    if true_labels is not None:
        labels = _as_label_array(true_labels, "true_labels")
        if labels.ndim != 1 or labels.shape[0] != n:
            raise TraceError(
                f"true_labels must have length {n}, got shape {labels.shape}"
            )
        if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
            raise TraceError(f"true label out of range [0, {n_classes})")
        labels = _frozen(labels.astype(np.uint16))

    return TraceMatrix(
        predictions=_frozen(grid.astype(np.uint16)),
        n_classes=int(n_classes),
        true_labels=labels,
    )


def correctness_mask(trace: TraceMatrix) -> CorrectnessMask:
    """Binary grid marking epochs where each instance was predicted correctly."""
    if trace.true_labels is None:
        raise TraceError("correctness mask needs true labels")
    mask = (trace.predictions == trace.true_labels[:, None]).astype(np.uint8)
    return CorrectnessMask(mask=_frozen(mask))


def to_bytes(trace: TraceMatrix) -> bytes:
    flags = FLAG_TRUE_LABELS if trace.true_labels is not None else 0
    parts = [
        HEADER.pack(
            MAGIC, VERSION, flags, 0, trace.n_instances, trace.k_epochs, trace.n_classes
        )
    ]
    if trace.true_labels is not None:
        parts.append(trace.true_labels.astype("<u2").tobytes())
    parts.append(trace.predictions.astype("<u2").tobytes(order="C"))
    return b"".join(parts)


def from_bytes(data: bytes) -> TraceMatrix:
    if len(data) < HEADER.size:
        raise TraceFormatError(
            f"truncated header: {len(data)} bytes, need {HEADER.size}"
        )
    magic, version, flags, reserved, n, k, n_classes = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise TraceFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise TraceFormatError(f"unsupported version {version}")
    if flags & ~FLAG_TRUE_LABELS:
        raise TraceFormatError(f"unknown flag bits set: {flags:#04x}")
    if reserved != 0:
        raise TraceFormatError(f"reserved byte must be 0, got {reserved}")
    if k == 0:
        raise TraceFormatError("k_epochs must be >= 1")
    if n_classes < 2:
        raise TraceFormatError(f"n_classes must be >= 2, got {n_classes}")

    has_labels = bool(flags & FLAG_TRUE_LABELS)
    expected = 2 * (n * k + (n if has_labels else 0))
    payload = len(data) - HEADER.size
    if payload < expected:
        raise TraceFormatError(
            f"truncated payload: header declares {n}x{k} ({expected} bytes), found {payload}"
        )
    if payload > expected:
        raise TraceFormatError(
            f"payload length {payload} does not match declared dimensions ({expected} bytes)"
        )

    offset = HEADER.size
    labels = None
    if has_labels:
        labels = np.frombuffer(data, dtype="<u2", count=n, offset=offset)
        offset += 2 * n
    preds = np.frombuffer(data, dtype="<u2", count=n * k, offset=offset).reshape(n, k)
    try:
        return build_trace(preds, labels, n_classes)
    except TraceError as exc:
        raise TraceFormatError(str(exc)) from exc


def write_trace(trace: TraceMatrix, destination: PathOrFile) -> int:
    """Serialize ``trace``; returns the number of bytes written."""
    data = to_bytes(trace)
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "wb") as fh:
            fh.write(data)
    else:
        destination.write(data)
    return len(data)


def read_trace(source: Union[PathOrFile, bytes]) -> TraceMatrix:
    if isinstance(source, (bytes, bytearray)):
        return from_bytes(bytes(source))
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return from_bytes(fh.read())
    if isinstance(source, io.IOBase) or hasattr(source, "read"):
        return from_bytes(source.read())
    raise TypeError(f"cannot read a trace from {type(source).__name__}")
