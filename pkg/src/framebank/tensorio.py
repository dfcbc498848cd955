"""Bit-exact file formats: tensors, P5 masks, record manifests.

Tensor layout (all integers little-endian):

    magic   4 bytes  "EYIT"
    version u16      1
    dtype   u8       1 = float32
    rank    u8
    dims    rank x u64
    payload row-major float32

Masks are binary P5 graymaps with maxval 255 and values restricted to
{0, 255}. Manifests are line-delimited TSV with a version header line.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from framebank.masks import BinaryMask

Array = np.ndarray
PathLike = Union[str, Path]

TENSOR_MAGIC = b"EYIT"
TENSOR_VERSION = 1
DTYPE_FLOAT32 = 1
MANIFEST_HEADER = "#record-manifest v1"
RECORD_KINDS = ("spatial_features", "cross_q", "cross_k", "latent")


class TensorFormatError(ValueError):
    """Malformed tensor file: bad magic, version, dtype, or payload."""


class ManifestError(ValueError):
    """Malformed or inconsistent record manifest."""


def write_tensor(path: PathLike, values: Array) -> None:
    values = np.asarray(values)
    if not np.all(np.isfinite(values)):
        raise ValueError("refusing to write non-finite values")
    payload = np.ascontiguousarray(values, dtype="<f4")
    header = TENSOR_MAGIC + struct.pack("<HBB", TENSOR_VERSION, DTYPE_FLOAT32, values.ndim)
    header += struct.pack(f"<{values.ndim}Q", *values.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def read_tensor(path: PathLike) -> Array:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 8:
        raise TensorFormatError(f"{path}: header truncated")
    if data[:4] != TENSOR_MAGIC:
        raise TensorFormatError(f"{path}: bad magic {data[:4]!r}")
    version, dtype_code, rank = struct.unpack_from("<HBB", data, 4)
    if version != TENSOR_VERSION:
        raise TensorFormatError(f"{path}: unsupported version {version}")
    if dtype_code != DTYPE_FLOAT32:
        raise TensorFormatError(f"{path}: unsupported dtype code {dtype_code}")
    dims_end = 8 + 8 * rank
    if len(data) < dims_end:
        raise TensorFormatError(f"{path}: dims truncated")
    dims = struct.unpack_from(f"<{rank}Q", data, 8)
    count = 1
    for d in dims:
        count *= d
    if count * 4 > len(data) - dims_end or count > 2**48:
        raise TensorFormatError(
            f"{path}: payload truncated or dims overflow (need {count} values)"
        )
    if count * 4 != len(data) - dims_end:
        raise TensorFormatError(f"{path}: trailing bytes after payload")
    values = np.frombuffer(data, dtype="<f4", count=count, offset=dims_end)
    return values.reshape(dims).copy()


def write_mask_pgm(path: PathLike, mask: BinaryMask) -> None:
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    payload = np.where(mask.bits, 255, 0).astype(np.uint8).tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_mask_pgm(path: PathLike) -> BinaryMask:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise TensorFormatError(f"{path}: not a binary (P5) graymap")
    # header: magic, width, height, maxval as whitespace-separated tokens,
    # then exactly one whitespace byte before the payload
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise TensorFormatError(f"{path}: truncated header")
        fields.append(data[start:pos])
    pos += 1
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise TensorFormatError(f"{path}: non-numeric header field") from exc
    if maxval != 255:
        raise TensorFormatError(f"{path}: expected maxval 255, got {maxval}")
    payload = np.frombuffer(data, dtype=np.uint8, offset=pos)
    if payload.size != width * height:
        raise TensorFormatError(
            f"{path}: payload has {payload.size} bytes, expected {width * height}"
        )
    if not np.all(np.isin(payload, (0, 255))):
        raise TensorFormatError(f"{path}: mask values must be 0 or 255")
    return BinaryMask(payload.reshape(height, width) == 255)


@dataclass(frozen=True)
class ManifestRecord:
    frame_index: int
    step_index: int
    layer_id: str
    head_index: Optional[int]
    kind: str
    path: str
    spatial_shape: tuple[int, int]

    def key(self) -> tuple:
        return (self.frame_index, self.step_index, self.layer_id, self.head_index, self.kind)


def write_manifest(path: PathLike, records: Iterable[ManifestRecord]) -> None:
    lines = [MANIFEST_HEADER]
    for r in records:
        if r.kind not in RECORD_KINDS:
            raise ManifestError(f"unknown record kind {r.kind!r}")
        if any(c.isspace() for c in r.layer_id):
            raise ManifestError(f"layer id {r.layer_id!r} must not contain whitespace")
        head = "-" if r.head_index is None else str(r.head_index)
        lines.append(
            f"{r.frame_index}\t{r.step_index}\t{r.layer_id}\t{head}\t{r.kind}"
            f"\t{r.path}\t{r.spatial_shape[0]}\t{r.spatial_shape[1]}"
        )
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_manifest(path: PathLike, check_files: bool = True) -> list[ManifestRecord]:
    path = Path(path)
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("#record-manifest"):
        raise ManifestError(f"{path}: missing manifest header")
    if lines[0] != MANIFEST_HEADER:
        raise ManifestError(f"{path}: unsupported manifest version {lines[0]!r}")
    records = []
    seen = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 8:
            raise ManifestError(f"{path}:{lineno}: expected 8 fields, got {len(parts)}")
        frame, step, layer, head, kind, rel, h, w = parts
        if kind not in RECORD_KINDS:
            raise ManifestError(f"{path}:{lineno}: unknown kind {kind!r}")
        rec = ManifestRecord(
            frame_index=int(frame),
            step_index=int(step),
            layer_id=layer,
            head_index=None if head == "-" else int(head),
            kind=kind,
            path=rel,
            spatial_shape=(int(h), int(w)),
        )
        if rec.key() in seen:
            raise ManifestError(f"{path}:{lineno}: duplicate record {rec.key()}")
        seen.add(rec.key())
        if check_files and not (path.parent / rel).is_file():
            raise ManifestError(f"{path}:{lineno}: referenced file missing: {rel}")
        records.append(rec)
    return records
