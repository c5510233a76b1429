"""Bit-exact persistence for tensors and quantized archives.

Tensor files are raw little-endian float32 payloads (row-major) with a
JSON sidecar manifest: {"shape": [rows, cols], "dtype": "f32",
"layout": "row-major"}.

Archive layout (".glvq", all multi-byte integers little-endian):

    magic    4 bytes   b"GLVQ"
    version  u16       1
    count    u32       number of group records
  per record:
    rows u32, cols u32, dim u16, bits u8, pad u16,
    scale float16, mu float16,
    basis dim*dim float16 (row-major),
    payload_len u64, payload bytes

Codes are stored column-major as unsigned offsets u = z + 2^(bits-1),
packed LSB-first within each byte; the final partial byte is zero
padded.  Side information is rounded to IEEE binary16 (nearest-even);
codes round-trip bit exactly.
"""

import json
import os
import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .codebook import GroupCodec, code_range, reconstruct

MAGIC = b"GLVQ"
VERSION = 1

_HEADER = struct.Struct("<4sHI")
_RECORD = struct.Struct("<IIHBHee")
_PAYLEN = struct.Struct("<Q")


class ArchiveError(ValueError):
    """Malformed archive bytes."""


class BadMagicError(ArchiveError):
    pass


class UnsupportedVersionError(ArchiveError):
    pass


class TruncatedArchiveError(ArchiveError):
    pass


class TruncatedPayloadError(ValueError):
    """Packed code payload does not match the declared geometry."""


class TensorFormatError(ValueError):
    """Tensor payload and manifest disagree."""


def pack_codes(codes, bits: int) -> bytes:
    """Pack an integer code matrix into b-bit offsets, LSB-first."""
    lo, hi = code_range(bits)
    if bits > 8:
        raise ValueError(f"packing supports bits <= 8, got {bits}")
    z = np.asarray(codes)
    if z.size and (z.min() < lo or z.max() > hi):
        raise ValueError(f"codes outside [{lo}, {hi}] for bits={bits}")
    u = (z.astype(np.int64).ravel(order="F") + 2 ** (bits - 1)).astype(np.uint8)
    if u.size == 0:
        return b""
    bitmat = np.unpackbits(u[:, None], axis=1, bitorder="little")[:, :bits]
    return np.packbits(bitmat.ravel(), bitorder="little").tobytes()


def unpack_codes(payload: bytes, bits: int, dim: int, columns: int) -> np.ndarray:
    """Exact inverse of pack_codes; returns a dim x columns int matrix."""
    if bits < 1 or bits > 8:
        raise ValueError(f"bits must be in 1..8, got {bits}")
    n = dim * columns
    need = (n * bits + 7) // 8
    if len(payload) != need:
        raise TruncatedPayloadError(
            f"payload is {len(payload)} bytes, expected {need}")
    if n == 0:
        return np.zeros((dim, columns), dtype=np.int64)
    raw = np.frombuffer(payload, dtype=np.uint8)
    bitstream = np.unpackbits(raw, bitorder="little")[: n * bits].reshape(n, bits)
    u = bitstream @ (1 << np.arange(bits, dtype=np.int64))
    z = u.astype(np.int64) - 2 ** (bits - 1)
    return z.reshape((dim, columns), order="F")


@dataclass
class ArchiveGroup:
    """One parsed group record; codes are unpacked lazily."""

    codec: GroupCodec
    payload: bytes

    @cached_property
    def codes(self) -> np.ndarray:
        return unpack_codes(self.payload, self.codec.bits, self.codec.dim,
                            self.codec.columns)

    def decode(self) -> np.ndarray:
        return reconstruct(self.codes, self.codec)


class GlvqArchive:
    """Parsed archive: a sequence of ArchiveGroup records."""

    def __init__(self, groups):
        self.groups = list(groups)

    def __len__(self):
        return len(self.groups)

    def __iter__(self):
        return iter(self.groups)

    def __getitem__(self, i):
        return self.groups[i]

    def decode_matrix(self) -> np.ndarray:
        """Decode every group and concatenate along columns."""
        if not self.groups:
            return np.zeros((0, 0))
        rows = {g.codec.rows for g in self.groups}
        if len(rows) != 1:
            raise ArchiveError("groups disagree on row count")
        return np.hstack([g.decode() for g in self.groups])

    def to_bytes(self) -> bytes:
        return write_archive((g.codec, g.codes) for g in self.groups)


def write_archive(records) -> bytes:
    """Serialize (codec, codes) pairs; deterministic for equal inputs."""
    records = list(records)
    out = bytearray(_HEADER.pack(MAGIC, VERSION, len(records)))
    for codec, codes in records:
        payload = pack_codes(codes, codec.bits)
        out += _RECORD.pack(codec.rows, codec.cols, codec.dim, codec.bits,
                            codec.pad, float(codec.scale), float(codec.mu))
        out += np.ascontiguousarray(codec.basis, dtype="<f2").tobytes()
        out += _PAYLEN.pack(len(payload))
        out += payload
    return bytes(out)


def read_archive(data: bytes) -> GlvqArchive:
    """Parse archive bytes; raises a distinct error per failure mode."""
    if len(data) < _HEADER.size:
        raise TruncatedArchiveError("archive shorter than header")
    magic, version, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}")
    off = _HEADER.size
    groups = []
    for idx in range(count):
        if off + _RECORD.size > len(data):
            raise TruncatedArchiveError(f"record {idx} header truncated")
        rows, cols, dim, bits, pad, scale, mu = _RECORD.unpack_from(data, off)
        off += _RECORD.size
        if dim < 1 or not 1 <= bits <= 8 or pad >= dim:
            raise ArchiveError(f"record {idx} has invalid geometry")
        if (rows * cols + pad) % dim != 0:
            raise ArchiveError(f"record {idx} geometry does not tile into dim={dim}")
        basis_bytes = 2 * dim * dim
        if off + basis_bytes + _PAYLEN.size > len(data):
            raise TruncatedArchiveError(f"record {idx} side info truncated")
        basis = np.frombuffer(data[off:off + basis_bytes], dtype="<f2")
        basis = basis.astype(float).reshape(dim, dim)
        off += basis_bytes
        (payload_len,) = _PAYLEN.unpack_from(data, off)
        off += _PAYLEN.size
        columns = (rows * cols + pad) // dim
        expected = (dim * columns * bits + 7) // 8
        if payload_len != expected:
            raise ArchiveError(
                f"record {idx} declares {payload_len} payload bytes, expected {expected}")
        if off + payload_len > len(data):
            raise TruncatedArchiveError(f"record {idx} payload truncated")
        payload = bytes(data[off:off + payload_len])
        off += payload_len
        codec = GroupCodec(basis=basis, mu=float(mu), bits=int(bits),
                           scale=float(scale), dim=int(dim), pad=int(pad),
                           rows=int(rows), cols=int(cols))
        groups.append(ArchiveGroup(codec=codec, payload=payload))
    if off != len(data):
        raise ArchiveError(f"{len(data) - off} trailing bytes after last record")
    return GlvqArchive(groups)


def overhead_report(dim: int, rows: int, cols: int, bits: int) -> float:
    """Side-information overhead percentage 100 * (16 d^2 + 16) / (m n b).

    Counts the d x d float16 basis plus one float16 curvature scalar
    against the packed code bits (the per-group scale and record framing
    are excluded here; see record_side_bytes for the on-disk figure).
    """
    for name, v in (("dim", dim), ("rows", rows), ("cols", cols), ("bits", bits)):
        if v < 1:
            raise ValueError(f"{name} must be >= 1, got {v}")
    return 100.0 * (16 * dim * dim + 16) / (rows * cols * bits)


def record_side_bytes(dim: int) -> int:
    """Actual archive bytes per group beyond the packed codes."""
    return _RECORD.size + 2 * dim * dim + _PAYLEN.size


def atomic_write_bytes(path, data: bytes) -> None:
    """Write via a temp file and rename, so failures leave no partial file."""
    tmp = f"{path}.tmp.{os.getpid()}"
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _manifest_path(path: str) -> str:
    root, ext = os.path.splitext(path)
    return (root if ext == ".f32" else path) + ".json"


def write_tensor_file(path, array) -> None:
    """Write a 2-D float32 tensor payload plus its JSON manifest."""
    a = np.asarray(array, dtype=np.float32)
    if a.ndim != 2:
        raise ValueError(f"tensor files hold 2-D arrays, got shape {a.shape}")
    manifest = {"shape": [int(a.shape[0]), int(a.shape[1])],
                "dtype": "f32", "layout": "row-major"}
    atomic_write_bytes(path, np.ascontiguousarray(a, dtype="<f4").tobytes())
    atomic_write_bytes(_manifest_path(path),
                       (json.dumps(manifest, indent=2) + "\n").encode())


def read_tensor_file(path) -> np.ndarray:
    """Read a tensor payload, validating it against its manifest."""
    with open(_manifest_path(path)) as fh:
        manifest = json.load(fh)
    if manifest.get("dtype") != "f32" or manifest.get("layout") != "row-major":
        raise TensorFormatError(f"unsupported manifest: {manifest}")
    shape = manifest.get("shape")
    if (not isinstance(shape, list) or len(shape) != 2
            or not all(isinstance(v, int) and v >= 0 for v in shape)):
        raise TensorFormatError(f"bad shape in manifest: {shape!r}")
    with open(path, "rb") as fh:
        payload = fh.read()
    rows, cols = shape
    if len(payload) != rows * cols * 4:
        raise TensorFormatError(
            f"payload is {len(payload)} bytes, manifest implies {rows * cols * 4}")
    return np.frombuffer(payload, dtype="<f4").reshape(rows, cols).astype(float)
