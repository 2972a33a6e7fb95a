"""Little-endian float32 tensor containers.

Layout (all integers u32 little-endian)::

    offset  size  field
    0       4     magic  b"TOSF" (features) or b"TOSA" (ACCDDOA frames)
    4       4     version (currently 1)
    8       4     dim0   TOSF: planes   TOSA: frames
    12      4     dim1   TOSF: frames   TOSA: tracks
    16      4     dim2   TOSF: mels     TOSA: classes
    20      ...   float32 payload, C order

TOSA payload has a fixed trailing axis of 4 components
(x, y, distance, onscreen_logit), so its shape is (frames, tracks, classes, 4).
"""

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from seldkit.core import ValidationError

FEATURE_MAGIC = b"TOSF"
ACCDDOA_MAGIC = b"TOSA"
VERSION = 1
ACCDDOA_COMPONENTS = 4

_HEADER = struct.Struct("<4s4I")


class ContainerError(ValidationError):
    pass


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _encode(magic: bytes, array: np.ndarray, dims: tuple[int, int, int]) -> bytes:
    payload = np.ascontiguousarray(array, dtype="<f4").tobytes()
    return _HEADER.pack(magic, VERSION, *dims) + payload


def _decode(data: bytes, magic: bytes, trailing: tuple[int, ...] = ()) -> np.ndarray:
    if len(data) < _HEADER.size:
        raise ContainerError("file shorter than header")
    got, version, d0, d1, d2 = _HEADER.unpack_from(data)
    if got != magic:
        raise ContainerError(f"bad magic {got!r}, expected {magic!r}")
    if version != VERSION:
        raise ContainerError(f"unsupported version {version}")
    shape = (d0, d1, d2) + trailing
    expected = int(np.prod(shape)) * 4
    if len(data) - _HEADER.size != expected:
        raise ContainerError(
            f"payload is {len(data) - _HEADER.size} bytes, header implies {expected}"
        )
    return np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(shape).astype(np.float32)


def encode_features(planes: np.ndarray) -> bytes:
    planes = np.asarray(planes)
    if planes.ndim != 3:
        raise ContainerError(f"feature planes must be 3-D, got shape {planes.shape}")
    return _encode(FEATURE_MAGIC, planes, planes.shape)


def decode_features(data: bytes) -> np.ndarray:
    return _decode(data, FEATURE_MAGIC)


def write_features(path, planes: np.ndarray) -> None:
    atomic_write_bytes(path, encode_features(planes))


def read_features(path) -> np.ndarray:
    """Return the (planes, frames, mels) float32 array stored at `path`."""
    return decode_features(Path(path).read_bytes())


def encode_accddoa(frames: np.ndarray) -> bytes:
    frames = np.asarray(frames)
    if frames.ndim != 4 or frames.shape[-1] != ACCDDOA_COMPONENTS:
        raise ContainerError(f"ACCDDOA sequence must be (T, N, C, 4), got {frames.shape}")
    return _encode(ACCDDOA_MAGIC, frames, frames.shape[:3])


def decode_accddoa(data: bytes) -> np.ndarray:
    return _decode(data, ACCDDOA_MAGIC, (ACCDDOA_COMPONENTS,))


def write_accddoa(path, frames: np.ndarray) -> None:
    atomic_write_bytes(path, encode_accddoa(frames))


def read_accddoa(path) -> np.ndarray:
    return decode_accddoa(Path(path).read_bytes())
