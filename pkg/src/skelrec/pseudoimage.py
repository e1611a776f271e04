"""Pseudo-image codec: joint sequences to 8-bit three-channel images.

A fixed-length sequence of T frames of M joints becomes a T x M x 3 image:
row = frame, column = joint position under a chosen arrangement, channels =
the x/y/z coordinates. Each channel is min-max scaled to [0, 255] over the
sample's whole T x M coordinate matrix, which removes per-axis translation
and positive scaling of the raw coordinates. Values are rounded half-up.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .skeleton import ActionSequence, DEFAULT_FRAMES, NUM_JOINTS

_RAW_MAGIC = b"PIMG"
_RAW_VERSION = 1


@dataclass(frozen=True)
class ChannelScaling:
    """Per-channel (min, max) recorded at encode time, in x/y/z order."""

    mins: tuple[float, float, float]
    maxs: tuple[float, float, float]

    def __post_init__(self) -> None:
        for lo, hi in zip(self.mins, self.maxs):
            if lo > hi:
                raise ValueError(f"channel min {lo} exceeds max {hi}")


def encode(
    seq: ActionSequence,
    arrangement: np.ndarray,
    T: int = DEFAULT_FRAMES,
) -> tuple[np.ndarray, ChannelScaling]:
    """Encode a T-frame sequence under one joint arrangement.

    Pixel (t, k, ch) holds the ch-coordinate of joint ``arrangement[k]`` at
    frame t after per-channel scaling. Returns (uint8 image of shape
    (T, M, 3), ChannelScaling). A constant channel encodes to all zeros.
    """
    if seq.num_frames != T:
        raise ValueError(f"sequence has {seq.num_frames} frames, expected exactly {T}")
    arrangement = np.asarray(arrangement, dtype=np.int64)
    M = seq.joints.shape[1]
    if not np.array_equal(np.sort(arrangement), np.arange(M)):
        raise ValueError(f"arrangement must be a permutation of range({M})")

    coords = seq.joints  # (T, M, 3)
    lo = coords.min(axis=(0, 1))
    hi = coords.max(axis=(0, 1))
    span = hi - lo
    img = np.zeros((T, M, 3), dtype=np.uint8)
    for ch in range(3):
        if span[ch] > 0:
            scaled = (coords[:, :, ch] - lo[ch]) * (255.0 / span[ch])
            img[:, :, ch] = np.floor(scaled + 0.5).astype(np.uint8)  # round half-up
    img = img[:, arrangement, :]  # column k holds joint arrangement[k]
    return img, ChannelScaling(mins=tuple(map(float, lo)), maxs=tuple(map(float, hi)))


def encode_set(
    seq: ActionSequence,
    members: np.ndarray,
    T: int = DEFAULT_FRAMES,
) -> list[np.ndarray]:
    """Encode one sequence under every arrangement of a set, order preserved."""
    return [encode(seq, arr, T)[0] for arr in members]


def export_png(img: np.ndarray, path: str | Path) -> None:
    """Write a pseudo-image as a lossless 8-bit RGB raster."""
    img = _check_image(img)
    Image.fromarray(img, mode="RGB").save(Path(path), format="PNG")


def import_png(path: str | Path) -> np.ndarray:
    """Read back a raster written by :func:`export_png`, bit-exactly."""
    with Image.open(Path(path)) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def export_raw(img: np.ndarray, path: str | Path) -> None:
    """Write the raw dump format: dimensions header + channel-major bytes."""
    img = _check_image(img)
    T, M, C = img.shape
    header = _RAW_MAGIC + struct.pack("<IIII", _RAW_VERSION, T, M, C)
    Path(path).write_bytes(header + np.ascontiguousarray(img.transpose(2, 0, 1)).tobytes())


def import_raw(path: str | Path) -> np.ndarray:
    """Read back a raw dump written by :func:`export_raw`."""
    blob = Path(path).read_bytes()
    if blob[:4] != _RAW_MAGIC:
        raise ValueError(f"{path}: not a raw pseudo-image dump")
    version, T, M, C = struct.unpack("<IIII", blob[4:20])
    if version != _RAW_VERSION:
        raise ValueError(f"{path}: unsupported raw dump version {version}")
    body = np.frombuffer(blob[20:], dtype=np.uint8)
    if body.size != T * M * C:
        raise ValueError(f"{path}: body holds {body.size} bytes, expected {T * M * C}")
    return body.reshape(C, T, M).transpose(1, 2, 0).copy()


def _check_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError(f"pseudo-image must be uint8 of shape (T, M, 3), got {img.dtype} {img.shape}")
    return img
