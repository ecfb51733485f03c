"""Binary tile container: lossless float32 raster + JSON sidecar header.

Layout (all integers little-endian):

    bytes 0..3    magic ``EOVT``
    bytes 4..5    format version, u16 (currently 1)
    bytes 6..9    header length N, u32
    bytes 10..    N bytes of UTF-8 JSON: {C, H, W, wavelengths_nm,
                  modality, date, value_space}
    then          C*H*W float32 values, channel-major

The format is deliberately dumb: language-neutral, seekable, and bit-exact
round-trippable, which the tests rely on.
"""

from __future__ import annotations

import datetime as dt
import json
import struct
from pathlib import Path

import numpy as np
import torch

from ..exceptions import TileFormatError
from .types import Modality, MultispectralImage, ValueSpace, WavelengthProfile

MAGIC = b"EOVT"
VERSION = 1


def save_tile(img: MultispectralImage, path: str | Path) -> None:
    """Write a tile container; atomic via write-temp-then-rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    c, h, w = img.pixels.shape
    header = {
        "C": c,
        "H": h,
        "W": w,
        "wavelengths_nm": list(img.wavelengths.centers),
        "modality": img.modality.value,
        "date": img.acquisition_date.isoformat() if img.acquisition_date else None,
        "value_space": img.value_space.value,
    }
    header_bytes = json.dumps(header).encode("utf-8")
    payload = img.pixels.detach().to(torch.float32).contiguous().numpy()
    payload_bytes = payload.astype("<f4", copy=False).tobytes()

    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<H", VERSION))
        f.write(struct.pack("<I", len(header_bytes)))
        f.write(header_bytes)
        f.write(payload_bytes)
    tmp.replace(path)


def read_header(path: str | Path) -> dict:
    """Parse just the JSON header (cheap shape/metadata inspection)."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise TileFormatError(f"{path}: bad magic {magic!r}")
        raw = f.read(2)
        if len(raw) != 2:
            raise TileFormatError(f"{path}: truncated version field")
        (version,) = struct.unpack("<H", raw)
        if version != VERSION:
            raise TileFormatError(f"{path}: unsupported container version {version}")
        raw = f.read(4)
        if len(raw) != 4:
            raise TileFormatError(f"{path}: truncated header length")
        (hlen,) = struct.unpack("<I", raw)
        header_bytes = f.read(hlen)
        if len(header_bytes) != hlen:
            raise TileFormatError(f"{path}: truncated header")
        try:
            header = json.loads(header_bytes.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as err:
            raise TileFormatError(f"{path}: corrupt header: {err}") from err
    for key in ("C", "H", "W", "wavelengths_nm", "modality", "value_space"):
        if key not in header:
            raise TileFormatError(f"{path}: header missing field {key!r}")
    return header


def load_tile(path: str | Path) -> MultispectralImage:
    path = Path(path)
    header = read_header(path)
    c, h, w = int(header["C"]), int(header["H"]), int(header["W"])
    if len(header["wavelengths_nm"]) != c:
        raise TileFormatError(f"{path}: header C={c} but {len(header['wavelengths_nm'])} wavelengths")

    with open(path, "rb") as f:
        f.seek(6)
        (hlen,) = struct.unpack("<I", f.read(4))
        f.seek(10 + hlen)
        payload = f.read()

    expected = c * h * w * 4
    if len(payload) < expected:
        raise TileFormatError(
            f"{path}: payload holds {len(payload)} bytes, header promises {expected}"
        )
    if len(payload) > expected:
        raise TileFormatError(f"{path}: trailing bytes after payload")

    arr = np.frombuffer(payload, dtype="<f4", count=c * h * w).reshape(c, h, w)
    pixels = torch.from_numpy(arr.copy())
    if not torch.isfinite(pixels).all():
        raise TileFormatError(f"{path}: non-finite pixel values")

    date = header.get("date")
    return MultispectralImage(
        pixels=pixels,
        wavelengths=WavelengthProfile(tuple(header["wavelengths_nm"])),
        modality=Modality(header["modality"]),
        acquisition_date=dt.date.fromisoformat(date) if date else None,
        value_space=ValueSpace(header["value_space"]),
    )
