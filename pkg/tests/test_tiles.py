import datetime as dt
import json
import struct

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from satvae.data import Modality, ValueSpace, load_tile, read_header, save_tile
from satvae.exceptions import TileFormatError

from conftest import image_from


def test_roundtrip_bit_identical(tmp_path):
    img = image_from(torch.randn(3, 8, 6), (665.0, 560.0, 490.0),
                     modality=Modality.RGB, date=dt.date(2022, 1, 25))
    path = tmp_path / "tile.eovt"
    save_tile(img, path)
    loaded = load_tile(path)
    assert torch.equal(loaded.pixels, img.pixels)
    assert loaded.wavelengths == img.wavelengths
    assert loaded.modality is Modality.RGB
    assert loaded.acquisition_date == dt.date(2022, 1, 25)
    assert loaded.value_space is ValueSpace.RAW


@settings(max_examples=20, deadline=None)
@given(
    c=st.integers(min_value=1, max_value=5),
    h=st.integers(min_value=1, max_value=9),
    w=st.integers(min_value=1, max_value=9),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_roundtrip_property(tmp_path_factory, c, h, w, seed):
    gen = torch.Generator().manual_seed(seed)
    pixels = torch.randn(c, h, w, generator=gen) * 1e4
    img = image_from(pixels, [500.0 + 10 * i for i in range(c)])
    path = tmp_path_factory.mktemp("tiles") / "t.eovt"
    save_tile(img, path)
    assert torch.equal(load_tile(path).pixels, pixels)


def test_truncated_payload_rejected(tmp_path):
    img = image_from(torch.randn(2, 4, 4), (665.0, 842.0))
    path = tmp_path / "tile.eovt"
    save_tile(img, path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(TileFormatError):
        load_tile(path)


def test_header_channel_mismatch_rejected(tmp_path):
    # Header promises C=4, payload only carries 3 channels worth of floats.
    header = {
        "C": 4, "H": 2, "W": 2,
        "wavelengths_nm": [490.0, 560.0, 665.0, 842.0],
        "modality": "RGBN", "date": None, "value_space": "RAW",
    }
    hb = json.dumps(header).encode()
    payload = b"\x00" * (3 * 2 * 2 * 4)
    path = tmp_path / "bad.eovt"
    path.write_bytes(b"EOVT" + struct.pack("<H", 1) + struct.pack("<I", len(hb)) + hb + payload)
    with pytest.raises(TileFormatError):
        load_tile(path)


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.eovt"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(TileFormatError):
        load_tile(path)


def test_corrupt_header_rejected(tmp_path):
    hb = b"{ not json"
    path = tmp_path / "bad.eovt"
    path.write_bytes(b"EOVT" + struct.pack("<H", 1) + struct.pack("<I", len(hb)) + hb)
    with pytest.raises(TileFormatError):
        read_header(path)


def test_unreadable_path():
    with pytest.raises(FileNotFoundError):
        load_tile("/nonexistent/nowhere.eovt")


def test_header_inspection_cheap(tmp_path):
    img = image_from(torch.zeros(2, 16, 16), (665.0, 842.0), modality=Modality.S2L2A)
    path = tmp_path / "t.eovt"
    save_tile(img, path)
    header = read_header(path)
    assert header["C"] == 2 and header["H"] == 16 and header["W"] == 16
    assert header["modality"] == "S2L2A"
