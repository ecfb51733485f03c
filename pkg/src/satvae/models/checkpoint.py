"""Single-file checkpoint archive.

Layout: magic ``SVCP``, u32 little-endian manifest length, UTF-8 JSON
manifest {format_version, configs, tensors: name -> {dtype, shape, offset}},
then raw little-endian float32 blobs at the stated offsets (relative to the
end of the manifest). Round-trips are bit-exact for float32 tensors.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import torch

from ..exceptions import TileFormatError
from .backbone import VAEConfig
from .hypernet import HypernetConfig
from .vae import VAEModel

MAGIC = b"SVCP"
FORMAT_VERSION = 1


def save_checkpoint(
    path: str | Path,
    configs: dict,
    tensors: dict[str, torch.Tensor],
) -> None:
    """Atomic write of configs + named float32 tensors."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    table = {}
    blobs = []
    offset = 0
    for name, tensor in tensors.items():
        arr = tensor.detach().to(torch.float32).contiguous().numpy().astype("<f4", copy=False)
        table[name] = {"dtype": "float32", "shape": list(arr.shape), "offset": offset}
        raw = arr.tobytes()
        blobs.append(raw)
        offset += len(raw)

    manifest = {"format_version": FORMAT_VERSION, "configs": configs, "tensors": table}
    manifest_bytes = json.dumps(manifest).encode("utf-8")

    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(manifest_bytes)))
        f.write(manifest_bytes)
        for raw in blobs:
            f.write(raw)
    tmp.replace(path)


def load_checkpoint(path: str | Path) -> tuple[dict, dict[str, torch.Tensor]]:
    path = Path(path)
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise TileFormatError(f"{path}: not a checkpoint archive")
        raw = f.read(4)
        if len(raw) != 4:
            raise TileFormatError(f"{path}: truncated manifest length")
        (mlen,) = struct.unpack("<I", raw)
        manifest_bytes = f.read(mlen)
        if len(manifest_bytes) != mlen:
            raise TileFormatError(f"{path}: truncated manifest")
        manifest = json.loads(manifest_bytes.decode("utf-8"))
        if manifest.get("format_version") != FORMAT_VERSION:
            raise TileFormatError(f"{path}: unsupported checkpoint version")
        blob = f.read()

    tensors = {}
    for name, meta in manifest["tensors"].items():
        shape = tuple(meta["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = meta["offset"]
        end = start + count * 4
        if end > len(blob):
            raise TileFormatError(f"{path}: tensor {name!r} extends past end of file")
        arr = np.frombuffer(blob[start:end], dtype="<f4", count=count).reshape(shape)
        tensors[name] = torch.from_numpy(arr.copy())
    return manifest["configs"], tensors


def save_vae(path: str | Path, model: VAEModel, extra: dict | None = None) -> None:
    configs = {
        "kind": "vae",
        "vae": model.vae_cfg.to_dict(),
        "hypernet": model.hyper_cfg.to_dict(),
    }
    if extra:
        configs.update(extra)
    save_checkpoint(path, configs, dict(model.state_dict()))


def load_vae(path: str | Path) -> tuple[VAEModel, dict]:
    configs, tensors = load_checkpoint(path)
    if configs.get("kind") != "vae":
        raise TileFormatError(f"{path}: checkpoint is not a VAE (kind={configs.get('kind')!r})")
    model = VAEModel(
        VAEConfig.from_dict(configs["vae"]),
        HypernetConfig.from_dict(configs["hypernet"]),
    )
    model.load_state_dict(tensors)
    return model, configs
