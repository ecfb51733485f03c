import datetime as dt

import pytest
import torch

from satvae.data import (
    DatasetManifest,
    ManifestEntry,
    Modality,
    MultispectralImage,
    Split,
    ValueSpace,
    WavelengthProfile,
    save_tile,
)


def image_from(pixels, wavelengths, modality=Modality.OTHER,
               value_space=ValueSpace.RAW, date=None):
    """Wrap a tensor/nested list into a MultispectralImage."""
    px = torch.as_tensor(pixels, dtype=torch.float32)
    return MultispectralImage(
        pixels=px,
        wavelengths=WavelengthProfile(tuple(wavelengths)),
        modality=modality,
        acquisition_date=date,
        value_space=value_space,
    )


def write_corpus(tmp_path, tiles, modality=Modality.S2L2A, splits=None,
                 lons=None, lats=None, dates=None):
    """Save images as tiles and build a manifest around them."""
    entries = []
    for i, img in enumerate(tiles):
        path = tmp_path / f"tile_{i:03d}.eovt"
        save_tile(img, path)
        entries.append(ManifestEntry(
            tile_path=str(path),
            modality=img.modality if modality is None else modality,
            acquisition_date=dates[i] if dates else img.acquisition_date,
            lon=lons[i] if lons else float(i),
            lat=lats[i] if lats else 0.0,
            split=splits[i] if splits else Split.TRAIN,
        ))
    return DatasetManifest(entries=entries)


def fd_gradient(f, param: torch.Tensor, indices, h: float = 1e-6):
    """Central finite differences of scalar f() w.r.t. selected coordinates."""
    grads = []
    flat = param.data.view(-1)
    for idx in indices:
        orig = flat[idx].item()
        flat[idx] = orig + h
        up = float(f())
        flat[idx] = orig - h
        down = float(f())
        flat[idx] = orig
        grads.append((up - down) / (2 * h))
    return torch.tensor(grads, dtype=torch.float64)


def fd_check(f, params, n_coords=6, h=1e-6, grad_floor=1e-8):
    """Max relative error between autograd and central finite differences.

    For each tensor the largest-|gradient| coordinates are probed (tiny
    gradients drown in FD roundoff); tensors whose whole gradient is below
    ``grad_floor`` are only checked for FD agreement at the same scale.
    """
    for p in params:
        p.grad = None
    loss = f()
    loss.backward()
    worst = 0.0
    for p in params:
        grad = p.grad.detach().view(-1).to(torch.float64)
        n = min(n_coords, p.numel())
        indices = torch.argsort(grad.abs(), descending=True)[:n].tolist()
        analytic = grad[indices]
        numeric = fd_gradient(f, p, indices, h=h)
        scale = max(float(torch.linalg.vector_norm(analytic)),
                    float(torch.linalg.vector_norm(numeric)))
        if scale < grad_floor:
            continue  # both negligible: consistent by any reasonable reading
        err = float(torch.linalg.vector_norm(analytic - numeric)) / scale
        worst = max(worst, err)
    return worst


@pytest.fixture
def rng():
    return torch.Generator().manual_seed(1234)
