"""PNG raster IO on numpy arrays (grayscale (H, W) or RGB (H, W, 3) uint8)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ValidationError

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


def read_image(path: str | Path) -> np.ndarray:
    with Image.open(path) as img:
        if img.mode in ("L", "RGB"):
            arr = np.asarray(img)
        elif img.mode in ("I", "I;16", "F", "LA", "P"):
            arr = np.asarray(img.convert("L"))
        else:
            arr = np.asarray(img.convert("RGB"))
    return arr.astype(np.uint8, copy=False)


def write_image(image: np.ndarray, path: str | Path) -> None:
    image = np.asarray(image)
    if image.dtype != np.uint8:
        raise ValidationError(f"expected uint8 image, got {image.dtype}")
    if image.ndim == 2:
        pil = Image.fromarray(image, mode="L")
    elif image.ndim == 3 and image.shape[2] == 3:
        pil = Image.fromarray(image, mode="RGB")
    else:
        raise ValidationError(f"unsupported image shape {image.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pil.save(path, format="PNG")


def list_images(directory: str | Path) -> list[Path]:
    directory = Path(directory)
    return sorted(
        p for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
    )
