"""Dataset augmentation filters and band fusion.

Six dataset-growing operations: horizontal flip, gaussian blur,
flip+blur, Sobel gradient magnitude, difference of gaussians, and
adaptive gaussian threshold. Flip variants carry mirrored label
geometry; the photometric filters inherit labels unchanged.

Border policy is mirror reflection about the edge pixel everywhere.
All arithmetic runs in float64 internally; uint8 conversion rounds
half-up once at the end.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import InvalidParameterError, ValidationError
from .maskio import BBoxNorm, LabelFile, LabelRecord, PolygonNorm

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

FILTER_KINDS = ("fliph", "blur", "flipblur", "sobelxy", "dog", "gaussthresh")


@dataclass(frozen=True)
class AugmentOp:
    """One augmentation with its parameters (validated on construction)."""

    kind: str
    sigma: float = 2.0
    sigma1: float = 1.0
    sigma2: float = 2.0
    block_size: int = 11
    bias: float = 2.0

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise InvalidParameterError(f"unknown augmentation {self.kind!r}")
        if self.kind in ("blur", "flipblur") and self.sigma <= 0:
            raise InvalidParameterError(f"sigma must be > 0, got {self.sigma}")
        if self.kind == "dog":
            if self.sigma1 <= 0 or self.sigma1 >= self.sigma2:
                raise InvalidParameterError(
                    f"need 0 < sigma1 < sigma2, got {self.sigma1}, {self.sigma2}"
                )
        if self.kind == "gaussthresh":
            if self.block_size < 3 or self.block_size % 2 == 0:
                raise InvalidParameterError(
                    f"block_size must be odd and >= 3, got {self.block_size}"
                )

    @property
    def flips_labels(self) -> bool:
        return self.kind in ("fliph", "flipblur")


def _to_float(image: np.ndarray) -> np.ndarray:
    return np.asarray(image, dtype=np.float64)


def _to_uint8(image: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(image + 0.5), 0, 255).astype(np.uint8)


def to_gray(image: np.ndarray) -> np.ndarray:
    """Luma conversion (float64 output); grayscale passes through."""
    arr = _to_float(image)
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[2] == 3:
        r, g, b = LUMA_WEIGHTS
        return r * arr[:, :, 0] + g * arr[:, :, 1] + b * arr[:, :, 2]
    raise ValidationError(f"unsupported image shape {arr.shape}")


def gaussian_kernel(sigma: float, radius: int | None = None) -> np.ndarray:
    """Normalized 1-D gaussian sampled at integer offsets (radius ceil(3s))."""
    if sigma <= 0:
        raise InvalidParameterError(f"sigma must be > 0, got {sigma}")
    if radius is None:
        radius = int(np.ceil(3.0 * sigma))
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    weights = np.exp(-0.5 * (offsets / sigma) ** 2)
    return weights / weights.sum()


def _per_channel(image: np.ndarray, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    arr = _to_float(image)
    if arr.ndim == 2:
        return fn(arr)
    channels = [fn(arr[:, :, c]) for c in range(arr.shape[2])]
    return np.stack(channels, axis=2)


def flip_h(image: np.ndarray) -> np.ndarray:
    """Mirror about the vertical axis."""
    return np.ascontiguousarray(image[:, ::-1])


def flip_labels_h(labels: LabelFile) -> LabelFile:
    """Mirror label geometry: x -> 1-x, polygon order reversed."""
    records = []
    for record in labels.records:
        geom = record.geometry
        if isinstance(geom, BBoxNorm):
            flipped: BBoxNorm | PolygonNorm = replace(geom, cx=1.0 - geom.cx)
        else:
            flipped = PolygonNorm(
                vertices=tuple((1.0 - x, y) for x, y in reversed(geom.vertices))
            )
        records.append(LabelRecord(category_id=record.category_id, geometry=flipped))
    return LabelFile(pair_id=labels.pair_id, records=records)


def gaussian_blur(image: np.ndarray, sigma: float) -> np.ndarray:
    kernel = gaussian_kernel(sigma)
    return _to_uint8(_per_channel(image, lambda ch: kernels.sep_convolve(ch, kernel)))


def sobel_xy(image: np.ndarray) -> np.ndarray:
    """Gradient magnitude of the luma image, clamped to [0, 255]."""
    return _to_uint8(kernels.sobel_magnitude(to_gray(image)))


def dog(image: np.ndarray, sigma1: float, sigma2: float) -> np.ndarray:
    """blur(sigma1) - blur(sigma2), shifted by +128 (both blurs in float)."""
    if sigma1 <= 0 or sigma1 >= sigma2:
        raise InvalidParameterError(f"need 0 < sigma1 < sigma2, got {sigma1}, {sigma2}")
    k1 = gaussian_kernel(sigma1)
    k2 = gaussian_kernel(sigma2)

    def band(ch: np.ndarray) -> np.ndarray:
        return kernels.sep_convolve(ch, k1) - kernels.sep_convolve(ch, k2) + 128.0

    return _to_uint8(_per_channel(image, band))


# sigma matched to the window so the weights taper off inside the block
def _block_sigma(block_size: int) -> float:
    return 0.3 * ((block_size - 1) * 0.5 - 1.0) + 0.8


def gaussian_threshold(image: np.ndarray, block_size: int, bias: float) -> np.ndarray:
    """Binarize against the gaussian-weighted local mean minus bias."""
    if block_size < 3 or block_size % 2 == 0:
        raise InvalidParameterError(f"block_size must be odd and >= 3, got {block_size}")
    gray = to_gray(image)
    kernel = gaussian_kernel(_block_sigma(block_size), radius=block_size // 2)
    local_mean = kernels.sep_convolve(gray, kernel)
    return np.where(gray > local_mean - bias, 255, 0).astype(np.uint8)


def fuse_bands(rgb_image: np.ndarray, lwir_image: np.ndarray, alpha: float = 0.5) -> np.ndarray:
    """Per-channel alpha blend: alpha*rgb + (1-alpha)*lwir, rounded half-up."""
    if not 0.0 <= alpha <= 1.0:
        raise InvalidParameterError(f"alpha must be in [0, 1], got {alpha}")
    rgb = np.asarray(rgb_image)
    lwir = np.asarray(lwir_image)
    if rgb.shape[:2] != lwir.shape[:2]:
        raise ValidationError(f"dimension mismatch: {rgb.shape[:2]} vs {lwir.shape[:2]}")
    if rgb.ndim == 3 and lwir.ndim == 2:
        lwir = np.repeat(lwir[:, :, None], rgb.shape[2], axis=2)
    elif rgb.ndim == 2 and lwir.ndim == 3:
        rgb = np.repeat(rgb[:, :, None], lwir.shape[2], axis=2)
    blended = alpha * _to_float(rgb) + (1.0 - alpha) * _to_float(lwir)
    return _to_uint8(blended)


def apply_op(op: AugmentOp, image: np.ndarray) -> np.ndarray:
    if op.kind == "fliph":
        return flip_h(image)
    if op.kind == "blur":
        return gaussian_blur(image, op.sigma)
    if op.kind == "flipblur":
        return gaussian_blur(flip_h(image), op.sigma)
    if op.kind == "sobelxy":
        return sobel_xy(image)
    if op.kind == "dog":
        return dog(image, op.sigma1, op.sigma2)
    return gaussian_threshold(image, op.block_size, op.bias)


def apply_op_labels(op: AugmentOp, labels: LabelFile) -> LabelFile:
    if op.flips_labels:
        return flip_labels_h(labels)
    return LabelFile(pair_id=labels.pair_id, records=list(labels.records))


@dataclass
class DatasetItem:
    name: str
    image: np.ndarray
    labels: LabelFile


def expand_dataset(items: Sequence[DatasetItem], ops: Sequence[AugmentOp]) -> list[DatasetItem]:
    """Originals plus one variant per op, names suffixed with the op tag."""
    out: list[DatasetItem] = []
    for item in items:
        out.append(item)
        for op in ops:
            variant_labels = apply_op_labels(op, item.labels)
            variant_labels.pair_id = f"{item.name}__{op.kind}"
            out.append(
                DatasetItem(
                    name=f"{item.name}__{op.kind}",
                    image=apply_op(op, item.image),
                    labels=variant_labels,
                )
            )
    return out


def ops_from_names(names: Sequence[str], params: dict | None = None) -> list[AugmentOp]:
    """Build AugmentOps from config names, e.g. ["blur", "fliph"]."""
    params = params or {}
    ops = []
    for name in names:
        key = name.strip().lower()
        ops.append(
            AugmentOp(
                kind=key,
                sigma=float(params.get("blur.sigma", 2.0)),
                sigma1=float(params.get("dog.sigma1", 1.0)),
                sigma2=float(params.get("dog.sigma2", 2.0)),
                block_size=int(params.get("gaussthresh.block", 11)),
                bias=float(params.get("gaussthresh.bias", 2.0)),
            )
        )
    return ops
