"""Image rasters, PNG ingestion and the signed pixel difference."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError, ShapeMismatch

# Pillow modes accepted as 8-bit grayscale / RGB.
_ACCEPTED_MODES = {"L": 1, "RGB": 3}


@dataclass(frozen=True)
class ImageTensor:
    """An H x W x C raster of intensities in [0, 255], stored row-major.

    The backing array is float64 and made read-only on construction.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise FormatError(f"expected a non-empty (H, W, C) array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise FormatError("image contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 255.0:
            raise FormatError("image values must lie in [0, 255]")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_flat(cls, values, height: int, width: int, channels: int) -> "ImageTensor":
        values = np.asarray(values, dtype=np.float64)
        if values.size != height * width * channels:
            raise FormatError(
                f"{values.size} values cannot fill a {height}x{width}x{channels} image"
            )
        return cls(values.reshape(height, width, channels))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def values(self) -> np.ndarray:
        """Flat (h, w, c) row-major view of the intensities."""
        return self.data.reshape(-1)


@dataclass(frozen=True)
class ImagePair:
    original: ImageTensor
    adversarial: ImageTensor
    pair_id: str = ""

    def __post_init__(self):
        if self.original.shape != self.adversarial.shape:
            raise ShapeMismatch(
                f"pair {self.pair_id!r}: original {self.original.shape} "
                f"vs adversarial {self.adversarial.shape}"
            )

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.original.shape


def make_pair(original, adversarial, pair_id: str = "") -> ImagePair:
    """Build a pair from arrays or tensors."""
    if not isinstance(original, ImageTensor):
        original = ImageTensor(original)
    if not isinstance(adversarial, ImageTensor):
        adversarial = ImageTensor(adversarial)
    return ImagePair(original, adversarial, pair_id)


def diff(pair: ImagePair) -> np.ndarray:
    """Signed per-coordinate difference ``adversarial - original`` (flat)."""
    if pair.original.shape != pair.adversarial.shape:
        raise ShapeMismatch(f"{pair.original.shape} vs {pair.adversarial.shape}")
    return pair.adversarial.values - pair.original.values


def load_png(path) -> ImageTensor:
    """Decode an 8-bit grayscale or RGB PNG without rescaling.

    Palette, alpha, 1-bit and 16-bit images raise :class:`FormatError`.
    Unreadable files raise :class:`OSError`.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head != b"\x89PNG\r\n\x1a\n":
        raise FormatError(f"{path}: not a PNG file")
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode not in _ACCEPTED_MODES:
                raise FormatError(f"{path}: unsupported PNG mode {mode!r} (need 8-bit L or RGB)")
            arr = np.asarray(im, dtype=np.uint8)
    except FormatError:
        raise
    except (OSError, SyntaxError) as exc:
        raise FormatError(f"{path}: cannot decode PNG ({exc})") from exc
    return ImageTensor(arr.astype(np.float64))


def save_png(image: ImageTensor, path) -> None:
    """Write an image as an 8-bit PNG; values must already be integral."""
    arr = image.data
    rounded = np.rint(arr)
    if not np.array_equal(rounded, arr):
        raise FormatError("PNG export needs integer intensities; quantize first")
    arr = rounded.astype(np.uint8)
    if image.channels == 1:
        im = Image.fromarray(arr[:, :, 0])
    elif image.channels == 3:
        im = Image.fromarray(arr)
    else:
        raise FormatError(f"cannot write a {image.channels}-channel PNG")
    im.save(Path(path), format="PNG", optimize=False, compress_level=6)


def quantize(image: ImageTensor) -> ImageTensor:
    """Round intensities to the nearest 8-bit level."""
    return ImageTensor(np.clip(np.rint(image.data), 0, 255))
