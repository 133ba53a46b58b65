"""Color image handling, pure-quaternion encoding, and quality metrics.

An RGB image becomes a quaternion matrix by loading the red, green and blue
planes into the three imaginary component planes and keeping the real plane
zero; such matrices are quasi non-negative by construction.

The quality report follows the benchmark convention used throughout this
package: ``mse`` is the *root* mean squared entry modulus (note: a root,
despite the name) and ``psnr_db = 20 * log10(255 / mse)``.
:func:`conventional_psnr` gives the per-channel-sample variant for sanity
comparisons.

Binary PPM (P6, maxval 255) is the canonical interchange format and round
trips bit-exactly; PNG is an optional convenience codec via Pillow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .qmatrix import QMatrix, ShapeError

__all__ = [
    "ColorImage",
    "QualityReport",
    "PpmParseError",
    "to_quaternion",
    "from_quaternion",
    "psnr",
    "conventional_psnr",
    "load_ppm",
    "save_ppm",
    "load_image",
    "save_image",
    "downscale",
    "synthetic_color_image",
]

PEAK = 255.0


class PpmParseError(ValueError):
    """Malformed PPM input; carries the byte offset of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class ColorImage:
    """An RGB image as three float planes clamped to [0, 255].

    Planes are ``height x width`` and immutable after construction.
    """

    __slots__ = ("r", "g", "b")

    def __init__(self, r, g, b):
        planes = []
        for p in (r, g, b):
            arr = np.clip(np.array(p, dtype=np.float64, copy=True), 0.0, PEAK)
            if arr.ndim != 2:
                raise ShapeError("image planes must be 2-D")
            arr.setflags(write=False)
            planes.append(arr)
        if not (planes[0].shape == planes[1].shape == planes[2].shape):
            raise ShapeError("image planes must share one shape")
        self.r, self.g, self.b = planes

    @property
    def height(self) -> int:
        return self.r.shape[0]

    @property
    def width(self) -> int:
        return self.r.shape[1]

    @property
    def planes(self):
        return (self.r, self.g, self.b)

    def gray(self) -> np.ndarray:
        """Single-channel view: arithmetic mean of the three planes."""
        return (self.r + self.g + self.b) / 3.0

    def same_pixels(self, other: "ColorImage") -> bool:
        return (self.r.shape == other.r.shape
                and all(np.array_equal(a, b)
                        for a, b in zip(self.planes, other.planes)))

    def __repr__(self):
        return f"ColorImage({self.width}x{self.height})"


@dataclass(frozen=True)
class QualityReport:
    """Reconstruction quality: root-mean-square modulus error, PSNR, and
    the imaginary-part residual ``res = ||Im X - Im Z||_F``."""

    mse: float
    psnr_db: float
    res: float


def to_quaternion(img: ColorImage) -> QMatrix:
    """Encode an image as a pure-imaginary quasi non-negative matrix."""
    return QMatrix(np.zeros_like(img.r), img.r, img.g, img.b)


def from_quaternion(q: QMatrix) -> ColorImage:
    """Decode for display: drop the real plane, clamp channels to [0, 255]."""
    return ColorImage(q.a1, q.a2, q.a3)


def psnr(x: QMatrix, z: QMatrix) -> QualityReport:
    """Quality of ``z`` against reference ``x`` (shapes must match).

    ``mse = sqrt(mean over entries of |x_st - z_st|^2)`` and
    ``psnr_db = 20 * log10(255 / mse)``, infinite for an exact match.
    """
    if x.shape != z.shape:
        raise ShapeError(f"shape mismatch: {x.shape} vs {z.shape}")
    diff = x - z
    count = x.a0.size
    mse = math.sqrt(diff.sqnorm() / count) if count else 0.0
    psnr_db = math.inf if mse == 0.0 else 20.0 * math.log10(PEAK / mse)
    res = (x.imag() - z.imag()).norm()
    return QualityReport(mse=mse, psnr_db=psnr_db, res=res)


def conventional_psnr(x: QMatrix, z: QMatrix) -> float:
    """PSNR with the error averaged over all 3*m*n channel samples."""
    if x.shape != z.shape:
        raise ShapeError(f"shape mismatch: {x.shape} vs {z.shape}")
    diff = x - z
    # Image encodings leave the real plane empty; the sample count is the
    # three channel planes.
    ms = diff.sqnorm() / (3 * x.a0.size)
    if ms == 0.0:
        return math.inf
    return 10.0 * math.log10(PEAK * PEAK / ms)


# ---------------------------------------------------------------------------
# binary PPM (P6) codec
# ---------------------------------------------------------------------------

def _skip_header_space(data: bytes, pos: int) -> int:
    # PNM whitespace, with '#' comments running to end of line.
    n = len(data)
    while pos < n:
        c = data[pos:pos + 1]
        if c in b" \t\r\n":
            pos += 1
        elif c == b"#":
            while pos < n and data[pos:pos + 1] not in b"\r\n":
                pos += 1
        else:
            break
    return pos


def _read_header_int(data: bytes, pos: int, what: str):
    pos = _skip_header_space(data, pos)
    start = pos
    while pos < len(data) and data[pos:pos + 1].isdigit():
        pos += 1
    if pos == start:
        raise PpmParseError(f"expected {what}", start)
    return int(data[start:pos]), pos


def load_ppm(path) -> ColorImage:
    """Read a binary PPM (P6) file with maxval 255, bit-exactly."""
    data = Path(path).read_bytes()
    if data[:2] != b"P6":
        raise PpmParseError("expected magic 'P6'", 0)
    width, pos = _read_header_int(data, 2, "width")
    height, pos = _read_header_int(data, pos, "height")
    maxval, pos = _read_header_int(data, pos, "maxval")
    if width <= 0 or height <= 0:
        raise PpmParseError(f"bad dimensions {width}x{height}", 2)
    if maxval != 255:
        raise PpmParseError(f"unsupported maxval {maxval} (only 255)", pos)
    if pos >= len(data) or data[pos:pos + 1] not in b" \t\r\n":
        raise PpmParseError("expected single whitespace after maxval", pos)
    pos += 1
    need = width * height * 3
    payload = data[pos:pos + need]
    if len(payload) < need:
        raise PpmParseError(
            f"truncated payload: need {need} bytes, found {len(payload)}",
            pos + len(payload))
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
    return ColorImage(pixels[:, :, 0], pixels[:, :, 1], pixels[:, :, 2])


def save_ppm(img: ColorImage, path) -> None:
    """Write a binary PPM (P6) file; save-then-load is the identity."""
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    pixels = np.empty((img.height, img.width, 3), dtype=np.uint8)
    for c, plane in enumerate(img.planes):
        pixels[:, :, c] = np.rint(plane).astype(np.uint8)
    Path(path).write_bytes(header + pixels.tobytes())


def _load_png(path) -> ColorImage:
    from PIL import Image

    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return ColorImage(arr[:, :, 0], arr[:, :, 1], arr[:, :, 2])


def _save_png(img: ColorImage, path) -> None:
    from PIL import Image

    pixels = np.stack([np.rint(p).astype(np.uint8) for p in img.planes],
                      axis=2)
    Image.fromarray(pixels, mode="RGB").save(path, format="PNG")


def load_image(path) -> ColorImage:
    """Load by extension: .ppm natively, .png via Pillow."""
    suffix = Path(path).suffix.lower()
    if suffix == ".ppm":
        return load_ppm(path)
    if suffix == ".png":
        return _load_png(path)
    raise ValueError(f"unsupported image format {suffix!r} (use .ppm or .png)")


def save_image(img: ColorImage, path) -> None:
    suffix = Path(path).suffix.lower()
    if suffix == ".ppm":
        save_ppm(img, path)
    elif suffix == ".png":
        _save_png(img, path)
    else:
        raise ValueError(
            f"unsupported image format {suffix!r} (use .ppm or .png)")


# ---------------------------------------------------------------------------
# helpers for experiments
# ---------------------------------------------------------------------------

def downscale(img: ColorImage, width: int, height: int) -> ColorImage:
    """Nearest-neighbor downscale to ``width x height``."""
    if width <= 0 or height <= 0:
        raise ValueError("target size must be positive")
    rows = (np.arange(height) * img.height) // height
    cols = (np.arange(width) * img.width) // width
    return ColorImage(*(p[np.ix_(rows, cols)] for p in img.planes))


def _smooth_profile(rng, n: int) -> np.ndarray:
    raw = rng.random(n)
    kernel = np.ones(max(3, n // 8))
    prof = np.convolve(raw, kernel / kernel.size, mode="same")
    return prof + 0.05


def synthetic_color_image(width: int, height: int, seed: int,
                          rank: int = 6) -> ColorImage:
    """Deterministic smooth low-rank test image scaled into [0, 255]."""
    rng = np.random.default_rng(seed)
    planes = []
    for _ in range(3):
        m = np.zeros((height, width))
        for _ in range(rank):
            u = _smooth_profile(rng, height)
            v = _smooth_profile(rng, width)
            m += np.outer(u, v)
        m *= PEAK / m.max()
        planes.append(m)
    return ColorImage(*planes)
