"""Grayscale image grid, Sobel gradients, bilinear sampling and rotated
square patches.

Patch convention: cell (i, j) of an N x N patch samples the global point

    center + R(angle) @ (j - (N-1)/2, i - (N-1)/2)

so row index i advances along R(angle) @ (0, 1). A curve with tangent angle
phi crosses the patch top to bottom when angle = phi - pi/2.
"""
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ImageFormatError

logger = logging.getLogger(__name__)

LUMA = np.array([0.299, 0.587, 0.114])
MIN_PATCH_SIDE = 8


@dataclass(frozen=True)
class ImageGrid:
    intensities: np.ndarray  # (height, width), float64 in [0, 1]

    def __post_init__(self):
        arr = np.asarray(self.intensities, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ImageFormatError(f"image must be a non-empty 2D grid, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
            raise ImageFormatError("intensities must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "intensities", arr)

    @property
    def width(self):
        return self.intensities.shape[1]

    @property
    def height(self):
        return self.intensities.shape[0]


@dataclass(frozen=True)
class GradField:
    magnitudes: np.ndarray  # (height, width), normalized to max 1

    @property
    def width(self):
        return self.magnitudes.shape[1]

    @property
    def height(self):
        return self.magnitudes.shape[0]


def _read_header(data):
    """Returns (magic, width, height, maxval, payload_offset)."""
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < 4:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ImageFormatError("malformed header: unexpected end of file")
        tokens.append(data[start:pos])
    if pos >= n or not data[pos:pos + 1].isspace():
        raise ImageFormatError("malformed header: missing separator before payload")
    magic = tokens[0].decode("ascii", "replace")
    if magic not in ("P5", "P6"):
        raise ImageFormatError(f"malformed header: unsupported magic {magic!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as e:
        raise ImageFormatError(f"malformed header: {e}") from e
    if width < 1 or height < 1:
        raise ImageFormatError(f"malformed header: bad dimensions {width}x{height}")
    return magic, width, height, maxval, pos + 1


def load_image(path):
    """Read binary PGM (P5) or PPM (P6, converted to luma) with maxval 255."""
    data = Path(path).read_bytes()
    magic, width, height, maxval, offset = _read_header(data)
    if maxval != 255:
        raise ImageFormatError(f"unsupported maxval {maxval}")
    channels = 1 if magic == "P5" else 3
    expected = width * height * channels
    payload = np.frombuffer(data, dtype=np.uint8, count=min(expected, len(data) - offset), offset=offset)
    if payload.size < expected:
        raise ImageFormatError(f"truncated payload: expected {expected} bytes, got {payload.size}")
    if channels == 1:
        values = payload.reshape(height, width).astype(np.float64) / 255.0
    else:
        rgb = payload.reshape(height, width, 3).astype(np.float64)
        values = (rgb @ LUMA) / 255.0
    logger.debug("loaded %s %dx%d from %s", magic, width, height, path)
    return ImageGrid(np.clip(values, 0.0, 1.0))


def save_pgm(img, path):
    pixels = np.rint(img.intensities * 255.0).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P5\n{img.width} {img.height}\n255\n".encode("ascii"))
        f.write(pixels.tobytes())


def save_ppm(rgb, path, comment=None):
    rgb = np.asarray(rgb, dtype=np.uint8)
    height, width = rgb.shape[:2]
    header = "P6\n"
    if comment:
        header += "".join(f"# {line}\n" for line in comment.splitlines())
    header += f"{width} {height}\n255\n"
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(np.ascontiguousarray(rgb).tobytes())


def gradient_magnitude(img):
    """Sobel 3x3 with replicated borders, L2 magnitude, scaled to max 1."""
    values = img.intensities
    gx = ndimage.sobel(values, axis=1, mode="nearest")
    gy = ndimage.sobel(values, axis=0, mode="nearest")
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak > 0:
        mag = mag / peak
    return GradField(mag)


def _bilinear(field, xs, ys):
    h, w = field.shape
    xs = np.clip(np.asarray(xs, dtype=np.float64), 0.0, w - 1)
    ys = np.clip(np.asarray(ys, dtype=np.float64), 0.0, h - 1)
    coords = np.stack([ys.ravel(), xs.ravel()])
    out = ndimage.map_coordinates(field, coords, order=1, mode="nearest", prefilter=False)
    return out.reshape(xs.shape)


def sample_bilinear(img, x, y):
    return float(_bilinear(img.intensities, np.array([x]), np.array([y]))[0])


def _rotation(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class SquarePatch:
    side: int
    center: tuple
    angle: float
    pixels: np.ndarray
    grads: np.ndarray

    @classmethod
    def from_grads(cls, grads, center=(0.0, 0.0), angle=0.0):
        grads = np.asarray(grads, dtype=np.float64)
        if grads.ndim != 2 or min(grads.shape) < 1:
            raise ImageFormatError(f"patch gradients must be a 2D matrix, got {grads.shape}")
        return cls(grads.shape[0], tuple(map(float, center)), float(angle), grads.copy(), grads)

    @property
    def shape(self):
        # oracle patches built from a gradient matrix may be rectangular
        return self.grads.shape if self.grads is not None else (self.side, self.side)

    def _halves(self):
        rows, cols = self.shape
        return (rows - 1) / 2.0, (cols - 1) / 2.0

    def to_global(self, i, j):
        """Vectorized patch -> global map; i, j may be arrays."""
        hi, hj = self._halves()
        u = np.asarray(j, dtype=np.float64) - hj
        w = np.asarray(i, dtype=np.float64) - hi
        c, s = np.cos(self.angle), np.sin(self.angle)
        x = self.center[0] + c * u - s * w
        y = self.center[1] + s * u + c * w
        return x, y

    def to_patch(self, x, y):
        hi, hj = self._halves()
        dx = np.asarray(x, dtype=np.float64) - self.center[0]
        dy = np.asarray(y, dtype=np.float64) - self.center[1]
        c, s = np.cos(self.angle), np.sin(self.angle)
        j = c * dx + s * dy + hj
        i = -s * dx + c * dy + hi
        return i, j


def patch_to_global(patch, i, j):
    x, y = patch.to_global(i, j)
    return float(x), float(y)


def global_to_patch(patch, x, y):
    i, j = patch.to_patch(x, y)
    return float(i), float(j)


def extract_patch(img, grads, center, angle, side):
    side = int(side)
    if side < MIN_PATCH_SIDE:
        raise ImageFormatError(f"patch side must be >= {MIN_PATCH_SIDE}, got {side}")
    rows, cols = np.mgrid[0:side, 0:side]
    probe = SquarePatch(side, (float(center[0]), float(center[1])), float(angle), None, None)
    xs, ys = probe.to_global(rows, cols)
    pixels = _bilinear(img.intensities, xs, ys)
    patch_grads = _bilinear(grads.magnitudes, xs, ys)
    peak = patch_grads.max()
    if peak > 0:
        patch_grads = patch_grads / peak
    return SquarePatch(side, probe.center, probe.angle, pixels, patch_grads)
