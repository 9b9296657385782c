"""Image, depth-map, and mask I/O plus the luma transform.

Pixel conventions used throughout the package:

* images are ``(H, W, 3)`` uint8 RGB arrays,
* depth maps are ``(H, W)`` uint8 with larger values nearer to the camera,
* masks are ``(H, W)`` bool arrays, True where a pixel is known and False
  inside holes.  On disk a mask is a binary PGM with 0 = hole, 255 = known.

Only lossless 8-bit formats are supported: PNG, binary PPM (P6), and binary
PGM (P5).  A PGM loaded as an image is replicated to three identical
channels.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from .errors import CorruptFileError, UnsupportedFormatError

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"

# BT.601 full-range luma weights (R, G, B).
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def load_image(path: str | Path) -> np.ndarray:
    """Load a PNG/PPM/PGM file as an ``(H, W, 3)`` uint8 RGB array.

    Grayscale input is replicated across the three channels.

    Raises:
        OSError: unreadable file.
        UnsupportedFormatError: the file is not PNG, P6, or P5.
        CorruptFileError: recognized format with a broken header or payload.
    """
    data = Path(path).read_bytes()
    if data.startswith(_PNG_MAGIC):
        arr = _decode_png(data, path)
        if arr.ndim == 2:
            arr = np.repeat(arr[:, :, None], 3, axis=2)
        elif arr.shape[2] == 4:
            arr = arr[:, :, :3]
        return np.ascontiguousarray(arr)
    if data[:2] in (b"P6", b"P5"):
        arr = _decode_pnm(data, path)
        if arr.ndim == 2:
            arr = np.repeat(arr[:, :, None], 3, axis=2)
        return np.ascontiguousarray(arr)
    raise UnsupportedFormatError(
        f"{path}: unsupported format (expected PNG, binary PPM, or binary PGM)"
    )


def load_depth(path: str | Path) -> np.ndarray:
    """Load an 8-bit grayscale file as an ``(H, W)`` uint8 depth map.

    The stored convention is kept: larger value = closer to the camera.
    Multi-channel input is rejected.
    """
    data = Path(path).read_bytes()
    if data.startswith(_PNG_MAGIC):
        arr = _decode_png(data, path)
        if arr.ndim != 2:
            raise UnsupportedFormatError(
                f"{path}: depth map must be single-channel, got {arr.shape[2]} channels"
            )
        return arr
    if data[:2] == b"P5":
        return _decode_pnm(data, path)
    if data[:2] == b"P6":
        raise UnsupportedFormatError(
            f"{path}: depth map must be single-channel, got a 3-channel PPM"
        )
    raise UnsupportedFormatError(
        f"{path}: unsupported format (expected PNG or binary PGM)"
    )


def load_mask(path: str | Path) -> np.ndarray:
    """Load a mask file as an ``(H, W)`` bool array, True = known pixel."""
    return load_depth(path) > 127


def save_image(img: np.ndarray, path: str | Path) -> None:
    """Save an ``(H, W, 3)`` or ``(H, W)`` uint8 array losslessly.

    The file format is chosen by extension: ``.png``, ``.ppm`` (3-channel
    only), or ``.pgm`` (single-channel only).
    """
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise ValueError(f"expected uint8 samples, got {img.dtype}")
    if img.ndim == 3 and img.shape[2] == 3:
        gray = False
    elif img.ndim == 2:
        gray = True
    else:
        raise ValueError(f"expected (H, W, 3) or (H, W) array, got shape {img.shape}")

    suffix = Path(path).suffix.lower()
    if suffix == ".png":
        PILImage.fromarray(img, mode="L" if gray else "RGB").save(path, format="PNG")
    elif suffix == ".ppm":
        if gray:
            raise ValueError("PPM requires a 3-channel image; use .pgm or .png")
        _write_pnm(img, path, b"P6")
    elif suffix == ".pgm":
        if not gray:
            raise ValueError("PGM requires a single-channel image; use .ppm or .png")
        _write_pnm(img, path, b"P5")
    else:
        raise UnsupportedFormatError(f"{path}: unsupported output extension {suffix!r}")


def save_depth(depth: np.ndarray, path: str | Path) -> None:
    """Save an ``(H, W)`` uint8 depth map (PGM or grayscale PNG)."""
    save_image(depth, path)


def save_mask(mask: np.ndarray, path: str | Path) -> None:
    """Save a bool mask as 0 = hole, 255 = known."""
    save_image(np.where(mask, 255, 0).astype(np.uint8), path)


def rgb_to_luma(img: np.ndarray) -> np.ndarray:
    """BT.601 full-range luma, ``Y = 0.299 R + 0.587 G + 0.114 B``.

    Returns an ``(H, W)`` float64 array in [0, 255] for uint8 input.
    """
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got shape {img.shape}")
    r, g, b = LUMA_WEIGHTS
    f = img.astype(np.float64)
    return r * f[:, :, 0] + g * f[:, :, 1] + b * f[:, :, 2]


def _decode_png(data: bytes, path: str | Path) -> np.ndarray:
    try:
        with PILImage.open(io.BytesIO(data)) as im:
            im.load()
            if im.mode not in ("L", "RGB", "RGBA", "P"):
                raise UnsupportedFormatError(
                    f"{path}: unsupported PNG mode {im.mode!r} (8-bit L/RGB only)"
                )
            if im.mode == "P":
                im = im.convert("RGB")
            return np.asarray(im)
    except UnidentifiedImageError as exc:
        raise CorruptFileError(f"{path}: corrupt PNG header") from exc
    except (OSError, SyntaxError, ValueError) as exc:
        raise CorruptFileError(f"{path}: corrupt PNG data ({exc})") from exc


def _decode_pnm(data: bytes, path: str | Path) -> np.ndarray:
    """Decode binary PPM (P6) or PGM (P5) bytes."""
    magic = data[:2]
    channels = 3 if magic == b"P6" else 1
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        # skip whitespace and '#' comments between header tokens
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            eol = data.find(b"\n", pos)
            pos = len(data) if eol < 0 else eol + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        token = data[start:pos]
        if not token.isdigit():
            raise CorruptFileError(f"{path}: corrupt PNM header near byte {start}")
        fields.append(int(token))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise CorruptFileError(f"{path}: corrupt PNM header (size {width}x{height})")
    if maxval != 255:
        raise UnsupportedFormatError(
            f"{path}: only 8-bit PNM supported (maxval 255, got {maxval})"
        )
    pos += 1  # single whitespace byte after maxval
    expected = width * height * channels
    payload = data[pos : pos + expected]
    if len(payload) < expected:
        raise CorruptFileError(
            f"{path}: truncated PNM payload ({len(payload)} of {expected} bytes)"
        )
    arr = np.frombuffer(payload, dtype=np.uint8)
    if channels == 3:
        return arr.reshape(height, width, 3).copy()
    return arr.reshape(height, width).copy()


def _write_pnm(img: np.ndarray, path: str | Path, magic: bytes) -> None:
    h, w = img.shape[:2]
    header = magic + f"\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.tobytes())
