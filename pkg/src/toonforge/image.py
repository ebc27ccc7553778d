"""RGBA8 raster images and a self-contained PNG codec.

Images are row-major RGBA8 grids in sRGB with non-premultiplied alpha.
PNG output always uses filter type 0 and a fixed zlib level so that equal
pixel data encodes to equal bytes; level 0 emits hand-rolled stored deflate
blocks, which are byte-stable across zlib builds (used for pinned golden
files).
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


class ImageError(ValueError):
    """Malformed image data or incompatible image operands."""


@dataclass
class RasterImage:
    pixels: np.ndarray  # (height, width, 4) uint8

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.ndim != 3 or px.shape[2] != 4:
            raise ImageError(f"expected (h, w, 4) pixel grid, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ImageError("image dimensions must be >= 1")
        self.pixels = px

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def size(self) -> tuple[int, int]:
        return (self.width, self.height)

    @classmethod
    def new(cls, width: int, height: int, fill: tuple[int, int, int, int] = (0, 0, 0, 0)) -> RasterImage:
        px = np.empty((height, width, 4), dtype=np.uint8)
        px[:, :] = fill
        return cls(px)

    def copy(self) -> RasterImage:
        return RasterImage(self.pixels.copy())

    def same_size(self, other: RasterImage) -> bool:
        return self.size == other.size

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RasterImage):
            return NotImplemented
        return self.size == other.size and bool(np.array_equal(self.pixels, other.pixels))

    def to_png(self, level: int = 6) -> bytes:
        return encode_png(self, level=level)

    @classmethod
    def from_png(cls, data: bytes) -> RasterImage:
        return decode_png(data)

    def save(self, path, level: int = 6) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_png(level=level))

    @classmethod
    def load(cls, path) -> RasterImage:
        with open(path, "rb") as fh:
            return decode_png(fh.read())


def mask_bool(img: RasterImage) -> np.ndarray:
    """Occupancy of a mask image: any pixel with nonzero alpha counts."""
    return img.pixels[:, :, 3] > 0


def mask_from_bool(occ: np.ndarray) -> RasterImage:
    """White-on-transparent mask image from a boolean grid."""
    occ = np.asarray(occ, dtype=bool)
    px = np.zeros((occ.shape[0], occ.shape[1], 4), dtype=np.uint8)
    px[occ] = (255, 255, 255, 255)
    return RasterImage(px)


def require_same_size(a: RasterImage, b: RasterImage, what: str) -> None:
    if not a.same_size(b):
        raise ImageError(f"{what}: size mismatch {a.size} vs {b.size}")


def alpha_over(under: RasterImage, over: RasterImage, opacity: float = 1.0) -> RasterImage:
    """Source-over compositing of non-premultiplied RGBA, half-up rounding."""
    require_same_size(under, over, "alpha_over")
    return RasterImage(blend_over(under.pixels, over.pixels, opacity))


def blend_over(dst: np.ndarray, src: np.ndarray, opacity: float = 1.0) -> np.ndarray:
    """Pixels where the source is fully transparent are left untouched."""
    out = dst.copy()
    active = src[:, :, 3] > 0
    if opacity <= 0.0 or not active.any():
        return out
    d = dst[active].astype(np.float64)
    s = src[active].astype(np.float64)
    da = d[:, 3] / 255.0
    sa = s[:, 3] / 255.0 * opacity
    out_a = sa + da * (1.0 - sa)
    num = s[:, :3] * sa[:, None] + d[:, :3] * (da * (1.0 - sa))[:, None]
    safe = np.where(out_a == 0.0, 1.0, out_a)
    merged = np.empty_like(d)
    merged[:, :3] = num / safe[:, None]
    merged[:, 3] = out_a * 255.0
    out[active] = np.floor(merged + 0.5).astype(np.uint8)
    return out


# --- PNG encode ---------------------------------------------------------

def _chunk(tag: bytes, data: bytes) -> bytes:
    return struct.pack(">I", len(data)) + tag + data + struct.pack(
        ">I", zlib.crc32(tag + data) & 0xFFFFFFFF
    )


def _stored_deflate(data: bytes) -> bytes:
    # zlib wrapper with only stored (uncompressed) blocks; no dependence on
    # the deflate encoder in use.
    out = bytearray(b"\x78\x01")
    n = len(data)
    pos = 0
    while True:
        block = data[pos : pos + 0xFFFF]
        pos += len(block)
        final = 1 if pos >= n else 0
        out.append(final)
        out += struct.pack("<HH", len(block), 0xFFFF ^ len(block))
        out += block
        if final:
            break
    out += struct.pack(">I", zlib.adler32(data) & 0xFFFFFFFF)
    return bytes(out)


def encode_png(img: RasterImage, level: int = 6) -> bytes:
    """8-bit RGBA, non-interlaced, all rows filter 0."""
    h, w = img.pixels.shape[:2]
    raw = np.empty((h, 1 + w * 4), dtype=np.uint8)
    raw[:, 0] = 0
    raw[:, 1:] = img.pixels.reshape(h, w * 4)
    payload = raw.tobytes()
    idat = _stored_deflate(payload) if level == 0 else zlib.compress(payload, level)
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 6, 0, 0, 0)
    return PNG_SIGNATURE + _chunk(b"IHDR", ihdr) + _chunk(b"IDAT", idat) + _chunk(b"IEND", b"")


# --- PNG decode ---------------------------------------------------------

_CHANNELS = {0: 1, 2: 3, 3: 1, 4: 2, 6: 4}


def decode_png(data: bytes) -> RasterImage:
    if data[:8] != PNG_SIGNATURE:
        raise ImageError("not a PNG (bad signature)")
    pos = 8
    ihdr = None
    idat = bytearray()
    palette: np.ndarray | None = None
    trns: np.ndarray | None = None
    while pos < len(data):
        if pos + 8 > len(data):
            raise ImageError("truncated PNG chunk header")
        (length,) = struct.unpack(">I", data[pos : pos + 4])
        tag = data[pos + 4 : pos + 8]
        body = data[pos + 8 : pos + 8 + length]
        if len(body) != length:
            raise ImageError("truncated PNG chunk body")
        pos += 12 + length
        if tag == b"IHDR":
            ihdr = struct.unpack(">IIBBBBB", body)
        elif tag == b"PLTE":
            palette = np.frombuffer(body, dtype=np.uint8).reshape(-1, 3)
        elif tag == b"tRNS":
            trns = np.frombuffer(body, dtype=np.uint8)
        elif tag == b"IDAT":
            idat += body
        elif tag == b"IEND":
            break
    if ihdr is None:
        raise ImageError("missing IHDR")
    w, h, depth, color_type, _comp, _filt, interlace = ihdr
    if depth != 8:
        raise ImageError(f"unsupported bit depth {depth} (8 only)")
    if color_type not in _CHANNELS:
        raise ImageError(f"unsupported color type {color_type}")
    if interlace != 0:
        raise ImageError("interlaced PNG not supported")
    nch = _CHANNELS[color_type]
    raw = zlib.decompress(bytes(idat))
    stride = w * nch
    if len(raw) != h * (stride + 1):
        raise ImageError("PNG pixel payload has wrong length")
    rows = np.frombuffer(raw, dtype=np.uint8).reshape(h, stride + 1)
    planes = _unfilter(rows, nch)
    return _to_rgba(planes.reshape(h, w, nch), color_type, palette, trns)


def _unfilter(rows: np.ndarray, bpp: int) -> np.ndarray:
    h, stride1 = rows.shape
    stride = stride1 - 1
    out = np.zeros((h, stride), dtype=np.int32)
    prev = np.zeros(stride, dtype=np.int32)
    for y in range(h):
        ftype = int(rows[y, 0])
        cur = rows[y, 1:].astype(np.int32)
        if ftype == 0:
            line = cur
        elif ftype == 1:  # Sub: add left, per byte-lane cumulative sum
            line = cur.copy()
            for lane in range(bpp):
                line[lane::bpp] = np.cumsum(line[lane::bpp]) & 0xFF
        elif ftype == 2:  # Up
            line = (cur + prev) & 0xFF
        elif ftype == 3:  # Average
            line = cur.copy()
            for i in range(stride):
                left = line[i - bpp] if i >= bpp else 0
                line[i] = (line[i] + ((left + prev[i]) >> 1)) & 0xFF
        elif ftype == 4:  # Paeth
            line = cur.copy()
            for i in range(stride):
                a = line[i - bpp] if i >= bpp else 0
                b = prev[i]
                c = prev[i - bpp] if i >= bpp else 0
                p = a + b - c
                pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
                if pa <= pb and pa <= pc:
                    pred = a
                elif pb <= pc:
                    pred = b
                else:
                    pred = c
                line[i] = (line[i] + pred) & 0xFF
        else:
            raise ImageError(f"unknown PNG filter type {ftype}")
        out[y] = line
        prev = line
    return out.astype(np.uint8)


def _to_rgba(
    px: np.ndarray,
    color_type: int,
    palette: np.ndarray | None,
    trns: np.ndarray | None,
) -> RasterImage:
    h, w = px.shape[:2]
    rgba = np.empty((h, w, 4), dtype=np.uint8)
    if color_type == 6:
        rgba[:] = px
    elif color_type == 2:
        rgba[:, :, :3] = px
        rgba[:, :, 3] = 255
    elif color_type == 0:
        rgba[:, :, :3] = px
        rgba[:, :, 3] = 255
    elif color_type == 4:
        rgba[:, :, 0] = rgba[:, :, 1] = rgba[:, :, 2] = px[:, :, 0]
        rgba[:, :, 3] = px[:, :, 1]
    elif color_type == 3:
        if palette is None:
            raise ImageError("palette PNG without PLTE chunk")
        idx = px[:, :, 0]
        if int(idx.max(initial=0)) >= len(palette):
            raise ImageError("palette index out of range")
        rgba[:, :, :3] = palette[idx]
        if trns is not None:
            alpha = np.full(len(palette), 255, dtype=np.uint8)
            alpha[: len(trns)] = trns
            rgba[:, :, 3] = alpha[idx]
        else:
            rgba[:, :, 3] = 255
    return RasterImage(rgba)
