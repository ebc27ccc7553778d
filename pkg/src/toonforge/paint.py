"""Procedural interior painting, component extraction, and occlusion repair.

All operations are pure, deterministic, and stay inside the contour masks
handed down by the composer. Occlusion repair propagates colors from the
connected visible region only: geodesic (in-mask) 4-connected distance,
ties broken by the seed with the smaller (y, x).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from .composer import TemplateSheet
from .image import RasterImage, blend_over, mask_bool, require_same_size

CLOTHING_SLOTS = ("top", "sleeves", "pants", "skirt", "shoes")
HAIR_SLOTS = ("back_hair", "mid_hair", "front_hair")

# Fixed fallback palettes; the seed picks one entry per unstyled layer so
# unspecified colors vary between seeds while explicit choices are honored.
SKIN_COLOR = (247, 214, 190)
MOUTH_COLOR = (206, 106, 110)
HAIR_POOL = [(92, 62, 41), (44, 42, 48), (214, 178, 94), (168, 84, 56), (126, 126, 134)]
CLOTH_POOL = [(70, 110, 180), (180, 70, 90), (90, 160, 100), (228, 178, 84), (140, 100, 170), (72, 78, 118)]
SHOE_POOL = [(62, 50, 45), (32, 32, 36), (150, 42, 52)]


class PaintError(ValueError):
    """Invalid paint operand combination."""


@dataclass
class PatternSpec:
    kind: str = "flat"  # flat | vertical-stripes | polka-dot | gradient
    stripe_width: int = 8
    dot_radius: int = 4
    dot_spacing: int = 16
    gradient_from: tuple[int, int, int] = (255, 255, 255)
    gradient_to: tuple[int, int, int] = (0, 0, 0)
    secondary: tuple[int, int, int] | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("flat", "vertical-stripes", "polka-dot", "gradient"):
            raise PaintError(f"unknown pattern kind {self.kind!r}")
        if self.stripe_width < 1 or self.dot_radius < 1 or self.dot_spacing < 1:
            raise PaintError("pattern params must be positive")


@dataclass
class StyleSpec:
    base_colors: dict[str, tuple[int, int, int]] = field(default_factory=dict)
    pattern: PatternSpec = field(default_factory=PatternSpec)
    outline: tuple[int, int, int] = (40, 34, 34)


def synthesize_appearance(
    sheet: TemplateSheet, style: StyleSpec, seed: int = 0
) -> tuple[RasterImage, dict[str, RasterImage]]:
    """Fill every layer's contour interior and composite line art on top.

    Returns the flattened full-canvas image and one image per layer.
    Clothing slots take the style's pattern; hair and base layers fill flat.
    """
    w, h = sheet.canvas_size
    rng = random.Random(seed)
    hair_color: tuple[int, int, int] | None = None
    per_layer: dict[str, RasterImage] = {}
    flat_px = np.zeros((h, w, 4), dtype=np.uint8)
    for layer in sheet.layers:
        color = style.base_colors.get(layer.slot) or style.base_colors.get(layer.name)
        if color is None:
            if layer.slot in HAIR_SLOTS:
                if hair_color is None:
                    hair_color = HAIR_POOL[rng.randrange(len(HAIR_POOL))]
                color = hair_color
            elif layer.slot == "shoes":
                color = SHOE_POOL[rng.randrange(len(SHOE_POOL))]
            elif layer.slot in CLOTHING_SLOTS:
                color = CLOTH_POOL[rng.randrange(len(CLOTH_POOL))]
            elif layer.slot == "mouth":
                color = MOUTH_COLOR
            else:
                color = SKIN_COLOR
        occ = mask_bool(layer.contour_mask)
        px = np.zeros((h, w, 4), dtype=np.uint8)
        if layer.slot in CLOTHING_SLOTS:
            _fill_pattern(px, occ, color, style.pattern)
        else:
            px[occ] = (*color, 255)
        line = layer.line_art.pixels
        tinted = line.copy()
        tinted[:, :, :3] = style.outline
        px = blend_over(px, tinted)
        per_layer[layer.name] = RasterImage(px)
        flat_px = blend_over(flat_px, px)
    return RasterImage(flat_px), per_layer


def _fill_pattern(px: np.ndarray, occ: np.ndarray, color: tuple[int, int, int], pat: PatternSpec) -> None:
    h, w = occ.shape
    second = pat.secondary or _lighten(color)
    if pat.kind == "flat":
        px[occ] = (*color, 255)
        return
    if pat.kind == "vertical-stripes":
        xs = np.arange(w)
        odd = ((xs // pat.stripe_width) % 2).astype(bool)
        px[occ & ~odd[None, :]] = (*color, 255)
        px[occ & odd[None, :]] = (*second, 255)
        return
    if pat.kind == "polka-dot":
        ys, xs = np.mgrid[0:h, 0:w]
        s = pat.dot_spacing
        cx = (xs // s) * s + s // 2
        cy = (ys // s) * s + s // 2
        dots = (xs - cx) ** 2 + (ys - cy) ** 2 <= pat.dot_radius**2
        px[occ & ~dots] = (*color, 255)
        px[occ & dots] = (*second, 255)
        return
    # gradient: vertical lerp across the mask's bounding box
    rows = np.flatnonzero(occ.any(axis=1))
    y0, y1 = int(rows[0]), int(rows[-1])
    t = np.zeros(h) if y1 == y0 else np.clip((np.arange(h) - y0) / (y1 - y0), 0.0, 1.0)
    a = np.asarray(pat.gradient_from, dtype=np.float64)
    b = np.asarray(pat.gradient_to, dtype=np.float64)
    ramp = np.floor(a[None, :] + (b - a)[None, :] * t[:, None] + 0.5).astype(np.uint8)
    px[occ, :3] = np.broadcast_to(ramp[:, None, :], (h, w, 3))[occ]
    px[occ, 3] = 255


def _lighten(color: tuple[int, int, int], amount: float = 0.4) -> tuple[int, int, int]:
    return tuple(int(c + (255 - c) * amount + 0.5) for c in color)


def extract_component(image: RasterImage, mask: RasterImage) -> RasterImage:
    """Keep pixels under the mask; everything else fully transparent."""
    require_same_size(image, mask, "extract_component")
    out = np.zeros_like(image.pixels)
    occ = mask_bool(mask)
    out[occ] = image.pixels[occ]
    return RasterImage(out)


def erase_region(image: RasterImage, mask: RasterImage) -> RasterImage:
    require_same_size(image, mask, "erase_region")
    out = image.pixels.copy()
    out[mask_bool(mask)] = 0
    return RasterImage(out)


def repair_occlusion(
    component: RasterImage,
    component_mask: RasterImage,
    occluder_mask: RasterImage,
    blur_filled: bool = False,
) -> RasterImage:
    """Fill occluded component pixels from the nearest connected visible pixel.

    Distance is 4-connected shortest-path length inside component_mask;
    among equidistant visible seeds the one with the smaller (y, x) wins.
    Occluded pixels with no in-mask path to a visible pixel are left alone.
    """
    require_same_size(component, component_mask, "repair_occlusion")
    require_same_size(component, occluder_mask, "repair_occlusion")
    comp = mask_bool(component_mask)
    occluded = comp & mask_bool(occluder_mask)
    if not occluded.any():
        return component.copy()
    visible = comp & ~occluded
    if not visible.any():
        raise PaintError("fully occluded component: no visible pixels to fill from")

    h, w = comp.shape
    in_mask = comp.ravel()
    label = np.full(h * w, -1, dtype=np.int64)
    frontier = np.flatnonzero(visible.ravel())  # row-major order == (y, x) order
    label[frontier] = frontier

    while frontier.size:
        targets = []
        labels = []
        x = frontier % w
        y = frontier // w
        for cond, step in ((x > 0, -1), (x < w - 1, 1), (y > 0, -w), (y < h - 1, w)):
            src = frontier[cond]
            targets.append(src + step)
            labels.append(label[src])
        tgt = np.concatenate(targets)
        lab = np.concatenate(labels)
        keep = in_mask[tgt] & (label[tgt] < 0)
        tgt, lab = tgt[keep], lab[keep]
        if tgt.size == 0:
            break
        # several frontier pixels may reach one target at the same distance:
        # the smallest seed (y, x) == smallest flat index wins
        order = np.lexsort((lab, tgt))
        tgt, lab = tgt[order], lab[order]
        first = np.ones(tgt.size, dtype=bool)
        first[1:] = tgt[1:] != tgt[:-1]
        tgt, lab = tgt[first], lab[first]
        label[tgt] = lab
        frontier = tgt

    out = component.pixels.copy()
    grid = label.reshape(h, w)
    filled = occluded & (grid >= 0)
    out[filled] = component.pixels.reshape(-1, 4)[grid[filled]]
    if blur_filled:
        out = _box_blur_into(out, comp, filled)
    return RasterImage(out)


def _box_blur_into(px: np.ndarray, comp: np.ndarray, filled: np.ndarray) -> np.ndarray:
    """3x3 in-mask box blur applied to filled pixels only."""
    acc = np.zeros(px.shape[:2] + (4,), dtype=np.float64)
    cnt = np.zeros(px.shape[:2], dtype=np.float64)
    src = px.astype(np.float64)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            ys = slice(max(0, dy), px.shape[0] + min(0, dy))
            yd = slice(max(0, -dy), px.shape[0] + min(0, -dy))
            xs = slice(max(0, dx), px.shape[1] + min(0, dx))
            xd = slice(max(0, -dx), px.shape[1] + min(0, -dx))
            take = comp[ys, xs]
            acc[yd, xd][take] += src[ys, xs][take]
            cnt[yd, xd][take] += 1.0
    out = px.copy()
    sel = filled & (cnt > 0)
    out[sel] = np.floor(acc[sel] / cnt[sel][:, None] + 0.5).astype(np.uint8)
    return out


def recolor_region(image: RasterImage, mask: RasterImage, target: tuple[int, int, int]) -> RasterImage:
    """Replace masked pixels' chroma with the target's, keeping per-pixel luma.

    Works in luma/chroma space (Rec.601 weights): R and B take the target's
    chroma offsets around the pixel's own luma, G re-solves the luma equation
    exactly. Alpha is untouched; values are clipped to gamut then rounded.
    """
    require_same_size(image, mask, "recolor_region")
    occ = mask_bool(mask)
    out = image.pixels.copy()
    if not occ.any():
        return RasterImage(out)
    src = image.pixels[occ].astype(np.float64) / 255.0
    y = 0.299 * src[:, 0] + 0.587 * src[:, 1] + 0.114 * src[:, 2]
    tr, tg, tb = (c / 255.0 for c in target)
    ty = 0.299 * tr + 0.587 * tg + 0.114 * tb
    r = y + (tr - ty)
    b = y + (tb - ty)
    g = (y - 0.299 * r - 0.114 * b) / 0.587
    rgb = np.clip(np.stack([r, g, b], axis=1), 0.0, 1.0)
    out[occ, :3] = np.floor(rgb * 255.0 + 0.5).astype(np.uint8)
    return RasterImage(out)
