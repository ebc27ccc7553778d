"""Template sheet assembly: per-layer contour masks and line art.

The sheet is the shape-control contract for painting: every downstream
pixel must land inside these masks. Composition is pure; anchors shift by
whole pixels only so masks stay bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .catalog import ComponentCatalog, ComponentVariant, Selection
from .image import RasterImage, alpha_over, mask_bool, mask_from_bool, require_same_size


class ComposeError(ValueError):
    """Invalid selection or layer operation."""


@dataclass
class TemplateLayer:
    name: str
    slot: str
    contour_mask: RasterImage
    line_art: RasterImage
    z: int


@dataclass
class TemplateSheet:
    canvas_size: tuple[int, int]
    layers: list[TemplateLayer]

    def layer(self, name: str) -> TemplateLayer:
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise ComposeError(f"no layer named {name!r}")


def compose_template(selection: Selection, catalog: ComponentCatalog) -> TemplateSheet:
    """Place selected variants (plus base layers) into z-ordered layers."""
    for group in catalog.exclusive_groups:
        picked = [s for s in group if s in selection.variants]
        if len(picked) > 1:
            raise ComposeError(f"exclusive group {'/'.join(group)}: more than one of {picked} selected")

    layers: list[TemplateLayer] = [
        TemplateLayer(
            name=b.name,
            slot=b.name,
            contour_mask=b.contour_mask.copy(),
            line_art=b.line_art.copy(),
            z=b.z,
        )
        for b in catalog.base_layers
    ]
    for slot_id, variant_id in selection.variants.items():
        slot = catalog.slot(slot_id)
        variant = catalog.variant(slot_id, variant_id)
        mask = _place(variant.contour_mask, variant.anchor)
        line = _place(variant.line_art, variant.anchor)
        for layer_name in slot.layer_bindings:
            layers.append(
                TemplateLayer(name=layer_name, slot=slot_id, contour_mask=mask, line_art=line, z=slot.z_band)
            )
    layers.sort(key=lambda l: l.z)
    return TemplateSheet(canvas_size=catalog.canvas_size, layers=layers)


def derive_variant(parent: ComponentVariant, clip_mask: RasterImage, new_id: str | None = None) -> ComponentVariant:
    """Clip a larger variant into a smaller one; mesh-facing fields unchanged."""
    require_same_size(parent.contour_mask, clip_mask, "derive_variant")
    clip = mask_bool(clip_mask)
    child_occ = mask_bool(parent.contour_mask) & clip
    if not child_occ.any():
        raise ComposeError(f"clip of variant {parent.id!r} leaves an empty component")
    line_px = parent.line_art.pixels.copy()
    line_px[~clip] = 0
    return replace(
        parent,
        id=new_id if new_id is not None else f"{parent.id}+clip",
        contour_mask=mask_from_bool(child_occ),
        line_art=RasterImage(line_px),
        derived_from=parent.id,
    )


def merge_layers(sheet: TemplateSheet, groups: list[set[str]]) -> TemplateSheet:
    """Collapse each named group into one layer; groups must be z-contiguous."""
    order = {layer.name: i for i, layer in enumerate(sheet.layers)}
    claimed: set[str] = set()
    for group in groups:
        for name in group:
            if name not in order:
                raise ComposeError(f"merge group references unknown layer {name!r}")
            if name in claimed:
                raise ComposeError(f"layer {name!r} appears in more than one merge group")
            claimed.add(name)
        idx = sorted(order[name] for name in group)
        if idx[-1] - idx[0] + 1 != len(idx):
            inside = [sheet.layers[i].name for i in range(idx[0], idx[-1] + 1) if sheet.layers[i].name not in group]
            raise ComposeError(f"merge group {sorted(group)} is not z-contiguous (skips {inside})")

    merged: list[TemplateLayer] = []
    consumed: set[str] = set()
    for layer in sheet.layers:
        if layer.name in consumed:
            continue
        group = next((g for g in groups if layer.name in g), None)
        if group is None:
            merged.append(layer)
            continue
        members = [l for l in sheet.layers if l.name in group]  # already z-ascending
        consumed.update(g for g in group)
        occ = np.zeros((sheet.canvas_size[1], sheet.canvas_size[0]), dtype=bool)
        line = RasterImage.new(*sheet.canvas_size)
        for m in members:
            occ |= mask_bool(m.contour_mask)
            line = alpha_over(line, m.line_art)
        merged.append(
            TemplateLayer(
                name="+".join(m.name for m in members),
                slot="",
                contour_mask=mask_from_bool(occ),
                line_art=line,
                z=min(m.z for m in members),
            )
        )
    merged.sort(key=lambda l: l.z)
    return TemplateSheet(canvas_size=sheet.canvas_size, layers=merged)


def _place(img: RasterImage, anchor: tuple[int, int]) -> RasterImage:
    dx, dy = int(anchor[0]), int(anchor[1])
    if dx == 0 and dy == 0:
        return img.copy()
    h, w = img.pixels.shape[:2]
    out = np.zeros_like(img.pixels)
    src_x0, src_x1 = max(0, -dx), min(w, w - dx)
    src_y0, src_y1 = max(0, -dy), min(h, h - dy)
    if src_x0 < src_x1 and src_y0 < src_y1:
        out[src_y0 + dy : src_y1 + dy, src_x0 + dx : src_x1 + dx] = img.pixels[src_y0:src_y1, src_x0:src_x1]
    return RasterImage(out)
