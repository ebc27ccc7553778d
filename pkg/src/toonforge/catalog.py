"""Component library: slots, variants with contour masks, and defaults.

A catalog is a directory bundle: a JSON manifest plus one mask and one
line-art PNG per variant and base layer. Catalogs are immutable after load
and safe to share across threads.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .image import RasterImage, mask_bool

MANIFEST_NAME = "catalog.json"
CATALOG_FORMAT_VERSION = 1


class CatalogError(ValueError):
    """Invalid catalog bundle or lookup."""


@dataclass(frozen=True)
class ComponentSlot:
    id: str
    layer_bindings: tuple[str, ...]
    z_band: int


@dataclass
class ComponentVariant:
    id: str
    slot: str
    contour_mask: RasterImage
    line_art: RasterImage
    anchor: tuple[int, int] = (0, 0)
    derived_from: str | None = None


@dataclass
class BaseLayer:
    """Always-present layer (body, face, mouth) that is not slot-selectable."""

    name: str
    z: int
    contour_mask: RasterImage
    line_art: RasterImage


@dataclass
class Selection:
    """Concrete choice of one variant per (non-excluded) slot plus attributes."""

    variants: dict[str, str] = field(default_factory=dict)
    attributes: dict[str, str] = field(default_factory=dict)
    colors: dict[str, tuple[int, int, int]] = field(default_factory=dict)


@dataclass
class ComponentCatalog:
    canvas_size: tuple[int, int]
    slots: list[ComponentSlot]
    variants: dict[str, list[ComponentVariant]]
    base_layers: list[BaseLayer]
    attribute_domains: dict[str, list[str]]
    attribute_defaults: dict[str, str]
    exclusive_groups: list[tuple[str, ...]]
    aux_masks: dict[str, RasterImage] = field(default_factory=dict)

    def slot(self, slot_id: str) -> ComponentSlot:
        for s in self.slots:
            if s.id == slot_id:
                return s
        raise CatalogError(f"unknown slot: {slot_id!r}")

    def variant(self, slot_id: str, variant_id: str) -> ComponentVariant:
        for v in self.variants.get(slot_id, []):
            if v.id == variant_id:
                return v
        raise CatalogError(f"unknown variant {variant_id!r} for slot {slot_id!r}")

    def exclusive_group_of(self, slot_id: str) -> tuple[str, ...] | None:
        for group in self.exclusive_groups:
            if slot_id in group:
                return group
        return None


def list_variants(catalog: ComponentCatalog, slot_id: str) -> list[str]:
    """Variant ids of one slot in manifest order."""
    catalog.slot(slot_id)
    return [v.id for v in catalog.variants.get(slot_id, [])]


def default_selection(catalog: ComponentCatalog, seed: int | None = None) -> Selection:
    """First variant per slot (no seed) or a reproducible random pick (seed).

    Exactly one slot of each mutually exclusive group is selected; without a
    seed the group's first-listed slot wins.
    """
    rng = random.Random(seed) if seed is not None else None
    skipped: set[str] = set()
    chosen: dict[str, str] = {}
    for slot in catalog.slots:
        if slot.id in skipped or slot.id in chosen:
            continue
        group = catalog.exclusive_group_of(slot.id)
        slot_id = slot.id
        if group is not None:
            pick = group[rng.randrange(len(group))] if rng is not None else group[0]
            skipped.update(g for g in group if g != pick)
            if pick != slot.id:
                slot_id = pick
        ids = [v.id for v in catalog.variants.get(slot_id, [])]
        if not ids:
            continue
        chosen[slot_id] = ids[rng.randrange(len(ids))] if rng is not None else ids[0]
    return Selection(variants=chosen, attributes=dict(catalog.attribute_defaults))


# --- loading ------------------------------------------------------------


def load_catalog(path) -> ComponentCatalog:
    root = Path(path)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise CatalogError(f"manifest not found: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CatalogError(f"malformed manifest {manifest_path}: {exc}") from exc

    version = manifest.get("format_version")
    if version != CATALOG_FORMAT_VERSION:
        raise CatalogError(f"unsupported catalog format_version {version!r} in {manifest_path}")
    canvas = tuple(manifest["canvas_size"])
    if len(canvas) != 2 or canvas[0] < 1 or canvas[1] < 1:
        raise CatalogError(f"bad canvas_size {canvas} in {manifest_path}")

    slots = [
        ComponentSlot(id=s["id"], layer_bindings=tuple(s["layer_bindings"]), z_band=int(s["z_band"]))
        for s in manifest.get("slots", [])
    ]
    slot_ids = [s.id for s in slots]
    if len(set(slot_ids)) != len(slot_ids):
        raise CatalogError(f"duplicate slot ids in {manifest_path}")
    z_bands = [s.z_band for s in slots]
    if len(set(z_bands)) != len(z_bands):
        raise CatalogError(f"slot z_bands are not totally ordered in {manifest_path}")

    def load_image(name: str, what: str) -> RasterImage:
        img_path = root / name
        if not img_path.is_file():
            raise CatalogError(f"{what}: missing image file {img_path}")
        img = RasterImage.load(img_path)
        if img.size != canvas:
            raise CatalogError(
                f"{what}: image {img_path} is {img.size[0]}x{img.size[1]}, "
                f"catalog canvas is {canvas[0]}x{canvas[1]}"
            )
        return img

    base_layers = []
    for b in manifest.get("base_layers", []):
        base_layers.append(
            BaseLayer(
                name=b["name"],
                z=int(b["z"]),
                contour_mask=load_image(b["mask"], f"base layer {b['name']!r}"),
                line_art=load_image(b["line_art"], f"base layer {b['name']!r}"),
            )
        )

    variants: dict[str, list[ComponentVariant]] = {s.id: [] for s in slots}
    for v in manifest.get("variants", []):
        vid, vslot = v["id"], v["slot"]
        if vslot not in variants:
            raise CatalogError(f"variant {vid!r} references unknown slot {vslot!r} in {manifest_path}")
        variant = ComponentVariant(
            id=vid,
            slot=vslot,
            contour_mask=load_image(v["mask"], f"variant {vid!r}"),
            line_art=load_image(v["line_art"], f"variant {vid!r}"),
            anchor=tuple(v.get("anchor", (0, 0))),
            derived_from=v.get("derived_from"),
        )
        _check_variant(variant)
        variants[vslot].append(variant)

    groups = [tuple(g) for g in manifest.get("exclusive_groups", [])]
    for group in groups:
        for member in group:
            if member not in variants:
                raise CatalogError(f"exclusive group member {member!r} is not a slot")

    domains = {k: list(v) for k, v in manifest.get("attribute_domains", {}).items()}
    defaults = dict(manifest.get("attribute_defaults", {}))
    for attr, value in defaults.items():
        if attr in domains and value not in domains[attr]:
            raise CatalogError(f"attribute default {attr}={value!r} outside its domain")

    aux = {name: load_image(fname, f"aux mask {name!r}") for name, fname in manifest.get("aux_masks", {}).items()}

    catalog = ComponentCatalog(
        canvas_size=canvas,
        slots=slots,
        variants=variants,
        base_layers=base_layers,
        attribute_domains=domains,
        attribute_defaults=defaults,
        exclusive_groups=groups,
        aux_masks=aux,
    )
    _check_z_ordering(catalog)
    return catalog


def _check_variant(v: ComponentVariant) -> None:
    occ = mask_bool(v.contour_mask)
    if not occ.any():
        raise CatalogError(f"variant {v.id!r} has an empty contour mask")
    line = v.line_art.pixels[:, :, 3] > 0
    if np.any(line & ~dilate(occ, 1)):
        raise CatalogError(f"variant {v.id!r}: line art escapes its contour mask")


def _check_z_ordering(catalog: ComponentCatalog) -> None:
    """back_hair < body/face band < clothing bands < front_hair, where present."""
    z = {s.id: s.z_band for s in catalog.slots}
    base_z = [b.z for b in catalog.base_layers]
    clothing = [z[s] for s in ("top", "sleeves", "pants", "skirt", "shoes") if s in z]
    if "back_hair" in z and base_z and z["back_hair"] >= min(base_z):
        raise CatalogError("back_hair z_band must precede the body/face band")
    if base_z and clothing and max(base_z) >= min(clothing):
        raise CatalogError("body/face band must precede clothing z_bands")
    if clothing and "front_hair" in z and max(clothing) >= z["front_hair"]:
        raise CatalogError("clothing z_bands must precede front_hair")


def dilate(occ: np.ndarray, radius: int) -> np.ndarray:
    """Chebyshev dilation of a boolean grid by `radius` pixels."""
    out = occ.copy()
    for _ in range(radius):
        grown = out.copy()
        grown[1:, :] |= out[:-1, :]
        grown[:-1, :] |= out[1:, :]
        grown[:, 1:] |= out[:, :-1]
        grown[:, :-1] |= out[:, 1:]
        grown[1:, 1:] |= out[:-1, :-1]
        grown[1:, :-1] |= out[:-1, 1:]
        grown[:-1, 1:] |= out[1:, :-1]
        grown[:-1, :-1] |= out[1:, 1:]
        out = grown
    return out
