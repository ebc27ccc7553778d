"""End-to-end character assembly: text to a rigged, textured model.

Stages run in a fixed order (parse, compose, paint, complete, rig); each
stage is pure, so one (text, seed) pair always yields byte-identical
results. Completion mirrors the de-layering procedure: extract each layer's
pixels from the flattened sheet, erase what upper layers hide, then fill
the hidden region from the connected visible pixels.
"""

from __future__ import annotations

import base64
import time
from dataclasses import dataclass, field

import numpy as np

from .catalog import ComponentCatalog, Selection, default_selection
from .composer import TemplateSheet, compose_template
from .image import RasterImage, mask_bool, mask_from_bool
from .paint import (
    HAIR_SLOTS,
    PaintError,
    StyleSpec,
    erase_region,
    extract_component,
    recolor_region,
    repair_occlusion,
    synthesize_appearance,
)
from .rig import Blendshape, CharacterModel, Deformer, Mesh, ModelLayer, mouth_parameters
from .textparse import Lexicon, ParsedDescription, parse_description, selection_from_parse


class PipelineError(ValueError):
    """A pipeline stage failed; the message names the stage."""


@dataclass
class CharacterRecord:
    """Everything needed to rebuild a bundle: generation inputs plus edits."""

    text: str
    seed: int | None
    selection: Selection
    ops: list[dict] = field(default_factory=list)

    def to_doc(self) -> dict:
        return {
            "format_version": 1,
            "text": self.text,
            "seed": self.seed,
            "selection": {
                "variants": dict(self.selection.variants),
                "attributes": dict(self.selection.attributes),
                "colors": {k: list(v) for k, v in self.selection.colors.items()},
            },
            "ops": self.ops,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> CharacterRecord:
        sel = doc.get("selection", {})
        return cls(
            text=doc.get("text", ""),
            seed=doc.get("seed"),
            selection=Selection(
                variants=dict(sel.get("variants", {})),
                attributes=dict(sel.get("attributes", {})),
                colors={k: tuple(v) for k, v in sel.get("colors", {}).items()},
            ),
            ops=list(doc.get("ops", [])),
        )


@dataclass
class GenerationResult:
    model: CharacterModel
    record: CharacterRecord
    parsed: ParsedDescription | None
    timings: dict[str, float]


def generate_character(
    text: str,
    catalog: ComponentCatalog,
    lexicon: Lexicon,
    seed: int | None = None,
    style: StyleSpec | None = None,
) -> GenerationResult:
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    parsed = parse_description(text, lexicon, catalog)
    defaults = default_selection(catalog, seed)
    selection = selection_from_parse(parsed, defaults, catalog)
    _propagate_hair_color(selection)
    timings["parse"] = time.perf_counter() - t0

    model, stage_times = build_model(selection, catalog, seed=seed or 0, style=style)
    timings.update(stage_times)
    record = CharacterRecord(text=text, seed=seed, selection=selection)
    return GenerationResult(model=model, record=record, parsed=parsed, timings=timings)


def build_model(
    selection: Selection,
    catalog: ComponentCatalog,
    seed: int = 0,
    style: StyleSpec | None = None,
) -> tuple[CharacterModel, dict[str, float]]:
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    try:
        sheet = compose_template(selection, catalog)
    except ValueError as exc:
        raise PipelineError(f"compose: {exc}") from exc
    timings["compose"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    spec = style if style is not None else StyleSpec()
    base_colors = dict(spec.base_colors)
    for key, rgb in selection.colors.items():
        if key != "eye_color":
            base_colors.setdefault(key, rgb)
    spec = StyleSpec(base_colors=base_colors, pattern=spec.pattern, outline=spec.outline)
    try:
        flat, painted = synthesize_appearance(sheet, spec, seed=seed)
    except ValueError as exc:
        raise PipelineError(f"paint: {exc}") from exc
    timings["paint"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    try:
        textures = _complete_layers(sheet, flat, painted)
        eye_rgb = selection.colors.get("eye_color")
        if eye_rgb and "eyes" in catalog.aux_masks and "face" in textures:
            textures["face"] = recolor_region(textures["face"], catalog.aux_masks["eyes"], eye_rgb)
    except ValueError as exc:
        raise PipelineError(f"complete: {exc}") from exc
    timings["complete"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    try:
        model = _assemble_model(sheet, textures, catalog)
    except ValueError as exc:
        raise PipelineError(f"rig: {exc}") from exc
    timings["rig"] = time.perf_counter() - t0
    return model, timings


def _propagate_hair_color(selection: Selection) -> None:
    source = next((selection.colors[s] for s in HAIR_SLOTS if s in selection.colors), None)
    if source is None:
        return
    for slot in HAIR_SLOTS:
        selection.colors.setdefault(slot, source)


def _complete_layers(
    sheet: TemplateSheet, flat: RasterImage, painted: dict[str, RasterImage]
) -> dict[str, RasterImage]:
    """Per layer: extract from the flat sheet, erase occluded pixels, repair."""
    h, w = flat.pixels.shape[:2]
    above = np.zeros((h, w), dtype=bool)
    occluders: list[np.ndarray] = []
    for layer in reversed(sheet.layers):
        occluders.append(above.copy())
        above |= mask_bool(layer.contour_mask)
    occluders.reverse()

    textures: dict[str, RasterImage] = {}
    for layer, occ in zip(sheet.layers, occluders):
        own = mask_bool(layer.contour_mask)
        hidden = own & occ
        tex = extract_component(flat, layer.contour_mask)
        if hidden.any():
            hidden_mask = mask_from_bool(hidden)
            tex = erase_region(tex, hidden_mask)
            try:
                tex = repair_occlusion(tex, layer.contour_mask, hidden_mask)
            except PaintError:
                # fully hidden layer: fall back to its directly painted image
                tex = painted[layer.name]
        textures[layer.name] = tex
    return textures


# --- rig assembly -----------------------------------------------------------


def _grid_mesh(occ: np.ndarray, canvas: tuple[int, int], max_cells: int = 5) -> Mesh:
    ys, xs = np.nonzero(occ)
    x0, x1 = int(xs.min()), int(xs.max()) + 1
    y0, y1 = int(ys.min()), int(ys.max()) + 1
    nx = max(2, min(max_cells, (x1 - x0) // 96 + 1))
    ny = max(2, min(max_cells, (y1 - y0) // 96 + 1))
    vx = np.linspace(x0, x1, nx + 1)
    vy = np.linspace(y0, y1, ny + 1)
    verts = np.array([(x, y) for y in vy for x in vx], dtype=np.float64)
    uvs = verts / np.array(canvas, dtype=np.float64)
    tris = []
    stride = nx + 1
    for row in range(ny):
        for col in range(nx):
            a = row * stride + col
            tris.append((a, a + 1, a + stride))
            tris.append((a + 1, a + stride + 1, a + stride))
    return Mesh(vertices=verts, uvs=uvs, triangles=np.array(tris, dtype=np.int32))


def _mouth_rig(mesh: Mesh) -> tuple[list[Deformer], list[Blendshape]]:
    verts = mesh.vertices
    x0, y0 = verts.min(axis=0)
    x1, y1 = verts.max(axis=0)
    cx, cy = (x0 + x1) / 2.0, (y0 + y1) / 2.0
    hw = max((x1 - x0) / 2.0, 1.0)
    hh = max((y1 - y0) / 2.0, 1.0)
    u = (verts[:, 0] - cx) / hw  # [-1, 1]
    v = (verts[:, 1] - cy) / hh
    zero = np.zeros_like(verts)

    def offs(dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
        return np.stack([dx, dy], axis=1)

    open_off = offs(np.zeros_like(u), (v + 1.0) / 2.0 * hh * 1.8)
    form_off = offs(np.zeros_like(u), -(u**2) * hh * 1.2)
    pucker_off = offs(-u * hw * 0.5, -v * hh * 0.3)
    funnel_off = offs(-u * hw * 0.3, v * hh * 0.9)
    press_off = offs(np.zeros_like(u), -v * hh * 0.9)
    mouth_x_off = offs(np.full_like(u, hw * 0.8), np.zeros_like(u))

    deformers = [
        Deformer("mouth", "MouthOpenY", [(0.0, zero), (1.0, open_off)]),
        Deformer("mouth", "MouthForm", [(-1.0, -form_off), (0.0, zero), (1.0, form_off)]),
        Deformer("mouth", "MouthPucker", [(0.0, zero), (1.0, pucker_off)]),
        Deformer("mouth", "MouthFunnel", [(0.0, zero), (1.0, funnel_off)]),
        Deformer("mouth", "MouthPress", [(0.0, zero), (1.0, press_off)]),
        Deformer("mouth", "MouthX", [(-1.0, -mouth_x_off), (0.0, zero), (1.0, mouth_x_off)]),
    ]
    left = np.clip(-u, 0.0, 1.0)
    right = np.clip(u, 0.0, 1.0)
    blendshapes = [
        Blendshape("mouthSmileLeft", "mouth", offs(np.zeros_like(u), -left * hh * 0.8)),
        Blendshape("mouthSmileRight", "mouth", offs(np.zeros_like(u), -right * hh * 0.8)),
    ]
    return deformers, blendshapes


def _assemble_model(
    sheet: TemplateSheet, textures: dict[str, RasterImage], catalog: ComponentCatalog
) -> CharacterModel:
    layers = []
    deformers: list[Deformer] = []
    blendshapes: list[Blendshape] = []
    for layer in sheet.layers:
        occ = mask_bool(layer.contour_mask)
        mesh = _grid_mesh(occ, sheet.canvas_size, max_cells=4 if layer.name == "mouth" else 5)
        layers.append(
            ModelLayer(name=layer.name, z=layer.z, mesh=mesh, texture=textures[layer.name], opacity=1.0)
        )
        if layer.name == "mouth":
            deformers, blendshapes = _mouth_rig(mesh)
    model = CharacterModel(
        canvas_size=sheet.canvas_size,
        layers=layers,
        parameters=mouth_parameters(),
        deformers=deformers,
        blendshapes=blendshapes,
    )
    model.validate()
    return model


# --- edit ops ----------------------------------------------------------------


def apply_ops(model: CharacterModel, ops: list[dict], catalog: ComponentCatalog) -> CharacterModel:
    """Replay recolor edits on a freshly built model, in recorded order."""
    for op in ops:
        kind = op.get("op")
        if kind == "recolor":
            rgb = tuple(op["rgb"])
            targets = set(catalog.slot(op["slot"]).layer_bindings) if op["slot"] in {
                s.id for s in catalog.slots
            } else {op["slot"]}
            for layer in model.layers:
                if layer.name in targets:
                    own = RasterImage(layer.texture.pixels.copy())
                    layer.texture = recolor_region(layer.texture, own, rgb)
        elif kind == "mask_recolor":
            rgb = tuple(op["rgb"])
            mask = RasterImage.from_png(base64.b64decode(op["mask"]))
            for layer in model.layers:
                overlap = mask_bool(mask) & (layer.texture.pixels[:, :, 3] > 0)
                if overlap.any():
                    layer.texture = recolor_region(layer.texture, mask_from_bool(overlap), rgb)
        elif kind == "swap":
            raise PipelineError("edit: swap ops change the selection and require a rebuild")
        else:
            raise PipelineError(f"edit: unknown op {kind!r}")
    return model


def rebuild_from_record(record: CharacterRecord, catalog: ComponentCatalog) -> CharacterModel:
    model, _ = build_model(record.selection, catalog, seed=record.seed or 0)
    return apply_ops(model, record.ops, catalog)
