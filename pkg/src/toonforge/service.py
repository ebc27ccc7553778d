"""HTTP service: generate characters, edit them, preview frames, play clips.

Every mutation creates a new content-addressed bundle (the previous id
stays valid, so client-side undo is just switching ids). Responses use the
same canonical JSON encoding as the on-disk manifests.
"""

from __future__ import annotations

import base64
import os
import zipfile
from io import BytesIO
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, Response

from .catalog import CatalogError, load_catalog
from .data import default_catalog_dir, default_lexicon_path
from .image import ImageError, RasterImage
from .modelio import canonical_json_bytes, load_model, save_model
from .pipeline import CharacterRecord, PipelineError, generate_character, rebuild_from_record
from .raster import rasterize
from .rig import RigError, apply_parameters, load_viseme_timeline, sample_clip, viseme_clip
from .store import BundleStore, StoreError, bundle_zip_bytes
from .textparse import load_lexicon

CHARACTER_RECORD = "character.json"
CLIP_TIMELINE = "timeline.txt"
DEFAULT_STORE = "~/.toonforge/store"
PREVIEW_BACKGROUND = (255, 255, 255, 255)


def store_root(override=None) -> Path:
    if override is not None:
        return Path(override)
    return Path(os.environ.get("TOONFORGE_STORE", os.path.expanduser(DEFAULT_STORE)))


def _canon(payload: dict, status_code: int = 200) -> Response:
    return Response(content=canonical_json_bytes(payload), media_type="application/json", status_code=status_code)


def create_app(store_dir=None, catalog_dir=None, lexicon_path=None) -> FastAPI:
    catalog = load_catalog(catalog_dir if catalog_dir is not None else default_catalog_dir())
    lexicon = load_lexicon(lexicon_path if lexicon_path is not None else default_lexicon_path())
    lexicon.validate_against(catalog)
    characters = BundleStore(store_root(store_dir) / "characters")
    clips = BundleStore(store_root(store_dir) / "clips")
    app = FastAPI(title="toonforge", version="1")

    import json

    def read_record(char_id: str) -> CharacterRecord:
        doc = json.loads((characters.path(char_id) / CHARACTER_RECORD).read_text(encoding="utf-8"))
        return CharacterRecord.from_doc(doc)

    def save_bundle(model, record_doc: dict) -> str:
        def build(tmp: Path) -> None:
            save_model(model, tmp)
            (tmp / CHARACTER_RECORD).write_bytes(canonical_json_bytes(record_doc))

        return characters.put(build)

    async def body_json(request: Request) -> dict:
        try:
            doc = json.loads(await request.body())
        except json.JSONDecodeError as exc:
            raise HTTPException(422, f"body is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise HTTPException(422, "body must be a JSON object")
        return doc

    @app.post("/v1/characters")
    async def create_character(request: Request) -> Response:
        doc = await body_json(request)
        text = doc.get("text", "")
        seed = doc.get("seed")
        if not isinstance(text, str):
            raise HTTPException(422, "'text' must be a string")
        if seed is not None and not isinstance(seed, int):
            raise HTTPException(422, "'seed' must be an integer")
        try:
            result = generate_character(text, catalog, lexicon, seed=seed)
        except (PipelineError, CatalogError) as exc:
            raise HTTPException(422, str(exc)) from None
        char_id = save_bundle(result.model, result.record.to_doc())
        return _canon({"id": char_id})

    @app.get("/v1/characters/{char_id}/model")
    def get_model(char_id: str) -> Response:
        try:
            bundle = characters.path(char_id)
        except StoreError:
            raise HTTPException(404, f"unknown character {char_id!r}") from None
        return Response(content=bundle_zip_bytes(bundle), media_type="application/zip")

    @app.post("/v1/characters/{char_id}/edits")
    async def edit_character(char_id: str, request: Request) -> Response:
        try:
            record = read_record(char_id)
        except StoreError:
            raise HTTPException(404, f"unknown character {char_id!r}") from None
        doc = await body_json(request)
        ops = doc.get("ops")
        if not isinstance(ops, list) or not ops:
            raise HTTPException(422, "'ops' must be a non-empty list")
        for op in ops:
            _apply_edit_op(record, op, catalog)
        parent_doc = record.to_doc()
        parent_doc["parent"] = char_id
        try:
            model = rebuild_from_record(record, catalog)
        except (PipelineError, CatalogError) as exc:
            raise HTTPException(422, str(exc)) from None
        return _canon({"id": save_bundle(model, parent_doc)})

    def _apply_edit_op(record: CharacterRecord, op, _catalog) -> None:
        if not isinstance(op, dict):
            raise HTTPException(422, "each op must be an object")
        kind = op.get("op")
        if kind == "swap":
            slot_id, variant_id = op.get("slot"), op.get("variant")
            try:
                catalog.variant(slot_id, variant_id)
            except CatalogError as exc:
                raise HTTPException(422, str(exc)) from None
            group = catalog.exclusive_group_of(slot_id)
            if group is not None:
                for member in group:
                    if member != slot_id:
                        record.selection.variants.pop(member, None)
            record.selection.variants[slot_id] = variant_id
        elif kind == "recolor":
            rgb = _check_rgb(op.get("rgb"))
            slot_id = op.get("slot")
            known = {s.id for s in catalog.slots} | {b.name for b in catalog.base_layers}
            if slot_id not in known:
                raise HTTPException(422, f"unknown slot {slot_id!r}")
            record.ops.append({"op": "recolor", "slot": slot_id, "rgb": list(rgb)})
        elif kind == "mask_recolor":
            rgb = _check_rgb(op.get("rgb"))
            try:
                mask = RasterImage.from_png(base64.b64decode(op.get("mask", ""), validate=True))
            except (ValueError, ImageError) as exc:
                raise HTTPException(422, f"bad mask PNG: {exc}") from None
            if mask.size != catalog.canvas_size:
                raise HTTPException(
                    422,
                    f"mask is {mask.size[0]}x{mask.size[1]}, canvas is "
                    f"{catalog.canvas_size[0]}x{catalog.canvas_size[1]}",
                )
            record.ops.append({"op": "mask_recolor", "mask": op["mask"], "rgb": list(rgb)})
        else:
            raise HTTPException(422, f"unknown op {kind!r}")

    @app.get("/v1/characters/{char_id}/frame")
    def get_frame(char_id: str, params: str = "") -> Response:
        try:
            bundle = characters.path(char_id)
        except StoreError:
            raise HTTPException(404, f"unknown character {char_id!r}") from None
        model = load_model(bundle)
        try:
            values = _parse_params(params)
            posed = apply_parameters(model, values)
        except (RigError, ValueError) as exc:
            raise HTTPException(422, str(exc)) from None
        png = rasterize(posed, background=PREVIEW_BACKGROUND).to_png()
        return Response(content=png, media_type="image/png")

    @app.post("/v1/characters/{char_id}/clips")
    async def create_clip(char_id: str, request: Request) -> Response:
        if not characters.exists(char_id):
            raise HTTPException(404, f"unknown character {char_id!r}")
        doc = await body_json(request)
        visemes = doc.get("visemes")
        if not isinstance(visemes, str) or not visemes.strip():
            raise HTTPException(422, "'visemes' must be a non-empty timeline string")
        try:
            load_viseme_timeline(visemes)
        except (RigError, ValueError) as exc:
            raise HTTPException(422, f"bad viseme timeline: {exc}") from None

        def build(tmp: Path) -> None:
            (tmp / CLIP_TIMELINE).write_text(visemes, encoding="utf-8")
            (tmp / "clip_meta.json").write_bytes(canonical_json_bytes({"character": char_id}))

        return _canon({"clip_id": clips.put(build)})

    @app.get("/v1/clips/{clip_id}/frames")
    def clip_frames(clip_id: str, fps: float = 10.0) -> Response:
        try:
            clip_dir = clips.path(clip_id)
        except StoreError:
            raise HTTPException(404, f"unknown clip {clip_id!r}") from None
        if fps <= 0:
            raise HTTPException(422, "fps must be positive")
        meta = json.loads((clip_dir / "clip_meta.json").read_text(encoding="utf-8"))
        try:
            bundle = characters.path(meta["character"])
        except StoreError:
            raise HTTPException(404, "clip's character no longer exists") from None
        model = load_model(bundle)
        timeline = load_viseme_timeline((clip_dir / CLIP_TIMELINE).read_text(encoding="utf-8"))
        clip = viseme_clip(timeline, fps=fps)
        buf = BytesIO()
        count = int(clip.duration * fps) + 1
        with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_STORED) as zf:
            for k in range(count):
                posed = apply_parameters(model, sample_clip(clip, k / fps))
                frame = rasterize(posed, background=PREVIEW_BACKGROUND)
                info = zipfile.ZipInfo(f"frame_{k:05d}.png", date_time=(1980, 1, 1, 0, 0, 0))
                zf.writestr(info, frame.to_png())
        return Response(content=buf.getvalue(), media_type="application/zip")

    return app


def _check_rgb(value) -> tuple[int, int, int]:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 3
        or not all(isinstance(c, int) and 0 <= c <= 255 for c in value)
    ):
        raise HTTPException(422, "'rgb' must be three integers in 0..255")
    return tuple(value)


def _parse_params(spec: str) -> dict[str, float]:
    values: dict[str, float] = {}
    if not spec.strip():
        return values
    for item in spec.split(","):
        if not item.strip():
            continue
        name, _, raw = item.partition(":")
        if not _:
            raise ValueError(f"parameter {item!r} is not name:value")
        values[name.strip()] = float(raw)
    return values
