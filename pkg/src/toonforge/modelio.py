"""Versioned directory-bundle serialization for characters and clips.

Manifests are canonical JSON: UTF-8, LF, keys sorted, floats as their
shortest round-tripping decimal, no trailing whitespace. Equal values
therefore always serialize to equal bytes; see docs/format.md for the
normative field list.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .image import RasterImage
from .rig import (
    AnimationClip,
    Blendshape,
    CharacterModel,
    Deformer,
    Mesh,
    ModelLayer,
    Parameter,
    Track,
    mouth_parameters,
)

MODEL_MANIFEST = "model.json"
FORMAT_VERSION = 1


class ModelIOError(ValueError):
    """Unreadable or version-incompatible bundle."""


def canonical_json_bytes(value) -> bytes:
    return (
        json.dumps(value, sort_keys=True, ensure_ascii=False, separators=(",", ":"), allow_nan=False) + "\n"
    ).encode("utf-8")


def _floats(arr: np.ndarray) -> list:
    return [[float(x) for x in row] for row in np.asarray(arr)]


def _ints(arr: np.ndarray) -> list:
    return [[int(x) for x in row] for row in np.asarray(arr)]


# --- models ----------------------------------------------------------------


def save_model(model: CharacterModel, out_dir) -> Path:
    model.validate()
    out = Path(out_dir)
    (out / "textures").mkdir(parents=True, exist_ok=True)
    layers_doc = []
    for i, layer in enumerate(model.layers):
        tex_name = f"textures/layer_{i:03d}.png"
        layer.texture.save(out / tex_name)
        layers_doc.append(
            {
                "name": layer.name,
                "z": int(layer.z),
                "opacity": float(layer.opacity),
                "texture": tex_name,
                "mesh": {
                    "vertices": _floats(layer.mesh.vertices),
                    "uvs": _floats(layer.mesh.uvs),
                    "triangles": _ints(layer.mesh.triangles),
                },
            }
        )
    doc = {
        "format_version": FORMAT_VERSION,
        "canvas_size": [int(model.canvas_size[0]), int(model.canvas_size[1])],
        "layers": layers_doc,
        "parameters": [
            {"id": p.id, "min": float(p.min), "max": float(p.max), "default": float(p.default)}
            for p in model.parameters
        ],
        "deformers": [
            {
                "layer": d.layer,
                "parameter": d.parameter,
                "keys": [{"value": float(v), "offsets": _floats(off)} for v, off in d.keys],
            }
            for d in model.deformers
        ],
        "blendshapes": [
            {"name": b.name, "layer": b.layer, "offsets": _floats(b.offsets)} for b in model.blendshapes
        ],
    }
    manifest = out / MODEL_MANIFEST
    manifest.write_bytes(canonical_json_bytes(doc))
    return manifest


def load_model(model_dir) -> CharacterModel:
    root = Path(model_dir)
    manifest = root / MODEL_MANIFEST
    if not manifest.is_file():
        raise ModelIOError(f"model manifest not found: {manifest}")
    doc = json.loads(manifest.read_text(encoding="utf-8"))
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelIOError(f"unknown format_version {version!r} (supported: {FORMAT_VERSION})")
    layers = []
    for entry in doc.get("layers", []):
        tex_path = root / entry["texture"]
        if not tex_path.is_file():
            raise ModelIOError(f"layer {entry['name']!r}: missing texture file {tex_path}")
        mesh = Mesh(
            vertices=np.asarray(entry["mesh"]["vertices"], dtype=np.float64),
            uvs=np.asarray(entry["mesh"]["uvs"], dtype=np.float64),
            triangles=np.asarray(entry["mesh"]["triangles"], dtype=np.int32),
        )
        layers.append(
            ModelLayer(
                name=entry["name"],
                z=int(entry["z"]),
                mesh=mesh,
                texture=RasterImage.load(tex_path),
                opacity=float(entry.get("opacity", 1.0)),
            )
        )
    model = CharacterModel(
        canvas_size=tuple(doc["canvas_size"]),
        layers=layers,
        parameters=[
            Parameter(id=p["id"], min=float(p["min"]), max=float(p["max"]), default=float(p["default"]))
            for p in doc.get("parameters", [])
        ],
        deformers=[
            Deformer(
                layer=d["layer"],
                parameter=d["parameter"],
                keys=[(k["value"], np.asarray(k["offsets"], dtype=np.float64)) for k in d["keys"]],
            )
            for d in doc.get("deformers", [])
        ],
        blendshapes=[
            Blendshape(name=b["name"], layer=b["layer"], offsets=np.asarray(b["offsets"], dtype=np.float64))
            for b in doc.get("blendshapes", [])
        ],
    )
    model.validate()
    return model


# --- clips -------------------------------------------------------------------


def save_clip(clip: AnimationClip, path) -> Path:
    doc = {
        "format_version": FORMAT_VERSION,
        "duration": float(clip.duration),
        "tracks": [
            {
                "parameter": t.parameter,
                "interpolation": t.interpolation,
                "keyframes": [[float(kt), float(kv)] for kt, kv in t.keyframes],
            }
            for t in clip.tracks
        ],
    }
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(canonical_json_bytes(doc))
    return out


def load_clip(path, parameters: list[Parameter] | None = None) -> AnimationClip:
    p = Path(path)
    if not p.is_file():
        raise ModelIOError(f"clip file not found: {p}")
    doc = json.loads(p.read_text(encoding="utf-8"))
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelIOError(f"unknown format_version {version!r} (supported: {FORMAT_VERSION})")
    clip = AnimationClip(
        duration=float(doc["duration"]),
        tracks=[
            Track(
                parameter=t["parameter"],
                keyframes=[(kt, kv) for kt, kv in t["keyframes"]],
                interpolation=t.get("interpolation", "linear"),
            )
            for t in doc.get("tracks", [])
        ],
    )
    clip.check_ranges(parameters if parameters is not None else mouth_parameters())
    return clip
