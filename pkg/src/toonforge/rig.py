"""Animation core: parameterized mesh deformation and mouth drivers.

Layers carry polygon meshes; parameters drive per-vertex offset keyforms
(piecewise-linear, additive across deformers) plus weighted blendshape
offsets. The ARKit coefficient vocabulary feeds a fixed mouth-parameter
mapping; a viseme timeline provides a deterministic lip-sync driver.
"""

from __future__ import annotations

import bisect
import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .image import RasterImage


class RigError(ValueError):
    """Model or driver data violates a rig invariant."""


# The 52 ARKit face blendshape coefficient names.
ARKIT_COEFFICIENTS = (
    "eyeBlinkLeft", "eyeLookDownLeft", "eyeLookInLeft", "eyeLookOutLeft",
    "eyeLookUpLeft", "eyeSquintLeft", "eyeWideLeft",
    "eyeBlinkRight", "eyeLookDownRight", "eyeLookInRight", "eyeLookOutRight",
    "eyeLookUpRight", "eyeSquintRight", "eyeWideRight",
    "jawForward", "jawLeft", "jawRight", "jawOpen",
    "mouthClose", "mouthFunnel", "mouthPucker", "mouthLeft", "mouthRight",
    "mouthSmileLeft", "mouthSmileRight", "mouthFrownLeft", "mouthFrownRight",
    "mouthDimpleLeft", "mouthDimpleRight", "mouthStretchLeft", "mouthStretchRight",
    "mouthRollLower", "mouthRollUpper", "mouthShrugLower", "mouthShrugUpper",
    "mouthPressLeft", "mouthPressRight",
    "mouthLowerDownLeft", "mouthLowerDownRight", "mouthUpperUpLeft", "mouthUpperUpRight",
    "browDownLeft", "browDownRight", "browInnerUp", "browOuterUpLeft", "browOuterUpRight",
    "cheekPuff", "cheekSquintLeft", "cheekSquintRight",
    "noseSneerLeft", "noseSneerRight", "tongueOut",
)

MOUTH_PARAMETER_IDS = ("MouthOpenY", "MouthForm", "MouthPucker", "MouthFunnel", "MouthPress", "MouthX")

# Viseme rows over (MouthOpenY, MouthForm, MouthPucker, MouthFunnel, MouthPress, MouthX).
VISEME_TABLE: dict[str, tuple[float, ...]] = {
    "A": (0.9, 0.2, 0.0, 0.0, 0.0, 0.0),
    "I": (0.25, 0.6, 0.0, 0.0, 0.0, 0.0),
    "U": (0.3, -0.2, 0.8, 0.4, 0.0, 0.0),
    "E": (0.5, 0.4, 0.0, 0.0, 0.0, 0.0),
    "O": (0.7, -0.1, 0.3, 0.8, 0.0, 0.0),
    "M": (0.0, 0.0, 0.0, 0.0, 0.8, 0.0),
    "F": (0.15, 0.0, 0.0, 0.0, 0.5, 0.0),
    "sil": (0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
}
VISEME_CROSS_FADE_S = 0.06


@dataclass(frozen=True)
class Parameter:
    id: str
    min: float
    max: float
    default: float

    def __post_init__(self) -> None:
        if not (self.min <= self.default <= self.max):
            raise RigError(f"parameter {self.id!r}: default {self.default} outside [{self.min}, {self.max}]")

    def clamp(self, value: float) -> float:
        return min(max(value, self.min), self.max)


def mouth_parameters() -> list[Parameter]:
    return [
        Parameter("MouthOpenY", 0.0, 1.0, 0.0),
        Parameter("MouthForm", -1.0, 1.0, 0.0),
        Parameter("MouthPucker", 0.0, 1.0, 0.0),
        Parameter("MouthFunnel", 0.0, 1.0, 0.0),
        Parameter("MouthPress", 0.0, 1.0, 0.0),
        Parameter("MouthX", -1.0, 1.0, 0.0),
    ]


@dataclass
class Mesh:
    vertices: np.ndarray  # (n, 2) float64, canvas px
    uvs: np.ndarray  # (n, 2) float64 in [0, 1]
    triangles: np.ndarray  # (m, 3) int32

    def __post_init__(self) -> None:
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 2)
        self.uvs = np.asarray(self.uvs, dtype=np.float64).reshape(-1, 2)
        self.triangles = np.asarray(self.triangles, dtype=np.int32).reshape(-1, 3)
        if len(self.uvs) != len(self.vertices):
            raise RigError(f"mesh has {len(self.vertices)} vertices but {len(self.uvs)} uvs")
        if len(self.triangles) < 1:
            raise RigError("mesh needs at least one triangle")
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)):
            raise RigError("triangle index out of range")


@dataclass
class Deformer:
    layer: str
    parameter: str
    keys: list[tuple[float, np.ndarray]]  # (parameter value, (n, 2) offsets), strictly increasing

    def __post_init__(self) -> None:
        self.keys = [(float(v), np.asarray(o, dtype=np.float64).reshape(-1, 2)) for v, o in self.keys]
        values = [v for v, _ in self.keys]
        if any(b <= a for a, b in zip(values, values[1:])):
            raise RigError(f"deformer on {self.layer!r}/{self.parameter!r}: key values not strictly increasing")

    def offsets_at(self, value: float) -> np.ndarray:
        values = [v for v, _ in self.keys]
        if value <= values[0]:
            return self.keys[0][1]
        if value >= values[-1]:
            return self.keys[-1][1]
        hi = bisect.bisect_left(values, value)
        v1, o1 = self.keys[hi]
        if value == v1:
            return o1
        v0, o0 = self.keys[hi - 1]
        t = (value - v0) / (v1 - v0)
        return o0 + (o1 - o0) * t


@dataclass
class Blendshape:
    name: str
    layer: str
    offsets: np.ndarray  # (n, 2)

    def __post_init__(self) -> None:
        self.offsets = np.asarray(self.offsets, dtype=np.float64).reshape(-1, 2)


@dataclass
class ModelLayer:
    name: str
    z: int
    mesh: Mesh
    texture: RasterImage
    opacity: float = 1.0


@dataclass
class CharacterModel:
    canvas_size: tuple[int, int]
    layers: list[ModelLayer]
    parameters: list[Parameter]
    deformers: list[Deformer] = field(default_factory=list)
    blendshapes: list[Blendshape] = field(default_factory=list)

    def validate(self) -> None:
        names = [l.name for l in self.layers]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise RigError(f"duplicate layer names: {sorted(dupes)}")
        zs = [l.z for l in self.layers]
        if any(b <= a for a, b in zip(zs, zs[1:])):
            raise RigError("layer z values must be strictly ascending")
        param_ids = [p.id for p in self.parameters]
        if len(set(param_ids)) != len(param_ids):
            raise RigError("duplicate parameter ids")
        by_name = {l.name: l for l in self.layers}
        params = {p.id: p for p in self.parameters}
        for d in self.deformers:
            if d.layer not in by_name:
                raise RigError(f"deformer references unknown layer {d.layer!r}")
            p = params.get(d.parameter)
            if p is None:
                raise RigError(f"deformer on layer {d.layer!r} references unknown parameter {d.parameter!r}")
            n = len(by_name[d.layer].mesh.vertices)
            for v, off in d.keys:
                if len(off) != n:
                    raise RigError(
                        f"deformer {d.layer!r}/{d.parameter!r}: key at {v} has {len(off)} offsets, layer has {n} vertices"
                    )
            default_keys = [off for v, off in d.keys if v == p.default]
            if not default_keys or np.any(default_keys[0] != 0.0):
                raise RigError(
                    f"deformer {d.layer!r}/{d.parameter!r}: missing all-zero key at parameter default {p.default}"
                )
        seen: set[tuple[str, str]] = set()
        for b in self.blendshapes:
            if b.layer not in by_name:
                raise RigError(f"blendshape {b.name!r} references unknown layer {b.layer!r}")
            if b.name in params:
                raise RigError(f"blendshape {b.name!r} collides with a parameter id")
            if (b.layer, b.name) in seen:
                raise RigError(f"duplicate blendshape {b.name!r} on layer {b.layer!r}")
            seen.add((b.layer, b.name))
            if len(b.offsets) != len(by_name[b.layer].mesh.vertices):
                raise RigError(f"blendshape {b.name!r}: offsets do not match layer {b.layer!r} vertex count")


@dataclass
class PosedLayer:
    name: str
    z: int
    vertices: np.ndarray  # (n, 2) float64, deformed
    mesh: Mesh
    texture: RasterImage
    opacity: float


@dataclass
class PosedModel:
    canvas_size: tuple[int, int]
    layers: list[PosedLayer]


def apply_parameters(model: CharacterModel, values: dict[str, float]) -> PosedModel:
    """Pose all layers: rest + deformer keyform offsets + weighted blendshapes.

    `values` may address parameters and blendshape names (weights in [0, 1]);
    anything else is rejected. Given values are clamped to range.
    """
    params = {p.id: p for p in model.parameters}
    shape_names = {b.name for b in model.blendshapes}
    for key in values:
        if key not in params and key not in shape_names:
            raise RigError(f"unknown parameter id {key!r}")
    resolved = {p.id: p.clamp(float(values.get(p.id, p.default))) for p in model.parameters}
    weights = {name: min(max(float(values.get(name, 0.0)), 0.0), 1.0) for name in shape_names}

    posed: list[PosedLayer] = []
    for layer in model.layers:
        total = np.zeros_like(layer.mesh.vertices)
        moved = False
        for d in model.deformers:
            if d.layer != layer.name:
                continue
            off = d.offsets_at(resolved[d.parameter])
            if np.any(off != 0.0):
                total = total + off
                moved = True
        for b in model.blendshapes:
            if b.layer != layer.name:
                continue
            w = weights[b.name]
            if w != 0.0:
                total = total + w * b.offsets
                moved = True
        vertices = layer.mesh.vertices + total if moved else layer.mesh.vertices.copy()
        posed.append(
            PosedLayer(
                name=layer.name, z=layer.z, vertices=vertices,
                mesh=layer.mesh, texture=layer.texture, opacity=layer.opacity,
            )
        )
    return PosedModel(canvas_size=model.canvas_size, layers=posed)


# --- ARKit ----------------------------------------------------------------


@dataclass
class ArkitFrame:
    t: float
    coefficients: dict[str, float]

    def __post_init__(self) -> None:
        missing = set(ARKIT_COEFFICIENTS) - set(self.coefficients)
        extra = set(self.coefficients) - set(ARKIT_COEFFICIENTS)
        if missing or extra:
            raise RigError(
                f"ARKit frame needs exactly the 52 coefficients "
                f"(missing {sorted(missing)[:3]}..., extra {sorted(extra)[:3]}...)"
                if missing and extra
                else f"ARKit frame: missing {sorted(missing)}" if missing else f"ARKit frame: unknown {sorted(extra)}"
            )
        self.coefficients = {k: min(max(float(v), 0.0), 1.0) for k, v in self.coefficients.items()}


def zero_arkit_frame(t: float = 0.0) -> ArkitFrame:
    return ArkitFrame(t=t, coefficients={name: 0.0 for name in ARKIT_COEFFICIENTS})


def map_arkit_mouth(frame: ArkitFrame) -> dict[str, float]:
    """Project the 52-coefficient face onto the canonical mouth parameters."""
    c = frame.coefficients
    return {
        "MouthOpenY": c["jawOpen"],
        "MouthForm": min(max(
            (c["mouthSmileLeft"] + c["mouthSmileRight"]) / 2.0
            - (c["mouthFrownLeft"] + c["mouthFrownRight"]) / 2.0, -1.0), 1.0),
        "MouthPucker": c["mouthPucker"],
        "MouthFunnel": c["mouthFunnel"],
        "MouthPress": (c["mouthPressLeft"] + c["mouthPressRight"]) / 2.0,
        "MouthX": min(max(c["mouthLeft"] - c["mouthRight"], -1.0), 1.0),
    }


def load_arkit_csv(text: str) -> list[ArkitFrame]:
    """CSV with header `timestamp` + the 52 coefficient names, one frame per row."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise RigError("empty ARKit CSV") from None
    header = [h.strip() for h in header]
    if not header or header[0] != "timestamp":
        raise RigError("ARKit CSV must start with a 'timestamp' column")
    if sorted(header[1:]) != sorted(ARKIT_COEFFICIENTS):
        raise RigError("ARKit CSV header must list the 52 coefficient names exactly once each")
    frames = []
    for row_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise RigError(f"ARKit CSV row {row_no}: expected {len(header)} cells, got {len(row)}")
        frames.append(
            ArkitFrame(
                t=float(row[0]),
                coefficients={name: float(cell) for name, cell in zip(header[1:], row[1:])},
            )
        )
    return frames


# --- clips -----------------------------------------------------------------


@dataclass
class Track:
    parameter: str
    keyframes: list[tuple[float, float]]  # (t, value), times non-decreasing
    interpolation: str = "linear"  # linear | hold

    def __post_init__(self) -> None:
        if self.interpolation not in ("linear", "hold"):
            raise RigError(f"unknown interpolation {self.interpolation!r}")
        self.keyframes = [(float(t), float(v)) for t, v in self.keyframes]
        times = [t for t, _ in self.keyframes]
        if any(b < a for a, b in zip(times, times[1:])):
            raise RigError(f"track {self.parameter!r}: keyframe times decrease")

    def sample(self, t: float) -> float:
        times = [kt for kt, _ in self.keyframes]
        if not times:
            raise RigError(f"track {self.parameter!r} has no keyframes")
        if t <= times[0]:
            return self.keyframes[0][1]
        if t >= times[-1]:
            return self.keyframes[-1][1]
        hi = bisect.bisect_right(times, t)
        t0, v0 = self.keyframes[hi - 1]
        t1, v1 = self.keyframes[hi]
        if self.interpolation == "hold":
            return v0
        return v0 + (v1 - v0) * (t - t0) / (t1 - t0)


@dataclass
class AnimationClip:
    duration: float
    tracks: list[Track]

    def __post_init__(self) -> None:
        if self.duration < 0:
            raise RigError("clip duration must be >= 0")

    def check_ranges(self, parameters: list[Parameter]) -> None:
        ranges = {p.id: (p.min, p.max) for p in parameters}
        for track in self.tracks:
            bounds = ranges.get(track.parameter)
            if bounds is None:
                continue
            for t, v in track.keyframes:
                if not (bounds[0] <= v <= bounds[1]):
                    raise RigError(
                        f"track {track.parameter!r}: value {v} at t={t} outside [{bounds[0]}, {bounds[1]}]"
                    )


def sample_clip(clip: AnimationClip, t: float) -> dict[str, float]:
    if t < 0:
        raise RigError("sample time must be >= 0")
    return {track.parameter: track.sample(t) for track in clip.tracks}


def coefficients_to_clip(frames: list[ArkitFrame]) -> AnimationClip:
    """One linear keyframe per frame per mouth parameter."""
    if not frames:
        raise RigError("no ARKit frames")
    times = [f.t for f in frames]
    if any(b < a for a, b in zip(times, times[1:])):
        raise RigError("ARKit frames are not time-sorted")
    rows = [map_arkit_mouth(f) for f in frames]
    tracks = [
        Track(parameter=pid, keyframes=[(f.t, row[pid]) for f, row in zip(frames, rows)])
        for pid in MOUTH_PARAMETER_IDS
    ]
    return AnimationClip(duration=times[-1], tracks=tracks)


# --- visemes ----------------------------------------------------------------


@dataclass(frozen=True)
class VisemeEvent:
    t: float
    viseme: str
    weight: float = 1.0

    def __post_init__(self) -> None:
        if self.viseme not in VISEME_TABLE:
            raise RigError(f"unknown viseme {self.viseme!r} (one of {sorted(VISEME_TABLE)})")
        object.__setattr__(self, "weight", min(max(float(self.weight), 0.0), 1.0))


@dataclass
class VisemeTimeline:
    events: list[VisemeEvent]

    def __post_init__(self) -> None:
        times = [e.t for e in self.events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise RigError("viseme event times decrease")

    @property
    def end(self) -> float:
        return self.events[-1].t if self.events else 0.0


def _steady_row(event: VisemeEvent | None) -> np.ndarray:
    if event is None:
        return np.zeros(len(MOUTH_PARAMETER_IDS))
    return np.asarray(VISEME_TABLE[event.viseme]) * event.weight


def viseme_params(timeline: VisemeTimeline, t: float) -> dict[str, float]:
    """Mouth parameters at time t: active viseme row, 60 ms linear cross-fade."""
    if t < 0:
        raise RigError("sample time must be >= 0")
    idx = bisect.bisect_right([e.t for e in timeline.events], t) - 1
    if idx < 0:
        row = _steady_row(None)
    else:
        cur = timeline.events[idx]
        row = _steady_row(cur)
        dt = t - cur.t
        if dt < VISEME_CROSS_FADE_S:
            prev = timeline.events[idx - 1] if idx > 0 else None
            u = dt / VISEME_CROSS_FADE_S
            row = _steady_row(prev) * (1.0 - u) + row * u
    return {pid: float(v) for pid, v in zip(MOUTH_PARAMETER_IDS, row)}


def viseme_clip(timeline: VisemeTimeline, fps: float, duration: float | None = None) -> AnimationClip:
    """Clip sampling viseme_params at frame times (exact at those times)."""
    if fps <= 0:
        raise RigError("fps must be positive")
    if duration is None:
        duration = timeline.end + 0.5
    n = int(np.floor(duration * fps)) + 1
    ts = [k / fps for k in range(n)]
    rows = [viseme_params(timeline, t) for t in ts]
    tracks = [
        Track(parameter=pid, keyframes=[(t, row[pid]) for t, row in zip(ts, rows)])
        for pid in MOUTH_PARAMETER_IDS
    ]
    return AnimationClip(duration=duration, tracks=tracks)


def load_viseme_timeline(text: str) -> VisemeTimeline:
    """Lines of `t viseme weight`; blank lines and #-comments ignored."""
    events = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        if len(parts) not in (2, 3):
            raise RigError(f"viseme timeline line {line_no}: expected 't viseme [weight]'")
        viseme = "M" if parts[1] == "closed" else parts[1]
        weight = float(parts[2]) if len(parts) == 3 else 1.0
        events.append(VisemeEvent(t=float(parts[0]), viseme=viseme, weight=weight))
    return VisemeTimeline(events=events)
