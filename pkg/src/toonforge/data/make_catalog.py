"""Regenerate the shipped placeholder catalog art.

Run `python -m toonforge.data.make_catalog` after changing any shape here.
Everything is drawn as filled silhouettes on the 1024x1024 canvas; line art
is a 2 px ring just inside each mask so clipping can never push strokes
outside their contour. The short back-hair variant is derived from the long
one by clipping, mirroring how larger elements spawn smaller variations.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..catalog import ComponentVariant, dilate
from ..composer import derive_variant
from ..image import RasterImage, mask_from_bool
from . import default_catalog_dir

CANVAS = (1024, 1024)
LINE_COLOR = (45, 40, 40, 255)

_YS, _XS = np.mgrid[0 : CANVAS[1], 0 : CANVAS[0]]


def ellipse(cx: float, cy: float, rx: float, ry: float) -> np.ndarray:
    return ((_XS - cx) / rx) ** 2 + ((_YS - cy) / ry) ** 2 <= 1.0


def rect(x0: int, y0: int, x1: int, y1: int) -> np.ndarray:
    occ = np.zeros((CANVAS[1], CANVAS[0]), dtype=bool)
    occ[y0:y1, x0:x1] = True
    return occ


def trapezoid(cx: int, y0: int, y1: int, half_top: float, slope: float) -> np.ndarray:
    width = half_top + np.clip(_YS - y0, 0, None) * slope
    return (np.abs(_XS - cx) <= width) & (_YS >= y0) & (_YS < y1)


def erode(occ: np.ndarray, radius: int) -> np.ndarray:
    return ~dilate(~occ, radius)


def ring(occ: np.ndarray, thickness: int = 2) -> np.ndarray:
    return occ & ~erode(occ, thickness)


def line_art_image(occ: np.ndarray, extra: np.ndarray | None = None) -> RasterImage:
    strokes = ring(occ)
    if extra is not None:
        strokes = strokes | (extra & occ)
    px = np.zeros((CANVAS[1], CANVAS[0], 4), dtype=np.uint8)
    px[strokes] = LINE_COLOR
    return RasterImage(px)


# --- base anatomy ---------------------------------------------------------

HEAD = ellipse(512, 300, 118, 128)
NECK = rect(487, 395, 537, 448)
TORSO = rect(440, 432, 584, 652)
ARM_L = rect(400, 448, 440, 640)
ARM_R = rect(584, 448, 624, 640)
LEG_L = rect(460, 650, 505, 902)
LEG_R = rect(519, 650, 564, 902)
FOOT_L = rect(452, 896, 514, 930)
FOOT_R = rect(520, 896, 582, 930)

BODY = NECK | TORSO | ARM_L | ARM_R | LEG_L | LEG_R | FOOT_L | FOOT_R
EYE_L = ellipse(468, 296, 14, 9)
EYE_R = ellipse(556, 296, 14, 9)
MOUTH = ellipse(512, 352, 26, 12)


def base_layers() -> list[dict]:
    face_extra = ring(EYE_L, 2) | ring(EYE_R, 2)
    return [
        {"name": "body", "z": 10, "occ": BODY, "line": line_art_image(BODY)},
        {"name": "face", "z": 12, "occ": HEAD, "line": line_art_image(HEAD, extra=face_extra)},
        {"name": "mouth", "z": 14, "occ": MOUTH, "line": line_art_image(MOUTH)},
    ]


# --- slot variants --------------------------------------------------------


def back_hair() -> list[tuple[str, np.ndarray]]:
    hood = ellipse(512, 300, 152, 162)
    long_hair = hood | rect(368, 300, 656, 700) | ellipse(512, 700, 144, 52)
    pony = hood | rect(598, 370, 658, 690) | ellipse(628, 690, 34, 44)
    twin = hood | rect(376, 370, 428, 670) | rect(596, 370, 648, 670) | ellipse(402, 670, 28, 36) | ellipse(622, 670, 28, 36)
    bob = ellipse(512, 316, 152, 168) | rect(368, 316, 656, 498)
    return [("bh_long", long_hair), ("bh_pony", pony), ("bh_twin", twin), ("bh_bob", bob)]


def mid_hair() -> list[tuple[str, np.ndarray]]:
    side = rect(382, 256, 418, 440) | rect(606, 256, 642, 440)
    tails = rect(382, 256, 418, 560) | rect(606, 256, 642, 560)
    short = rect(384, 256, 420, 352) | rect(604, 256, 640, 352)
    return [("mh_side", side), ("mh_tails", tails), ("mh_short", short)]


def front_hair() -> list[tuple[str, np.ndarray]]:
    blunt = rect(402, 178, 622, 262) | ellipse(512, 262, 110, 26)
    swept = rect(402, 178, 622, 240) | trapezoid(560, 240, 300, 62, -0.9)
    parted = rect(402, 178, 498, 296) | rect(526, 178, 622, 296) | rect(402, 170, 622, 210)
    return [("fh_blunt", blunt), ("fh_swept", swept), ("fh_parted", parted)]


def tops() -> list[tuple[str, np.ndarray]]:
    hoodie = rect(424, 430, 600, 674) | ellipse(512, 444, 96, 32)
    shirt = rect(432, 430, 592, 662)
    tshirt = rect(432, 430, 592, 622)
    jacket = rect(422, 430, 602, 670)
    sweater = rect(428, 430, 596, 668)
    return [("top_hoodie", hoodie), ("top_shirt", shirt), ("top_tshirt", tshirt), ("top_jacket", jacket), ("top_sweater", sweater)]


def sleeves() -> list[tuple[str, np.ndarray]]:
    arm_l, arm_r = (396, 444), (580, 444)

    def arms(y1: int, pad: int = 0) -> np.ndarray:
        return rect(arm_l[0] - pad, arm_l[1], arm_l[0] + 48 + pad, y1) | rect(
            arm_r[0] - pad, arm_r[1], arm_r[0] + 48 + pad, y1
        )

    puff = ellipse(420, 478, 36, 40) | ellipse(604, 478, 36, 40)
    rolled = arms(556) | rect(388, 540, 452, 558) | rect(572, 540, 636, 558)
    return [
        ("sl_long", arms(642)),
        ("sl_short", arms(540)),
        ("sl_none", arms(472)),
        ("sl_puff", puff),
        ("sl_rolled", rolled),
        ("sl_wide", arms(642, pad=10)),
    ]


def pants() -> list[tuple[str, np.ndarray]]:
    def legs(y1: int, pad: int = 0) -> np.ndarray:
        return rect(455 - pad, 648, 510 + pad, y1) | rect(514 - pad, 648, 569 + pad, y1)

    cargo = legs(906, pad=3) | rect(442, 720, 458, 780) | rect(566, 720, 582, 780)
    return [
        ("pn_jeans", legs(906, pad=2)),
        ("pn_shorts", legs(742, pad=4)),
        ("pn_trousers", legs(896, pad=1)),
        ("pn_leggings", legs(900)),
        ("pn_cargo", cargo),
    ]


def skirts() -> list[tuple[str, np.ndarray]]:
    ruffle = trapezoid(512, 620, 778, 64, 0.55) | ellipse(460, 778, 30, 18) | ellipse(512, 778, 30, 18) | ellipse(564, 778, 30, 18)
    return [
        ("sk_pleated", trapezoid(512, 620, 790, 62, 0.55)),
        ("sk_long", trapezoid(512, 620, 880, 62, 0.4)),
        ("sk_mini", trapezoid(512, 620, 702, 64, 0.7)),
        ("sk_aline", trapezoid(512, 620, 800, 60, 0.8)),
        ("sk_ruffle", ruffle),
    ]


def shoes() -> list[tuple[str, np.ndarray]]:
    def pair(x0: int, y0: int, w: int, y1: int) -> np.ndarray:
        return rect(x0, y0, x0 + w, y1) | rect(x0 + 70, y0, x0 + 70 + w, y1)

    heels = pair(450, 886, 64, 926) | rect(468, 926, 480, 944) | rect(538, 926, 550, 944)
    mary = pair(450, 886, 64, 934) | rect(454, 878, 510, 886) | rect(524, 878, 580, 886)
    return [
        ("sh_sneakers", pair(448, 880, 68, 936)),
        ("sh_boots", pair(448, 822, 68, 940)),
        ("sh_loafers", pair(450, 890, 64, 934)),
        ("sh_sandals", pair(450, 906, 64, 934)),
        ("sh_mary", mary),
        ("sh_heels", heels),
    ]


SLOT_DEFS = [
    ("back_hair", 0, back_hair),
    ("top", 20, tops),
    ("sleeves", 22, sleeves),
    ("pants", 24, pants),
    ("skirt", 25, skirts),
    ("shoes", 26, shoes),
    ("mid_hair", 30, mid_hair),
    ("front_hair", 32, front_hair),
]

ATTRIBUTE_DOMAINS = {
    "eye_color": ["blue", "green", "brown", "red", "purple", "amber"],
    "eyebrows": ["straight", "arched", "thick", "thin"],
    "face_shape": ["round", "oval", "heart", "square"],
}
ATTRIBUTE_DEFAULTS = {"eye_color": "brown", "eyebrows": "straight", "face_shape": "round"}


def build(out_dir: Path | None = None) -> Path:
    out = Path(out_dir) if out_dir is not None else default_catalog_dir()
    out.mkdir(parents=True, exist_ok=True)

    manifest: dict = {
        "format_version": 1,
        "canvas_size": list(CANVAS),
        "slots": [],
        "base_layers": [],
        "variants": [],
        "exclusive_groups": [["pants", "skirt"]],
        "attribute_domains": ATTRIBUTE_DOMAINS,
        "attribute_defaults": ATTRIBUTE_DEFAULTS,
        "aux_masks": {"eyes": "aux_eyes_mask.png"},
    }
    mask_from_bool(EYE_L | EYE_R).save(out / "aux_eyes_mask.png")

    for base in base_layers():
        mask_name = f"base_{base['name']}_mask.png"
        line_name = f"base_{base['name']}_line.png"
        mask_from_bool(base["occ"]).save(out / mask_name)
        base["line"].save(out / line_name)
        manifest["base_layers"].append(
            {"name": base["name"], "z": base["z"], "mask": mask_name, "line_art": line_name}
        )

    def emit(variant: ComponentVariant) -> None:
        mask_name = f"{variant.id}_mask.png"
        line_name = f"{variant.id}_line.png"
        variant.contour_mask.save(out / mask_name)
        variant.line_art.save(out / line_name)
        entry = {
            "id": variant.id,
            "slot": variant.slot,
            "mask": mask_name,
            "line_art": line_name,
            "anchor": list(variant.anchor),
        }
        if variant.derived_from:
            entry["derived_from"] = variant.derived_from
        manifest["variants"].append(entry)

    for slot_id, z_band, build_variants in SLOT_DEFS:
        manifest["slots"].append({"id": slot_id, "layer_bindings": [slot_id], "z_band": z_band})
        produced = {
            vid: ComponentVariant(
                id=vid,
                slot=slot_id,
                contour_mask=mask_from_bool(occ),
                line_art=line_art_image(occ),
            )
            for vid, occ in build_variants()
        }
        if slot_id == "back_hair":
            clip = mask_from_bool(rect(0, 0, 1024, 520))
            short = derive_variant(produced["bh_long"], clip, new_id="bh_short")
            ordered = [produced["bh_long"], short, produced["bh_pony"], produced["bh_twin"], produced["bh_bob"]]
        else:
            ordered = list(produced.values())
        for variant in ordered:
            emit(variant)

    (out / "catalog.json").write_text(
        json.dumps(manifest, indent=1, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    return out


if __name__ == "__main__":
    print(f"wrote catalog to {build()}")
