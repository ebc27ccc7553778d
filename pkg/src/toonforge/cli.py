"""Command line entry points: generate, render, edit, eval-parser, serve."""

from __future__ import annotations

import argparse
import base64
import json
import sys
import time
from pathlib import Path

from .catalog import load_catalog
from .data import default_catalog_dir, default_lexicon_path
from .modelio import canonical_json_bytes, load_clip, load_model, save_model
from .pipeline import CharacterRecord, generate_character, rebuild_from_record
from .raster import render_clip
from .rig import load_viseme_timeline, viseme_clip
from .service import CHARACTER_RECORD, create_app, store_root
from .textparse import generate_corpus, evaluate_parser, load_lexicon


def _add_data_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--catalog", type=Path, default=None, help="catalog directory (default: built-in)")
    parser.add_argument("--lexicon", type=Path, default=None, help="lexicon file (default: built-in)")


def _load_data(args):
    catalog = load_catalog(args.catalog if args.catalog else default_catalog_dir())
    lexicon = load_lexicon(args.lexicon if args.lexicon else default_lexicon_path())
    lexicon.validate_against(catalog)
    return catalog, lexicon


def _parse_rgb(text: str) -> tuple[int, ...]:
    text = text.lstrip("#")
    if len(text) not in (6, 8):
        raise SystemExit(f"expected RRGGBB or RRGGBBAA, got {text!r}")
    return tuple(int(text[i : i + 2], 16) for i in range(0, len(text), 2))


def cmd_generate(args) -> int:
    catalog, lexicon = _load_data(args)
    result = generate_character(args.text, catalog, lexicon, seed=args.seed)
    out = Path(args.out)
    t0 = time.perf_counter()
    save_model(result.model, out)
    (out / CHARACTER_RECORD).write_bytes(canonical_json_bytes(result.record.to_doc()))
    result.timings["save"] = time.perf_counter() - t0
    for stage, seconds in result.timings.items():
        print(f"{stage:>8}: {seconds * 1000:8.1f} ms")
    print(f"bundle written to {out}")
    return 0


def cmd_render(args) -> int:
    model = load_model(args.model)
    if args.visemes:
        timeline = load_viseme_timeline(Path(args.visemes).read_text(encoding="utf-8"))
        clip = viseme_clip(timeline, fps=args.fps, duration=args.duration)
    else:
        clip = load_clip(args.clip, parameters=model.parameters)
    viewport = None
    if args.size:
        w, _, h = args.size.partition("x")
        viewport = (int(w), int(h))
    background = _parse_rgb(args.background)
    if len(background) == 3:
        background = (*background, 255)
    count = render_clip(model, clip, fps=args.fps, out_dir=args.out, viewport=viewport, background=background)
    print(f"{count} frames written to {args.out}")
    return 0


def cmd_edit(args) -> int:
    catalog, _lexicon = _load_data(args)
    bundle = Path(args.model)
    record_path = bundle / CHARACTER_RECORD
    if not record_path.is_file():
        raise SystemExit(f"{bundle} has no {CHARACTER_RECORD}; was it generated by toonforge?")
    record = CharacterRecord.from_doc(json.loads(record_path.read_text(encoding="utf-8")))

    for spec in args.swap or []:
        slot_id, _, variant_id = spec.partition("=")
        catalog.variant(slot_id, variant_id)
        group = catalog.exclusive_group_of(slot_id)
        if group is not None:
            for member in group:
                if member != slot_id:
                    record.selection.variants.pop(member, None)
        record.selection.variants[slot_id] = variant_id
    for spec in args.recolor or []:
        slot_id, _, hexcolor = spec.partition("=")
        record.ops.append({"op": "recolor", "slot": slot_id, "rgb": list(_parse_rgb(hexcolor)[:3])})
    for spec in args.mask_recolor or []:
        mask_file, _, hexcolor = spec.partition("=")
        mask_b64 = base64.b64encode(Path(mask_file).read_bytes()).decode("ascii")
        record.ops.append({"op": "mask_recolor", "mask": mask_b64, "rgb": list(_parse_rgb(hexcolor)[:3])})

    model = rebuild_from_record(record, catalog)
    out = Path(args.out)
    save_model(model, out)
    (out / CHARACTER_RECORD).write_bytes(canonical_json_bytes(record.to_doc()))
    print(f"edited bundle written to {out}")
    return 0


def cmd_eval_parser(args) -> int:
    catalog, lexicon = _load_data(args)
    pairs = generate_corpus(catalog, lexicon, n=args.n, seed=args.seed, noise=args.noise == "on")
    report = evaluate_parser(pairs, lexicon, catalog)
    for slot, acc in report.per_slot_accuracy.items():
        print(f"{slot:>12}: {acc:7.4f}")
    print(f"{'exact match':>12}: {report.exact_match:7.4f}  (n={report.n}, noise={args.noise})")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    app = create_app(store_dir=args.store, catalog_dir=args.catalog, lexicon_path=args.lexicon)
    print(f"store: {store_root(args.store)}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="toonforge", description="Text to animatable 2D cartoon characters.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a character bundle from a description")
    p.add_argument("text", help="free-text character description")
    p.add_argument("--out", required=True, type=Path, help="output bundle directory")
    p.add_argument("--seed", type=int, default=None)
    _add_data_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("render", help="render an animation clip to PNG frames")
    p.add_argument("--model", required=True, type=Path, help="character bundle directory")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--clip", type=Path, help="animation clip file")
    src.add_argument("--visemes", type=Path, help="viseme timeline file")
    p.add_argument("--fps", type=float, default=10.0)
    p.add_argument("--duration", type=float, default=None, help="viseme clip length (default: last event + 0.5s)")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--size", default=None, help="viewport WxH (default: canvas size)")
    p.add_argument("--background", default="ffffff", help="RRGGBB or RRGGBBAA")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("edit", help="swap components or recolor an existing bundle")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--swap", action="append", metavar="SLOT=VARIANT")
    p.add_argument("--recolor", action="append", metavar="SLOT=RRGGBB")
    p.add_argument("--mask-recolor", action="append", metavar="MASK.PNG=RRGGBB")
    _add_data_flags(p)
    p.set_defaults(func=cmd_edit)

    p = sub.add_parser("eval-parser", help="score the parser on a generated corpus")
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--noise", choices=("on", "off"), default="on")
    _add_data_flags(p)
    p.set_defaults(func=cmd_eval_parser)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8742)
    p.add_argument("--store", type=Path, default=None, help="store directory (default: $TOONFORGE_STORE)")
    _add_data_flags(p)
    p.set_defaults(func=cmd_serve)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
