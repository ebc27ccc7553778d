"""toonforge: text-driven layered 2D cartoon characters with an animation rig."""

from .catalog import ComponentCatalog, Selection, default_selection, list_variants, load_catalog
from .composer import compose_template, derive_variant, merge_layers
from .image import RasterImage
from .modelio import load_clip, load_model, save_clip, save_model
from .paint import (
    StyleSpec,
    erase_region,
    extract_component,
    recolor_region,
    repair_occlusion,
    synthesize_appearance,
)
from .pipeline import generate_character
from .raster import rasterize, render_clip
from .rig import (
    AnimationClip,
    ArkitFrame,
    CharacterModel,
    VisemeTimeline,
    apply_parameters,
    coefficients_to_clip,
    map_arkit_mouth,
    sample_clip,
    viseme_params,
)
from .textparse import Lexicon, ParsedDescription, evaluate_parser, generate_corpus, load_lexicon, parse_description

__version__ = "0.1.0"
