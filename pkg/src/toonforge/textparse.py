"""Lexicon-driven extraction of component selections from free text.

A deterministic greedy longest-match parser over a fixed vocabulary,
together with a corpus generator (selections rendered through sentence
templates, optionally with filler noise) and the accuracy harness that
scores the parser against generated gold pairs.

Color terms are transparent to component matching: "long pink hair" still
matches "long hair", then "pink" binds to the nearest component mention
within three tokens to its right, falling back to the previous mention.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from pathlib import Path

from .catalog import ComponentCatalog, Selection

_TOKEN_RE = re.compile(r"[a-z0-9]+(?:[-'][a-z0-9]+)*")

COLOR_BIND_WINDOW = 3


class TextParseError(ValueError):
    """Bad lexicon data or harness misuse (parsing itself never raises)."""


@dataclass(frozen=True)
class LexiconEntry:
    tokens: tuple[str, ...]
    target: str  # slot id or attribute id
    value: str  # variant id / attribute value; "" = color anchor only
    priority: int = 0


@dataclass
class Lexicon:
    entries: list[LexiconEntry]
    color_terms: dict[tuple[str, ...], tuple[str, tuple[int, int, int]]]  # tokens -> (name, rgb)
    distractors: list[str]
    _by_first: dict[str, list[tuple[int, LexiconEntry]]] = field(default_factory=dict, repr=False)
    _forms: dict[tuple[str, str], list[str]] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        seen: set[tuple[tuple[str, ...], str]] = set()
        for entry in self.entries:
            key = (entry.tokens, entry.target)
            if key in seen:
                raise TextParseError(f"duplicate lexicon surface form {' '.join(entry.tokens)!r} for {entry.target!r}")
            seen.add(key)
        for order, entry in enumerate(self.entries):
            self._by_first.setdefault(entry.tokens[0], []).append((order, entry))
            if entry.value:
                self._forms.setdefault((entry.target, entry.value), []).append(" ".join(entry.tokens))
        for candidates in self._by_first.values():
            candidates.sort(key=lambda item: (-len(item[1].tokens), -item[1].priority, item[0]))

    def forms_for(self, target: str, value: str) -> list[str]:
        forms = self._forms.get((target, value))
        if not forms:
            raise TextParseError(f"lexicon has no surface form for {target}={value}")
        return forms

    def color_names(self) -> list[str]:
        return [name for name, _ in self.color_terms.values()]

    def rgb_of(self, color_name: str) -> tuple[int, int, int]:
        for name, rgb in self.color_terms.values():
            if name == color_name:
                return rgb
        raise TextParseError(f"unknown color {color_name!r}")

    def validate_against(self, catalog: ComponentCatalog) -> None:
        slot_ids = {s.id for s in catalog.slots}
        for entry in self.entries:
            if entry.target in slot_ids:
                if entry.value and entry.value not in {v.id for v in catalog.variants[entry.target]}:
                    raise TextParseError(
                        f"lexicon maps {' '.join(entry.tokens)!r} to unknown variant {entry.value!r} of {entry.target!r}"
                    )
            elif entry.target in catalog.attribute_domains:
                if entry.value and entry.value not in catalog.attribute_domains[entry.target]:
                    raise TextParseError(
                        f"lexicon maps {' '.join(entry.tokens)!r} to {entry.value!r}, "
                        f"outside the {entry.target!r} domain"
                    )
            else:
                raise TextParseError(f"lexicon target {entry.target!r} is neither slot nor attribute")


@dataclass
class ParsedDescription:
    selection: dict[str, str] = field(default_factory=dict)
    colors: dict[str, tuple[int, int, int]] = field(default_factory=dict)
    attributes: dict[str, str] = field(default_factory=dict)
    unmatched_tokens: list[str] = field(default_factory=list)

    def same_content(self, other: ParsedDescription) -> bool:
        """Equality on extracted content, ignoring unmatched fillers."""
        return (
            self.selection == other.selection
            and self.colors == other.colors
            and self.attributes == other.attributes
        )


@dataclass
class AccuracyReport:
    per_slot_accuracy: dict[str, float]
    exact_match: float
    n: int


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def load_lexicon(path) -> Lexicon:
    return parse_lexicon_text(Path(path).read_text(encoding="utf-8"), source=str(path))


def parse_lexicon_text(text: str, source: str = "<string>") -> Lexicon:
    entries: list[LexiconEntry] = []
    colors: dict[tuple[str, ...], tuple[str, tuple[int, int, int]]] = {}
    distractors: list[str] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split("|")]
        if len(parts) not in (3, 4):
            raise TextParseError(f"{source}:{line_no}: expected 'form | target | value [| priority]'")
        form, target, value = parts[0], parts[1], parts[2]
        priority = int(parts[3]) if len(parts) == 4 and parts[3] else 0
        tokens = tuple(tokenize(form))
        if not tokens:
            raise TextParseError(f"{source}:{line_no}: empty surface form")
        if target == "distractor":
            distractors.append(form)
        elif target == "color":
            rgb = (int(value[0:2], 16), int(value[2:4], 16), int(value[4:6], 16))
            colors[tokens] = (" ".join(tokens), rgb)
        else:
            entries.append(LexiconEntry(tokens=tokens, target=target, value=value, priority=priority))
    return Lexicon(entries=entries, color_terms=colors, distractors=distractors)


# --- parsing -----------------------------------------------------------------


def parse_description(text: str, lexicon: Lexicon, catalog: ComponentCatalog) -> ParsedDescription:
    """Total function: any input yields a (possibly empty) description."""
    tokens = tokenize(text)
    slot_ids = {s.id for s in catalog.slots}

    # color spans first (greedy longest), then entries over the color-free stream
    color_spans: list[tuple[int, int, str, tuple[int, int, int]]] = []
    in_color = [False] * len(tokens)
    max_color_len = max((len(k) for k in lexicon.color_terms), default=0)
    i = 0
    while i < len(tokens):
        hit = None
        for length in range(min(max_color_len, len(tokens) - i), 0, -1):
            key = tuple(tokens[i : i + length])
            if key in lexicon.color_terms:
                hit = (length, *lexicon.color_terms[key])
                break
        if hit:
            length, name, rgb = hit
            color_spans.append((i, i + length, name, rgb))
            for j in range(i, i + length):
                in_color[j] = True
            i += length
        else:
            i += 1

    filtered = [(idx, tok) for idx, tok in enumerate(tokens) if not in_color[idx]]
    matches: list[tuple[int, LexiconEntry]] = []  # (original start index, entry)
    matched_orig: set[int] = set()
    pos = 0
    while pos < len(filtered):
        entry_hit = None
        for _, entry in lexicon._by_first.get(filtered[pos][1], []):
            span = filtered[pos : pos + len(entry.tokens)]
            if len(span) == len(entry.tokens) and all(t == et for (_, t), et in zip(span, entry.tokens)):
                entry_hit = entry
                break
        if entry_hit is None:
            pos += 1
            continue
        span = filtered[pos : pos + len(entry_hit.tokens)]
        matches.append((span[0][0], entry_hit))
        matched_orig.update(idx for idx, _ in span)
        pos += len(entry_hit.tokens)

    out = ParsedDescription()
    for _, entry in matches:
        if not entry.value:
            continue
        if entry.target in slot_ids:
            out.selection[entry.target] = entry.value  # last mention wins
        else:
            out.attributes[entry.target] = entry.value

    for c0, c1, name, rgb in color_spans:
        right = [(s, e) for s, e in matches if c1 <= s < c1 + COLOR_BIND_WINDOW]
        if right:
            start, entry = min(right, key=lambda m: m[0])
        else:
            left = [(s, e) for s, e in matches if s < c0]
            if not left:
                continue  # dangling color: recorded via unmatched below
            start, entry = max(left, key=lambda m: m[0])
        out.colors[entry.target] = rgb
        domain = catalog.attribute_domains.get(entry.target)
        if domain and name in domain:
            out.attributes[entry.target] = name

    bound_spans = {(c0, c1) for c0, c1, _, _ in color_spans if _has_binding(c0, c1, matches)}
    for idx, tok in enumerate(tokens):
        if idx in matched_orig:
            continue
        if in_color[idx] and any(c0 <= idx < c1 for c0, c1 in bound_spans):
            continue
        out.unmatched_tokens.append(tok)
    return out


def _has_binding(c0: int, c1: int, matches: list[tuple[int, LexiconEntry]]) -> bool:
    return any(c1 <= s < c1 + COLOR_BIND_WINDOW for s, _ in matches) or any(s < c0 for s, _ in matches)


# --- corpus ------------------------------------------------------------------

_TEMPLATES = (
    "a girl with {parts}.",
    "a boy with {parts}.",
    "an anime girl with {parts}.",
    "a cartoon character with {parts}.",
    "portrait of a girl with {parts}.",
)


def generate_corpus(
    catalog: ComponentCatalog,
    lexicon: Lexicon,
    n: int,
    seed: int,
    noise: bool = False,
) -> list[tuple[str, ParsedDescription]]:
    """Sample selections and render them through templates; gold comes free.

    With noise on, 0-3 distractor phrases are mixed in and surface forms are
    drawn uniformly among synonyms instead of taking the first form.
    """
    if n < 1:
        raise TextParseError("corpus size must be >= 1")
    rng = random.Random(seed)
    eye_colors = [c for c in catalog.attribute_domains.get("eye_color", []) if _known_color(lexicon, c)]
    pairs: list[tuple[str, ParsedDescription]] = []
    for _ in range(n):
        selection = _sample_selection(catalog, rng)
        k = rng.randint(1, len(selection))
        mentioned = rng.sample(sorted(selection), k)
        gold = ParsedDescription()
        parts: list[str] = []
        for slot in mentioned:
            variant = selection[slot]
            gold.selection[slot] = variant
            forms = lexicon.forms_for(slot, variant)
            form = rng.choice(forms) if noise else forms[0]
            if rng.random() < 0.45:
                name, rgb = _draw_color(lexicon, rng)
                form = f"{name} {form}"
                gold.colors[slot] = rgb
            parts.append(form)
        if eye_colors and rng.random() < 0.4:
            name = rng.choice(eye_colors)
            parts.append(f"{name} eyes")
            gold.colors["eye_color"] = lexicon.rgb_of(name)
            gold.attributes["eye_color"] = name
        for attr in ("eyebrows", "face_shape"):
            domain = catalog.attribute_domains.get(attr, [])
            if domain and rng.random() < 0.2:
                value = rng.choice(domain)
                parts.append(rng.choice(lexicon.forms_for(attr, value)) if noise else lexicon.forms_for(attr, value)[0])
                gold.attributes[attr] = value
        if noise and lexicon.distractors:
            for _ in range(rng.randint(0, 3)):
                parts.insert(rng.randint(0, len(parts)), rng.choice(lexicon.distractors))
        template = _TEMPLATES[rng.randrange(len(_TEMPLATES))]
        if len(parts) == 1:
            joined = parts[0]
        else:
            joined = ", ".join(parts[:-1]) + " and " + parts[-1]
        pairs.append((template.format(parts=joined), gold))
    return pairs


def _sample_selection(catalog: ComponentCatalog, rng: random.Random) -> dict[str, str]:
    chosen: dict[str, str] = {}
    skipped: set[str] = set()
    for slot in catalog.slots:
        if slot.id in skipped or slot.id in chosen:
            continue
        slot_id = slot.id
        group = catalog.exclusive_group_of(slot_id)
        if group is not None:
            slot_id = group[rng.randrange(len(group))]
            skipped.update(g for g in group if g != slot_id)
        ids = [v.id for v in catalog.variants.get(slot_id, [])]
        if ids:
            chosen[slot_id] = ids[rng.randrange(len(ids))]
    return chosen


def _known_color(lexicon: Lexicon, name: str) -> bool:
    return any(n == name for n, _ in lexicon.color_terms.values())


def _draw_color(lexicon: Lexicon, rng: random.Random) -> tuple[str, tuple[int, int, int]]:
    keys = sorted(lexicon.color_terms)
    name, rgb = lexicon.color_terms[keys[rng.randrange(len(keys))]]
    return name, rgb


# --- evaluation ----------------------------------------------------------------


def evaluate_parser(
    corpus: list[tuple[str, ParsedDescription]],
    lexicon: Lexicon,
    catalog: ComponentCatalog,
) -> AccuracyReport:
    if not corpus:
        raise TextParseError("cannot evaluate an empty corpus")
    slot_hits = {s.id: 0 for s in catalog.slots}
    exact = 0
    for text, gold in corpus:
        predicted = parse_description(text, lexicon, catalog)
        for slot in slot_hits:
            if predicted.selection.get(slot) == gold.selection.get(slot):
                slot_hits[slot] += 1
        if predicted.same_content(gold):
            exact += 1
    n = len(corpus)
    return AccuracyReport(
        per_slot_accuracy={slot: hits / n for slot, hits in slot_hits.items()},
        exact_match=exact / n,
        n=n,
    )


# --- corpus files ---------------------------------------------------------------


def save_corpus(pairs: list[tuple[str, ParsedDescription]], path) -> None:
    import json

    lines = []
    for text, gold in pairs:
        doc = {
            "selection": gold.selection,
            "colors": {k: list(v) for k, v in gold.colors.items()},
            "attributes": gold.attributes,
        }
        lines.append(text + "\t" + json.dumps(doc, sort_keys=True, ensure_ascii=False, separators=(",", ":")))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_corpus(path) -> list[tuple[str, ParsedDescription]]:
    import json

    pairs = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            text, blob = line.split("\t", 1)
            doc = json.loads(blob)
        except ValueError as exc:
            raise TextParseError(f"{path}:{line_no}: malformed corpus line") from exc
        pairs.append(
            (
                text,
                ParsedDescription(
                    selection=dict(doc.get("selection", {})),
                    colors={k: tuple(v) for k, v in doc.get("colors", {}).items()},
                    attributes=dict(doc.get("attributes", {})),
                ),
            )
        )
    return pairs


def selection_from_parse(
    parsed: ParsedDescription, defaults: Selection, catalog: ComponentCatalog
) -> Selection:
    """Overlay a parse onto default choices (parse wins where present).

    Mentioning one member of an exclusive group evicts the default pick of
    the other members (asking for a skirt replaces the default pants).
    """
    merged = Selection(
        variants=dict(defaults.variants),
        attributes=dict(defaults.attributes),
        colors=dict(defaults.colors),
    )
    for slot, variant in parsed.selection.items():
        group = catalog.exclusive_group_of(slot)
        if group is not None:
            for member in group:
                if member != slot:
                    merged.variants.pop(member, None)
        merged.variants[slot] = variant
    merged.attributes.update(parsed.attributes)
    merged.colors.update(parsed.colors)
    return merged
