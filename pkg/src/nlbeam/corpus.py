"""Synthetic labeled-paragraph generation.

Paragraphs are built by concatenating sentence templates drawn from four
categories, with each bracketed slot filled from its entity type's word
list or numeric range. The generator emits gold BIO labels and gold slot
bindings, which downstream tests use as an oracle.
"""

from __future__ import annotations

import json
import math
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, CorpusFormatError, TemplateError
from .registry import (
    CATEGORICAL,
    ENTITY_BY_NAME,
    POINT,
    SCALAR,
    EntityType,
)
from .text import tokenize

CATEGORIES = ("Hardware", "Parameter", "Measure", "Condition")

FORMAT_VERSION = 1

# Paragraph length in sentences. Calibrated together with the default
# template pack so the slot count per paragraph lands around 25 +/- 8.
DEFAULT_MIN_SENTENCES = 4
DEFAULT_MAX_SENTENCES = 11

_SLOT_RE = re.compile(r"\[([BI])-([A-Z][A-Z-]*)\]")


@dataclass(frozen=True)
class Slot:
    prefix: str  # "B" or "I"
    entity: EntityType


@dataclass(frozen=True)
class Template:
    id: str
    category: str
    text: str
    # Alternating literal text and slots, in order; literals may be "".
    parts: tuple[object, ...] = field(repr=False)

    @property
    def slots(self) -> tuple[Slot, ...]:
        return tuple(p for p in self.parts if isinstance(p, Slot))

    @property
    def opens_group(self) -> bool:
        """True if the template's first slot is B- (or it has no slots)."""
        slots = self.slots
        return not slots or slots[0].prefix == "B"


@dataclass
class TemplateSet:
    by_category: dict[str, list[Template]]

    @property
    def templates(self) -> list[Template]:
        return [t for cat in CATEGORIES for t in self.by_category.get(cat, [])]

    def __len__(self) -> int:
        return sum(len(v) for v in self.by_category.values())


@dataclass(frozen=True)
class Binding:
    entity: str
    surface: str
    value: object  # float | str | (float, float)
    group: int


@dataclass
class Paragraph:
    tokens: list[str]
    gold_labels: list[str]
    gold_bindings: list[Binding]
    seed: int
    source_templates: list[str]

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass
class CorpusSplit:
    train_templates: dict[str, list[Template]]
    test_templates: dict[str, list[Template]]
    train_paragraphs: list[Paragraph]
    test_paragraphs: list[Paragraph]


def _parse_template_text(text: str, line_no: int) -> tuple[object, ...]:
    parts: list[object] = []
    pos = 0
    for m in _SLOT_RE.finditer(text):
        literal = text[pos:m.start()]
        entity = ENTITY_BY_NAME.get(m.group(2))
        if entity is None:
            raise TemplateError(
                f"line {line_no}: unknown entity name {m.group(2)!r}")
        parts.append(literal)
        parts.append(Slot(m.group(1), entity))
        pos = m.end()
    parts.append(text[pos:])
    # Any leftover bracket means a slot that did not match the grammar.
    for chunk in parts:
        if isinstance(chunk, str) and ("[" in chunk or "]" in chunk):
            raise TemplateError(f"line {line_no}: malformed slot syntax in "
                                f"{chunk.strip()!r}")
    return tuple(parts)


def parse_template_line(line: str, line_no: int, ordinal: dict[str, int]
                        ) -> Template:
    category, sep, text = line.partition("\t")
    if not sep:
        raise TemplateError(
            f"line {line_no}: expected 'category<TAB>sentence'")
    category = category.strip()
    if category not in CATEGORIES:
        raise TemplateError(f"line {line_no}: unknown category {category!r}")
    text = text.strip()
    parts = _parse_template_text(text, line_no)
    n = ordinal.get(category, 0)
    ordinal[category] = n + 1
    tpl = Template(f"{category.lower()}-{n:03d}", category, text, parts)
    slots = tpl.slots
    if len(slots) > 8:
        raise TemplateError(f"line {line_no}: more than 8 slots")
    return tpl


def load_templates(path: str | Path) -> TemplateSet:
    """Load a template pack: one `category<TAB>sentence` per line."""
    by_category: dict[str, list[Template]] = {c: [] for c in CATEGORIES}
    ordinal: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            tpl = parse_template_line(line, line_no, ordinal)
            by_category[tpl.category].append(tpl)
    return TemplateSet({c: v for c, v in by_category.items() if v})


def default_template_path() -> Path:
    return Path(__file__).parent / "data" / "templates.txt"


def _decimals_for_step(step: float) -> int:
    if float(step).is_integer():
        return 0
    return max(0, -int(math.floor(math.log10(step) + 1e-9)))


def _render_number(value: float, decimals: int) -> str:
    if float(value).is_integer():
        return str(int(value))
    return f"{value:.{decimals}f}"


def _sample_scalar(entity: EntityType, rng: random.Random) -> float:
    k = rng.randrange(entity.n_steps)
    decimals = _decimals_for_step(entity.step)
    return round(entity.low + k * entity.step, decimals)


def sample_slot_value(entity: EntityType, rng: random.Random
                      ) -> tuple[str, object]:
    """Sample one value for a slot; returns (surface text, parsed value)."""
    if entity.value_kind == CATEGORICAL:
        word = rng.choice(entity.words)
        return word, word
    if entity.value_kind == POINT:
        x = _sample_scalar(entity, rng)
        y = _sample_scalar(entity, rng)
        d = _decimals_for_step(entity.step)
        return f"({_render_number(x, d)}, {_render_number(y, d)})", (x, y)
    value = _sample_scalar(entity, rng)
    surface = _render_number(value, _decimals_for_step(entity.step))
    if entity.name in ("XPOS-REL", "YPOS-REL") and rng.random() < 0.5:
        surface += "mm"  # exercise unit-suffix handling in the tokenizer
    return surface, value


@dataclass
class SentenceFragment:
    tokens: list[str]
    labels: list[str]
    bindings: list[Binding]
    last_group: int


def instantiate_template(t: Template, rng: random.Random,
                         open_group: int = -1) -> SentenceFragment:
    """Fill a template's slots; every slot-surface token gets the full label.

    ``open_group`` is the index of the command group currently open in the
    surrounding paragraph (-1 if none); B- slots open a new group.
    """
    tokens: list[str] = []
    labels: list[str] = []
    bindings: list[Binding] = []
    group = open_group
    for part in t.parts:
        if isinstance(part, Slot):
            surface, value = sample_slot_value(part.entity, rng)
            if part.prefix == "B":
                group += 1
            bindings.append(Binding(part.entity.name, surface, value, group))
            label = f"{part.prefix}-{part.entity.name}"
            for tok in tokenize(surface).tokens:
                tokens.append(tok)
                labels.append(label)
        else:
            for tok in tokenize(part).tokens:
                tokens.append(tok)
                labels.append("O")
    return SentenceFragment(tokens, labels, bindings, group)


def generate_paragraph(ts: TemplateSet, rng: random.Random,
                       min_sentences: int = DEFAULT_MIN_SENTENCES,
                       max_sentences: int = DEFAULT_MAX_SENTENCES,
                       seed: int = 0) -> Paragraph:
    """Concatenate k ~ U[min, max] instantiated templates into a paragraph."""
    if len(ts) == 0:
        raise ConfigError("template set is empty")
    if not 1 <= min_sentences <= max_sentences:
        raise ConfigError("need 1 <= min_sentences <= max_sentences")
    categories = [c for c in CATEGORIES if ts.by_category.get(c)]
    k = rng.randint(min_sentences, max_sentences)
    tokens: list[str] = []
    labels: list[str] = []
    bindings: list[Binding] = []
    used: list[str] = []
    group = -1
    for _ in range(k):
        for _attempt in range(1000):
            cat = rng.choice(categories)
            tpl = rng.choice(ts.by_category[cat])
            # A continuation template (first slot I-) needs an open group.
            if group >= 0 or tpl.opens_group:
                break
        else:
            raise ConfigError("no group-opening template available")
        frag = instantiate_template(tpl, rng, open_group=group)
        tokens.extend(frag.tokens)
        labels.extend(frag.labels)
        bindings.extend(frag.bindings)
        group = frag.last_group
        used.append(tpl.id)
    return Paragraph(tokens, labels, bindings, seed, used)


def split_templates(ts: TemplateSet, seed: int, train_fraction: float = 0.8
                    ) -> tuple[dict[str, list[Template]],
                               dict[str, list[Template]]]:
    """Disjoint per-category template split, train_fraction to train."""
    rng = random.Random(f"split:{seed}")
    train: dict[str, list[Template]] = {}
    test: dict[str, list[Template]] = {}
    for cat, templates in ts.by_category.items():
        if len(templates) < 2:
            raise ConfigError(
                f"category {cat!r} has {len(templates)} template(s); "
                "need at least 2 to split")
        order = list(templates)
        rng.shuffle(order)
        n_train = round(len(order) * train_fraction)
        n_train = min(max(n_train, 1), len(order) - 1)
        train[cat] = sorted(order[:n_train], key=lambda t: t.id)
        test[cat] = sorted(order[n_train:], key=lambda t: t.id)
    return train, test


def _paragraph_seed(seed: int, index: int) -> int:
    return (seed * 1_000_003 + index) & 0x7FFFFFFF


def generate_corpus(ts: TemplateSet, n: int, seed: int,
                    train_fraction: float = 0.8,
                    min_sentences: int = DEFAULT_MIN_SENTENCES,
                    max_sentences: int = DEFAULT_MAX_SENTENCES
                    ) -> CorpusSplit:
    """Template-disjoint corpus: n paragraphs split train/test by count."""
    if n <= 0:
        raise ConfigError("n must be positive")
    train_t, test_t = split_templates(ts, seed, train_fraction)
    n_train = round(n * train_fraction)
    sets = (TemplateSet(train_t), TemplateSet(test_t))
    paragraphs: tuple[list[Paragraph], list[Paragraph]] = ([], [])
    for i in range(n):
        which = 0 if i < n_train else 1
        pseed = _paragraph_seed(seed, i)
        rng = random.Random(pseed)
        paragraphs[which].append(generate_paragraph(
            sets[which], rng, min_sentences, max_sentences, seed=pseed))
    return CorpusSplit(train_t, test_t, paragraphs[0], paragraphs[1])


def check_bio_consistency(labels: list[str]) -> bool:
    """An I- label is valid only once some B- label has opened a group."""
    seen_b = False
    for lab in labels:
        if lab.startswith("B-"):
            seen_b = True
        elif lab.startswith("I-") and not seen_b:
            return False
    return True


# ---------------------------------------------------------------------------
# Serialization: one file per split, line-delimited JSON with a header line.


def _template_to_json(t: Template) -> dict:
    return {"id": t.id, "category": t.category, "text": t.text}


def _template_from_json(obj: dict) -> Template:
    parts = _parse_template_text(obj["text"], 0)
    return Template(obj["id"], obj["category"], obj["text"], parts)


def _paragraph_to_json(p: Paragraph) -> dict:
    return {
        "tokens": p.tokens,
        "labels": p.gold_labels,
        "bindings": [{"entity": b.entity, "surface": b.surface,
                      "value": list(b.value) if isinstance(b.value, tuple)
                      else b.value, "group": b.group}
                     for b in p.gold_bindings],
        "seed": p.seed,
        "templates": p.source_templates,
    }


def _paragraph_from_json(obj: dict) -> Paragraph:
    bindings = [
        Binding(b["entity"], b["surface"],
                tuple(b["value"]) if isinstance(b["value"], list)
                else b["value"], b["group"])
        for b in obj["bindings"]
    ]
    return Paragraph(list(obj["tokens"]), list(obj["labels"]), bindings,
                     obj["seed"], list(obj["templates"]))


def _write_split_file(path: Path, templates: dict[str, list[Template]],
                      paragraphs: list[Paragraph]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "format_version": FORMAT_VERSION,
            "templates": {cat: [_template_to_json(t) for t in ts]
                          for cat, ts in templates.items()},
            "count": len(paragraphs),
        }
        fh.write(json.dumps(header) + "\n")
        for p in paragraphs:
            fh.write(json.dumps(_paragraph_to_json(p)) + "\n")


def _read_split_file(path: Path) -> tuple[dict[str, list[Template]],
                                          list[Paragraph]]:
    if not path.exists():
        raise CorpusFormatError(f"missing corpus file {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            header = json.loads(fh.readline())
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(f"{path}: unreadable header") from exc
        version = header.get("format_version")
        if version != FORMAT_VERSION:
            raise CorpusFormatError(
                f"{path}: format version {version!r}, expected "
                f"{FORMAT_VERSION}")
        templates = {cat: [_template_from_json(t) for t in ts]
                     for cat, ts in header["templates"].items()}
        paragraphs = []
        for index, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                paragraphs.append(_paragraph_from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusFormatError(
                    f"{path}: corrupt record at index {index}") from exc
    return templates, paragraphs


def write_corpus(c: CorpusSplit, path: str | Path) -> None:
    """Write train.jsonl and test.jsonl under directory ``path``."""
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    _write_split_file(d / "train.jsonl", c.train_templates,
                      c.train_paragraphs)
    _write_split_file(d / "test.jsonl", c.test_templates, c.test_paragraphs)


def read_corpus(path: str | Path) -> CorpusSplit:
    d = Path(path)
    train_t, train_p = _read_split_file(d / "train.jsonl")
    test_t, test_p = _read_split_file(d / "test.jsonl")
    return CorpusSplit(train_t, test_t, train_p, test_p)
