"""Canonical registry of the entity types the pipeline recognizes.

Each entity type is a slot of experimental information (a temperature, an
exposure time, a scan word, ...). Crossing the 20 types with the B-/I-
prefixes gives 40 entity labels; adding O yields the 41-label tag set used
everywhere downstream.

Types marked ``extrapolated=True`` round out the registry beyond the
handful of documented examples; their value ranges are chosen to be
physically sensible for a scattering endstation, not measured from
hardware.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


CATEGORICAL = "categorical-word-list"
SCALAR = "scalar-range"
POINT = "point-pair"


@dataclass(frozen=True)
class EntityType:
    name: str
    value_kind: str  # CATEGORICAL | SCALAR | POINT
    words: tuple[str, ...] = ()
    low: float = 0.0
    high: float = 0.0  # inclusive upper bound for sampling
    step: float = 1.0
    unit: str = ""
    extrapolated: bool = False

    def __post_init__(self) -> None:
        if self.value_kind == CATEGORICAL and not self.words:
            raise ValueError(f"{self.name}: categorical type needs a word list")
        if self.value_kind in (SCALAR, POINT) and not self.high > self.low:
            raise ValueError(f"{self.name}: empty numeric range")

    @property
    def n_steps(self) -> int:
        return int(math.floor((self.high - self.low) / self.step + 1e-9)) + 1


ENTITY_TYPES: tuple[EntityType, ...] = (
    EntityType("SCAN", CATEGORICAL,
               words=("exposure", "scan", "picture", "snapshot", "measure",
                      "measurement", "look at", "see")),
    EntityType("PROCESS", CATEGORICAL,
               words=("GISAXS", "TSAXS", "GIWAXS", "TWAXS")),
    EntityType("SAMPLE", CATEGORICAL, extrapolated=True,
               words=("polymer", "perovskite", "nanoparticle", "thin film",
                      "calibration", "blank", "kapton", "silicon", "control")),
    EntityType("DIRECTION", CATEGORICAL, extrapolated=True,
               words=("x", "y", "vertical", "horizontal", "diagonal")),
    EntityType("ETIME", SCALAR, low=1, high=200, step=1, unit="s"),
    EntityType("ANGLE", SCALAR, low=0.05, high=0.5, step=0.01, unit="deg",
               extrapolated=True),
    EntityType("XPOS-REL", SCALAR, low=-100, high=100, step=0.1, unit="mm"),
    EntityType("YPOS-REL", SCALAR, low=-100, high=100, step=0.1, unit="mm"),
    EntityType("XPOS-ABS", SCALAR, low=-100, high=100, step=0.1, unit="mm",
               extrapolated=True),
    EntityType("YPOS-ABS", SCALAR, low=-100, high=100, step=0.1, unit="mm",
               extrapolated=True),
    EntityType("POINT-ABS", POINT, low=-50, high=50, step=0.5, unit="mm"),
    EntityType("TEMPERATURE", SCALAR, low=-200, high=599.9, step=0.1, unit="C"),
    EntityType("TEMPERATURE-CONDITIONAL", SCALAR, low=-200, high=599.9,
               step=0.1, unit="C"),
    EntityType("NRAMP-MIN", SCALAR, low=1, high=200, step=1, unit="C/min"),
    EntityType("NRAMP-SEC", SCALAR, low=0.1, high=5, step=0.1, unit="C/s",
               extrapolated=True),
    EntityType("HUMIDITY", SCALAR, low=0, high=100, step=1, unit="%"),
    EntityType("TRATE-SEC", SCALAR, low=1, high=200, step=1, unit="s"),
    EntityType("TRATE-MIN", SCALAR, low=1, high=60, step=1, unit="min",
               extrapolated=True),
    EntityType("AMOUNT", SCALAR, low=1, high=100, step=1, unit=""),
    EntityType("HUMIDITY-CONDITIONAL", SCALAR, low=0, high=100, step=1,
               unit="%", extrapolated=True),
)

ENTITY_BY_NAME: dict[str, EntityType] = {e.name: e for e in ENTITY_TYPES}

assert len(ENTITY_TYPES) == 20

# Label order is fixed: O first, then B-/I- pairs in registry order. Decode
# tie-breaking and the model file format both depend on this ordering.
LABELS: tuple[str, ...] = ("O",) + tuple(
    f"{prefix}-{e.name}" for e in ENTITY_TYPES for prefix in ("B", "I")
)
LABEL_INDEX: dict[str, int] = {lab: i for i, lab in enumerate(LABELS)}

assert len(LABELS) == 41


def split_label(label: str) -> tuple[str, str | None]:
    """Split "B-TEMPERATURE" into ("B", "TEMPERATURE"); "O" -> ("O", None)."""
    if label == "O":
        return "O", None
    prefix, _, name = label.partition("-")
    return prefix, name


def entity_of_label(label: str) -> EntityType | None:
    _, name = split_label(label)
    return ENTITY_BY_NAME[name] if name else None


# Gazetteer: lowercased single words from every categorical list, mapped to
# the entity names they can realize. Multi-word entries contribute each word.
GAZETTEER: dict[str, tuple[str, ...]] = {}


def _build_gazetteer() -> None:
    hits: dict[str, set[str]] = {}
    for e in ENTITY_TYPES:
        for w in e.words:
            for part in w.lower().split():
                hits.setdefault(part, set()).add(e.name)
    for word, names in hits.items():
        GAZETTEER[word] = tuple(sorted(names))


_build_gazetteer()
