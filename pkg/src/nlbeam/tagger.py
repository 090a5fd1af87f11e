"""Trainable BIO sequence tagger.

An averaged structured perceptron over hand-built token features, decoded
exactly on the label-bigram lattice. The lattice carries one extra bit of
state ("has any B- label appeared yet"), which is what makes the BIO
constraint of this tagging scheme expressible: an I- label may only occur
once some command group has been opened by a B- label.
"""

from __future__ import annotations

import json
import random
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import CorpusSplit, Paragraph
from .errors import ConfigError, ModelFormatError
from .registry import GAZETTEER, LABEL_INDEX, LABELS
from .text import TokenSequence, tokenize

MODEL_FORMAT_VERSION = 1

_N = len(LABELS)  # 41
_B_LABELS = np.array([lab.startswith("B-") for lab in LABELS])
_I_LABELS = np.array([lab.startswith("I-") for lab in LABELS])

_BOUNDARY = "<s>"


def _shape(token: str) -> str:
    out = []
    for ch in token:
        if ch.isdigit():
            out.append("9")
        elif ch.isalpha():
            out.append("X" if ch.isupper() else "x")
        else:
            out.append(ch)
    s = "".join(out)
    return s if len(s) <= 6 else s[:3] + ".." + s[-2:]


def _is_number(token: str) -> bool:
    t = token.lstrip("+-")
    return bool(t) and t.replace(".", "", 1).isdigit()


def _unit_suffix(token: str) -> str | None:
    for i, ch in enumerate(token):
        if not (ch.isdigit() or ch in "+-."):
            suffix = token[i:]
            head = token[:i]
            return suffix if head and _is_number(head) else None
    return None


def _is_clause_start(token: str) -> bool:
    # Capitalized word with lowercase tail ("Take", "Using"); all-caps
    # protocol names like GISAXS do not count.
    return (token[:1].isupper() and token[1:].islower()
            and token[1:] != "")


# Words that disambiguate which entity a bare number or list word fills.
_CUE_WORDS = frozenset((
    "angle angles exposure temperature humidity motor position point rate "
    "ramp every until times seconds second minutes minute degrees percent "
    "x y protocol geometry direction sample stage period frame wait "
    "iterations repetitions shots heating").split())


def featurize(seq: TokenSequence, i: int) -> list[str]:
    """Feature strings for token i: identity, shape, affixes, local window,
    gazetteer hits, and clause-level context.

    The clause features (distance from the last capitalized word, cue words
    seen so far in the clause, how many value-like tokens precede this one)
    carry the signal for the B-/I- prefix, which marks a slot's position
    inside its command rather than inside a multi-token surface.
    """
    if not 0 <= i < len(seq):
        raise IndexError(f"token index {i} out of range")
    toks = seq.tokens
    w = toks[i]
    lw = w.lower()

    def ctx(j: int) -> str:
        # Context words are normalized: any numeric token (with or without
        # a unit suffix) collapses to "#", so patterns learned around one
        # sampled value transfer to every other value.
        if not 0 <= j < len(toks):
            return _BOUNDARY
        t = toks[j]
        if _is_number(t) or _unit_suffix(t):
            return "#"
        return t.lower()

    feats = [
        "bias",
        f"w={lw}",
        f"shape={_shape(w)}",
        f"pre3={lw[:3]}",
        f"suf3={lw[-3:]}",
        f"num={_is_number(w)}",
        f"w-1={ctx(i - 1)}",
        f"w-2={ctx(i - 2)}",
        f"w-3={ctx(i - 3)}",
        f"w+1={ctx(i + 1)}",
        f"w+2={ctx(i + 2)}",
        f"w+3={ctx(i + 3)}",
        f"w-1,w={ctx(i - 1)}|{lw}",
        f"w,w+1={lw}|{ctx(i + 1)}",
        f"w-2,w-1={ctx(i - 2)}|{ctx(i - 1)}",
        f"w+1,w+2={ctx(i + 1)}|{ctx(i + 2)}",
    ]
    unit = _unit_suffix(w)
    if unit:
        feats.append(f"unit={unit.lower()}")
        feats.append("has-unit")
    gaz = GAZETTEER.get(lw)
    if gaz:
        for name in gaz:
            feats.append(f"gaz={name}")
    for j in (i - 1, i + 1):
        g = GAZETTEER.get(ctx(j))
        if g:
            for name in g:
                feats.append(f"gaz{j - i:+d}={name}")

    # Clause context: scan back to the most recent capitalized word.
    start = 0
    for j in range(i, -1, -1):
        if _is_clause_start(toks[j]):
            start = j
            break
    opener = toks[start].lower() if _is_clause_start(toks[start]) else _BOUNDARY
    dist = i - start
    n_values = 0
    cues_before = set()
    for j in range(start, i):
        tj = toks[j].lower()
        if _is_number(toks[j]) or _unit_suffix(toks[j]) or tj in GAZETTEER:
            if j == 0 or toks[j - 1].lower() != tj or not _is_number(toks[j]):
                n_values += 1
        if tj in _CUE_WORDS:
            cues_before.add(tj)
    feats.append(f"clause={opener}")
    feats.append(f"cdist={min(dist, 9)}")
    feats.append(f"nvals={min(n_values, 4)}")
    feats.append(f"clause,nvals={opener}|{min(n_values, 4)}")
    for cue in cues_before:
        feats.append(f"cue<={cue}")
    # Cue words ahead of the token, up to the next clause start.
    j = i + 1
    while j < len(toks) and not _is_clause_start(toks[j]) and j - i <= 8:
        tj = toks[j].lower()
        if tj in _CUE_WORDS:
            feats.append(f"cue>={tj}")
        j += 1
    return feats


@dataclass
class Metrics:
    token_accuracy_all: float
    token_accuracy_bi: float
    paragraph_accuracy: float
    counts: dict[str, tuple[int, int]]


@dataclass
class TaggerModel:
    """Feature weights plus transition scores; immutable once trained."""

    label_set: tuple[str, ...]
    feature_index: dict[str, int]
    weights: np.ndarray  # (n_features, n_labels)
    transitions: np.ndarray  # (n_labels, n_labels), row = previous label
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if tuple(self.label_set) != LABELS:
            raise ModelFormatError(
                f"model label set has {len(self.label_set)} labels; "
                f"registry expects {len(LABELS)}")
        if not (np.isfinite(self.weights).all()
                and np.isfinite(self.transitions).all()):
            raise ModelFormatError("model contains non-finite weights")


def _emissions(model: TaggerModel, feats_per_token: list[list[int]]
               ) -> np.ndarray:
    out = np.zeros((len(feats_per_token), _N))
    W = model.weights
    for i, ids in enumerate(feats_per_token):
        if ids:
            out[i] = W[ids].sum(axis=0)
    return out


def _decode(emissions: np.ndarray, transitions: np.ndarray) -> list[int]:
    """Exact decode; I- labels are unreachable before the first B- label.

    States are (label, opened) with ``opened`` monotone, implemented as two
    Viterbi layers. Ties break toward the lowest label index (argmax on a
    reversed-index trick is unnecessary: np.argmax already returns the
    first, i.e. lowest-index, maximum).
    """
    n_tok = emissions.shape[0]
    if n_tok == 0:
        return []
    NEG = -1e18
    # Layer 0: no B- seen yet (I- forbidden); layer 1: group open.
    score0 = np.where(_I_LABELS | _B_LABELS, NEG, emissions[0])
    score1 = np.where(_B_LABELS, emissions[0], NEG)
    back0 = np.zeros((n_tok, _N), dtype=np.int64)
    back1 = np.zeros((n_tok, _N), dtype=np.int64)
    layer1 = np.zeros((n_tok, _N), dtype=bool)  # predecessor layer of state1
    for t in range(1, n_tok):
        cand0 = score0[:, None] + transitions
        best0_prev = cand0.argmax(axis=0)
        best0 = cand0[best0_prev, np.arange(_N)]
        cand1 = score1[:, None] + transitions
        best1_prev = cand1.argmax(axis=0)
        best1 = cand1[best1_prev, np.arange(_N)]
        # staying in layer 0 means the label is O
        new0 = np.where(_I_LABELS | _B_LABELS, NEG, best0 + emissions[t])
        # layer 1 is entered by a B- from layer 0 or continued from layer 1
        enter = np.where(_B_LABELS, best0, NEG)
        from1 = np.maximum(best1, enter)
        new1 = from1 + emissions[t]
        back0[t] = best0_prev
        back1[t] = np.where(best1 >= enter, best1_prev, best0_prev)
        layer1[t] = best1 >= enter
        score0, score1 = new0, new1
    labels = [0] * n_tok
    if score1.max() >= score0.max():
        lab, in1 = int(score1.argmax()), True
    else:
        lab, in1 = int(score0.argmax()), False
    labels[-1] = lab
    for t in range(n_tok - 1, 0, -1):
        if in1:
            prev = int(back1[t, lab])
            in1 = bool(layer1[t, lab])
        else:
            prev = int(back0[t, lab])
        lab = prev
        labels[t - 1] = lab
    return labels


def predict(model: TaggerModel, seq: TokenSequence) -> list[str]:
    """One label per token; satisfies the BIO constraint by construction."""
    feats = [[model.feature_index[f]
              for f in featurize(seq, i) if f in model.feature_index]
             for i in range(len(seq))]
    path = _decode(_emissions(model, feats), model.transitions)
    return [LABELS[i] for i in path]


def _corpus_fingerprint(paragraphs: list[Paragraph]) -> str:
    h = zlib.crc32(str(len(paragraphs)).encode())
    for p in paragraphs[:50]:
        h = zlib.crc32(" ".join(p.tokens).encode(), h)
    return f"{h:08x}"


def train(corpus: CorpusSplit, epochs: int = 5, seed: int = 0) -> TaggerModel:
    """Averaged structured perceptron over the train split."""
    paragraphs = corpus.train_paragraphs
    if not paragraphs:
        raise ConfigError("train split is empty")
    if epochs < 1:
        raise ConfigError("epochs must be >= 1")

    feature_index: dict[str, int] = {}
    examples: list[tuple[list[list[int]], np.ndarray]] = []
    for p in paragraphs:
        seq = TokenSequence(tuple(p.tokens), tuple((0, 0) for _ in p.tokens))
        ids = []
        for i in range(len(p.tokens)):
            row = []
            for f in featurize(seq, i):
                idx = feature_index.setdefault(f, len(feature_index))
                row.append(idx)
            ids.append(row)
        gold = np.array([LABEL_INDEX[lab] for lab in p.gold_labels])
        examples.append((ids, gold))

    n_feat = len(feature_index)
    W = np.zeros((n_feat, _N))
    W_tot = np.zeros((n_feat, _N))
    T = np.zeros((_N, _N))
    T_tot = np.zeros((_N, _N))
    model = TaggerModel(LABELS, feature_index, W, T)

    rng = random.Random(seed)
    order = list(range(len(examples)))
    step = 0
    last_w = np.zeros((n_feat, _N), dtype=np.int64)
    last_t = np.zeros((_N, _N), dtype=np.int64)
    for _epoch in range(epochs):
        rng.shuffle(order)
        for idx in order:
            ids, gold = examples[idx]
            step += 1
            pred = np.array(_decode(_emissions(model, ids), T))
            if np.array_equal(pred, gold):
                continue
            wrong = pred != gold
            for i in np.nonzero(wrong)[0]:
                rows = ids[i]
                # catch up the running average before touching the rows
                W_tot[rows, gold[i]] += (step - last_w[rows, gold[i]]) \
                    * W[rows, gold[i]]
                W_tot[rows, pred[i]] += (step - last_w[rows, pred[i]]) \
                    * W[rows, pred[i]]
                last_w[rows, gold[i]] = step
                last_w[rows, pred[i]] = step
                W[rows, gold[i]] += 1.0
                W[rows, pred[i]] -= 1.0
            for i in range(len(gold)):
                if i and (wrong[i] or wrong[i - 1]):
                    for a, b, delta in ((gold[i - 1], gold[i], 1.0),
                                        (pred[i - 1], pred[i], -1.0)):
                        T_tot[a, b] += (step - last_t[a, b]) * T[a, b]
                        last_t[a, b] = step
                        T[a, b] += delta

    W_tot += (step + 1 - last_w) * W
    T_tot += (step + 1 - last_t) * T
    meta = {
        "seed": seed,
        "epochs": epochs,
        "corpus_fingerprint": _corpus_fingerprint(paragraphs),
        "n_train_paragraphs": len(paragraphs),
    }
    return TaggerModel(LABELS, feature_index, W_tot / step, T_tot / step,
                       meta)


def evaluate(model: TaggerModel, paragraphs: list[Paragraph]) -> Metrics:
    """Token, B-/I- token, and whole-paragraph accuracy with raw counts."""
    if not paragraphs:
        raise ConfigError("cannot evaluate on zero paragraphs")
    tok_c = tok_n = bi_c = bi_n = par_c = 0
    for p in paragraphs:
        seq = TokenSequence(tuple(p.tokens), tuple((0, 0) for _ in p.tokens))
        pred = predict(model, seq)
        ok = True
        for got, gold in zip(pred, p.gold_labels):
            tok_n += 1
            hit = got == gold
            tok_c += hit
            if gold != "O":
                bi_n += 1
                bi_c += hit
            ok = ok and hit
        par_c += ok
    par_n = len(paragraphs)
    return Metrics(
        token_accuracy_all=tok_c / tok_n,
        token_accuracy_bi=bi_c / bi_n if bi_n else 0.0,
        paragraph_accuracy=par_c / par_n,
        counts={"token_all": (tok_c, tok_n), "token_bi": (bi_c, bi_n),
                "paragraph": (par_c, par_n)},
    )


def format_metrics(m: Metrics) -> str:
    lines = []
    for key, label in (("paragraph", "paragraph"), ("token_all", "token all"),
                       ("token_bi", "token b/i")):
        c, n = m.counts[key]
        lines.append(f"{label:<10} {c / n:.3f} ({c}/{n})")
    return "\n".join(lines)


def save_model(model: TaggerModel, path: str | Path) -> None:
    """Compressed npz: header JSON + feature table + weight matrices.

    Zero-weight feature rows are dropped; they carry no information.
    """
    keep = np.nonzero(np.abs(model.weights).sum(axis=1) > 0)[0]
    names = np.empty(len(model.feature_index), dtype=object)
    for f, i in model.feature_index.items():
        names[i] = f
    header = {
        "format_version": MODEL_FORMAT_VERSION,
        "labels": list(model.label_set),
        "feature_count": int(len(keep)),
        "meta": model.meta,
    }
    np.savez_compressed(
        path,
        header=json.dumps(header),
        features=np.asarray(names[keep], dtype=str),
        weights=model.weights[keep].astype(np.float32),
        transitions=model.transitions.astype(np.float32),
    )


def load_model(path: str | Path) -> TaggerModel:
    try:
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(str(data["header"]))
            features = data["features"]
            weights = data["weights"].astype(np.float64)
            transitions = data["transitions"].astype(np.float64)
    except (OSError, ValueError, KeyError, zlib.error) as exc:
        raise ModelFormatError(f"unreadable model file {path}: {exc}") \
            from exc
    if header.get("format_version") != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"model format version {header.get('format_version')!r}, "
            f"expected {MODEL_FORMAT_VERSION}")
    labels = tuple(header["labels"])
    if labels != LABELS:
        raise ModelFormatError(
            f"model was saved with {len(labels)} labels; current registry "
            f"defines {len(LABELS)}")
    if len(features) != weights.shape[0] or weights.shape[1] != _N:
        raise ModelFormatError("model file is truncated or inconsistent")
    feature_index = {str(f): i for i, f in enumerate(features)}
    return TaggerModel(labels, feature_index, weights, transitions,
                       header.get("meta", {}))


def tag_text(model: TaggerModel, text: str
             ) -> tuple[TokenSequence, list[str]]:
    seq = tokenize(text)
    return seq, predict(model, seq)
