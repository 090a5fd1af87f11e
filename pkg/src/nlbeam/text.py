"""Word-level tokenization shared by the corpus generator and the tagger."""

from __future__ import annotations

from dataclasses import dataclass

_SPLIT_PUNCT = ",.()"


@dataclass(frozen=True)
class TokenSequence:
    """Tokens plus (start, end) character offsets into the source text."""

    tokens: tuple[str, ...]
    char_spans: tuple[tuple[int, int], ...]

    def __len__(self) -> int:
        return len(self.tokens)


def _split_chunk(chunk: str, offset: int) -> list[tuple[str, int, int]]:
    """Split one whitespace-delimited chunk into tokens with offsets.

    Leading and trailing characters from ``,.()`` become their own tokens;
    interior punctuation stays attached, so "0.19" and "0.2mm" survive as
    single tokens.
    """
    start, end = 0, len(chunk)
    leading: list[tuple[str, int, int]] = []
    trailing: list[tuple[str, int, int]] = []
    while start < end and chunk[start] in _SPLIT_PUNCT:
        leading.append((chunk[start], offset + start, offset + start + 1))
        start += 1
    while end > start and chunk[end - 1] in _SPLIT_PUNCT:
        # A trailing "." that closes a decimal number stays attached only if
        # interior; here it is terminal, so it always splits.
        trailing.append((chunk[end - 1], offset + end - 1, offset + end))
        end -= 1
    out = leading
    if end > start:
        out.append((chunk[start:end], offset + start, offset + end))
    out.extend(reversed(trailing))
    return out


def tokenize(text: str) -> TokenSequence:
    """Split text on whitespace, then peel off ,.() punctuation tokens."""
    tokens: list[str] = []
    spans: list[tuple[int, int]] = []
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace():
            j += 1
        for tok, s, e in _split_chunk(text[i:j], i):
            tokens.append(tok)
            spans.append((s, e))
        i = j
    return TokenSequence(tuple(tokens), tuple(spans))
