// Inline entity highlighting: turn the source text plus the service's
// token-indexed spans into segments that exactly tile the text.

import type { EntitySpan } from "./api.js";

export interface Segment {
  text: string;
  entity: string | null; // null for unlabeled text
  prefix: "B" | "I" | null;
}

const PUNCT = new Set([",", ".", "(", ")"]);

/** Mirror of the service's tokenizer: whitespace split, then peel
 *  leading/trailing `,.()` characters into their own tokens. */
export function tokenSpans(text: string): Array<[number, number]> {
  const spans: Array<[number, number]> = [];
  const re = /\S+/g;
  let m: RegExpExecArray | null;
  while ((m = re.exec(text)) !== null) {
    let start = m.index;
    let end = m.index + m[0].length;
    while (start < end && PUNCT.has(text[start])) {
      spans.push([start, start + 1]);
      start += 1;
    }
    const trailing: Array<[number, number]> = [];
    while (end > start && PUNCT.has(text[end - 1])) {
      trailing.unshift([end - 1, end]);
      end -= 1;
    }
    if (start < end) {
      spans.push([start, end]);
    }
    spans.push(...trailing);
  }
  return spans;
}

/** Split `text` into segments; labeled segments carry their entity.
 *  The segments concatenate back to the exact input text. */
export function segment(text: string, spans: EntitySpan[]): Segment[] {
  const tokens = tokenSpans(text);
  const out: Segment[] = [];
  let cursor = 0;
  const push = (upTo: number, entity: string | null, prefix: Segment["prefix"]) => {
    if (upTo > cursor) {
      out.push({ text: text.slice(cursor, upTo), entity, prefix });
      cursor = upTo;
    }
  };
  const ordered = [...spans].sort((a, b) => a.start - b.start);
  for (const span of ordered) {
    if (span.start >= tokens.length) continue;
    const from = tokens[span.start][0];
    const to = tokens[Math.min(span.end, tokens.length) - 1][1];
    push(from, null, null);
    push(to, span.entity, span.prefix);
  }
  push(text.length, null, null);
  return out;
}

// The 20 entity types in registry order; colors are assigned from the
// position so screenshots are reproducible across sessions.
export const ENTITY_ORDER = [
  "SCAN", "PROCESS", "SAMPLE", "DIRECTION", "ETIME", "ANGLE",
  "XPOS-REL", "YPOS-REL", "XPOS-ABS", "YPOS-ABS", "POINT-ABS",
  "TEMPERATURE", "TEMPERATURE-CONDITIONAL", "NRAMP-MIN", "NRAMP-SEC",
  "HUMIDITY", "TRATE-SEC", "TRATE-MIN", "AMOUNT", "HUMIDITY-CONDITIONAL",
] as const;

export function entityColor(entity: string): string {
  const index = ENTITY_ORDER.indexOf(entity as (typeof ENTITY_ORDER)[number]);
  const hue = index < 0 ? 0 : Math.round((index * 360) / ENTITY_ORDER.length);
  return `hsl(${hue}, 70%, 82%)`;
}
