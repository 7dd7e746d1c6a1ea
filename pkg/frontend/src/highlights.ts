/** Which objects an item references through image placeholders. */

import type { Item, Segment } from "./types.js";

const PLACEHOLDER = /<([a-z][a-z0-9_ ]*)-([0-9]+)-IMG>/g;

export function referencedIds(segments: Segment[]): number[] {
  const ids: number[] = [];
  for (const seg of segments) {
    if (seg.kind !== "image_slot") continue;
    for (const match of seg.payload.matchAll(PLACEHOLDER)) {
      ids.push(Number(match[2]));
    }
  }
  return ids;
}

/** Union of placeholder references across the question and the situation
 * descriptions, deduplicated and sorted. */
export function collectHighlights(item: Item): number[] {
  const ids = new Set<number>([
    ...referencedIds(item.question),
    ...referencedIds(item.situation.action_text ?? []),
    ...referencedIds(item.situation.location_text ?? []),
  ]);
  return [...ids].sort((a, b) => a - b);
}

/** Plain-text rendering of interleaved segments (tokens kept inline). */
export function plainText(segments: Segment[]): string {
  return segments.map((s) => s.payload).join("");
}
