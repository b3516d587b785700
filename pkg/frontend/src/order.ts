// Per-participant indicator ordering: indicators are shown in blocks, in a
// random order derived deterministically from the participant id, so a
// participant who reloads the page resumes the same sequence.

export const INDICATORS: readonly string[] = [
  "vata",
  "temp_intensity",
  "sun_intensity",
  "humidity_inference",
  "wind_inference",
  "traffic_flow",
  "greenery_rate",
  "shading_area",
  "material_comfort",
  "imageability",
  "enclosure",
  "human_scale",
  "transparency",
  "complexity",
  "safe",
  "lively",
  "beautiful",
  "wealthy",
  "boring",
  "depressing",
];

function fnv1a(text: string): number {
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193);
  }
  return hash >>> 0;
}

function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function indicatorOrder(
  participant: string,
  indicators: readonly string[] = INDICATORS,
): string[] {
  const rand = mulberry32(fnv1a(participant));
  const order = [...indicators];
  for (let i = order.length - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1));
    [order[i], order[j]] = [order[j], order[i]];
  }
  return order;
}
