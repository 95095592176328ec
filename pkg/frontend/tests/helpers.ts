import type { ModelInfo, PredictResponse } from "../src/api.js";

/** Deterministic LCG so randomized fixtures are reproducible. */
export function makeRng(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state * 1664525 + 1013904223) >>> 0;
    return state / 2 ** 32;
  };
}

export const CLASSIFIERS = [
  "classic_gb",
  "second_order",
  "histogram_goss_efb",
  "bagging",
];

export function randomResponse(rng: () => number): PredictResponse {
  const raw = CLASSIFIERS.map(() => 0.05 + rng());
  const total = raw.reduce((a, b) => a + b, 0);
  const weights = raw.map((w) => w / total);
  const votes = CLASSIFIERS.map(() => (rng() < 0.5 ? 0 : 1)) as (0 | 1)[];
  const positive = votes.reduce((acc, v, i) => acc + v * weights[i], 0);
  const label: 0 | 1 = positive >= 1 - positive ? 1 : 0;
  return {
    final_label: label,
    final_text: label ? "PD signs detected" : "No PD signs detected",
    votes: CLASSIFIERS.map((classifier, i) => ({
      classifier,
      vote: votes[i],
      weight: weights[i],
      probability: rng(),
    })),
    weights,
    weighted_tally: { positive, negative: 1 - positive },
    latency_ms: 40 + 600 * rng(),
    model_version: `v1-${Math.floor(rng() * 1e6)}`,
  };
}

export function modelInfo(): ModelInfo {
  return {
    model_version: "v1-abcdef",
    feature_names: Array.from({ length: 32 }, (_, i) => `f${i}`),
    classifiers: CLASSIFIERS,
    weights: [0.3, 0.27, 0.23, 0.2],
    metadata: { seed: 42 },
  };
}

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export function errorResponse(status: number, code: string, message: string): Response {
  return jsonResponse({ error: { code, message } }, status);
}

export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}
