/** Typed client for the screening service; every displayed number comes from
 * these responses, the browser never computes a prediction itself. */

export interface VoteDetail {
  classifier: string;
  vote: 0 | 1;
  weight: number;
  probability: number;
}

export interface PredictResponse {
  final_label: 0 | 1;
  final_text: string;
  votes: VoteDetail[];
  weights: number[];
  weighted_tally: { positive: number; negative: number };
  latency_ms: number;
  model_version: string;
}

export interface ModelInfo {
  model_version: string;
  feature_names: string[];
  classifiers: string[];
  weights: number[];
  metadata: Record<string, unknown>;
}

/** Server replied with an error body ({"error": {code, message}}). */
export class ApiFailure extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

/** The service could not be reached at all. */
export class NetworkFailure extends Error {
  constructor() {
    super("service unavailable");
  }
}

declare global {
  // Optional runtime override, e.g. set by the hosting page.
  // eslint-disable-next-line no-var
  var PDADSV_API_BASE: string | undefined;
}

export function apiBase(): string {
  return globalThis.PDADSV_API_BASE ?? "";
}

async function request(url: string, init?: RequestInit): Promise<unknown> {
  let response: Response;
  try {
    response = await fetch(apiBase() + url, init);
  } catch {
    throw new NetworkFailure();
  }
  let body: unknown = null;
  try {
    body = await response.json();
  } catch {
    // non-JSON body; fall through to the status check
  }
  if (!response.ok) {
    const err = (body as { error?: { code?: string; message?: string } })?.error;
    throw new ApiFailure(
      response.status,
      err?.code ?? "http_error",
      err?.message ?? `request failed with status ${response.status}`,
    );
  }
  return body;
}

export function fetchModelInfo(): Promise<ModelInfo> {
  return request("/api/v1/model") as Promise<ModelInfo>;
}

export function predictFeatures(features: number[]): Promise<PredictResponse> {
  return request("/api/v1/predict", {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ features }),
  }) as Promise<PredictResponse>;
}

export function predictAudio(file: Blob, filename: string): Promise<PredictResponse> {
  const form = new FormData();
  form.append("audio", file, filename);
  return request("/api/v1/predict-audio", {
    method: "POST",
    body: form,
  }) as Promise<PredictResponse>;
}

/** First non-empty line of a CSV file as the feature vector. */
export function parseCsvRow(text: string): number[] {
  const line = text
    .split(/[\r\n]+/)
    .map((l) => l.trim())
    .find((l) => l.length > 0);
  if (!line) {
    return [];
  }
  return line.split(",").map((cell) => Number(cell.trim()));
}
