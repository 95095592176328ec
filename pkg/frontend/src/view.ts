/** DOM builders for the two views; decisions are conveyed by icon + text so
 * the banner never relies on color alone. */

import type { ModelInfo, PredictResponse } from "./api.js";

const DISCLAIMER = "Screening aid, not a medical diagnosis.";

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export function percent(x: number): string {
  return `${(100 * x).toFixed(1)}%`;
}

export function renderResult(response: PredictResponse): HTMLElement {
  const root = el("section", "result");

  const positive = response.final_label === 1;
  const banner = el("div", `banner ${positive ? "banner-positive" : "banner-negative"}`);
  banner.setAttribute("role", "status");
  banner.append(
    el("span", "banner-icon", positive ? "⚠" : "✓"),
    el("span", "banner-text", response.final_text),
  );
  root.append(banner);

  const chips = el("div", "votes");
  for (const vote of response.votes) {
    const chip = el("div", `chip ${vote.vote === 1 ? "chip-positive" : "chip-negative"}`);
    chip.append(
      el("span", "chip-name", vote.classifier),
      el("span", "chip-vote", vote.vote === 1 ? "PD" : "clear"),
      el("span", "chip-weight", `weight ${percent(vote.weight)}`),
    );
    chips.append(chip);
  }
  root.append(chips);

  const tally = el("div", "tally");
  const bar = el("div", "tally-bar");
  const fill = el("div", "tally-fill");
  fill.style.width = percent(response.weighted_tally.positive);
  bar.append(fill);
  tally.append(
    bar,
    el("span", "tally-label",
       `weighted tally: ${response.weighted_tally.positive.toFixed(3)} PD / ` +
       `${response.weighted_tally.negative.toFixed(3)} clear`),
  );
  root.append(tally);

  const probs = el("ul", "probabilities");
  for (const vote of response.votes) {
    probs.append(el("li", "probability",
                    `${vote.classifier}: ${percent(vote.probability)}`));
  }
  root.append(probs);

  root.append(el("div", "latency",
                 `answered in ${response.latency_ms.toFixed(1)} ms ` +
                 `(model ${response.model_version})`));
  root.append(el("div", "disclaimer", DISCLAIMER));
  return root;
}

export function renderError(kind: "api" | "network", message: string,
                            onRetry: () => void): HTMLElement {
  const root = el("section", `error error-${kind}`);
  root.setAttribute("role", "alert");
  root.append(el("p", "error-message",
                 kind === "network" ? "Service unavailable. " + message : message));
  if (kind === "network") {
    const retry = el("button", "retry", "Retry") as HTMLButtonElement;
    retry.type = "button";
    retry.addEventListener("click", onRetry);
    root.append(retry);
  }
  return root;
}

export function renderModelPanel(info: ModelInfo | null): HTMLElement {
  const panel = el("aside", "model-panel");
  if (info === null) {
    panel.append(el("p", "model-missing", "No model loaded on the service."));
    return panel;
  }
  panel.append(el("h2", "model-title", `Model ${info.model_version}`));
  const list = el("ul", "model-weights");
  info.classifiers.forEach((name, i) => {
    list.append(el("li", "model-weight", `${name}: ${percent(info.weights[i])}`));
  });
  panel.append(list);
  return panel;
}

export function renderBusy(phase: "uploading" | "predicting"): HTMLElement {
  return el("section", "busy",
            phase === "uploading" ? "Reading file..." : "Analyzing recording...");
}

export function renderIdle(): HTMLElement {
  const root = el("section", "idle");
  root.append(
    el("p", "hint",
       "Upload a sustained-vowel recording (.wav, 5 seconds or longer) " +
       "or a 32-value feature CSV row."),
    el("div", "disclaimer", DISCLAIMER),
  );
  return root;
}
