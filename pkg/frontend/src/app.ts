/** Upload-and-predict controller: one state machine, one in-flight request. */

import {
  ApiFailure,
  NetworkFailure,
  fetchModelInfo,
  parseCsvRow,
  predictAudio,
  predictFeatures,
  type ModelInfo,
  type PredictResponse,
} from "./api.js";
import {
  renderBusy,
  renderError,
  renderIdle,
  renderModelPanel,
  renderResult,
} from "./view.js";

export type Phase = "idle" | "uploading" | "predicting" | "result" | "error";

export interface UiState {
  phase: Phase;
  file: File | null;
  response: PredictResponse | null;
  errorKind: "api" | "network" | null;
  errorMessage: string | null;
}

export class App {
  state: UiState = {
    phase: "idle",
    file: null,
    response: null,
    errorKind: null,
    errorMessage: null,
  };
  private modelInfo: ModelInfo | null = null;

  readonly input: HTMLInputElement;
  private readonly main: HTMLElement;
  private readonly panelHost: HTMLElement;

  constructor(root: HTMLElement) {
    root.innerHTML = "";
    const header = document.createElement("header");
    header.className = "header";
    const title = document.createElement("h1");
    title.textContent = "Voice screening";
    header.append(title);

    this.input = document.createElement("input");
    this.input.type = "file";
    this.input.accept = ".wav,.csv";
    this.input.className = "upload";
    this.input.addEventListener("change", () => {
      const file = this.input.files?.[0];
      if (file) {
        void this.handleFile(file);
      }
    });
    header.append(this.input);

    this.panelHost = document.createElement("div");
    this.panelHost.className = "panel-host";
    this.main = document.createElement("main");
    this.main.className = "main";
    root.append(header, this.main, this.panelHost);
    this.render();
  }

  async refreshModelInfo(): Promise<void> {
    try {
      this.modelInfo = await fetchModelInfo();
    } catch {
      this.modelInfo = null;
    }
    this.renderPanel();
  }

  async handleFile(file: File): Promise<void> {
    if (this.state.phase === "uploading" || this.state.phase === "predicting") {
      return;
    }
    this.setState({ phase: "uploading", file, response: null,
                    errorKind: null, errorMessage: null });
    try {
      let response: PredictResponse;
      if (file.name.toLowerCase().endsWith(".csv")) {
        const features = parseCsvRow(await file.text());
        this.setState({ ...this.state, phase: "predicting" });
        response = await predictFeatures(features);
      } else {
        this.setState({ ...this.state, phase: "predicting" });
        response = await predictAudio(file, file.name);
      }
      this.setState({ ...this.state, phase: "result", response });
    } catch (err) {
      if (err instanceof NetworkFailure) {
        this.setState({ ...this.state, phase: "error", errorKind: "network",
                        errorMessage: err.message });
      } else if (err instanceof ApiFailure) {
        this.setState({ ...this.state, phase: "error", errorKind: "api",
                        errorMessage: err.message });
      } else {
        this.setState({ ...this.state, phase: "error", errorKind: "api",
                        errorMessage: String(err) });
      }
    }
  }

  retryLast(): void {
    const file = this.state.file;
    if (file) {
      this.setState({ ...this.state, phase: "idle" });
      void this.handleFile(file);
    }
  }

  private setState(next: UiState): void {
    this.state = next;
    this.render();
  }

  private render(): void {
    this.main.innerHTML = "";
    const busy = this.state.phase === "uploading" || this.state.phase === "predicting";
    this.input.disabled = busy;
    switch (this.state.phase) {
      case "idle":
        this.main.append(renderIdle());
        break;
      case "uploading":
      case "predicting":
        this.main.append(renderBusy(this.state.phase));
        break;
      case "result":
        this.main.append(renderResult(this.state.response!));
        break;
      case "error":
        this.main.append(renderError(this.state.errorKind ?? "api",
                                     this.state.errorMessage ?? "unknown error",
                                     () => this.retryLast()));
        break;
    }
  }

  private renderPanel(): void {
    this.panelHost.innerHTML = "";
    this.panelHost.append(renderModelPanel(this.modelInfo));
  }
}
