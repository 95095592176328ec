import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import {
  ApiFailure,
  NetworkFailure,
  fetchModelInfo,
  parseCsvRow,
  predictFeatures,
} from "../src/api.js";
import { errorResponse, jsonResponse, modelInfo } from "./helpers.js";

const fetchMock = vi.fn();

beforeEach(() => {
  fetchMock.mockReset();
  vi.stubGlobal("fetch", fetchMock);
});

afterEach(() => {
  vi.unstubAllGlobals();
  delete (globalThis as Record<string, unknown>).PDADSV_API_BASE;
});

describe("api client", () => {
  it("returns parsed model info", async () => {
    fetchMock.mockResolvedValueOnce(jsonResponse(modelInfo()));
    const info = await fetchModelInfo();
    expect(info.classifiers).toHaveLength(4);
    expect(fetchMock).toHaveBeenCalledWith("/api/v1/model", undefined);
  });

  it("honors the configured base url", async () => {
    (globalThis as Record<string, unknown>).PDADSV_API_BASE = "http://api:8080";
    fetchMock.mockResolvedValueOnce(jsonResponse(modelInfo()));
    await fetchModelInfo();
    expect(fetchMock.mock.calls[0][0]).toBe("http://api:8080/api/v1/model");
  });

  it("turns error bodies into ApiFailure with code and message", async () => {
    fetchMock.mockResolvedValueOnce(
      errorResponse(422, "bad_feature_count", "expected 32 features, got 5"),
    );
    const err = await predictFeatures([1, 2, 3, 4, 5]).catch((e) => e);
    expect(err).toBeInstanceOf(ApiFailure);
    expect(err.status).toBe(422);
    expect(err.code).toBe("bad_feature_count");
    expect(err.message).toContain("expected 32 features");
  });

  it("maps fetch rejection to NetworkFailure", async () => {
    fetchMock.mockRejectedValueOnce(new TypeError("fetch failed"));
    const err = await fetchModelInfo().catch((e) => e);
    expect(err).toBeInstanceOf(NetworkFailure);
  });
});

describe("csv parsing", () => {
  it("reads the first non-empty line", () => {
    expect(parseCsvRow("\n\n1, 2.5 ,3\n9,9,9\n")).toEqual([1, 2.5, 3]);
  });

  it("empty text gives an empty vector", () => {
    expect(parseCsvRow("  \n ")).toEqual([]);
  });

  it("non-numeric cells become NaN for the server to reject", () => {
    const row = parseCsvRow("1,oops,3");
    expect(row).toHaveLength(3);
    expect(Number.isNaN(row[1])).toBe(true);
  });
});
