import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { StubServer } from "./stubServer.js";

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("ApiClient", () => {
  it("uploads a document and returns its metadata", async () => {
    const server = new StubServer();
    server.route("POST", "/documents", () => ({
      status: 201,
      body: { document_id: "abc123", parse_mode: "structural", chunk_count: 12 },
    }));
    server.install();

    const api = new ApiClient({ baseUrl: "http://stub" });
    const meta = await api.uploadDocument("1. Clause one\n2. Clause two\n", "c.txt");
    expect(meta.document_id).toBe("abc123");
    expect(server.requests[0].body).toEqual({
      text: "1. Clause one\n2. Clause two\n",
      filename: "c.txt",
    });
  });

  it("sends the bearer token on every request", async () => {
    const server = new StubServer();
    server.route("GET", "/sessions/s1/progress", () => ({
      body: { status: "collecting", turns: [], draft_title: null, stopped_by: "none", error: null },
    }));
    server.install();

    const api = new ApiClient({ baseUrl: "http://stub", token: "sekrit" });
    await api.progress("s1");
    expect(server.requests[0].headers["Authorization"]).toBe("Bearer sekrit");
  });

  it("finalizes the brief by posting a null message", async () => {
    const server = new StubServer();
    server.route("POST", "/sessions/s1/messages", (req) => ({
      body: { brief: { query: "q", context: "", instructions: "" } },
    }));
    server.install();

    const api = new ApiClient({ baseUrl: "http://stub" });
    const out = await api.sendMessage("s1", null);
    expect(server.requests[0].body).toEqual({ text: null });
    expect(out.brief?.query).toBe("q");
  });

  it("raises a typed error with the structured body on failure", async () => {
    const server = new StubServer();
    server.route("GET", "/sessions/ghost/report", () => ({
      status: 404,
      body: { code: 404, stage: "engine", message: "no report for session yet" },
    }));
    server.install();

    const api = new ApiClient({ baseUrl: "http://stub" });
    await expect(api.report("ghost")).rejects.toMatchObject({
      status: 404,
      stage: "engine",
      message: "no report for session yet",
    });
    await expect(api.report("ghost")).rejects.toBeInstanceOf(ApiError);
  });
});
