import { describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { VerdictQueue } from "../src/optimistic.js";
import type { VerdictBody } from "../src/types.js";

const BODY: VerdictBody = {
  scores: { situation: 5, question: 5, answer: 5 },
  verdict: "accept",
  reviewer: "alice",
};

const instant = (fn: () => void, _ms: number) => {
  fn();
  return 0;
};

describe("verdict queue", () => {
  it("posts immediately and clears the queue", async () => {
    const posted: string[] = [];
    const queue = new VerdictQueue(async (qaId) => {
      posted.push(qaId);
    }, { setTimeoutImpl: instant });
    queue.enqueue("q1", BODY);
    await queue.drain();
    expect(posted).toEqual(["q1"]);
    expect(queue.size).toBe(0);
  });

  it("retries network failures with backoff and preserves order", async () => {
    let failures = 3;
    const posted: string[] = [];
    const delays: number[] = [];
    const queue = new VerdictQueue(
      async (qaId) => {
        if (failures > 0) {
          failures -= 1;
          throw new TypeError("network down");
        }
        posted.push(qaId);
      },
      {
        baseDelayMs: 100,
        setTimeoutImpl: (fn, ms) => {
          delays.push(ms);
          fn();
          return 0;
        },
      },
    );
    queue.enqueue("q1", BODY);
    queue.enqueue("q2", BODY);
    await queue.drain();
    expect(posted).toEqual(["q1", "q2"]);
    expect(delays).toEqual([100, 200, 400]); // exponential backoff
    expect(queue.size).toBe(0);
  });

  it("keeps unsent verdicts while offline, delivers after reconnect", async () => {
    let online = false;
    const posted: string[] = [];
    let attempts = 0;
    const queue = new VerdictQueue(
      async (qaId) => {
        attempts += 1;
        if (!online) throw new TypeError("offline");
        posted.push(qaId);
      },
      {
        baseDelayMs: 1,
        maxDelayMs: 2,
        setTimeoutImpl: (fn, ms) => {
          if (attempts >= 4) online = true; // reconnect after a few attempts
          fn();
          return 0;
        },
      },
    );
    queue.enqueue("q1", BODY);
    await queue.drain();
    expect(posted).toEqual(["q1"]); // exactly once
    expect(queue.size).toBe(0);
  });

  it("drops 422s without retry and surfaces field errors", async () => {
    const fieldErrors: unknown[] = [];
    const queue = new VerdictQueue(
      async () => {
        throw new ApiError(422, "bad", { detail: "fix requires fixed_answer" });
      },
      {
        setTimeoutImpl: instant,
        onFieldErrors: (_qaId, errors) => fieldErrors.push(errors),
      },
    );
    queue.enqueue("q1", BODY);
    await queue.drain();
    expect(queue.size).toBe(0);
    expect(fieldErrors).toEqual([{ detail: "fix requires fixed_answer" }]);
  });
});

describe("api client", () => {
  it("builds the right urls and decodes json", async () => {
    const calls: string[] = [];
    const fetchImpl = (async (url: RequestInfo | URL) => {
      calls.push(String(url));
      return new Response(JSON.stringify({ items: [], cursor: null, total: 0 }), {
        status: 200,
        headers: { "Content-Type": "application/json" },
      });
    }) as typeof fetch;
    const api = new ApiClient("http://x", fetchImpl);
    await api.listItems("scene one", 40, 10);
    expect(calls[0]).toBe("http://x/api/items?cursor=40&limit=10&scene=scene+one");
  });

  it("raises ApiError with field errors on 422", async () => {
    const fetchImpl = (async () =>
      new Response(JSON.stringify({ detail: [{ loc: ["scores"], msg: "missing" }] }), {
        status: 422,
      })) as typeof fetch;
    const api = new ApiClient("", fetchImpl);
    await expect(api.submitVerdict("q", BODY)).rejects.toMatchObject({
      status: 422,
    });
  });
});
