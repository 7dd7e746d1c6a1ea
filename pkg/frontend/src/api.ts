/** Typed client for the review API. All UI writes go through submitVerdict;
 * the UI never touches dataset files. */

import type {
  Item,
  ItemPage,
  Progress,
  SceneSummary,
  TopdownPayload,
  VerdictBody,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
    public fieldErrors: unknown = null,
  ) {
    super(message);
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private base: string = "",
    private fetchImpl: FetchLike = fetch,
  ) {}

  private async get<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(this.base + path);
    if (!resp.ok) {
      throw new ApiError(resp.status, `GET ${path} failed: ${resp.status}`);
    }
    return (await resp.json()) as T;
  }

  listScenes(): Promise<SceneSummary[]> {
    return this.get("/api/scenes");
  }

  topdown(sceneId: string, itemId?: string): Promise<TopdownPayload> {
    const q = itemId ? `?item=${encodeURIComponent(itemId)}` : "";
    return this.get(`/api/scenes/${encodeURIComponent(sceneId)}/topdown${q}`);
  }

  listItems(scene?: string, cursor = 0, limit = 20): Promise<ItemPage> {
    const params = new URLSearchParams({ cursor: String(cursor), limit: String(limit) });
    if (scene) params.set("scene", scene);
    return this.get(`/api/items?${params}`);
  }

  getItem(qaId: string): Promise<Item> {
    return this.get(`/api/items/${encodeURIComponent(qaId)}`);
  }

  progress(): Promise<Progress> {
    return this.get("/api/progress");
  }

  async submitVerdict(qaId: string, body: VerdictBody): Promise<{ appended: boolean }> {
    const resp = await this.fetchImpl(
      `${this.base}/api/items/${encodeURIComponent(qaId)}/verdict`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      },
    );
    if (resp.status === 422) {
      const detail = await resp.json().catch(() => null);
      throw new ApiError(422, "verdict rejected by server", detail);
    }
    if (!resp.ok) {
      throw new ApiError(resp.status, `verdict submit failed: ${resp.status}`);
    }
    return (await resp.json()) as { appended: boolean };
  }
}
