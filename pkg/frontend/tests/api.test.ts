import { describe, expect, it } from "vitest";

import { ApiError, ReviewApi } from "../src/api.js";
import { FixtureService, makeItem } from "./fixture_service.js";

function setup(items = [makeItem("a"), makeItem("b")]) {
  const service = new FixtureService(items);
  return { service, api: new ReviewApi("", service.fetchFn) };
}

describe("ReviewApi", () => {
  it("fetches the queue sorted by id", async () => {
    const { api } = setup([makeItem("b"), makeItem("a")]);
    const items = await api.queue("all");
    expect(items.map((it) => it.id)).toEqual(["a", "b"]);
  });

  it("filters by status", async () => {
    const { service, api } = setup();
    service.decideDirectly("a", "keep");
    expect((await api.queue("pending")).map((i) => i.id)).toEqual(["b"]);
    expect((await api.queue("decided")).map((i) => i.id)).toEqual(["a"]);
  });

  it("reports progress", async () => {
    const { service, api } = setup();
    expect(await api.progress()).toEqual({ total: 2, decided: 0, pending: 2 });
    service.decideDirectly("b", "set_label", 0);
    expect(await api.progress()).toEqual({ total: 2, decided: 1, pending: 1 });
  });

  it("posts decisions and returns the updated item", async () => {
    const { service, api } = setup();
    const updated = await api.decide("a", { action: "set_label", label: 0 });
    expect(updated.decision).toBe("set_label");
    expect(updated.set_label).toBe(0);
    const post = service.requests.find((r) => r.method === "POST");
    expect(post?.body).toEqual({ action: "set_label", label: 0 });
  });

  it("surfaces HTTP errors as ApiError with status", async () => {
    const { service, api } = setup();
    service.decideDirectly("a", "keep");
    await expect(api.decide("a", { action: "keep" })).rejects.toMatchObject({
      name: "ApiError",
      status: 409,
    });
    await expect(api.decide("zz", { action: "keep" })).rejects.toMatchObject({
      status: 404,
    });
    await expect(
      api.decide("b", { action: "set_label" } as never),
    ).rejects.toBeInstanceOf(ApiError);
  });
});
