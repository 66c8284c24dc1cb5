/** The full exploration round trip at the DOM level: brush tree to
 * [0.2, 0.4] and sky to [0.3, 0.5], request 5 locations, observe 5
 * green latent points and 5 gallery thumbnails, click a thumbnail and
 * see the map update; then load a facade overlay and check the legend
 * spans the returned extrema. */

// @vitest-environment jsdom

import { beforeEach, describe, expect, it } from "vitest";
import { mountApp } from "../src/main";
import { AppStore } from "../src/state";
import { MockApi } from "./mock_api";

let store: AppStore;
let api: MockApi;
let root: HTMLElement;

async function flush() {
  // settle the promise chains behind store updates and thumbnails
  for (let i = 0; i < 6; i++) await new Promise((r) => setTimeout(r, 0));
}

beforeEach(async () => {
  document.body.innerHTML = '<div id="app"></div>';
  root = document.getElementById("app")!;
  api = new MockApi();
  store = new AppStore(api);
  mountApp(root, store);
  await store.load();
  await flush();
});

describe("brush to gallery round trip", () => {
  it("runs the inverse query and populates all panels", async () => {
    store.setBrush("tree", [0.2, 0.4]);
    store.setBrush("sky", [0.3, 0.5]);
    expect(store.targetString()).toBe("tree:0.2-0.4,sky:0.3-0.5");

    store.setLocationCount(5);
    await store.requestLocations();
    await flush();

    // five green points in the latent map
    const green = root.querySelectorAll("circle.green-point");
    expect(green.length).toBe(5);

    // five thumbnails in rank order
    const thumbs = root.querySelectorAll(".gallery-list figure.thumb");
    expect(thumbs.length).toBe(5);
    const imgs = root.querySelectorAll<HTMLImageElement>(".gallery-list img");
    expect(imgs.length).toBe(5);
    expect([...imgs].every((img) => img.src.startsWith("mock://render/"))).toBe(true);

    // clicking a thumbnail recenters the map on that viewpoint
    const before = (root.querySelector("img.map-frame") as HTMLImageElement).src;
    imgs[2].dispatchEvent(new MouseEvent("click", { bubbles: true }));
    await flush();
    const mapImg = root.querySelector("img.map-frame") as HTMLImageElement;
    expect(mapImg.src).not.toBe(before);
    const vp = store.results[2].viewpoint.map((v) => v.toFixed(2)).join("_");
    expect(mapImg.src).toContain(vp);
    expect(root.querySelector("figure.thumb.selected")?.getAttribute("data-id")).toBe(
      String(store.results[2].id),
    );
  });

  it("keeps green points until a new query replaces them", async () => {
    store.setBrush("tree", [0.2, 0.4]);
    store.setLocationCount(3);
    await store.requestLocations();
    await flush();
    expect(root.querySelectorAll("circle.green-point").length).toBe(3);

    store.setBrush("sky", [0.3, 0.5]);
    await store.requestLocations();
    await flush();
    expect(root.querySelectorAll("circle.green-point").length).toBe(3);
    expect(api.calls.inverse).toBe(2);
  });

  it("narrows the gallery to the brushed green points", async () => {
    store.setBrush("tree", [0.2, 0.4]);
    store.setLocationCount(4);
    await store.requestLocations();
    await flush();
    const keep = store.results.slice(0, 2).map((r) => r.id);
    store.setBrushedGreen(keep);
    await flush();
    expect(root.querySelectorAll(".gallery-list figure.thumb").length).toBe(2);
    store.setBrushedGreen(null);
    await flush();
    expect(root.querySelectorAll(".gallery-list figure.thumb").length).toBe(4);
  });
});

describe("facade overlay", () => {
  it("renders patch rectangles with a legend spanning the extrema", async () => {
    await store.loadFacade(0, "water");
    await flush();
    const rects = root.querySelectorAll("rect.facade-patch");
    expect(rects.length).toBe(12); // two walls x 3 x 2 patches
    const [lo, hi] = store.facade!.response.value_range;
    expect(root.querySelector(".legend-min")!.textContent).toBe(lo.toFixed(3));
    expect(root.querySelector(".legend-max")!.textContent).toBe(hi.toFixed(3));
    // every patch fill comes from the service's value, never computed here
    const fills = new Set([...rects].map((r) => r.getAttribute("fill")));
    expect(fills.size).toBeGreaterThan(1);
  });

  it("clears when switched off", async () => {
    await store.loadFacade(0, "sky");
    await flush();
    store.clearFacade();
    await flush();
    expect(root.querySelectorAll("rect.facade-patch").length).toBe(0);
  });
});

describe("map navigation", () => {
  it("keyboard rotation requests a new frame at a stepped yaw", async () => {
    await store.setCamera([50, 50, 1.7, 1.0, 0.0]);
    await flush();
    const img = root.querySelector("img.map-frame") as HTMLImageElement;
    const before = img.src;
    img.dispatchEvent(new KeyboardEvent("keydown", { key: "ArrowLeft", bubbles: true }));
    await flush();
    expect(img.src).not.toBe(before);
    expect(store.camera![3]).toBeCloseTo(1.0 + Math.PI / 12, 10);
  });
});
