import { HttpApi } from "./api";
import { GalleryPanel } from "./gallery";
import { LatentPanel } from "./latent";
import { MapPanel } from "./map";
import { PcpPanel } from "./pcp";
import { AppStore } from "./state";

declare global {
  interface Window {
    NVF_BASE?: string;
    nvfStore?: AppStore;
  }
}

export function mountApp(root: HTMLElement, store: AppStore) {
  root.innerHTML = `
    <div class="grid">
      <section id="pcp-panel" class="panel"></section>
      <section id="latent-panel" class="panel"></section>
      <section id="gallery-panel" class="panel"></section>
      <section id="map-panel" class="panel"></section>
    </div>`;
  new PcpPanel(root.querySelector("#pcp-panel")!, store);
  new LatentPanel(root.querySelector("#latent-panel")!, store);
  new GalleryPanel(root.querySelector("#gallery-panel")!, store);
  new MapPanel(root.querySelector("#map-panel")!, store);
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const base = window.NVF_BASE ?? "http://127.0.0.1:8765";
  const store = new AppStore(new HttpApi(base));
  window.nvfStore = store; // console access for power users
  mountApp(document.getElementById("app")!, store);
  void store.load().catch((e) => {
    document.getElementById("app")!.insertAdjacentHTML(
      "beforeend",
      `<div class="error">failed to reach the service at ${base}: ${e}</div>`,
    );
  });
}
