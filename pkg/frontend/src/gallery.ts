/** Gallery: scrollable thumbnails of the generated views, in rank
 * order; clicking one recenters the 3D map on that camera. */

import type { AppStore } from "./state";
import type { InverseResultEntry } from "./api";

export class GalleryPanel {
  private list: HTMLDivElement;
  private urls = new Map<number, string>();

  constructor(root: HTMLElement, private store: AppStore) {
    const head = document.createElement("div");
    head.className = "panel-head";
    head.textContent = "gallery";
    root.appendChild(head);
    this.list = document.createElement("div");
    this.list.className = "gallery-list";
    root.appendChild(this.list);
    store.subscribe(() => void this.render());
  }

  private async thumbnail(entry: InverseResultEntry): Promise<string> {
    const cached = this.urls.get(entry.id);
    if (cached) return cached;
    const url = await this.store.api.renderView(entry.viewpoint, 160, 120);
    this.urls.set(entry.id, url);
    return url;
  }

  async render() {
    const results = this.store.galleryResults();
    const ids = new Set(results.map((r) => r.id));
    // drop thumbnails of a superseded query
    for (const id of [...this.urls.keys()]) {
      if (!this.store.results.some((r) => r.id === id)) this.urls.delete(id);
    }
    this.list.replaceChildren();
    for (const entry of results) {
      const cell = document.createElement("figure");
      cell.className = this.store.selectedViewId === entry.id ? "thumb selected" : "thumb";
      cell.dataset.id = String(entry.id);
      const img = document.createElement("img");
      img.alt = `generated view ${entry.id}`;
      img.width = 160;
      img.height = 120;
      img.onclick = () => void this.store.selectView(entry.id);
      cell.appendChild(img);
      const cap = document.createElement("figcaption");
      cap.textContent = `#${entry.id} loss ${entry.loss.toFixed(4)} (${entry.status})`;
      cell.appendChild(cap);
      this.list.appendChild(cell);
      void this.thumbnail(entry).then((url) => {
        if (ids.has(entry.id)) img.src = url;
      });
    }
    if (results.length === 0) {
      const empty = document.createElement("div");
      empty.className = "placeholder";
      empty.textContent = "no generated views yet; brush the query panel and run";
      this.list.appendChild(empty);
    }
  }
}
