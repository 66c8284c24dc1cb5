/** 3D map view: server-rendered frame for the current camera, keyboard
 * and drag navigation (each interaction requests a new frame), and the
 * facade overlay with its color legend.
 *
 * The facade overlay draws each wall unrolled in its own (u, v) patch
 * coordinates; geometry and values both come from the service.  */

import * as d3 from "d3";
import type { AppStore } from "./state";
import type { FacadePatchEntry } from "./api";

const LEGEND_W = 140;

export class MapPanel {
  private img: HTMLImageElement;
  private overlay: SVGSVGElement;
  private controls: HTMLDivElement;
  private dragX: number | null = null;

  constructor(root: HTMLElement, private store: AppStore) {
    const head = document.createElement("div");
    head.className = "panel-head";
    head.textContent = "3D map";
    root.appendChild(head);

    this.controls = document.createElement("div");
    this.controls.className = "map-controls";
    root.appendChild(this.controls);

    this.img = document.createElement("img");
    this.img.className = "map-frame";
    this.img.alt = "rendered city view";
    this.img.tabIndex = 0;
    this.img.width = 512;
    this.img.height = 384;
    root.appendChild(this.img);

    this.overlay = d3.create("svg").attr("class", "facade-overlay").node()!;
    root.appendChild(this.overlay);

    this.img.addEventListener("keydown", (e) => {
      if (e.key === "ArrowLeft") void store.rotateCamera(1);
      if (e.key === "ArrowRight") void store.rotateCamera(-1);
    });
    this.img.addEventListener("pointerdown", (e) => (this.dragX = e.clientX));
    this.img.addEventListener("pointerup", (e) => {
      if (this.dragX === null) return;
      const steps = Math.round((e.clientX - this.dragX) / 40);
      this.dragX = null;
      if (steps !== 0) void store.rotateCamera(steps);
    });

    store.subscribe(() => this.render());
  }

  private renderControls() {
    const store = this.store;
    this.controls.replaceChildren();
    const select = document.createElement("select");
    select.className = "building-select";
    const none = document.createElement("option");
    none.value = "";
    none.textContent = "facade overlay: off";
    select.appendChild(none);
    for (const b of store.meta?.buildings ?? []) {
      const opt = document.createElement("option");
      opt.value = String(b.id);
      opt.textContent = `building ${b.id}`;
      if (store.facade?.buildingId === b.id) opt.selected = true;
      select.appendChild(opt);
    }
    const theme = document.createElement("select");
    theme.className = "theme-select";
    for (const name of [...store.classNames, ...Object.keys(store.meta?.metrics ?? {})]) {
      const opt = document.createElement("option");
      opt.value = name;
      opt.textContent = name;
      if (store.facade?.theme === name) opt.selected = true;
      theme.appendChild(opt);
    }
    const refresh = () => {
      if (select.value === "") store.clearFacade();
      else void store.loadFacade(Number(select.value), theme.value);
    };
    select.onchange = refresh;
    theme.onchange = refresh;
    this.controls.appendChild(select);
    this.controls.appendChild(theme);
  }

  render() {
    this.renderControls();
    if (this.store.cameraFrameUrl) this.img.src = this.store.cameraFrameUrl;

    const svg = d3.select(this.overlay);
    svg.selectAll("*").remove();
    const facade = this.store.facade;
    if (!facade || facade.response.patches.length === 0) {
      svg.attr("width", 0).attr("height", 0);
      return;
    }
    const patches = facade.response.patches;
    const [vmin, vmax] = facade.response.value_range;
    const color = d3.scaleSequential(d3.interpolateViridis)
      .domain(vmin === vmax ? [vmin - 0.5, vmax + 0.5] : [vmin, vmax]);

    // group patches per wall by outward normal, unroll each wall side
    // by side in patch-local (u, v) meters
    const keyOf = (p: FacadePatchEntry) => p.normal.map((c) => c.toFixed(3)).join(",");
    const walls = d3.group(patches, keyOf);
    const scale = 3.0; // px per meter
    let xOff = 8;
    let maxH = 0;
    const placed: { p: FacadePatchEntry; x: number; y: number; w: number; h: number }[] = [];
    for (const [, wall] of walls) {
      const origin = wall[0].origin;
      let wallW = 0;
      let wallH = 0;
      for (const p of wall) {
        const w = norm(p.e1);
        const h = norm(p.e2);
        const u = project(sub(p.origin, origin), unit(wall[0].e1));
        const v = p.origin[2] - origin[2];
        placed.push({ p, x: xOff + u * scale, y: v * scale, w: w * scale, h: h * scale });
        wallW = Math.max(wallW, (u + w) * scale);
        wallH = Math.max(wallH, (v + h) * scale);
      }
      xOff += wallW + 10;
      maxH = Math.max(maxH, wallH);
    }
    const height = maxH + 30;
    svg.attr("width", xOff + LEGEND_W).attr("height", height);
    svg.append("g")
      .selectAll("rect")
      .data(placed)
      .join("rect")
      .attr("class", "facade-patch")
      .attr("x", (d) => d.x)
      .attr("y", (d) => height - 24 - d.y - d.h)
      .attr("width", (d) => Math.max(1, d.w - 0.5))
      .attr("height", (d) => Math.max(1, d.h - 0.5))
      .attr("fill", (d) => color(d.p.value))
      .append("title")
      .text((d) => `${facade.theme} ${d.p.value.toFixed(3)}`);

    // continuous legend spanning the returned extrema
    const legend = svg.append("g").attr("class", "legend")
      .attr("transform", `translate(${xOff + 8},8)`);
    const grad = svg.append("defs").append("linearGradient").attr("id", "legend-grad");
    for (const t of d3.range(0, 1.01, 0.1)) {
      grad.append("stop").attr("offset", `${t * 100}%`)
        .attr("stop-color", color(vmin + t * (vmax - vmin)));
    }
    legend.append("rect").attr("width", 16).attr("height", Math.max(60, height - 60))
      .attr("fill", "url(#legend-grad)").attr("transform", "scale(1,-1)")
      .attr("y", -(Math.max(60, height - 60)));
    legend.append("text").attr("class", "legend-min").attr("x", 22)
      .attr("y", Math.max(60, height - 60)).text(vmin.toFixed(3));
    legend.append("text").attr("class", "legend-max").attr("x", 22).attr("y", 10)
      .text(vmax.toFixed(3));
    legend.append("text").attr("class", "legend-title").attr("x", 0).attr("y", -2)
      .text(facade.theme);
  }
}

function sub(a: number[], b: number[]): number[] {
  return a.map((v, i) => v - b[i]);
}

function norm(a: number[]): number {
  return Math.hypot(...a);
}

function unit(a: number[]): number[] {
  const n = norm(a) || 1;
  return a.map((v) => v / n);
}

function project(a: number[], dir: number[]): number {
  return a[0] * dir[0] + a[1] * dir[1] + a[2] * dir[2];
}
