/** Latent map: the model's 128-d activations projected to 2D.
 * Test-set predictions draw as semi-opaque purple points, generated
 * views as opaque green points; brushing green points narrows the
 * gallery, zoom and pan navigate. */

import * as d3 from "d3";
import type { AppStore } from "./state";

const MARGIN = 18;

export class LatentPanel {
  private svg: d3.Selection<SVGSVGElement, unknown, null, undefined>;
  private plot: d3.Selection<SVGGElement, unknown, null, undefined>;

  constructor(root: HTMLElement, private store: AppStore,
              private width = 420, private height = 300) {
    const head = document.createElement("div");
    head.className = "panel-head";
    head.textContent = "latent map";
    root.appendChild(head);
    this.svg = d3.select(root).append("svg")
      .attr("width", width).attr("height", height).attr("class", "latent");
    this.plot = this.svg.append("g");
    const zoom = d3.zoom<SVGSVGElement, unknown>()
      .scaleExtent([0.5, 40])
      .filter((event) => !event.shiftKey) // shift reserves the pointer for brushing
      .on("zoom", (event) => this.plot.attr("transform", event.transform));
    this.svg.call(zoom as never);
    store.subscribe(() => this.render());
  }

  render() {
    const { purple, green } = this.store.latent;
    const pts = [...purple.map((p) => p.xy), ...green.map((g) => g.xy)];
    this.plot.selectAll("*").remove();
    this.svg.selectAll("g.latent-brush").remove();
    if (pts.length === 0) return;

    const xs = d3.extent(pts, (p) => p[0]) as [number, number];
    const ys = d3.extent(pts, (p) => p[1]) as [number, number];
    const pad = (v: [number, number]) => {
      const w = (v[1] - v[0]) || 1;
      return [v[0] - 0.05 * w, v[1] + 0.05 * w] as [number, number];
    };
    const x = d3.scaleLinear().domain(pad(xs)).range([MARGIN, this.width - MARGIN]);
    const y = d3.scaleLinear().domain(pad(ys)).range([this.height - MARGIN, MARGIN]);

    this.plot.selectAll("circle.purple-point")
      .data(purple)
      .join("circle")
      .attr("class", "purple-point")
      .attr("r", 2.5)
      .attr("cx", (p) => x(p.xy[0]))
      .attr("cy", (p) => y(p.xy[1]));

    const brushed = this.store.brushedGreenIds;
    this.plot.selectAll("circle.green-point")
      .data(green)
      .join("circle")
      .attr("class", (g) =>
        brushed !== null && brushed.includes(g.id) ? "green-point brushed" : "green-point")
      .attr("data-id", (g) => g.id)
      .attr("r", 5)
      .attr("cx", (g) => x(g.xy[0]))
      .attr("cy", (g) => y(g.xy[1]))
      .append("title")
      .text((g) => `view ${g.id}`);

    // shift-drag brush selecting green points for the gallery
    const store = this.store;
    const brush = d3.brush()
      .extent([[0, 0], [this.width, this.height]])
      .filter((event) => event.shiftKey)
      .on("end", (event: d3.D3BrushEvent<unknown>) => {
        if (!event.selection) {
          store.setBrushedGreen(null);
          return;
        }
        const [[x0, y0], [x1, y1]] = event.selection as [[number, number], [number, number]];
        const ids = green
          .filter((g) => {
            const px = x(g.xy[0]);
            const py = y(g.xy[1]);
            return x0 <= px && px <= x1 && y0 <= py && py <= y1;
          })
          .map((g) => g.id);
        store.setBrushedGreen(ids);
      });
    this.svg.append("g").attr("class", "latent-brush").call(brush as never);
  }
}
