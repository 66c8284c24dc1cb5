/** Control query panel: parallel coordinates over the ground-truth
 * distributions, with per-axis brushing that defines the inverse-query
 * target, axis toggles, a mode switch, and the location-count field. */

import * as d3 from "d3";
import type { AppStore } from "./state";

const MARGIN = { top: 28, right: 24, bottom: 12, left: 24 };
const MAX_LINES = 900;

export class PcpPanel {
  private svg: d3.Selection<SVGSVGElement, unknown, null, undefined>;
  private controls: HTMLDivElement;

  constructor(root: HTMLElement, private store: AppStore,
              private width = 560, private height = 260) {
    const head = document.createElement("div");
    head.className = "panel-head";
    head.textContent = "query control";
    root.appendChild(head);
    this.controls = document.createElement("div");
    this.controls.className = "pcp-controls";
    root.appendChild(this.controls);
    this.svg = d3
      .select(root)
      .append("svg")
      .attr("width", width)
      .attr("height", height)
      .attr("class", "pcp");
    store.subscribe(() => this.render());
  }

  private renderControls() {
    const store = this.store;
    this.controls.replaceChildren();

    for (const mode of ["semantics", "perception"] as const) {
      const b = document.createElement("button");
      b.textContent = mode;
      b.className = store.mode === mode ? "toggle on" : "toggle";
      b.dataset.mode = mode;
      b.onclick = () => store.setMode(mode);
      this.controls.appendChild(b);
    }
    const sep = document.createElement("span");
    sep.className = "sep";
    this.controls.appendChild(sep);

    for (const axis of store.availableAxes()) {
      const b = document.createElement("button");
      b.textContent = axis;
      b.className = store.activeAxes.includes(axis) ? "toggle axis on" : "toggle axis";
      b.dataset.axis = axis;
      b.onclick = () => store.toggleAxis(axis);
      this.controls.appendChild(b);
    }

    const count = document.createElement("input");
    count.type = "number";
    count.min = "1";
    count.max = "64";
    count.value = String(store.locationCount);
    count.className = "count";
    count.title = "locations to generate";
    count.onchange = () => store.setLocationCount(Number(count.value));
    this.controls.appendChild(count);

    const go = document.createElement("button");
    go.textContent = store.busy ? "running..." : "find locations";
    go.className = "go";
    go.disabled = store.busy;
    go.onclick = () => void store.requestLocations();
    this.controls.appendChild(go);

    const clear = document.createElement("button");
    clear.textContent = "clear brushes";
    clear.className = "toggle";
    clear.onclick = () => store.clearBrushes();
    this.controls.appendChild(clear);

    if (store.error) {
      const err = document.createElement("span");
      err.className = "error";
      err.textContent = store.error;
      this.controls.appendChild(err);
    }
  }

  render() {
    this.renderControls();
    const store = this.store;
    const axes = store.activeAxes;
    const svg = this.svg;
    svg.selectAll("*").remove();
    if (axes.length === 0 || store.rows.length === 0) {
      svg.append("text").attr("x", 20).attr("y", 40).attr("class", "placeholder")
        .text("no data loaded");
      return;
    }

    const x = d3.scalePoint<string>().domain(axes)
      .range([MARGIN.left, this.width - MARGIN.right]);
    const y = d3.scaleLinear().domain([0, 1])
      .range([this.height - MARGIN.bottom, MARGIN.top]);

    const kept = new Set(store.brushedRows().slice(0, MAX_LINES));
    const rows = store.rows.slice(0, MAX_LINES);
    const line = (row: (typeof rows)[number]) =>
      d3.line()(axes.map((a) => [x(a)!, y(store.axisValue(row, a))]));

    svg.append("g")
      .selectAll("path")
      .data(rows)
      .join("path")
      .attr("class", (row) => (kept.has(row) ? "polyline kept" : "polyline dimmed"))
      .attr("d", (row) => line(row));

    const axis = svg.append("g").selectAll("g").data(axes).join("g")
      .attr("transform", (a) => `translate(${x(a)},0)`);
    axis.each((a, i, nodes) => {
      d3.select(nodes[i]).call(
        d3.axisLeft(y).ticks(5).tickSize(3) as never,
      );
    });
    axis.append("text")
      .attr("class", "axis-label")
      .attr("y", MARGIN.top - 10)
      .attr("text-anchor", "middle")
      .text((a) => a);

    // one vertical brush per axis; brushing writes the store interval
    const store_ = store;
    const yRange = [MARGIN.top, this.height - MARGIN.bottom] as [number, number];
    axis.append("g")
      .attr("class", "brush")
      .attr("data-axis", (a) => a)
      .each(function (a) {
        const brush = d3.brushY<string>()
          .extent([[-10, yRange[0]], [10, yRange[1]]])
          .on("end", (event: d3.D3BrushEvent<string>) => {
            if (!event.selection) {
              store_.setBrush(a, null);
              return;
            }
            const [y1, y2] = event.selection as [number, number];
            store_.setBrush(a, [y.invert(y2), y.invert(y1)]);
          });
        d3.select(this as SVGGElement).call(brush as never);
      });

    // visual marks for active brushes (kept in sync when set
    // programmatically, e.g. by tests or presets)
    svg.append("g")
      .selectAll("rect")
      .data([...store.brushes.entries()].filter(([a]) => axes.includes(a)))
      .join("rect")
      .attr("class", "brush-mark")
      .attr("data-axis", ([a]) => a)
      .attr("x", ([a]) => x(a)! - 6)
      .attr("width", 12)
      .attr("y", ([, [lo, hi]]) => y(hi))
      .attr("height", ([, [lo, hi]]) => Math.max(1, y(lo) - y(hi)));
  }
}
