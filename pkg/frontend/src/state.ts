/** Central store for the four-panel exploration loop.
 *
 * Panels subscribe and re-render from snapshots; DOM handlers call the
 * mutation methods. Overlapping service calls carry a sequence number
 * and stale responses are discarded, so a slow earlier query can never
 * overwrite a newer one.
 */

import type {
  Api,
  FacadeResponse,
  GroundTruthRow,
  InverseResultEntry,
  LatentResponse,
  Meta,
  PlaneSpec,
} from "./api";

export type Mode = "semantics" | "perception";

export interface FacadeState {
  buildingId: number;
  theme: string;
  response: FacadeResponse;
}

export class AppStore {
  meta: Meta | null = null;
  rows: GroundTruthRow[] = [];
  classNames: string[] = [];
  mode: Mode = "semantics";
  activeAxes: string[] = [];
  brushes = new Map<string, [number, number]>();
  locationCount = 5;
  plane: PlaneSpec | null = null;
  results: InverseResultEntry[] = [];
  latent: LatentResponse = { purple: [], green: [] };
  brushedGreenIds: number[] | null = null; // null = no latent brush
  selectedViewId: number | null = null;
  camera: number[] | null = null;
  cameraFrameUrl: string | null = null;
  facade: FacadeState | null = null;
  busy = false;
  error: string | null = null;

  private listeners: (() => void)[] = [];
  private seq = 0;

  constructor(public api: Api) {}

  subscribe(fn: () => void): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private emit() {
    for (const fn of this.listeners) fn();
  }

  async load(limit = 2000): Promise<void> {
    this.meta = await this.api.meta();
    this.classNames = this.meta.classes.map((c) => c.name);
    const gt = await this.api.groundtruth(limit);
    this.rows = gt.rows;
    this.latent = await this.api.latent();
    this.activeAxes = this.classNames.slice();
    this.emit();
  }

  /** Axes offered by the current distribution mode. */
  availableAxes(): string[] {
    if (this.mode === "perception") return Object.keys(this.meta?.metrics ?? {});
    return this.classNames;
  }

  axisValue(row: GroundTruthRow, axis: string): number {
    if (this.mode === "perception") return row.metrics?.[axis] ?? 0;
    return row.m[this.classNames.indexOf(axis)];
  }

  setMode(mode: Mode): void {
    if (mode === this.mode) return;
    this.mode = mode;
    this.brushes.clear();
    this.activeAxes = this.availableAxes().slice();
    this.emit();
  }

  toggleAxis(axis: string): void {
    if (this.activeAxes.includes(axis)) {
      this.activeAxes = this.activeAxes.filter((a) => a !== axis);
      this.brushes.delete(axis);
    } else {
      const order = this.availableAxes();
      this.activeAxes = order.filter((a) => this.activeAxes.includes(a) || a === axis);
    }
    this.emit();
  }

  setBrush(axis: string, interval: [number, number] | null): void {
    if (interval === null) this.brushes.delete(axis);
    else this.brushes.set(axis, interval);
    this.emit();
  }

  clearBrushes(): void {
    this.brushes.clear();
    this.emit();
  }

  /** Rows surviving every brush (the polylines drawn highlighted). */
  brushedRows(): GroundTruthRow[] {
    if (this.brushes.size === 0) return this.rows;
    return this.rows.filter((row) => {
      for (const [axis, [lo, hi]] of this.brushes) {
        const v = this.axisValue(row, axis);
        if (v < lo || v > hi) return false;
      }
      return true;
    });
  }

  /** The brushes as the service's target mini-format. */
  targetString(): string {
    const parts: string[] = [];
    for (const [axis, [lo, hi]] of this.brushes) {
      parts.push(`${axis}:${round3(lo)}-${round3(hi)}`);
    }
    return parts.join(",");
  }

  setLocationCount(n: number): void {
    this.locationCount = Math.max(1, Math.round(n));
    this.emit();
  }

  setPlane(plane: PlaneSpec | null): void {
    this.plane = plane;
    this.emit();
  }

  /** Run the inverse query for the current brushes; replaces the green
   * points and the gallery. */
  async requestLocations(): Promise<void> {
    const target = this.targetString();
    if (!target) {
      this.error = "brush at least one axis to define a target";
      this.emit();
      return;
    }
    if (this.mode === "perception") {
      this.error = "inverse queries run on the semantic axes";
      this.emit();
      return;
    }
    const ticket = ++this.seq;
    this.busy = true;
    this.error = null;
    this.emit();
    try {
      const res = await this.api.inverse({
        target,
        count: this.locationCount,
        region: this.plane ?? undefined,
      });
      if (ticket !== this.seq) return; // a newer query superseded this one
      this.results = res.results;
      this.latent = await this.api.latent();
      this.brushedGreenIds = null;
      this.selectedViewId = null;
    } catch (e) {
      if (ticket !== this.seq) return;
      this.error = String(e);
    } finally {
      if (ticket === this.seq) {
        this.busy = false;
        this.emit();
      }
    }
  }

  setBrushedGreen(ids: number[] | null): void {
    this.brushedGreenIds = ids;
    this.emit();
  }

  /** Results currently shown in the gallery, rank order preserved. */
  galleryResults(): InverseResultEntry[] {
    if (this.brushedGreenIds === null) return this.results;
    const keep = new Set(this.brushedGreenIds);
    return this.results.filter((r) => keep.has(r.id));
  }

  async selectView(id: number): Promise<void> {
    const entry = this.results.find((r) => r.id === id);
    if (!entry) return;
    this.selectedViewId = id;
    await this.setCamera(entry.viewpoint.slice());
  }

  async setCamera(viewpoint: number[]): Promise<void> {
    const ticket = ++this.seq;
    this.camera = viewpoint;
    this.emit();
    const url = await this.api.renderView(viewpoint, 512, 384);
    if (ticket !== this.seq) return;
    this.cameraFrameUrl = url;
    this.emit();
  }

  /** Rotate the map camera by a fixed yaw increment (keyboard/drag). */
  async rotateCamera(steps: number): Promise<void> {
    if (!this.camera) return;
    const vp = this.camera.slice();
    vp[3] += steps * (Math.PI / 12);
    await this.setCamera(vp);
  }

  async loadFacade(buildingId: number, theme: string, patchSize = 6.0): Promise<void> {
    const response = await this.api.facade(buildingId, theme, patchSize);
    this.facade = { buildingId, theme, response };
    this.emit();
  }

  clearFacade(): void {
    this.facade = null;
    this.emit();
  }
}

function round3(v: number): number {
  return Math.round(v * 1000) / 1000;
}
