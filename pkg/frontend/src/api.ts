/** Typed client for the view-field service. The UI computes nothing
 * itself: every displayed number originates from one of these calls. */

export interface ClassInfo {
  id: number;
  name: string;
  color: [number, number, number];
}

export interface BuildingInfo {
  id: number;
  footprint: [number, number, number, number];
  height: number;
}

export interface Meta {
  k: number;
  classes: ClassInfo[];
  aabb: number[][];
  buildings: BuildingInfo[];
  dataset_size: number;
  metrics: Record<string, string>;
  model: { n_params: number; provenance: Record<string, unknown> };
}

export interface GroundTruthRow {
  viewpoint: number[];
  m: number[];
  metrics?: Record<string, number>;
}

export interface InverseResultEntry {
  id: number;
  viewpoint: number[];
  m: number[];
  loss: number;
  status: "converged" | "max_iterations";
  iterations: number;
  restart: number;
  latent2d: [number, number];
}

export interface PlaneSpec {
  p: number[];
  v1: number[];
  v2: number[];
  l: number;
  L: number;
}

export interface InverseRequest {
  target: string;
  count: number;
  region?: PlaneSpec;
  seed?: number;
  max_iters?: number;
}

export interface LatentResponse {
  purple: { index: number; xy: [number, number]; m: number[] }[];
  green: { id: number; xy: [number, number]; viewpoint: number[]; m: number[] }[];
}

export interface FacadePatchEntry {
  center: number[];
  normal: number[];
  origin: number[];
  e1: number[];
  e2: number[];
  value: number;
  m: number[];
}

export interface FacadeResponse {
  patches: FacadePatchEntry[];
  theme: string;
  value_range: [number, number];
}

export interface Api {
  meta(): Promise<Meta>;
  groundtruth(limit: number): Promise<{ rows: GroundTruthRow[]; class_names: string[] }>;
  inverse(req: InverseRequest): Promise<{ results: InverseResultEntry[] }>;
  latent(filter?: string): Promise<LatentResponse>;
  /** Returns a URL for an <img> src showing the rendered frame. */
  renderView(viewpoint: number[], width: number, height: number): Promise<string>;
  facade(buildingId: number, theme: string, patchSize: number): Promise<FacadeResponse>;
}

export class HttpApi implements Api {
  constructor(private base: string) {}

  private async getJson<T>(path: string): Promise<T> {
    const r = await fetch(this.base + path);
    if (!r.ok) throw new Error(`${path}: ${r.status} ${await r.text()}`);
    return (await r.json()) as T;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const r = await fetch(this.base + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!r.ok) throw new Error(`${path}: ${r.status} ${await r.text()}`);
    return (await r.json()) as T;
  }

  meta() {
    return this.getJson<Meta>("/api/meta");
  }

  groundtruth(limit: number) {
    return this.getJson<{ rows: GroundTruthRow[]; class_names: string[] }>(
      `/api/groundtruth?limit=${limit}`,
    );
  }

  inverse(req: InverseRequest) {
    return this.postJson<{ results: InverseResultEntry[] }>("/api/query/inverse", req);
  }

  latent(filter?: string) {
    const q = filter ? `?filter=${encodeURIComponent(filter)}` : "";
    return this.getJson<LatentResponse>(`/api/latent${q}`);
  }

  async renderView(viewpoint: number[], width: number, height: number): Promise<string> {
    const r = await fetch(this.base + "/api/render", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ viewpoint, width, height }),
    });
    if (!r.ok) throw new Error(`render: ${r.status}`);
    return URL.createObjectURL(await r.blob());
  }

  facade(buildingId: number, theme: string, patchSize: number) {
    return this.postJson<FacadeResponse>("/api/facade", {
      building_id: buildingId,
      theme,
      patch_size: patchSize,
      per_patch_samples: 3,
    });
  }
}
