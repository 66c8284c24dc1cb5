"""HTTP/JSON facade over the scene, model, queries, and analysis for
the browser interface.

All endpoints are read-only with respect to the model; the only mutable
state is the session store of generated views (the green latent
points), which an inverse query replaces. Gallery frames come from the
rasterization oracle rather than the model, so thumbnails show what a
camera at the returned viewpoint would actually see.
"""

from __future__ import annotations

import asyncio
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, Query, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import analysis, percept, query
from .dataset import Dataset
from .field import Plane, Viewpoint
from .net import ModelParams
from .raster import Camera, render_falsecolor
from .scene import Scene

MAX_RENDER_PIXELS = 1024 * 1024
REQUEST_TIMEOUT_S = 30.0


@dataclass
class ServiceState:
    scene: Scene
    params: ModelParams
    dataset: Dataset
    metrics: dict[str, percept.PerceptionMetric] = field(default_factory=dict)
    latent_axes: np.ndarray | None = None
    latent_mean: np.ndarray | None = None
    test_latent_2d: np.ndarray | None = None
    generated: list[dict] = field(default_factory=list)  # session green points

    def __post_init__(self):
        if self.scene.k != self.params.k or tuple(self.scene.class_names) != tuple(
            self.params.meta.class_names
        ):
            raise ValueError(
                "scene and model disagree on classes: "
                f"{self.scene.class_names} vs {list(self.params.meta.class_names)}"
            )
        lat = analysis.latent_codes(self.params, self.dataset.viewpoints)
        self.latent_axes = analysis.principal_axes_2d(lat)
        self.latent_mean = lat.mean(axis=0)
        self.test_latent_2d = (lat - self.latent_mean) @ self.latent_axes

    def project(self, lat: np.ndarray) -> np.ndarray:
        return (lat - self.latent_mean) @ self.latent_axes

    def register_metric(self, name: str, source: str):
        self.metrics[name] = percept.PerceptionMetric.compile(
            name, source, self.scene.class_names
        )


def load_state(scene_path, model_path, dataset_path, metrics: dict[str, str] | None = None) -> ServiceState:
    from .dataset import load_views_csv
    from .net import load_checkpoint
    from .scene import load_scene

    state = ServiceState(
        scene=load_scene(scene_path),
        params=load_checkpoint(model_path),
        dataset=load_views_csv(dataset_path),
    )
    for name, src in (metrics or {}).items():
        state.register_metric(name, src)
    return state


class DirectRequest(BaseModel):
    viewpoints: list[list[float]]
    metric: str | None = None


class PlaneSpec(BaseModel):
    p: list[float]
    v1: list[float]
    v2: list[float]
    l: float
    L: float


class InverseRequest(BaseModel):
    target: str
    count: int = 10
    region: PlaneSpec | None = None
    fixed_direction: list[float] | None = None
    eta: float | None = None
    max_iters: int | None = None
    tol: float | None = None
    seed: int = 0


class RenderRequest(BaseModel):
    viewpoint: list[float]
    width: int = 256
    height: int = 256


class FacadeRequest(BaseModel):
    building_id: int
    patch_size: float = 10.0
    per_patch_samples: int = 5
    theme: str = "sky"
    filter: list[float] | None = None  # [lo, hi] on the patch scalar
    seed: int = 0


def _parse_filter(spec: str | None, names) -> query.IntervalConstraints | None:
    if not spec:
        return None
    try:
        target = query.parse_target(spec, names)
    except query.TargetSyntaxError as e:
        raise HTTPException(400, detail=str(e)) from e
    if not isinstance(target, query.IntervalConstraints):
        raise HTTPException(400, detail="filter must use the interval form name:lo-hi")
    return target


def create_app(state: ServiceState | None = None) -> FastAPI:
    app = FastAPI(title="nvf view-field service")
    app.state.nvf = state
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.middleware("http")
    async def timeout_guard(request, call_next):
        try:
            return await asyncio.wait_for(call_next(request), timeout=REQUEST_TIMEOUT_S)
        except asyncio.TimeoutError:
            return Response("request timed out", status_code=503)

    def st() -> ServiceState:
        if app.state.nvf is None:
            raise HTTPException(503, detail="no scene/model loaded")
        return app.state.nvf

    @app.get("/api/meta")
    def meta():
        s = st()
        return {
            "k": s.scene.k,
            "classes": [
                {"id": c.id, "name": c.name, "color": list(c.color)} for c in s.scene.classes
            ],
            "aabb": s.scene.aabb.tolist(),
            "buildings": [
                {"id": b.id, "footprint": list(b.footprint), "height": b.height}
                for b in s.scene.buildings
            ],
            "dataset_size": len(s.dataset),
            "metrics": {name: m.source for name, m in s.metrics.items()},
            "model": {
                "n_params": s.params.n_params(),
                "provenance": s.params.meta.provenance,
            },
        }

    @app.get("/api/groundtruth")
    def groundtruth(limit: int = Query(default=1000)):
        s = st()
        if limit <= 0:
            raise HTTPException(400, detail="limit must be positive")
        n = min(limit, len(s.dataset))
        vps = s.dataset.viewpoints[:n]
        m = s.dataset.m[:n]
        rows = []
        for i in range(n):
            row = {
                "viewpoint": vps[i].tolist(),
                "m": m[i].tolist(),
            }
            if s.metrics:
                row["metrics"] = {
                    name: float(percept.evaluate(mt.expr, m[i])) for name, mt in s.metrics.items()
                }
            rows.append(row)
        return {"rows": rows, "class_names": s.scene.class_names}

    @app.post("/api/query/direct")
    def direct(req: DirectRequest):
        s = st()
        if not req.viewpoints:
            raise HTTPException(400, detail="empty viewpoint list")
        try:
            vps = np.asarray(req.viewpoints, dtype=np.float64).reshape(-1, 5)
        except ValueError as e:
            raise HTTPException(400, detail=f"malformed viewpoints: {e}") from e
        metric = None
        if req.metric is not None:
            metric = s.metrics.get(req.metric)
            if metric is None:
                try:
                    metric = percept.PerceptionMetric.compile(req.metric, req.metric, s.scene.class_names)
                except percept.MetricParseError as e:
                    raise HTTPException(400, detail=str(e)) from e
        import warnings as _w

        with _w.catch_warnings():
            _w.simplefilter("ignore")
            out = query.direct_query(s.params, vps, metric)
        key = "values" if metric is not None else "distributions"
        return {key: out.tolist()}

    @app.post("/api/query/inverse")
    def inverse(req: InverseRequest):
        s = st()
        try:
            target = query.parse_target(req.target, s.scene.class_names)
        except query.TargetSyntaxError as e:
            raise HTTPException(400, detail={"message": str(e), "offset": e.offset}) from e
        region = None
        if req.region is not None:
            try:
                region = Plane(
                    np.array(req.region.p), np.array(req.region.v1), np.array(req.region.v2),
                    req.region.l, req.region.L,
                )
            except ValueError as e:
                raise HTTPException(400, detail=str(e)) from e
        cfg = query.InverseConfig(
            eta=req.eta if req.eta is not None else 0.01,
            max_iters=req.max_iters if req.max_iters is not None else 500,
            tol=req.tol if req.tol is not None else 1e-3,
            restarts=max(1, req.count),
            seed=req.seed,
            region=region,
            fixed_direction=tuple(req.fixed_direction) if req.fixed_direction else None,
        )
        results = query.inverse_gradient(s.params, target, cfg)
        lat = analysis.latent_codes(
            s.params, np.stack([r.viewpoint.as_array() for r in results])
        )
        coords = s.project(lat)
        s.generated = []
        payload = []
        for i, r in enumerate(results):
            entry = {
                "id": i,
                "viewpoint": r.viewpoint.as_array().tolist(),
                "m": r.m.tolist(),
                "loss": r.loss,
                "status": r.status,
                "iterations": r.iterations,
                "restart": r.restart,
                "latent2d": coords[i].tolist(),
            }
            payload.append(entry)
            s.generated.append(entry)
        return {"results": payload}

    @app.post("/api/render")
    def render_view(req: RenderRequest):
        s = st()
        if req.width * req.height > MAX_RENDER_PIXELS:
            raise HTTPException(400, detail="render size exceeds 1024x1024 pixels")
        if len(req.viewpoint) != 5:
            raise HTTPException(400, detail="viewpoint must have 5 components")
        try:
            cam = Camera(Viewpoint.from_array(req.viewpoint), width=req.width, height=req.height)
            png = render_falsecolor(s.scene, cam)
        except ValueError as e:
            raise HTTPException(400, detail=str(e)) from e
        return Response(png, media_type="image/png")

    @app.post("/api/facade")
    def facade(req: FacadeRequest):
        s = st()
        try:
            patches, means = query.facade_summary(
                s.params, s.scene, req.building_id, req.patch_size, req.per_patch_samples, req.seed
            )
        except KeyError as e:
            raise HTTPException(404, detail=str(e)) from e
        except ValueError as e:
            raise HTTPException(400, detail=str(e)) from e
        if req.theme in s.scene.class_names:
            c = s.scene.class_index(req.theme)
            values = means[:, c]
        elif req.theme in s.metrics:
            mt = s.metrics[req.theme]
            values = np.array([percept.evaluate(mt.expr, m) for m in means])
        else:
            raise HTTPException(400, detail=f"unknown theme {req.theme!r}")
        out = []
        for patch, m, v in zip(patches, means, values):
            if req.filter is not None and not (req.filter[0] <= v <= req.filter[1]):
                continue
            out.append(
                {
                    "center": patch.center.tolist(),
                    "normal": patch.normal.tolist(),
                    "origin": patch.origin.tolist(),
                    "e1": patch.e1.tolist(),
                    "e2": patch.e2.tolist(),
                    "value": float(v),
                    "m": m.tolist(),
                }
            )
        return {
            "patches": out,
            "theme": req.theme,
            "value_range": [float(values.min()), float(values.max())] if len(values) else [0.0, 0.0],
        }

    @app.get("/api/latent")
    def latent(filter: str | None = Query(default=None)):
        s = st()
        spec = _parse_filter(filter, s.scene.class_names)
        coords = s.test_latent_2d
        m = s.dataset.m
        if spec is not None:
            lo = np.nan_to_num(spec.lo, nan=-np.inf)
            hi = np.nan_to_num(spec.hi, nan=np.inf)
            keep = np.all((m >= lo) & (m <= hi), axis=1)
        else:
            keep = np.ones(len(m), dtype=bool)
        purple = [
            {"index": int(i), "xy": coords[i].tolist(), "m": m[i].tolist()}
            for i in np.nonzero(keep)[0]
        ]
        green = [
            {"id": g["id"], "xy": g["latent2d"], "viewpoint": g["viewpoint"], "m": g["m"]}
            for g in s.generated
        ]
        return {"purple": purple, "green": green}

    return app


def run_server(state: ServiceState, host: str = "127.0.0.1", port: int = 8765):
    import uvicorn

    uvicorn.run(create_app(state), host=host, port=port, log_level="warning")
