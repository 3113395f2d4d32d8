"""FastAPI service exposing the library's end-to-end runs.

Domain validation failures map to 400 with a ``validation_error`` detail,
training failures to 500 with a ``training_error`` detail; request-schema
violations surface as FastAPI's usual 422.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..cloud import PointCloud
from ..errors import TrainingError, ValidationError
from ..masking import MaskPlan
from ..pipeline import (
    compare_run,
    mask_run,
    metrics_run,
    reconstruct_run,
    resolve_clouds,
    serialize_run,
)
from ..scan import ScanOrder
from .schemas import (
    CompareRequest,
    CompareResponse,
    HealthResponse,
    MaskRequest,
    MaskResponse,
    MetricsRequest,
    MetricsResponse,
    ReconstructRequest,
    ReconstructResponse,
    SerializeRequest,
    SerializeResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(title="pointscan", version=__version__)

    @app.exception_handler(ValidationError)
    async def _validation_error(_: Request, exc: ValidationError) -> JSONResponse:
        return JSONResponse(
            status_code=400,
            content={"detail": {"type": "validation_error", "message": str(exc)}},
        )

    @app.exception_handler(TrainingError)
    async def _training_error(_: Request, exc: TrainingError) -> JSONResponse:
        return JSONResponse(
            status_code=500,
            content={"detail": {"type": "training_error", "message": str(exc), "step": exc.step}},
        )

    @app.get("/healthz", response_model=HealthResponse)
    def healthz() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/v1/serialize", response_model=SerializeResponse)
    def serialize(req: SerializeRequest) -> dict:
        cloud = PointCloud(np.asarray(req.points, dtype=np.float64))
        return serialize_run(
            cloud,
            curves=[(c.curve, c.plane) for c in req.curves],
            normalize=req.normalize,
            on=req.on,
            n_centers=req.n_centers,
            scan_params=req.scan.to_params(),
            quantization_bits=req.quantization_bits,
            seed=req.seed,
        )

    @app.post("/v1/mask", response_model=MaskResponse)
    def mask(req: MaskRequest) -> dict:
        cloud = PointCloud(np.asarray(req.points, dtype=np.float64))
        return mask_run(
            cloud,
            normalize=req.normalize,
            n_centers=req.n_centers,
            k=req.knn,
            encoder_hidden=req.encoder_hidden,
            encoder_channels=req.encoder_channels,
            t_semantic=req.t_semantic,
            r_random=req.r_random,
            seed=req.seed,
        )

    @app.post("/v1/metrics", response_model=MetricsResponse)
    def metrics(req: MetricsRequest) -> dict:
        cloud = PointCloud(np.asarray(req.points, dtype=np.float64))
        order = ScanOrder.from_json_dict(req.order.model_dump())
        return metrics_run(cloud, order, normalize=req.normalize)

    @app.post("/v1/compare", response_model=CompareResponse)
    def compare(req: CompareRequest) -> dict:
        clouds, source = resolve_clouds(**req.source.describe())
        result = compare_run(
            clouds,
            curves=[(c.curve, c.plane) for c in req.curves],
            normalize=req.normalize,
            on=req.on,
            n_centers=req.n_centers,
            scan_params=req.scan.to_params(),
            quantization_bits=req.quantization_bits,
            seed=req.seed,
        )
        result["effective"]["source"] = source
        return result

    @app.post("/v1/reconstruct", response_model=ReconstructResponse)
    def reconstruct(req: ReconstructRequest) -> dict:
        clouds, source = resolve_clouds(**req.source.describe())
        mask_override = None
        if req.mask_plan is not None:
            mask_override = MaskPlan.from_json_dict(req.mask_plan.model_dump())
        result = reconstruct_run(
            clouds,
            strategy=req.strategy,
            steps=req.steps,
            lr=req.lr,
            train_ssm=req.train_ssm,
            mask_override=mask_override,
            normalize=req.normalize,
            n_centers=req.n_centers,
            k=req.knn,
            encoder_hidden=req.encoder_hidden,
            encoder_channels=req.encoder_channels,
            plane=req.plane,
            scan_params=req.scan.to_params(),
            t_semantic=req.t_semantic,
            r_random=req.r_random,
            state_dim=req.state_dim,
            ssm_mode=req.ssm_mode,
            seed=req.seed,
        )
        result["effective"]["source"] = source
        return result

    return app


app = create_app()
