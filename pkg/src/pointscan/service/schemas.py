"""Request and response models of the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field, model_validator

from ..scan import ScanParams

Point = list[float]


class SyntheticSpec(BaseModel):
    kind: Literal["cube", "sphere", "blobs"] = "cube"
    n: int = Field(1024, ge=1)
    count: int = Field(1, ge=1)
    seed: int = Field(0, ge=0)


class CloudSource(BaseModel):
    """Exactly one of: a single inline cloud, several inline clouds, or a synthetic spec."""

    points: Optional[list[Point]] = None
    clouds: Optional[list[list[Point]]] = None
    synthetic: Optional[SyntheticSpec] = None

    @model_validator(mode="after")
    def _exactly_one(self) -> "CloudSource":
        given = sum(v is not None for v in (self.points, self.clouds, self.synthetic))
        if given != 1:
            raise ValueError("provide exactly one of points, clouds, or synthetic")
        return self

    def describe(self) -> dict:
        return {
            "points": self.points,
            "clouds": self.clouds,
            "synthetic": self.synthetic.model_dump() if self.synthetic else None,
        }


class ScanParamsModel(BaseModel):
    layer_budget: int = Field(12, ge=3)
    segment_size: int = Field(16, ge=1)
    max_segments: int = Field(64, ge=1)

    def to_params(self) -> ScanParams:
        return ScanParams(**self.model_dump())


class CurveSpec(BaseModel):
    curve: Literal["zigzag", "hilbert", "trans_hilbert", "z_order", "trans_z_order", "random"]
    plane: Literal["xy", "xz", "yz", "random"] = "xy"


class SerializeRequest(BaseModel):
    points: list[Point]
    curves: list[CurveSpec] = Field(default_factory=lambda: [CurveSpec(curve="zigzag")])
    normalize: bool = True
    on: Literal["points", "centers"] = "centers"
    n_centers: int = Field(64, ge=1)
    scan: ScanParamsModel = Field(default_factory=ScanParamsModel)
    quantization_bits: int = Field(10, ge=1, le=21)
    seed: int = Field(0, ge=0)


class OrderResult(BaseModel):
    curve_tag: str
    n: int
    permutation: list[int]
    metrics: dict[str, float]


class SerializeResponse(BaseModel):
    orders: list[OrderResult]
    effective: dict


class MaskRequest(BaseModel):
    points: list[Point]
    normalize: bool = True
    n_centers: int = Field(64, ge=1)
    knn: int = Field(32, ge=1)
    encoder_hidden: int = Field(32, ge=1)
    encoder_channels: int = Field(16, ge=1)
    t_semantic: float = Field(0.8, gt=0.0, le=1.0)
    r_random: float = Field(0.6, ge=0.0, lt=1.0)
    seed: int = Field(0, ge=0)


class MaskPlanModel(BaseModel):
    b: int
    g: int
    t_semantic: float
    r_random: float
    seed: int
    semantic: list[int]
    random: list[int]
    final: list[int]


class MaskResponse(BaseModel):
    plan: MaskPlanModel
    counts: dict[str, int]
    effective: dict


class CompareRequest(BaseModel):
    source: CloudSource
    curves: list[CurveSpec] = Field(min_length=2)
    normalize: bool = True
    on: Literal["points", "centers"] = "points"
    n_centers: int = Field(64, ge=1)
    scan: ScanParamsModel = Field(default_factory=ScanParamsModel)
    quantization_bits: int = Field(10, ge=1, le=21)
    seed: int = Field(0, ge=0)


class CompareRow(BaseModel):
    curve: str
    mean_step: float
    max_step: float
    total_path_length: float
    win_rate_vs_random: Optional[float] = None


class CompareResponse(BaseModel):
    rows: list[CompareRow]
    win_rates: Optional[dict[str, float]] = None
    effective: dict


class OrderPayload(BaseModel):
    curve_tag: str
    n: int
    permutation: list[int]


class MetricsRequest(BaseModel):
    points: list[Point]
    order: OrderPayload
    normalize: bool = False


class MetricsResponse(BaseModel):
    curve_tag: str
    n: int
    metrics: dict[str, float]
    effective: dict


class ReconstructRequest(BaseModel):
    source: CloudSource
    strategy: Literal["sms", "random-only"] = "sms"
    mask_plan: Optional[MaskPlanModel] = None
    normalize: bool = True
    n_centers: int = Field(32, ge=1)
    knn: int = Field(16, ge=1)
    encoder_hidden: int = Field(32, ge=1)
    encoder_channels: int = Field(16, ge=1)
    plane: Literal["xy", "xz", "yz", "random"] = "random"
    scan: ScanParamsModel = Field(default_factory=ScanParamsModel)
    t_semantic: float = Field(0.8, gt=0.0, le=1.0)
    r_random: float = Field(0.6, ge=0.0, lt=1.0)
    state_dim: int = Field(16, ge=1)
    ssm_mode: Literal["static", "dynamic"] = "static"
    steps: int = Field(200, ge=1)
    lr: float = Field(0.5, ge=0.0)
    train_ssm: bool = False
    seed: int = Field(0, ge=0)


class ReconstructResponse(BaseModel):
    trace: list[float]
    summary: dict
    effective: dict


class HealthResponse(BaseModel):
    status: str
    version: str
