import hashlib
import math
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from chromalight.image_io import MedianMode


def _split_params(text: str) -> tuple[str, Dict[str, str]]:
    """'kind:key=value,key=value' -> ('kind', {key: value})."""
    kind, _, rest = text.partition(":")
    params = {}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"expected key=value in {text!r}, got {item!r}")
        params[key.strip()] = value.strip()
    return kind.strip().lower(), params


class StrategyId(str, Enum):
    """Color-adaptation strategies compared by the evaluation harness."""
    BASELINE = "baseline"
    ANG_LOSS = "angloss"
    AUGMENT = "augment"
    WB_TEST = "wbtest"
    WB_TRAIN = "wbtrain"

    @property
    def description(self) -> str:
        return {
            "baseline": "the lighting estimator applied to the input as is",
            "angloss": "an estimator trained with the angular chromaticity loss, applied as is",
            "augment": "an estimator trained on chromatically augmented targets, applied as is",
            "wbtest": "white-balance the input, estimate, map the estimate back with a fitted 3x3 matrix",
            "wbtrain": "an estimator trained on white-balanced pairs, wrapped the same way as wbtest",
        }[self.value]

    @property
    def wraps_white_balance(self) -> bool:
        return self in (StrategyId.WB_TEST, StrategyId.WB_TRAIN)

    @classmethod
    def parse_list(cls, text: str) -> List["StrategyId"]:
        return [cls(s.strip().lower()) for s in text.split(",") if s.strip()]


class WhiteBalancerKind(str, Enum):
    GRAY_WORLD = "gray_world"
    SHADES_OF_GRAY = "shades_of_gray"
    WHITE_PATCH = "white_patch"
    EXTERNAL = "external"
    IDENTITY = "identity"
    FIXED_MATRIX = "fixed_matrix"


class WhiteBalancer(BaseModel):
    """Which white balancer maps an input crop to a neutral version of itself."""
    model_config = ConfigDict(frozen=True)

    kind: WhiteBalancerKind = Field(WhiteBalancerKind.GRAY_WORLD, description="Balancing algorithm")
    p: float = Field(6.0, ge=1.0, description="Minkowski norm order for shades_of_gray")
    percentile: float = Field(95.0, gt=0.0, le=100.0, description="Per-channel percentile for white_patch")
    command: Optional[str] = Field(None, description="Command template for an external balancer process")
    matrix: Optional[List[float]] = Field(None, description="Row-major 3x3 linear map for fixed_matrix")

    @field_validator("matrix")
    @classmethod
    def validate_matrix(cls, v):
        if v is not None and (len(v) != 9 or not all(math.isfinite(x) for x in v)):
            raise ValueError("fixed_matrix needs 9 finite entries")
        return v

    @model_validator(mode="after")
    def check_kind_parameters(self):
        if self.kind is WhiteBalancerKind.EXTERNAL and not self.command:
            raise ValueError("an external balancer needs a command")
        if self.kind is WhiteBalancerKind.FIXED_MATRIX and self.matrix is None:
            raise ValueError("a fixed_matrix balancer needs a matrix")
        return self

    @classmethod
    def parse(cls, text: str) -> "WhiteBalancer":
        """Parse CLI forms: gray_world, shades_of_gray:p=6, white_patch:pct=95, external:CMD, identity."""
        head, _, rest = text.partition(":")
        if head.strip().lower() == "external":
            return cls(kind=WhiteBalancerKind.EXTERNAL, command=rest.strip())
        kind, params = _split_params(text)
        fields = {"kind": kind}
        if "p" in params:
            fields["p"] = float(params["p"])
        if "pct" in params or "percentile" in params:
            fields["percentile"] = float(params.get("pct", params.get("percentile")))
        if "m" in params:
            fields["matrix"] = [float(x) for x in params["m"].split()]
        return cls(**fields)

    def label(self) -> str:
        if self.kind is WhiteBalancerKind.SHADES_OF_GRAY:
            return f"shades_of_gray:p={self.p:g}"
        if self.kind is WhiteBalancerKind.WHITE_PATCH:
            return f"white_patch:pct={self.percentile:g}"
        return self.kind.value


class EstimatorKind(str, Enum):
    ORACLE = "oracle"
    EQUIVARIANT_ORACLE = "equivariant"
    CONSTANT_AMBIENT = "ambient"
    TINT_BLIND = "tintblind"
    EXTERNAL = "external"

    @classmethod
    def coerce(cls, value: str) -> "EstimatorKind":
        aliases = {
            "equivariant_oracle": "equivariant",
            "constant_ambient": "ambient",
            "tint_blind": "tintblind",
            "tint_blind_mock": "tintblind",
        }
        value = value.strip().lower()
        return cls(aliases.get(value, value))


class EstimatorSpec(BaseModel):
    """Which lighting estimator to run and at what output resolution."""
    model_config = ConfigDict(frozen=True)

    kind: EstimatorKind = Field(EstimatorKind.TINT_BLIND, description="Estimator implementation")
    beta: float = Field(1.0, ge=0.0, description="Tint overshoot exponent of the tint-blind mock")
    command: Optional[str] = Field(None, description="Command template for an external estimator process")
    width: int = Field(128, ge=2, description="Declared output panorama width")
    height: int = Field(64, ge=1, description="Declared output panorama height")
    deterministic: bool = Field(True, description="False flags an external estimator whose output varies between runs")

    @field_validator("kind", mode="before")
    @classmethod
    def coerce_kind(cls, v):
        if isinstance(v, str):
            return EstimatorKind.coerce(v)
        return v

    @model_validator(mode="after")
    def check_command(self):
        if self.kind is EstimatorKind.EXTERNAL and not self.command:
            raise ValueError("an external estimator needs a command")
        return self

    @classmethod
    def parse(cls, text: str) -> "EstimatorSpec":
        """Parse CLI forms: oracle, equivariant, ambient, tintblind:beta=1, external:CMD."""
        head, _, rest = text.partition(":")
        if head.strip().lower() == "external":
            return cls(kind=EstimatorKind.EXTERNAL, command=rest.strip())
        kind, params = _split_params(text)
        fields = {"kind": kind}
        for key in ("beta", "width", "height"):
            if key in params:
                fields[key] = float(params[key]) if key == "beta" else int(params[key])
        return cls(**fields)

    def label(self) -> str:
        if self.kind is EstimatorKind.TINT_BLIND:
            return f"tintblind:beta={self.beta:g}"
        return self.kind.value


class SceneConfig(BaseModel):
    """Virtual evaluation scene: nine diffuse spheres on a shadow-catching plane, seen from above."""
    model_config = ConfigDict(frozen=True)

    sphere_radius: float = Field(0.5, gt=0.0, description="Sphere radius (world units)")
    grid_spacing: float = Field(1.5, gt=0.0, description="Distance between neighbouring sphere centers")
    plane_extent: float = Field(5.0, gt=0.0, description="Half-size of the square ground plane")
    camera_height: float = Field(10.0, gt=0.0, description="Height of the orthographic camera")
    camera_footprint: float = Field(2.5, gt=0.0, description="Half-size of the square area the camera sees")
    render_size: int = Field(64, ge=1, description="Render pixels per side")
    env_width: int = Field(128, ge=2, description="Environment map width")
    env_height: int = Field(64, ge=1, description="Environment map height")
    plane_albedo: float = Field(0.8, gt=0.0, le=1.0)
    sphere_albedo: float = Field(0.8, gt=0.0, le=1.0)

    @model_validator(mode="after")
    def check_layout(self):
        reach = self.grid_spacing + self.sphere_radius
        if reach > self.camera_footprint:
            raise ValueError(f"camera footprint {self.camera_footprint} does not cover the spheres (reach {reach})")
        if self.camera_footprint > self.plane_extent:
            raise ValueError("camera footprint extends past the ground plane")
        if self.camera_height <= 2.0 * self.sphere_radius:
            raise ValueError("camera must sit above the spheres")
        if 2.0 * self.sphere_radius > self.grid_spacing:
            raise ValueError("neighbouring spheres overlap")
        return self

    @property
    def sphere_centers(self) -> List[tuple[float, float, float]]:
        offsets = (-self.grid_spacing, 0.0, self.grid_spacing)
        return [(x, y, self.sphere_radius) for y in offsets for x in offsets]

    def config_hash(self) -> str:
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()


class MetricReport(BaseModel):
    """Color metrics for one estimated panorama against its ground truth."""
    delta_e: float = Field(..., ge=0.0, description="Mean CIE76 difference between tonemapped renders")
    rgb_angular_deg: float = Field(..., ge=0.0, le=180.0, description="Mean RGB angular error between linear renders")
    render_l1: float = Field(..., ge=0.0, description="Mean absolute difference between linear renders")
    ang_loss: float = Field(..., ge=0.0, le=2.0, description="Solid-angle weighted angular chromaticity loss")

    @field_validator("delta_e", "rgb_angular_deg", "render_l1", "ang_loss")
    @classmethod
    def finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("metrics must be finite")
        return v


METRIC_NAMES = ("delta_e", "rgb_angular_deg", "render_l1", "ang_loss")


class EvalRecord(BaseModel):
    """One (scene, white-balance setting, crop, strategy) measurement."""
    scene_id: str
    setting_name: str
    crop_index: int = Field(..., ge=0)
    strategy: StrategyId
    delta_e: Optional[float] = None
    rgb_angular_deg: Optional[float] = None
    render_l1: Optional[float] = None
    ang_loss: Optional[float] = None
    awb_distance_deg: Optional[float] = None
    fit_residual: Optional[float] = None
    fallback: bool = False
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    @property
    def sort_key(self) -> tuple:
        return (self.scene_id, self.setting_name, self.crop_index, list(StrategyId).index(self.strategy))


class MetricSummary(BaseModel):
    """Boxplot statistics of one metric over one strategy's records."""
    median: float
    q1: float
    q3: float
    whisker_lo: float
    whisker_hi: float
    mean: float
    count: int

    @model_validator(mode="after")
    def check_order(self):
        if not (self.q1 <= self.median <= self.q3):
            raise ValueError("quartiles out of order")
        return self


class CurveBin(BaseModel):
    """Mean metrics of one strategy within one AWB-distance bin."""
    bin_lo: float
    bin_hi: Optional[float] = Field(None, description="None for the trailing open bin")
    strategy: StrategyId
    count: int
    delta_e: Optional[float] = None
    rgb_angular_deg: Optional[float] = None
    render_l1: Optional[float] = None
    ang_loss: Optional[float] = None


class AggregateReport(BaseModel):
    strategies: Dict[StrategyId, Dict[str, MetricSummary]]
    curves: List[CurveBin]
    record_count: int
    failure_count: int = 0
    metadata: Dict[str, object] = Field(default_factory=dict)


class IssueCode(str, Enum):
    SCHEMA = "schema"
    MISSING_AWB = "missing_awb"
    DANGLING_PATH = "dangling_path"
    DUPLICATE_SETTING = "duplicate_setting"
    CROP_COUNT = "crop_count"
    UNREADABLE = "unreadable"


class ManifestIssue(BaseModel):
    code: IssueCode
    scene_id: Optional[str] = None
    detail: str


# White-balance presets offered by the capture camera.
CAMERA_WB_SETTINGS = (
    "auto",
    "daylight",
    "shade",
    "cloudy",
    "incandescent1",
    "incandescent2",
    "daylight_fluorescent",
    "neutral_white_fluorescent",
    "cool_white_fluorescent",
    "warm_white_fluorescent",
)


class WbSetting(BaseModel):
    """One white-balance rendition of a scene: its HDR panorama and its LDR crops."""
    name: str = Field(..., min_length=1, description="Camera preset or synthetic tint label")
    pano_path: str = Field(..., description="HDR panorama, relative to the manifest")
    crop_paths: List[str] = Field(..., description="LDR crops, relative to the manifest")
    crop_exposures: Optional[List[float]] = Field(
        None, description="Exposure factor each crop was tonemapped with; multiplies the panorama to form its target"
    )
    tint_matrix: Optional[List[float]] = Field(None, description="Synthetic data only: row-major RGB tint applied")
    illuminants: Optional[List[str]] = Field(None, description="Synthetic data only: (source, destination) of the tint")

    @field_validator("name")
    @classmethod
    def strip_name(cls, v: str) -> str:
        v = v.strip()
        if not v:
            raise ValueError("setting name cannot be empty")
        return v


class SceneEntry(BaseModel):
    scene_id: str = Field(..., min_length=1)
    settings: List[WbSetting]
    awb_setting_name: str = "auto"

    def setting(self, name: str) -> WbSetting:
        for s in self.settings:
            if s.name == name:
                return s
        raise KeyError(f"scene {self.scene_id} has no setting {name!r}")

    @property
    def awb_setting(self) -> WbSetting:
        return self.setting(self.awb_setting_name)


class ManifestMetadata(BaseModel):
    crop_fov_deg: float = 90.0
    crop_azimuths_deg: List[float] = Field(default_factory=lambda: [0.0, 120.0, 240.0])
    crop_size: int = 256
    median_mode: MedianMode = MedianMode.CHANNEL_MEAN
    tool: str = "chromalight"
    tool_version: str = ""
    seed: Optional[int] = None


class DatasetManifest(BaseModel):
    scenes: List[SceneEntry]
    metadata: ManifestMetadata = Field(default_factory=ManifestMetadata)
    root: Optional[str] = Field(None, exclude=True, description="Directory relative paths are resolved against")

    @property
    def setting_count(self) -> int:
        return sum(len(s.settings) for s in self.scenes)

    def resolve(self, relative: str) -> Path:
        return Path(self.root or ".") / relative
