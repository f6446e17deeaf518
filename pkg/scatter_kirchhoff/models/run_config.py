"""
Pydantic models for run configuration

One JSON document describes the scene, the incident wave, the targets and
the numerical settings of a CLI run.
"""

from enum import Enum
from typing import Literal, Optional

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from scatter_kirchhoff.geometry import Obstacle, Scene, validate_scene
from scatter_kirchhoff.ray_optics import BoundaryCondition, IncidentWave

Triple = tuple[float, float, float]


class RunMode(str, Enum):
    """What a run computes"""
    GOA = "goa"
    KIRCHHOFF = "kirchhoff"
    VALIDATE = "validate"
    COMPARE = "compare"


class ObstacleSpec(BaseModel):
    """One obstacle of the scene"""
    model_config = ConfigDict(extra="forbid")

    id: int = Field(..., ge=0, description="Obstacle id, unique in the scene")
    kind: Literal["sphere", "ellipsoid"] = Field(..., description="Obstacle shape")
    center: Triple = Field(..., description="Centre coordinates")
    radius: Optional[float] = Field(None, gt=0, description="Sphere radius")
    semi_axes: Optional[Triple] = Field(None, description="Ellipsoid semi-axes along x, y, z")

    @model_validator(mode="after")
    def check_shape(self) -> "ObstacleSpec":
        if self.kind == "sphere" and self.radius is None:
            raise ValueError("a sphere needs a radius")
        if self.kind == "ellipsoid":
            if self.semi_axes is None:
                raise ValueError("an ellipsoid needs semi_axes")
            if min(self.semi_axes) <= 0:
                raise ValueError("semi_axes must be positive")
        return self

    def to_obstacle(self) -> Obstacle:
        if self.kind == "sphere":
            assert self.radius is not None
            return Obstacle.sphere(self.id, self.center, self.radius)
        assert self.semi_axes is not None
        return Obstacle.ellipsoid(self.id, self.center, self.semi_axes)


class WaveSpec(BaseModel):
    """Incident plane wave directions and wavenumbers"""
    model_config = ConfigDict(extra="forbid")

    direction: Triple = Field(..., description="Propagation direction, normalized on use")
    k_values: list[float] = Field(..., min_length=1, description="Wavenumbers to sweep")

    @field_validator("direction")
    @classmethod
    def check_direction(cls, v: Triple) -> Triple:
        if sum(c * c for c in v) == 0.0:
            raise ValueError("direction must be non-zero")
        return v

    @field_validator("k_values")
    @classmethod
    def check_k(cls, v: list[float]) -> list[float]:
        if any(k <= 0 for k in v):
            raise ValueError("wavenumbers must be positive")
        return sorted(v)

    def waves(self) -> list[IncidentWave]:
        return [IncidentWave.from_direction(self.direction, k) for k in self.k_values]


class LineSpec(BaseModel):
    """Evenly spaced targets on a segment, end points included"""
    model_config = ConfigDict(extra="forbid")

    start: Triple
    end: Triple
    count: int = Field(..., ge=2)

    def points(self) -> NDArray[np.float64]:
        t = np.linspace(0.0, 1.0, self.count)[:, None]
        return (1.0 - t) * np.asarray(self.start) + t * np.asarray(self.end)


class PlaneSpec(BaseModel):
    """Targets origin + i u + j v for i < nu, j < nv"""
    model_config = ConfigDict(extra="forbid")

    origin: Triple
    u: Triple
    v: Triple
    nu: int = Field(..., ge=1)
    nv: int = Field(..., ge=1)

    def points(self) -> NDArray[np.float64]:
        i, j = np.meshgrid(np.arange(self.nu), np.arange(self.nv), indexing="ij")
        pts = (np.asarray(self.origin)
               + i.ravel()[:, None] * np.asarray(self.u)
               + j.ravel()[:, None] * np.asarray(self.v))
        return pts.astype(np.float64)


class TargetSpec(BaseModel):
    """Observation points given explicitly, on lines or on planes"""
    model_config = ConfigDict(extra="forbid")

    points: list[Triple] = Field(default_factory=list)
    lines: list[LineSpec] = Field(default_factory=list)
    planes: list[PlaneSpec] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_nonempty(self) -> "TargetSpec":
        if not (self.points or self.lines or self.planes):
            raise ValueError("at least one target is required")
        return self

    def expand(self) -> NDArray[np.float64]:
        """All targets in declaration order: points, then lines, then planes"""
        parts = [np.asarray(self.points, dtype=np.float64).reshape(-1, 3)]
        parts += [line.points() for line in self.lines]
        parts += [plane.points() for plane in self.planes]
        return np.vstack(parts)


class RunConfig(BaseModel):
    """Complete description of one CLI run"""
    model_config = ConfigDict(
        extra="forbid",
        json_schema_extra={
            "example": {
                "mode": "compare",
                "scene": [{"id": 0, "kind": "sphere", "center": [0, 0, 0], "radius": 1.0}],
                "wave": {"direction": [0, 0, 1], "k_values": [10, 20, 40]},
                "targets": {"points": [[0, 0, -3]]},
                "bc": ["dirichlet"],
                "iterations": 1,
                "ppw": 10,
                "max_bounces": 1,
            }
        },
    )

    mode: Optional[RunMode] = Field(None, description="Must match the CLI subcommand when given")
    scene: list[ObstacleSpec] = Field(..., min_length=1)
    wave: WaveSpec
    targets: TargetSpec
    bc: list[BoundaryCondition] = Field(default_factory=lambda: ["dirichlet", "neumann"], min_length=1)
    iterations: int = Field(default=2, ge=1, description="Kirchhoff iterations n")
    ppw: float = Field(default=10.0, gt=0, description="Grid points per wavelength")
    max_bounces: int = Field(default=2, ge=0, description="Reflections per geometrical-optics path")
    validation_tolerance: float = Field(default=1e-8, gt=0, description="Residual threshold for validate")
    ratio_window: tuple[float, float] = Field(default=(0.3, 0.7), description="Accepted err(2k)/err(k) range")

    @field_validator("scene")
    @classmethod
    def check_ids(cls, v: list[ObstacleSpec]) -> list[ObstacleSpec]:
        ids = [ob.id for ob in v]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate obstacle ids: {ids}")
        return v

    def build_scene(self) -> Scene:
        return validate_scene([ob.to_obstacle() for ob in self.scene])
